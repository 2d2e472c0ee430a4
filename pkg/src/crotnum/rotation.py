"""Real rotation numbers, locking intervals and hyperbolicity detection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize

from .circle import iterate_with_derivative
from .errors import EmptyLocking, NoConvergence, RootFindingFailure

ROOT_GRID = 8192


@dataclass(frozen=True)
class RotEnclosure:
    lo: float
    hi: float
    q_used: int
    exact: Fraction | None = None

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return float(self.exact) if self.exact is not None else 0.5 * (self.lo + self.hi)

    def __contains__(self, x):
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class LockingInterval:
    pq: Fraction
    t_minus: float
    t_plus: float
    clipped: tuple[bool, bool] = (False, False)

    @property
    def length(self):
        return self.t_plus - self.t_minus

    def to_record(self):
        return {"pq": str(self.pq), "t_minus": self.t_minus, "t_plus": self.t_plus, "clipped": list(self.clipped)}


def _grid(N):
    return np.arange(N) / N


def rot_enclosure(F, q, N=1024):
    """rot F in [min(F^q - id)/q, max(F^q - id)/q], grid extrema widened by a curvature slack.

    At an extremum g' = 0, so the nearest node is off by at most sup|g''| (h/2)^2 / 2;
    sup|g''| is the grid maximum of (F^q)'' with a 25% margin.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    x = _grid(N)
    y, d, s = _iterate_second(F, x, q)
    g = y - x
    slack = 1.25 * float(np.max(np.abs(s))) * (0.5 / N) ** 2 / 2
    return RotEnclosure(float(g.min() - slack) / q, float(g.max() + slack) / q, q)


def _iterate_second(F, x, q):
    """F^q, (F^q)' and (F^q)'' on real x by the chain rule."""
    d = np.ones_like(x)
    s = np.zeros_like(x)
    for _ in range(q):
        f1 = F.eval(x, 1, check=False)
        s = F.eval(x, 2, check=False) * d * d + f1 * s
        d = f1 * d
        x = F.eval(x, check=False)
    return x, d, s


GRID_Q = 256


def _orbit_point(F, x, q):
    """F^q(x) for one real x with plain floats (no array overhead)."""
    c0 = F.c0
    terms = [(2 * math.pi * k, a, b) for k, a, b in zip(range(1, F.K + 1), F.a.tolist(), F.b.tolist()) if a or b]
    cos, sin = math.cos, math.sin
    for _ in range(q):
        s = x + c0
        for w, a, b in terms:
            s += a * cos(w * x) + b * sin(w * x)
        x = s
    return x


def _side(F, p, q, x):
    """+1 if F^q - id - p > 0 on the grid, -1 if < 0, 0 if it changes sign (rot = p/q).

    Past GRID_Q only the point 0 is tested: a single sign already brackets rot, and
    locking intervals that narrow are not resolved by a coarse grid anyway.
    """
    if q > GRID_Q:
        g = _orbit_point(F, 0.0, q) - p
        return 1 if g > 0 else (-1 if g < 0 else 0)
    y, _ = iterate_with_derivative(F, x, q)
    g = y - x - p
    if g.min() > 0:
        return 1
    if g.max() < 0:
        return -1
    return 0


def rot(F, tol=1e-10, max_q=1_000_000, N=64, return_enclosure=False):
    """Rotation number by a galloping Stern-Brocot descent on sign tests of F^q - id - p.

    A sign change of F^q - id - p on the grid certifies rot F = p/q exactly.  When the
    denominator budget runs out the best bracket is returned.
    """
    enc = rot_enclosure(F, 1, N=256)
    if enc.width < tol:
        out = RotEnclosure(enc.lo, enc.hi, 1)
        return out if return_enclosure else out.mid
    x = _grid(N)
    base = math.floor(enc.lo)
    L = (base, 1)
    R = (base + 1, 1)
    top = math.floor(enc.hi) + 1
    # widen the right end if the first enclosure straddles several integers
    while R[0] < top and _side(F, R[0], 1, x) > 0:
        L, R = R, (R[0] + 1, 1)
    for pp in (L[0], R[0]):
        if _side(F, pp, 1, x) == 0:
            out = RotEnclosure(float(pp), float(pp), 1, Fraction(pp))
            return out if return_enclosure else out.mid

    def cand(j, toward_right):
        if toward_right:
            return (L[0] + j * R[0], L[1] + j * R[1])
        return (j * L[0] + R[0], j * L[1] + R[1])

    while R[0] / R[1] - L[0] / L[1] > tol:
        p, q = cand(1, True)
        if q > max_q:
            break
        s = _side(F, p, q, x)
        if s == 0:
            out = RotEnclosure(p / q, p / q, q, Fraction(p, q))
            return out if return_enclosure else out.mid
        right = s > 0
        want = 1 if right else -1
        # gallop: largest j with the same verdict
        good, j = 1, 2
        hit = None
        while True:
            pj, qj = cand(j, right)
            if qj > max_q:
                break
            sj = _side(F, pj, qj, x)
            if sj == 0:
                hit = (pj, qj)
                break
            if sj != want:
                break
            good, j = j, 2 * j
        if hit is None and j > good + 1:
            lo_j, hi_j = good, j
            while hi_j - lo_j > 1:
                mid = (lo_j + hi_j) // 2
                pj, qj = cand(mid, right)
                if qj > max_q:
                    hi_j = mid
                    continue
                sj = _side(F, pj, qj, x)
                if sj == 0:
                    hit = (pj, qj)
                    break
                if sj == want:
                    lo_j = mid
                else:
                    hi_j = mid
            good = lo_j
        if hit is not None:
            out = RotEnclosure(hit[0] / hit[1], hit[0] / hit[1], hit[1], Fraction(*hit))
            return out if return_enclosure else out.mid
        new = cand(good, right)
        nxt = cand(good + 1, right)
        if right:
            L, R = new, nxt
        else:
            L, R = nxt, new
    out = RotEnclosure(L[0] / L[1], R[0] / R[1], max(L[1], R[1]))
    return out if return_enclosure else out.mid


def _extremum(F, p, q, t_shift, kind, N):
    """max (kind=+1) or min (kind=-1) over x of F^q(x) - x - p, refined by Brent."""
    G = F.shifted(t_shift) if t_shift else F
    x = _grid(N)
    y, _ = iterate_with_derivative(G, x, q)
    g = kind * (y - x - p)
    i = int(np.argmax(g))

    def neg(u):
        yy, _ = iterate_with_derivative(G, np.array([u]), q)
        return -kind * float(yy[0] - u - p)

    h = 1.0 / N
    res = optimize.minimize_scalar(neg, bounds=(x[i] - h, x[i] + h), method="bounded", options={"xatol": 1e-13})
    return kind * max(float(g[i]), -float(res.fun))


def locking_interval(fam, pq, tol=1e-13, N=None):
    """I_{p/q} = [t_minus, t_plus] of the family f_t = base + t."""
    pq = Fraction(pq)
    p, q = pq.numerator, pq.denominator
    N = N or max(256, 64 * q)
    t0, t1 = fam.t_range
    base = fam.base

    def upper(t):
        return _extremum(base, p, q, t, +1, N)

    def lower(t):
        return _extremum(base, p, q, t, -1, N)

    if upper(t1) < 0 or lower(t0) > 0:
        raise EmptyLocking(f"rot = {pq} is not attained on t in [{t0}, {t1}]")
    clip_lo = upper(t0) >= 0
    clip_hi = lower(t1) <= 0
    t_minus = t0 if clip_lo else optimize.brentq(upper, t0, t1, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    t_plus = t1 if clip_hi else optimize.brentq(lower, t0, t1, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return LockingInterval(pq, float(t_minus), float(t_plus), (clip_lo, clip_hi))


@dataclass(frozen=True)
class PeriodicPoint:
    x: float
    multiplier: float


def periodic_points(F, pq, N=ROOT_GRID, touch_tol=1e-11):
    """Roots of F^q - id - p on [0, 1) with their multipliers.

    Returns (points, touching) where ``touching`` lists grid minima of |g| that
    reach zero without a sign change (parabolic points).
    """
    pq = Fraction(pq)
    p, q = pq.numerator, pq.denominator
    x = _grid(N)
    y, _ = iterate_with_derivative(F, x, q)
    g = y - x - p
    if float(np.max(np.abs(g))) < touch_tol:
        # F^q - p is the identity up to roundoff: every point is parabolic
        _, d = iterate_with_derivative(F, np.array([0.0]), q)
        return [], [PeriodicPoint(0.0, float(d[0]))]

    def fun(u):
        yy, _ = iterate_with_derivative(F, np.array([u]), q)
        return float(yy[0] - u - p)

    gg = np.append(g, fun(1.0))
    xx = np.append(x, 1.0)
    idx = np.nonzero(np.sign(gg[:-1]) * np.sign(gg[1:]) <= 0)[0]
    roots = []
    for i in idx:
        if gg[i] == 0:
            r = xx[i]
        elif gg[i + 1] == 0:
            r = xx[i + 1]
        else:
            r = optimize.brentq(fun, xx[i], xx[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        roots.append(r % 1.0)
    # dedupe cyclically: a root at the seam can be found from both sides
    roots.sort()
    keep = []
    for r in roots:
        if not keep or r - keep[-1] > 1e-12:
            keep.append(r)
    if len(keep) > 1 and keep[0] + 1.0 - keep[-1] <= 1e-12:
        keep.pop()
    roots = keep
    pts = []
    if roots:
        _, d = iterate_with_derivative(F, np.array(roots), q)
        pts = [PeriodicPoint(float(r), float(m)) for r, m in zip(roots, d)]
    touching = []
    if not pts:
        i = int(np.argmin(np.abs(g)))
        if abs(g[i]) < max(touch_tol, 1e-3 / N):
            res = optimize.minimize_scalar(
                lambda u: abs(fun(u)), bounds=(x[i] - 1 / N, x[i] + 1 / N), method="bounded",
                options={"xatol": 1e-14},
            )
            if res.fun < touch_tol:
                _, d = iterate_with_derivative(F, np.array([res.x]), q)
                touching.append(PeriodicPoint(float(res.x % 1.0), float(d[0])))
    return pts, touching


def is_hyperbolic(F, pq, margin=1e-6):
    """(hyperbolic?, witnesses); witnesses are the periodic points with multipliers."""
    pts, touching = periodic_points(F, pq)
    if not pts and not touching:
        raise NoConvergence(f"rot F != {pq}: F^q - id - p has no zero")
    if touching:
        return False, touching
    if len(pts) % 2:
        raise RootFindingFailure(f"odd number ({len(pts)}) of sign changes of F^q - id - p")
    ok = all(abs(pt.multiplier - 1.0) > margin for pt in pts)
    return ok, pts
