"""Periodic orbits, Koenigs charts and suitable curves of hyperbolic maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import interpolate

from .circle import FourierLift, invert_complex, iterate_with_derivative
from .errors import (
    AlternationViolation,
    CurveInvalid,
    NoConvergence,
    NotHyperbolic,
    NumericalError,
    SlowConvergence,
)
from .rotation import ROOT_GRID, is_hyperbolic, periodic_points
from .torus import BeltramiGrid, TrigCurve, smooth_step, solve_torus

KOENIGS_DEGREE = 12
CHART_TOL = 1e-8
CURVE_GRID = 1024
PARABOLIC_LOG = 1e-6  # |log lam| below this is treated as near-parabolic


# ---------------------------------------------------------------- periodic orbits


@dataclass(frozen=True)
class PeriodicOrbit:
    points: tuple[float, ...]  # x, f(x), ..., f^{q-1}(x) reduced mod 1
    multiplier: float

    @property
    def kind(self):
        return "repelling" if self.multiplier > 1 else "attracting"


@dataclass(frozen=True)
class PeriodicOrbitSet:
    q: int
    p: int
    orbits: tuple[PeriodicOrbit, ...]
    lifts: tuple[float, ...]  # all orbit points in [0, 1), sorted
    kinds: tuple[str, ...]  # kind of each lift

    @property
    def pq(self):
        return Fraction(self.p, self.q)

    def orbit_of(self, i):
        """(orbit index, position along the orbit) of lift i."""
        x = self.lifts[i]
        for j, orb in enumerate(self.orbits):
            for k, y in enumerate(orb.points):
                if abs(y - x) < 1e-12:
                    return j, k
        raise KeyError(i)


def _group(F, pts, q):
    xs = np.array([pt.x for pt in pts])
    free = set(range(len(xs)))
    orbits = []
    while free:
        i = min(free)
        seq = [xs[i]]
        z = xs[i]
        for _ in range(q - 1):
            z = float(F.eval(z)) % 1.0
            j = int(np.argmin(np.abs((xs - z + 0.5) % 1.0 - 0.5)))
            if abs((xs[j] - z + 0.5) % 1.0 - 0.5) > 1e-9:
                raise AlternationViolation(f"orbit of {xs[i]:.12f} leaves the root set")
            seq.append(xs[j])
        idx = [int(np.argmin(np.abs(xs - s))) for s in seq]
        if len(set(idx)) != q or not set(idx) <= free:
            raise AlternationViolation("orbit grouping is inconsistent")
        free -= set(idx)
        mult = [pts[k].multiplier for k in idx]
        if max(mult) - min(mult) > 1e-9 * max(1.0, max(mult)):
            raise AlternationViolation(f"multipliers along one orbit differ: {mult}")
        orbits.append(PeriodicOrbit(tuple(float(s) for s in seq), float(np.mean(mult))))
    return orbits


def periodic_orbits(F, pq, N=ROOT_GRID):
    """All periodic orbits of rotation number p/q, grouped by iterating f, with alternation checked."""
    pq = Fraction(pq)
    ok, _ = is_hyperbolic(F, pq)
    if not ok:
        raise NotHyperbolic(f"f is not hyperbolic with rotation number {pq}")
    for grid in (N, 4 * N):
        pts, _ = periodic_points(F, pq, N=grid)
        try:
            kinds = ["repelling" if pt.multiplier > 1 else "attracting" for pt in pts]
            if len(pts) % 2 or any(kinds[i] == kinds[(i + 1) % len(kinds)] for i in range(len(kinds))):
                raise AlternationViolation(f"kinds along the circle do not alternate: {kinds}")
            orbits = _group(F, pts, pq.denominator)
            break
        except AlternationViolation:
            if grid != N:
                raise
    return PeriodicOrbitSet(
        pq.denominator, pq.numerator, tuple(orbits), tuple(pt.x for pt in pts), tuple(kinds)
    )


# ---------------------------------------------------------------- truncated power series


def taylor(fun, a, degree, rho):
    """Taylor coefficients c_0..c_degree of fun at a from samples on |z - a| = rho."""
    M = 4 * (degree + 1)
    th = 2 * math.pi * np.arange(M) / M
    vals = fun(a + rho * np.exp(1j * th))
    c = np.fft.fft(vals) / M
    return c[: degree + 1] / rho ** np.arange(degree + 1)


def _mul(s, t):
    return np.convolve(s, t)[: len(s)]


def compose(outer, inner):
    """outer(inner(z)) as series, inner(0) = 0."""
    out = np.zeros(len(inner), dtype=complex)
    power = np.zeros(len(inner), dtype=complex)
    power[0] = 1
    for c in outer[: len(inner)]:
        out = out + c * power
        power = _mul(power, inner)
    return out


def revert(s):
    """Compositional inverse of s with s(0) = 0, s'(0) != 0 (Newton-free order recursion)."""
    D = len(s) - 1
    r = np.zeros(D + 1, dtype=complex)
    r[1] = 1 / s[1]
    for k in range(2, D + 1):
        c = compose(s, r)
        r[k] = -c[k] / s[1]
    return r


def polyval(c, z):
    return np.polynomial.polynomial.polyval(z, c)


# ---------------------------------------------------------------- Koenigs charts


@dataclass(eq=False)
class KoenigsChart:
    """psi with psi(a) = 0, psi'(a) = 1 and psi(g(z)) = lam psi(z), g = F^q - p.

    ``series`` are the Taylor coefficients of psi in z - a (index 0 unused); beyond
    ``radius`` psi is continued dynamically through g or its inverse branch at a.
    """

    F: FourierLift
    q: int
    p: int
    anchor: float
    lam: float
    series: np.ndarray
    radius: float
    dseries: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.dseries = np.polynomial.polynomial.polyder(self.series)

    @property
    def kind(self):
        return "repelling" if self.lam > 1 else "attracting"

    def g(self, z):
        z, d = iterate_with_derivative(self.F, np.asarray(z, dtype=complex), self.q)
        return z - self.p, d

    def g_inv(self, w):
        z = np.asarray(w, dtype=complex) + self.p
        d = np.ones_like(z)
        for _ in range(self.q):
            z = invert_complex(self.F, z)
            d = d / self.F.eval(z, 1, check=False)
        return z, d

    def local(self, z):
        return polyval(self.series, np.asarray(z) - self.anchor)

    def eval(self, z, derivative=False, maxsteps=4000):
        """psi(z) (and psi'(z)) with dynamic continuation into the basin."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
        scale = np.ones_like(z)
        dz = np.ones_like(z)
        r = 0.5 * self.radius
        step = self.g if self.lam < 1 else self.g_inv
        fac = 1.0 / self.lam if self.lam < 1 else self.lam
        out = np.abs(z - self.anchor) > r
        n = 0
        while np.any(out):
            n += 1
            if n > maxsteps:
                raise NoConvergence("point outside the chart's basin")
            zi, di = step(z[out])
            z[out] = zi
            dz[out] = dz[out] * di
            scale[out] = scale[out] * fac
            out = np.abs(z - self.anchor) > r
        w = scale * polyval(self.series, z - self.anchor)
        if derivative:
            return w, scale * polyval(self.dseries, z - self.anchor) * dz
        return w

    def inverse(self, w, guess, tol=1e-13, maxiter=60):
        """z with psi(z) = w by Newton from ``guess``."""
        z = np.asarray(guess, dtype=complex).copy()
        w = np.asarray(w, dtype=complex)
        for _ in range(maxiter):
            val, d = self.eval(z, derivative=True)
            dz = (val - w) / d
            z = z - dz
            if np.all(np.abs(dz) < tol):
                return z
        raise NoConvergence("chart inversion did not converge")

    def residual(self, r, M=64):
        """max |psi(g(z)) - lam psi(z)| on |z - a| = r, using the local series only."""
        z = self.anchor + r * np.exp(2j * math.pi * np.arange(M) / M)
        gz, _ = self.g(z)
        return float(np.max(np.abs(self.local(gz) - self.lam * self.local(z))))


def _koenigs_series(G, lam, degree):
    """b with b(G(z)) = lam b(z), b = z + ..., G = lam z + ... as coefficient arrays."""
    b = np.zeros(degree + 1, dtype=complex)
    b[1] = 1
    powers = [None, G.copy()]
    for j in range(2, degree + 1):
        powers.append(_mul(powers[-1], G))
    for k in range(2, degree + 1):
        s = sum(b[j] * powers[j][k] for j in range(1, k))
        b[k] = -s / (lam**k - lam)
    return b


def _certify(chart, rho):
    best = 0.0
    for r in rho * np.geomspace(1.0, 1e-3, 31):
        if chart.residual(r) < CHART_TOL:
            best = r
            break
    if best == 0.0:
        raise NumericalError(f"Koenigs series fails the functional equation at every radius near {chart.anchor}")
    return best


def koenigs(F, orbit, pq, degree=KOENIGS_DEGREE, rho=None):
    """Charts at every point of ``orbit``: the first by the Koenigs recursion, the rest pushed forward by f."""
    pq = Fraction(pq)
    p, q = pq.numerator, pq.denominator
    lam = orbit.multiplier
    if abs(math.log(lam)) < PARABOLIC_LOG:
        raise SlowConvergence(f"multiplier {lam} too close to 1")
    a = orbit.points[0]
    if rho is None:
        rho = min(0.05, 0.5 * F.h)

    def g(z):
        return iterate_with_derivative(F, z, q, cap=math.inf)[0] - p

    G = taylor(g, a, degree, rho)
    G[0] = 0
    G[1] = lam
    b = _koenigs_series(G, lam, degree)
    b = b.real.astype(complex)
    charts = []
    chart = KoenigsChart(F, q, p, a, lam, b, rho)
    chart.radius = _certify(chart, rho)
    charts.append(chart)
    for k in range(1, q):
        # psi_{f(a)}(w) = f'(a) psi_a(f^{-1}(w))
        prev = charts[-1]
        a_prev = prev.anchor
        Fa = float(F.eval(a_prev))
        shift = math.floor(Fa)
        a_new = Fa - shift
        f = taylor(lambda z: F.eval(z, check=False) - Fa, a_prev, degree, rho)
        f[0] = 0
        finv = revert(f)
        s = float(F.eval(a_prev, 1)) * compose(prev.series, finv)
        s = s.real.astype(complex)
        new = KoenigsChart(F, q, p, a_new, lam, s, rho)
        new.radius = _certify(new, rho)
        charts.append(new)
    return charts


# ---------------------------------------------------------------- suitable curves


@dataclass(frozen=True)
class Arc:
    chart: int  # index into SuitableCurve.charts (lift order)
    center: complex  # in chart coordinates
    radius: float
    span: tuple[float, float]  # angles on the circle, counter-clockwise order of traversal endpoints


@dataclass(eq=False)
class SuitableCurve:
    pq: Fraction
    height: float
    polarity: str  # "suitable" | "anti-suitable"
    kind: str  # "smooth" | "arcs"
    trig: TrigCurve
    polyline: np.ndarray = field(repr=False)
    arcs: tuple[Arc, ...] = ()
    charts: tuple = field(default=(), repr=False)
    orbits: PeriodicOrbitSet | None = field(default=None, repr=False)

    def eval(self, x):
        return self.trig.eval(x)

    def conj(self):
        flip = {"suitable": "anti-suitable", "anti-suitable": "suitable"}[self.polarity]
        arcs = tuple(Arc(a.chart, a.center.conjugate(), a.radius, (-a.span[1], -a.span[0])) for a in self.arcs)
        return SuitableCurve(
            self.pq, self.height, flip, self.kind, self.trig.conj(), np.conj(self.polyline), arcs, self.charts, self.orbits
        )


def _glue(F, pq):
    p, q = pq.numerator, pq.denominator

    def H(z):
        return iterate_with_derivative(F, z, q)[0] - p

    return H


def _smooth_curve(F, pq, height, M=CURVE_GRID):
    """Gamma = x + i height v'/max|v'|, v = F^q - id - p."""
    q, p = pq.denominator, pq.numerator
    x = np.arange(M) / M
    _, d = iterate_with_derivative(F, x, q)
    vp = d - 1.0
    beta = vp / np.max(np.abs(vp))
    c = np.fft.fft(beta) / M
    K = M // 2 - 1
    mag = np.abs(c[: K + 1])
    keep = np.nonzero(mag > 1e-16 * mag.max())[0]
    K = max(1, int(keep[-1])) if keep.size else 1
    k = np.arange(-K, K + 1)
    return TrigCurve(1j * height * c[k % M])


def _arc_curve(F, orbits, charts, height, pts_per_arc=96):
    """Round arcs in chart coordinates joined C^1 at the midpoints between neighbouring lifts.

    Arc i is the circle through psi_i of its two joints, on the side of the lift given by
    its kind; all arcs meet R at one common angle, fixed so the largest chart sagitta
    equals ``height``.
    """
    lifts = np.array(orbits.lifts)
    n = len(lifts)
    ext = np.concatenate([lifts - 1, lifts, lifts + 1])
    joints = 0.5 * (ext[n - 1 : 2 * n] + ext[n : 2 * n + 1])
    chord = []
    for i in range(n):
        try:
            w = charts[i].eval(np.array([joints[i], joints[i + 1]], dtype=complex))
        except NumericalError as exc:
            raise CurveInvalid("chart-coverage", str(exc)) from exc
        chord.append((float(w[0].real), float(w[1].real)))
    half = max((wr - wl) / 2 for wl, wr in chord)
    if not height < half:
        raise CurveInvalid("chart-coverage", f"height {height} is not below the largest chart half-chord {half:.3g}")
    theta = 2 * math.atan(height / half)
    arcs, pts = [], []
    u = np.linspace(0, 1, pts_per_arc + 1)[:-1]
    for i in range(n):
        wl, wr = chord[i]
        up = orbits.kinds[i] == "repelling"
        hc = 0.5 * (wr - wl)
        R = hc / math.sin(theta)
        off = hc / math.tan(theta)
        center = complex(0.5 * (wl + wr), -off if up else off)
        if up:
            span = (math.pi / 2 + theta, math.pi / 2 - theta)
        else:
            span = (-math.pi / 2 - theta, -math.pi / 2 + theta)
        arcs.append(Arc(i, center, R, span))
        w = center + R * np.exp(1j * (span[0] + (span[1] - span[0]) * u))
        scale = (joints[i + 1] - joints[i]) / (wr - wl)
        guess = joints[i] + (w.real - wl) * scale + 1j * w.imag * scale
        try:
            z = charts[i].inverse(w, guess)
        except NumericalError as exc:
            raise CurveInvalid("chart-coverage", f"arc {i}: {exc}") from exc
        pts.append(z)
    return tuple(arcs), np.concatenate(pts)


def _trig_from_polyline(poly, M=CURVE_GRID):
    xr = poly.real
    if np.any(np.diff(xr) <= 0):
        raise CurveInvalid("chart-coverage", "arcs are not a graph over the real axis")
    xx = np.concatenate([xr, [xr[0] + 1.0]])
    yy = np.concatenate([poly.imag, [poly.imag[0]]])
    spl = interpolate.CubicSpline(xx, yy, bc_type="periodic")
    x = xr[0] + np.arange(M) / M
    y = spl(x)
    return TrigCurve.from_samples(x, x + 1j * y)


def build_suitable(F, pq, height, polarity="suitable", kind="smooth", validate=True):
    """Suitable (or anti-suitable) curve of F for rotation number p/q at the given height.

    ``kind="smooth"`` is the graph x + i height v'(x)/max|v'| with v = F^q - id - p;
    ``kind="arcs"`` joins round arcs in the Koenigs charts of all lifted periodic points.
    Anti-suitable curves are complex conjugates of suitable ones.
    """
    pq = Fraction(pq)
    if polarity not in ("suitable", "anti-suitable"):
        raise ValueError("polarity must be 'suitable' or 'anti-suitable'")
    orbits = periodic_orbits(F, pq)
    charts = ()
    arcs = ()
    if kind == "smooth":
        trig = _smooth_curve(F, pq, height)
        x = np.arange(CURVE_GRID) / CURVE_GRID
        poly = trig.eval(x)[0]
    elif kind == "arcs":
        by_lift = []
        for orb in orbits.orbits:
            by_lift.extend(koenigs(F, orb, pq))
        order = {round(c.anchor, 12): c for c in by_lift}
        charts = tuple(order[round(x, 12)] for x in orbits.lifts)
        arcs, poly = _arc_curve(F, orbits, charts, height)
        trig = _trig_from_polyline(poly)
    else:
        raise ValueError("kind must be 'smooth' or 'arcs'")
    curve = SuitableCurve(pq, float(height), "suitable", kind, trig, poly, arcs, charts, orbits)
    if validate:
        validate_curve(F, curve)
    if polarity == "anti-suitable":
        curve = curve.conj()
        if validate:
            validate_curve(F, curve)
    return curve


def validate_curve(F, curve, M=2048):
    """Check the Definition clauses; returns the margins, raises CurveInvalid on the first failure."""
    pq = Fraction(curve.pq)
    sign = 1.0 if curve.polarity == "suitable" else -1.0
    orbits = curve.orbits or periodic_orbits(F, pq)
    margins = {}
    # above repelling, below attracting (reversed for anti-suitable)
    x = np.array(orbits.lifts)
    g, _ = curve.trig.eval(x)
    want = np.array([1.0 if k == "repelling" else -1.0 for k in orbits.kinds]) * sign
    m = float(np.min(want * g.imag))
    margins["above-below"] = m
    if not m > 0:
        raise CurveInvalid("above-below", f"margin {m:.3g}")
    # F^q(gamma) - p above gamma (below for anti-suitable)
    H = _glue(F, pq)
    xs = np.arange(M) / M
    gs, _ = curve.trig.eval(xs)
    try:
        w = H(gs)
    except NumericalError as exc:
        raise CurveInvalid("chart-coverage", str(exc)) from exc
    # height of gamma over Re w, by Newton on Re Gamma(s) = Re w
    s = w.real.copy()
    for _ in range(50):
        val, d = curve.trig.eval(s)
        ds = (val.real - w.real) / d.real
        s -= ds
        if np.max(np.abs(ds)) < 1e-14:
            break
    val, _ = curve.trig.eval(s)
    gap = sign * (w.imag - val.imag)
    m = float(np.min(gap))
    margins["image-position"] = m
    if not m > 0:
        raise CurveInvalid("image-position", f"margin {m:.3g} at x = {xs[int(np.argmin(gap))]:.4f}")
    # arcs are round circles in their charts
    if curve.kind == "arcs":
        k = len(curve.polyline) // max(1, len(curve.arcs))
        worst = 0.0
        for i, arc in enumerate(curve.arcs):
            chart = curve.charts[arc.chart]
            z = curve.polyline[i * k : (i + 1) * k]
            if curve.polarity == "anti-suitable":
                wv = np.conj(chart.eval(np.conj(z)))
            else:
                wv = chart.eval(z)
            worst = max(worst, float(np.max(np.abs(np.abs(wv - arc.center) - arc.radius))))
        margins["arc"] = worst
        if worst > 1e-8:
            raise CurveInvalid("arc", f"chart-circle deviation {worst:.3g}")
    return margins


# ---------------------------------------------------------------- band-chain modulus
#
# In W = log psi / log lam each chart turns the half-disc on the side of its point
# that a suitable curve sweeps (above repelling, below attracting points) into a
# flat band of height pi/|log lam|, with g acting as W -> W + 1.  Consecutive bands
# meet along the real segment between their points, glued by the real-analytic
# circle map T with W_next = T(W) + i H_next.  The torus is the cyclic stack of
# bands; only the non-rigid part of each T needs a Beltrami correction.

BAND_SAMPLES = 64
BAND_MAX_SAMPLES = 1024
BAND_DEPTH = 0.5  # blend depth of mode k is min(BAND_FILL * H, BAND_DEPTH / |k|)
BAND_FILL = 0.8
BAND_RIGID_TOL = 1e-7  # below this nonlinearity the correction is O(|p|^2) and skipped
BAND_MAX_POINTS = 1 << 18


def _local_inverse(chart, w, tol=1e-15, maxiter=50):
    """zeta with series(zeta) = w near 0 (inside the certified disc)."""
    z = np.array(w, dtype=complex)
    for _ in range(maxiter):
        dz = (polyval(chart.series, z) - w) / polyval(chart.dseries, z)
        z = z - dz
        if np.all(np.abs(dz) <= tol * np.maximum(1.0, np.abs(z))):
            return z
    raise NoConvergence("local chart inversion did not converge")


def _forward_into(F, q, p, z, target, radius, maxsteps=200_000):
    """Iterate g = F^q - p on real z until each point is within ``radius`` of ``target``."""
    terms = [(2 * math.pi * k, a, b) for k, a, b in zip(range(1, F.K + 1), F.a, F.b) if a or b]

    def f(x):
        y = x + F.c0
        for w, a, b in terms:
            y = y + (a * np.cos(w * x) if a else 0.0) + (b * np.sin(w * x) if b else 0.0)
        return y

    z = np.array(z, dtype=float)
    n = np.zeros(z.shape, dtype=int)
    out = np.abs(z - target) >= radius
    steps = 0
    while np.any(out):
        steps += 1
        if steps > maxsteps:
            raise NoConvergence("orbit did not reach the neighbouring chart")
        zi = z[out]
        for _ in range(q):
            zi = f(zi)
        z[out] = zi - p
        n[out] += 1
        out = np.abs(z - target) >= radius
    return z, n


ABEL_STEPS = 4000  # F-steps per seam sample above which the Abel transfer replaces iteration
ABEL_NODES = 16


def _generator(F, q, p, x):
    """Flow generator X of g = F^q - p (g = exp X) on real x: orders 2 and 3 of the
    iterative logarithm X = v - v v'/2 + v v'^2/3 + v^2 v''/12, v = g - id."""
    y = np.asarray(x, dtype=float)
    d = np.ones_like(y)
    dd = np.zeros_like(y)
    for _ in range(q):
        f1 = F.eval(y, 1, check=False)
        dd = F.eval(y, 2, check=False) * d * d + f1 * dd
        d = f1 * d
        y = F.eval(y, check=False)
    v = y - p - x
    v1 = d - 1.0
    X2 = v - 0.5 * v * v1
    return X2 + v * v1 * v1 / 3.0 + v * v * dd / 12.0, X2


def _abel_integral(F, q, p, a, b, h):
    """int_a^b dx / X (orders 3 and 2) by composite Gauss-Legendre with panels of width <= h.

    ``a`` may be an array; all integrals share the endpoint ``b``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    t, w = np.polynomial.legendre.leggauss(ABEL_NODES)
    # main leg from a[0] to b, then short legs from a[k] to a[0]
    n = max(1, math.ceil(abs(b - a[0]) / h))
    edges = np.linspace(a[0], b, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    xs = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    X3, X2 = _generator(F, q, p, xs)
    main3, main2 = float(np.sum(ws / X3)), float(np.sum(ws / X2))
    mid = 0.5 * (a + a[0])
    half = 0.5 * (a[0] - a)
    xs = mid[:, None] + half[:, None] * t[None, :]
    X3, X2 = _generator(F, q, p, xs)
    leg3 = np.sum(half[:, None] * w[None, :] / X3, axis=1)
    leg2 = np.sum(half[:, None] * w[None, :] / X2, axis=1)
    return main3 + leg3, main2 + leg2


@dataclass(frozen=True)
class Seam:
    """T(s) = s + shift + sum_k coeffs[k] e(k s) between two consecutive bands."""

    shift: float
    coeffs: np.ndarray  # fft ordering, mean-free
    tail: float
    shift_err: float = 0.0  # truncation bound of the Abel transfer

    @property
    def nonlinearity(self):
        return float(np.sum(np.abs(self.coeffs)))

    def modes(self):
        M = len(self.coeffs)
        return np.fft.fftfreq(M, 1.0 / M)


def _seam_samples(F, pq, left, right, offset, M):
    """(s, t) with s = Re W_left, t = Re W_right at M points of one fundamental domain."""
    p, q = pq.numerator, pq.denominator
    rep, att = (left, right) if left.lam > 1 else (right, left)
    rep_at = rep.anchor + (offset if rep is right else 0.0)
    att_at = att.anchor + (offset if att is right else 0.0)
    side = 1.0 if rep is left else -1.0
    r0 = 0.5 * rep.radius
    u = np.arange(M) / M
    z0 = rep_at + _local_inverse(rep, side * r0 * rep.lam**u).real
    w_rep = math.log(r0) / math.log(rep.lam) + u
    r1 = 0.5 * att.radius
    x_ref = att_at + _local_inverse(att, np.array([-side * r1])).real[0]
    # W_rep grows by one per step of g: the crossing takes about this many steps
    approx, _ = _abel_integral(F, q, p, z0[:1], x_ref, 0.5 * min(r0, r1))
    if approx[0] * q <= ABEL_STEPS:
        z, n = _forward_into(F, q, p, z0, att_at, r1)
        w_att = np.log(np.abs(polyval(att.series, z - att_at).real)) / math.log(att.lam) - n
        err = 0.0
    else:
        # g is close to the identity: transfer W along the flow of its generator
        i3, i2 = _abel_integral(F, q, p, z0, x_ref, 0.5 * min(r0, r1))
        w_att = math.log(r1) / math.log(att.lam) - i3
        err = float(np.max(np.abs(i3 - i2)))
    pair = (w_rep, w_att) if rep is left else (w_att, w_rep)
    return pair[0], pair[1], err


def _periodic_fit(x, y, M):
    """Fourier coefficients (fft order) of the 1-periodic y - mean on the uniform grid x."""
    c = float(np.mean(y))
    k = np.fft.fftfreq(M, 1.0 / M)
    return c, np.fft.fft(y - c) / M * np.exp(-2j * math.pi * k * x[0])


def _fourier_eval(coeffs, s, derivative=False):
    M = len(coeffs)
    k = np.fft.fftfreq(M, 1.0 / M)
    e = np.exp(2j * math.pi * np.multiply.outer(s, k))
    val = (e @ coeffs).real
    if derivative:
        return val, (e @ (2j * math.pi * k * coeffs)).real
    return val


def _seam(F, pq, left, right, offset, M):
    s, t, err = _seam_samples(F, pq, left, right, offset, M)
    if left.lam > 1:
        c, coeffs = _periodic_fit(s, t - s, M)
    else:
        # samples are uniform in t: fit s(t) - t, then solve s(t) = s_k on a uniform s grid
        c_inv, inv = _periodic_fit(t, s - t, M)
        sk = s[0] + np.arange(M) / M
        tk = sk - c_inv
        for _ in range(60):
            val, der = _fourier_eval(inv, tk, derivative=True)
            dt = (tk + c_inv + val - sk) / (1.0 + der)
            tk = tk - dt
            if np.max(np.abs(dt)) < 1e-15 * max(1.0, float(np.max(np.abs(tk)))):
                break
        c, coeffs = _periodic_fit(sk, tk - sk, M)
    mag = np.abs(coeffs)
    k = np.abs(np.fft.fftfreq(M, 1.0 / M))
    tail = float(mag[k > M / 4].max()) if M >= 8 else 0.0
    coeffs = np.where(k > M / 4, 0.0, coeffs)
    return Seam(c, coeffs, tail, err)


@dataclass(eq=False)
class BandChain:
    """Bands of heights H_j stacked downward, glued by the seams below each band."""

    pq: Fraction
    heights: np.ndarray
    seams: tuple[Seam, ...]
    charts: tuple[KoenigsChart, ...]

    @property
    def period(self):
        """Reference period of the loop around the circle; g has period 1."""
        return complex(-1j * float(np.sum(self.heights)) - sum(s.shift for s in self.seams))

    @property
    def nonlinearity(self):
        return max(s.nonlinearity for s in self.seams)

    def depths(self, j, k):
        return np.minimum(BAND_FILL * self.heights[j], BAND_DEPTH / np.maximum(np.abs(k), 1))

    def grid_shape(self):
        kmax = 1
        dmin = math.inf
        for j, seam in enumerate(self.seams):
            k = seam.modes()[np.abs(seam.coeffs) > 0]
            if len(k):
                kmax = max(kmax, int(np.max(np.abs(k))))
                dmin = min(dmin, float(np.min(self.depths((j + 1) % len(self.seams), k))))
        Nx = max(16, 1 << math.ceil(math.log2(4 * kmax)))
        ratio = float(np.sum(self.heights)) / dmin if math.isfinite(dmin) else 1.0
        Ny = max(32, 1 << math.ceil(math.log2(12 * ratio)))
        return Nx, Ny

    def beltrami(self, Nx, Ny):
        """mu of the band-wise straightening map on the lattice (1, period)."""
        n = len(self.heights)
        H = self.heights
        shifts = np.array([s.shift for s in self.seams])
        Y = np.concatenate([[0.0], np.cumsum(H)])
        X = np.concatenate([[0.0], np.cumsum(shifts)])
        P = self.period
        x = np.arange(Nx) / Nx
        y = np.arange(Ny) / Ny
        zeta = x[:, None] + y[None, :] * P
        depth_all = y * Y[-1]
        band = np.clip(np.searchsorted(Y, depth_all, side="right") - 1, 0, n - 1)
        mu = np.zeros((Nx, Ny), dtype=complex)
        for j in range(n):
            cols = band == j
            if not cols.any():
                continue
            above = self.seams[(j - 1) % n]
            w = zeta[:, cols] + 1j * Y[j + 1] + X[j]
            d = np.broadcast_to(depth_all[cols][None, :] - Y[j], w.shape)
            u = w - 1j * H[j] - above.shift
            pw = np.zeros_like(w)
            pb = np.zeros_like(w)
            for k, a in zip(above.modes(), above.coeffs):
                if k == 0 or a == 0:
                    continue
                dk = float(self.depths(j, k))
                inside = d < dk
                if not inside.any():
                    continue
                e = a * np.exp(2j * math.pi * k * np.where(inside, u, u.real))
                step, dstep = smooth_step(d / dk)
                blend = 1.0 - step
                dblend = -dstep / dk
                pw += e * (2j * math.pi * k * blend + 0.5j * dblend)
                pb += e * (-0.5j * dblend)
            mu[:, cols] = pb / (1.0 + pw)
        return BeltramiGrid(mu, P)


def _match_charts(orbits, charts):
    anchors = np.array([c.anchor for c in charts])
    out = []
    for x in orbits.lifts:
        i = int(np.argmin(np.abs((anchors - x + 0.5) % 1.0 - 0.5)))
        out.append(charts[i])
    return out


def band_chain(F, pq, samples=BAND_SAMPLES, max_samples=BAND_MAX_SAMPLES):
    """Bands and seams of the torus of a hyperbolic F with rot F = p/q."""
    pq = Fraction(pq)
    orbits = periodic_orbits(F, pq)
    found = []
    for orb in orbits.orbits:
        found.extend(koenigs(F, orb, pq))
    charts = _match_charts(orbits, found)
    n = len(charts)
    heights = np.array([math.pi / abs(math.log(c.lam)) for c in charts])
    seams = []
    for j in range(n):
        offset = 1.0 if j == n - 1 else 0.0
        M = samples
        seam = _seam(F, pq, charts[j], charts[(j + 1) % n], offset, M)
        while seam.tail > 1e-14 * max(1.0, seam.nonlinearity) and M < max_samples:
            M *= 2
            finer = _seam(F, pq, charts[j], charts[(j + 1) % n], offset, M)
            stalled = finer.tail > 0.25 * seam.tail  # chart noise floor
            seam = finer
            if stalled:
                break
        # modes at the noise floor carry no information
        floor = 10.0 * seam.tail
        seams.append(Seam(seam.shift, np.where(np.abs(seam.coeffs) > floor, seam.coeffs, 0.0), seam.tail, seam.shift_err))
    return BandChain(pq, heights, tuple(seams), tuple(charts))


def crot_bands(F, pq, tol=1e-12, shape=None, chain=None):
    """tau(F) through the band chain: (tau, a-posteriori error, chain)."""
    pq = Fraction(pq)
    p, q = pq.numerator, pq.denominator
    chain = chain or band_chain(F, pq)
    P = chain.period
    rigid = (1.0 / P + p) / q
    # the correction to the period is quadratic in the seam nonlinearity
    second = 4 * math.pi**2 * sum(float(np.sum(np.abs(s.modes()) * np.abs(s.coeffs) ** 2)) for s in chain.seams)
    second *= abs(1.0 / P) ** 2 / q
    noise = max(s.tail for s in chain.seams) * len(chain.seams) * abs(1.0 / P) ** 2 / q
    noise += sum(s.shift_err for s in chain.seams) * abs(1.0 / P) ** 2 / q
    Nx, Ny = shape or chain.grid_shape()
    if shape is None and (second <= 1e-3 * tol_abs(rigid) or Nx * Ny > BAND_MAX_POINTS):
        if Nx * Ny > BAND_MAX_POINTS and second > BAND_RIGID_TOL * abs(rigid):
            raise NoConvergence(f"band chain needs a {Nx}x{Ny} grid (second-order term {second:.2e})")
        return complex(rigid), float(second + noise), chain
    res = solve_torus(chain.beltrami(Nx, Ny), tol=tol)
    coarse = solve_torus(chain.beltrami(max(8, Nx // 2), max(16, Ny // 2)), tol=tol, check_alias=False)
    tau = (1.0 / res.tau + p) / q
    err = abs((1.0 / coarse.tau + p) / q - tau)
    return complex(tau), float(err + noise), chain


def tol_abs(tau):
    return 1e-15 * max(1.0, abs(tau))
