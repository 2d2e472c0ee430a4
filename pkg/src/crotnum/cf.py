"""Exact continued fractions, Gauss branches and integer Moebius maps.

Rationals are :class:`fractions.Fraction`.  Floating inputs are expanded at 50
significant digits so that no garbage terms appear before depth 60.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational as _RationalABC

import mpmath

from .errors import (
    DepthExceeded,
    ImageAtInfinity,
    NonPositiveImaginaryPart,
    NotFound,
    PoleAtZero,
    PrecisionLoss,
)

DIGITS = 50
MAX_DEPTH = 60
RETURN_GAP = 0.01

PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _mp(x):
    if isinstance(x, _RationalABC):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, str):
        return mpmath.mpf(x)
    return mpmath.mpf(x)


@dataclass(frozen=True)
class CFExpansion:
    terms: tuple[int, ...]
    exact: bool = False

    def __post_init__(self):
        if any(k < 1 for k in self.terms):
            raise ValueError("continued fraction terms must be >= 1")

    def __len__(self):
        return len(self.terms)

    def value(self):
        v = Fraction(0)
        for k in reversed(self.terms):
            v = 1 / (k + v)
        return v


def cf_of(x, depth=MAX_DEPTH):
    """Terms k_j = [1 / alpha_j] of x in (0, 1), alpha_{j+1} = {1 / alpha_j}."""
    if isinstance(x, _RationalABC):
        x = Fraction(x)
        if not 0 < x < 1:
            raise ValueError("x must lie in (0, 1)")
        terms = []
        while x:
            inv = 1 / x
            k = inv.numerator // inv.denominator
            terms.append(k)
            x = inv - k
        return CFExpansion(tuple(terms), exact=True)
    depth = min(depth, MAX_DEPTH)
    with mpmath.workdps(DIGITS):
        a = _mp(x)
        if not 0 < a < 1:
            raise ValueError("x must lie in (0, 1)")
        terms = []
        eps = mpmath.mpf(10) ** (-(DIGITS - 5))
        for _ in range(depth):
            if a < eps:
                break
            inv = 1 / a
            k = int(mpmath.floor(inv))
            terms.append(k)
            a = inv - k
    return CFExpansion(tuple(terms))


def convergents(cf, n=None):
    """p_0/q_0 = 0/1, ..., p_n/q_n as (p, q) integer pairs (already coprime)."""
    terms = cf.terms if isinstance(cf, CFExpansion) else tuple(cf)
    n = len(terms) if n is None else n
    if n > len(terms):
        raise DepthExceeded(f"requested {n} convergents beyond {len(terms)} terms")
    p2, q2, p1, q1 = 1, 0, 0, 1
    out = [(0, 1)]
    for k in terms[:n]:
        p2, q2, p1, q1 = p1, q1, k * p1 + p2, k * q1 + q2
        out.append((p1, q1))
    return out


def convergent_fractions(cf, n=None):
    return [Fraction(p, q) for p, q in convergents(cf, n)]


def gauss_tails(alpha, n):
    """alpha_0, ..., alpha_n at 50 digits."""
    with mpmath.workdps(DIGITS):
        a = _mp(alpha)
        out = [a]
        for _ in range(n):
            if a < mpmath.mpf("1e-15"):
                raise PrecisionLoss(f"Gauss tail {mpmath.nstr(a, 5)} underflows")
            a = 1 / a
            a = a - mpmath.floor(a)
            out.append(a)
    return out


def brjuno_partial(alpha, n):
    """Sum of the first n terms of sum_j alpha_{-1} ... alpha_{j-1} log(1/alpha_j).

    Returns (partial sum, alpha_0 ... alpha_{n-1}); the product bounds the size of the
    remaining terms' prefactors.
    """
    if n == 0:
        return 0.0, 1.0
    tails = gauss_tails(alpha, n - 1)
    with mpmath.workdps(DIGITS):
        s = mpmath.mpf(0)
        prod = mpmath.mpf(1)
        for a in tails:
            if a < mpmath.mpf("1e-15"):
                raise PrecisionLoss("Gauss tail underflows")
            s += prod * mpmath.log(1 / a)
            prod *= a
        return float(s), float(prod)


def gauss_branch(k, tau):
    if tau == 0:
        raise PoleAtZero("G_k has a pole at 0")
    return 1 / tau - k


def gauss_map(x):
    """G(x) = {1/x}, exact on Fractions."""
    if x == 0:
        raise PoleAtZero("G has a pole at 0")
    inv = 1 / x
    if isinstance(inv, Fraction):
        return inv - inv.numerator // inv.denominator
    return inv - math.floor(inv)


@dataclass(frozen=True)
class MobiusInt:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.det not in (1, -1):
            raise ValueError(f"determinant {self.det} is not +-1")

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def __call__(self, z):
        num = self.a * z + self.b
        den = self.c * z + self.d
        if den == 0:
            raise ImageAtInfinity("point maps to infinity")
        if isinstance(z, _RationalABC):
            return Fraction(num) / Fraction(den)
        return num / den

    def __matmul__(self, other):
        """Composition self o other."""
        return MobiusInt(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self):
        s = self.det
        return MobiusInt(s * self.d, -s * self.b, -s * self.c, s * self.a)


IDENTITY = MobiusInt(1, 0, 0, 1)


def gauss_branch_matrix(k):
    """G_k(tau) = (-k tau + 1) / tau."""
    return MobiusInt(-k, 1, 1, 0)


def T_pq(pq, m):
    """(-q_{m+1} tau + p_{m+1}) / (q_m tau - p_m) for the convergents of p/q."""
    pq = Fraction(pq)
    terms = cf_of(pq).terms if 0 < pq < 1 else ()
    conv = convergents(terms)
    if m + 1 >= len(conv):
        raise DepthExceeded(f"p/q = {pq} has {len(conv)} convergents, need {m + 2}")
    pm, qm = conv[m]
    pm1, qm1 = conv[m + 1]
    return MobiusInt(-qm1, pm1, qm, -pm)


def T_pq_from_branches(pq, m):
    terms = cf_of(Fraction(pq)).terms
    if m >= len(terms):
        raise DepthExceeded("not enough continued-fraction terms")
    M = IDENTITY
    for k in terms[: m + 1]:
        M = gauss_branch_matrix(k) @ M
    return M


@dataclass(frozen=True)
class TangentDisc:
    """Disc of diameter eps tangent to R at r; in the lower half-plane if not upper."""

    r: Fraction | float
    eps: Fraction | float
    upper: bool = True

    def contains(self, z, slack=0.0):
        im = z.imag if self.upper else -z.imag
        return abs(z - complex(self.r)) ** 2 <= float(self.eps) * im + slack

    def margin(self, z):
        """eps * Im z - |z - r|^2 (nonnegative inside)."""
        im = z.imag if self.upper else -z.imag
        return float(self.eps) * im - abs(z - complex(self.r)) ** 2

    @property
    def center(self):
        s = 1 if self.upper else -1
        return complex(float(self.r), s * float(self.eps) / 2)

    @property
    def radius(self):
        return float(self.eps) / 2


def disc_image(M, D):
    """Image of the tangent disc D (at k/l) under M, in exact integer arithmetic."""
    r = Fraction(D.r)
    k, l = r.numerator, r.denominator
    kk = M.a * k + M.b * l
    ll = M.c * k + M.d * l
    if ll == 0:
        raise ImageAtInfinity(f"{r} maps to infinity")
    eps = D.eps
    scale = Fraction(l * l, ll * ll)
    eps_new = eps * scale if isinstance(eps, _RationalABC) else float(eps) * float(scale)
    upper = D.upper if M.det == 1 else not D.upper
    return TangentDisc(Fraction(kk, ll), eps_new, upper)


def disc_size(r, pts):
    """Smallest diameter of a disc tangent to R at r containing all pts."""
    r = complex(float(r))
    best = 0.0
    for z in pts:
        z = complex(z)
        if not z.imag > 0:
            raise NonPositiveImaginaryPart(f"point {z} is not in the upper half-plane")
        best = max(best, abs(z - r) ** 2 / z.imag)
    return best


def n_of_alpha(alpha, return_gap=RETURN_GAP, depth=MAX_DEPTH):
    """Smallest m with 0 < q_m alpha - p_m < return_gap; returns (m, q_m)."""
    cf = cf_of(alpha, depth)
    conv = convergents(cf)
    with mpmath.workdps(DIGITS):
        a = _mp(alpha)
        gap = _mp(return_gap)
        for m, (p, q) in enumerate(conv):
            d = q * a - p
            if 0 < d < gap:
                return m, q
    raise NotFound(f"no convergent with 0 < q alpha - p < {return_gap} within depth {len(conv) - 1}")


def farey(qmax, lo=Fraction(0), hi=Fraction(1)):
    """Reduced fractions p/q in [lo, hi] with q <= qmax, sorted."""
    out = set()
    for q in range(1, qmax + 1):
        for p in range(math.floor(lo * q), math.ceil(hi * q) + 1):
            f = Fraction(p, q)
            if lo <= f <= hi:
                out.add(f)
    return sorted(out)
