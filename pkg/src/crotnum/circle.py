"""Analytic circle-diffeomorphism lifts as finite trigonometric series.

A lift is stored as ``F(x) = x + c0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)``
together with the half-width ``h`` of the strip on which it is trusted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import (
    NoConvergence,
    NotADiffeomorphism,
    OrbitLeftStrip,
    StripExceeded,
    TailNotDecaying,
)

TWO_PI = 2.0 * math.pi
CERT_GRID = 4096
REFIT_SHRINK = 0.8


@dataclass(frozen=True, eq=False)
class FourierLift:
    c0: float
    a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))
    h: float = 0.5
    m1: float = field(init=False, repr=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != b.shape:
            raise ValueError("cosine and sine coefficient arrays differ in length")
        if not self.h > 0:
            raise ValueError("strip half-width must be positive")
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "m1", self._certify())

    @property
    def K(self):
        return len(self.a)

    @property
    def k(self):
        return np.arange(1, self.K + 1)

    def _certify(self):
        if self.K == 0:
            return 1.0
        x = np.arange(CERT_GRID) / CERT_GRID
        d1 = self.eval(x, 1, check=False).real
        d2_bound = float(np.sum((TWO_PI * self.k) ** 2 * (np.abs(self.a) + np.abs(self.b))))
        m1 = float(d1.min()) - 0.5 * d2_bound / CERT_GRID
        if m1 <= 0:
            raise NotADiffeomorphism(f"min F' lower bound {m1:.3g} <= 0")
        return m1

    def eval(self, z, order=0, check=True):
        """F, F' or F'' at ``z`` (scalar or array, real or complex)."""
        z = np.asarray(z)
        if check and np.iscomplexobj(z) and self.K:
            im = float(np.max(np.abs(z.imag))) if z.size else 0.0
            if im > self.h * (1 + 1e-12):
                raise StripExceeded(im, self.h)
        if self.K == 0:
            if order == 0:
                return z + self.c0
            return np.full_like(z, 1.0 if order == 1 else 0.0, dtype=complex if np.iscomplexobj(z) else float)
        w = TWO_PI * self.k
        ph = np.multiply.outer(z, w)
        c, s = np.cos(ph), np.sin(ph)
        if order == 0:
            return z + self.c0 + c @ self.a + s @ self.b
        if order == 1:
            return 1.0 + (c @ (w * self.b) - s @ (w * self.a))
        if order == 2:
            return -(c @ (w * w * self.a) + s @ (w * w * self.b))
        raise ValueError("order must be 0, 1 or 2")

    __call__ = eval

    def displacement_sup(self):
        """Bound on |F(x) - x - c0| for real x."""
        return float(np.sum(np.abs(self.a) + np.abs(self.b)))

    def shifted(self, t):
        return FourierLift(self.c0 + t, self.a, self.b, self.h)

    def conjugated_by_shift(self, s):
        """Lift of R_{-s} o f o R_s, i.e. x -> F(x + s) - s."""
        w = TWO_PI * self.k * s
        a = self.a * np.cos(w) + self.b * np.sin(w)
        b = self.b * np.cos(w) - self.a * np.sin(w)
        return FourierLift(self.c0, a, b, self.h)

    def to_record(self):
        return {
            "c0": self.c0,
            "coef": [[float(x), float(y)] for x, y in zip(self.a, self.b)],
            "h": self.h,
        }

    @classmethod
    def from_record(cls, rec):
        coef = np.asarray(rec.get("coef", []), dtype=float).reshape(-1, 2)
        return cls(rec["c0"], coef[:, 0], coef[:, 1], rec.get("h", 0.5))


def rotation(alpha, h=math.inf):
    return FourierLift(alpha, h=h)


def standard_map(eps, t=0.0, h=0.5):
    """x + t + (eps / 2 pi) sin 2 pi x."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    if eps == 0:
        return FourierLift(t, h=h)
    return FourierLift(t, [0.0], [eps / TWO_PI], h)


@dataclass(frozen=True)
class MonotoneFamily:
    """f_t = base + t; d f_t / dt = 1 > 0."""

    base: FourierLift
    t_range: tuple[float, float]

    def at(self, t):
        return self.base.shifted(t)

    def to_record(self):
        return {"base": self.base.to_record(), "t_range": list(self.t_range)}


def standard_family(eps, t_range=(-0.1, 1.1), h=0.5):
    return MonotoneFamily(standard_map(eps, 0.0, h), tuple(t_range))


def iterate(F, z, n, cap=None):
    """n-fold composition, aborting if an iterate leaves |Im| <= cap."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    cap = F.h if cap is None else cap
    z = np.asarray(z)
    for i in range(n):
        z = F.eval(z, check=False)
        if np.iscomplexobj(z) and z.size:
            im = float(np.max(np.abs(z.imag)))
            if im > cap:
                raise OrbitLeftStrip(i + 1, im, cap)
    return z[()] if z.ndim == 0 else z


def iterate_with_derivative(F, z, n, cap=None):
    """(F^n(z), (F^n)'(z)) by the chain rule."""
    cap = F.h if cap is None else cap
    z = np.asarray(z)
    d = np.ones_like(z, dtype=complex if np.iscomplexobj(z) else float)
    for i in range(n):
        d = d * F.eval(z, 1, check=False)
        z = F.eval(z, check=False)
        if np.iscomplexobj(z) and z.size:
            im = float(np.max(np.abs(z.imag)))
            if im > cap:
                raise OrbitLeftStrip(i + 1, im, cap)
    return z, d


def invert_real(F, y, tol=1e-13, maxiter=200):
    """x with F(x) = y for real y (scalar or array); safeguarded Newton."""
    y = np.asarray(y, dtype=float)
    s = F.displacement_sup()
    lo = y - F.c0 - s - 1e-15
    hi = y - F.c0 + s + 1e-15
    x = y - F.c0
    for _ in range(maxiter):
        g = F.eval(x) - y
        done = np.abs(g) < tol
        if np.all(done):
            return x[()] if x.ndim == 0 else x
        lo = np.where(g < 0, x, lo)
        hi = np.where(g > 0, x, hi)
        xn = x - g / F.eval(x, 1)
        bad = (xn <= lo) | (xn >= hi)
        x = np.where(done, x, np.where(bad, 0.5 * (lo + hi), xn))
    raise NoConvergence(f"invert_real did not reach |F(x) - y| < {tol}")


def invert_complex(F, w, guess=None, tol=1e-14, maxiter=60):
    """z with F(z) = w near the real axis by Newton from the real inverse of Re w."""
    w = np.asarray(w, dtype=complex)
    z = invert_real(F, w.real) + 0j if guess is None else np.asarray(guess, dtype=complex)
    if guess is None:
        z = z + 1j * w.imag / F.eval(z.real, 1)
    for _ in range(maxiter):
        g = F.eval(z, check=False) - w
        step = g / F.eval(z, 1, check=False)
        z = z - step
        if np.all(np.abs(step) < tol * (1 + np.abs(z))):
            return z[()] if z.ndim == 0 else z
    raise NoConvergence("complex inversion did not converge")


def distortion(F, rtol=1e-10):
    """D_f = int_0^1 |F''/F'| dx."""
    if F.K == 0 or not np.any(F.a) and not np.any(F.b):
        return 0.0
    x = np.linspace(0, 1, 4097)
    d2 = F.eval(x, 2)
    # kinks of |F''| sit at zeros of F''; a zero on a node must not be missed
    flips = np.nonzero(np.sign(d2[:-1]) * np.sign(d2[1:]) <= 0)[0]
    pts = set()
    for i in flips:
        if d2[i] == 0:
            pts.add(float(x[i]))
        elif d2[i + 1] == 0:
            pts.add(float(x[i + 1]))
        else:
            pts.add(optimize.brentq(lambda t: float(F.eval(t, 2)), x[i], x[i + 1], xtol=1e-15))
    pts = sorted(p for p in pts if 0.0 < p < 1.0)

    def integrand(t):
        return abs(float(F.eval(t, 2)) / float(F.eval(t, 1)))

    val, _ = integrate.quad(integrand, 0.0, 1.0, points=pts or None, limit=400, epsrel=rtol, epsabs=0)
    return val


def sample(F, N, x0=0.0):
    x = x0 + np.arange(N) / N
    return x, F.eval(x)


def fit_from_samples(x, y, threshold=1e-12, h=None, F_h=0.5):
    """Rebuild a FourierLift from samples (x_j, F(x_j)) on a uniform grid.

    The displacement y - x is Fourier-analysed and truncated at the smallest K whose
    tail is below ``threshold`` times max(1, largest coefficient).  Coefficients in the
    top quarter of the spectrum above that level mean the data is under-resolved.
    The new strip half-width is ``h`` if given, otherwise ``0.8 * F_h``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    N = len(x)
    if N < 4 or N & (N - 1):
        raise ValueError("grid size must be a power of two >= 4")
    if not np.allclose(np.diff(x), 1.0 / N, rtol=0, atol=1e-12):
        raise ValueError("samples must lie on a uniform grid of spacing 1/N")
    d = np.fft.rfft(y - x) / N
    d = d * np.exp(-2j * math.pi * np.arange(len(d)) * x[0])
    c0 = d[0].real
    a = 2 * d[1:].real
    b = -2 * d[1:].imag
    a[-1] *= 0.5  # Nyquist term
    b[-1] = 0.0
    mag = np.abs(a) + np.abs(b)
    level = threshold * max(1.0, float(mag.max(initial=0.0)))
    if np.any(mag[N // 4:] > level):
        raise TailNotDecaying(
            f"coefficient tail {float(mag[N // 4:].max()):.3g} above {level:.3g}; data under-resolved or non-analytic"
        )
    big = np.nonzero(mag > level)[0]
    K = int(big[-1]) + 1 if big.size else 0
    h_new = REFIT_SHRINK * F_h if h is None else h
    G = FourierLift(c0, a[:K], b[:K], h_new)
    residual = float(np.max(np.abs(G.eval(x) - y)))
    object.__setattr__(G, "_fit_residual", residual)
    return G


def fit_residual(G):
    return getattr(G, "_fit_residual", None)
