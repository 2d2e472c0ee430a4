"""Moduli of tori glued from an annulus, via a spectral Beltrami solver.

A torus is described by a 1-periodic boundary lift ``Gamma`` and an analytic gluing
lift ``G`` with ``G(Gamma)`` on one side of ``Gamma``.  The strip between them is
parametrised by an explicit quasiconformal map ``psi`` of the lattice torus
``C / (Z + P Z)``; the Beltrami equation for its dilatation is solved by a
Fourier fixed point, and the periods of the solution give the modulus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import linalg as sparse_linalg

from .circle import FourierLift
from .errors import (
    AliasingDetected,
    DilatationTooLarge,
    NoConvergence,
    NonInjectiveInterpolation,
    NumericalError,
    OrbitLeftStrip,
)

DEFAULT_N = 128
MAX_N = 512
SUP_MU_LIMIT = 0.95
# fundamental annuli between a low curve and its image are thin and twisted; the
# dilatation of the straight-line interpolation approaches 1 as the curve is lowered
CURVE_MU_LIMIT = 0.995


# ---------------------------------------------------------------- boundary curves


class RealAxis:
    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return x + 0j, np.ones_like(x, dtype=complex)


@dataclass(frozen=True, eq=False)
class TrigCurve:
    """Gamma(x) = x + sum_k e_k exp(2 pi i k x), k = -M..M."""

    coef: np.ndarray

    @property
    def M(self):
        return (len(self.coef) - 1) // 2

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(-self.M, self.M + 1)
        e = np.exp(2j * math.pi * np.multiply.outer(x, k))
        return x + e @ self.coef, 1.0 + e @ (2j * math.pi * k * self.coef)

    def conj(self):
        return TrigCurve(np.conj(self.coef[::-1]))

    @classmethod
    def from_samples(cls, x, gamma, M=None):
        """Trigonometric interpolant of Gamma - x on a uniform grid."""
        n = len(x)
        d = np.fft.fft(np.asarray(gamma) - x) / n
        d = d * np.exp(-2j * math.pi * np.fft.fftfreq(n, 1.0 / n) * x[0])
        M = n // 2 - 1 if M is None else M
        coef = np.concatenate([d[-M:], d[: M + 1]])
        return cls(coef)


# ---------------------------------------------------------------- gluing maps


@dataclass(frozen=True, eq=False)
class LiftGlue:
    """z -> (F + omega)^q (z) - p with its derivatives."""

    F: FourierLift
    omega: complex = 0j
    q: int = 1
    p: int = 0

    def eval(self, z, order=1):
        """(G, G') or, with order=2, (G, G', G'') by the chain rule."""
        z = np.asarray(z, dtype=complex)
        d = np.ones_like(z)
        d2 = np.zeros_like(z)
        cap = self.F.h
        for i in range(self.q):
            if self.F.K:
                im = float(np.max(np.abs(z.imag))) if z.size else 0.0
                if im > cap:
                    raise OrbitLeftStrip(i, im, cap)
            f1 = self.F.eval(z, 1, check=False)
            if order == 2:
                d2 = self.F.eval(z, 2, check=False) * d * d + f1 * d2
            d = d * f1
            z = self.F.eval(z, check=False) + self.omega
        if order == 2:
            return z - self.p, d, d2
        return z - self.p, d


# ---------------------------------------------------------------- problem & psi


@dataclass(frozen=True, eq=False)
class GluedTorusProblem:
    """Torus (strip between Gamma and G(Gamma)) / (G, z + 1).

    ``cover = (q, p)`` records that G = f^q - p for the map f whose modulus is wanted;
    the torus of G is then the index-q sublattice and tau_f = (tau_G + p) / q.
    """

    gamma: object
    glue: object
    cover: tuple[int, int] = (1, 0)

    def recover(self, tau_glued):
        q, p = self.cover
        return (tau_glued + p) / q


def smooth_step(y):
    """C-infinity step: 0 to all orders at y = 0, 1 to all orders at y = 1."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    d = np.zeros_like(y)
    inside = (y > 0) & (y < 1)
    yi = y[inside]
    a = np.exp(-1.0 / yi)
    b = np.exp(-1.0 / (1.0 - yi))
    out[inside] = a / (a + b)
    da = a / yi**2
    db = -b / (1.0 - yi) ** 2
    d[inside] = (da * b - a * db) / (a + b) ** 2
    out[y >= 1] = 1.0
    return out, d


@dataclass(eq=False)
class Interpolation:
    """Samples of psi on the lattice grid x_j = j/N, y_l = l/N (axis 0 = x)."""

    psi: np.ndarray
    psi_x: np.ndarray
    psi_y: np.ndarray
    P: complex
    jacobian: np.ndarray = field(repr=False)


def _hermite(y):
    """Cubic Hermite basis h01, h10, h11 and their derivatives at y."""
    y2, y3 = y * y, y * y * y
    h = (-2 * y3 + 3 * y2, y3 - 2 * y2 + y, y3 - y2)
    dh = (-6 * y2 + 6 * y, 3 * y2 - 4 * y + 1, 3 * y2 - 2 * y)
    return h, dh


def interpolate(problem, x, y, P=None):
    """psi, psi_x, psi_y and the mean seam displacement at broadcastable (x, y).

    The base A(x, y) is the cubic Hermite path from Gamma(x) to G(Gamma(x)) with end
    tangents m0 = 2c/(1 + G'), m1 = G' m0 (c = G(Gamma) - Gamma), so that
    A(x, y + 1) = G(A(x, y)) holds to first order at the seam.  Then
    psi = (1 - s) A(x, y) + s G(A(x, y - 1)) with a C-infinity step s, which makes
    psi(x, y + 1) = G(psi(x, y)) hold to all orders near the seam; psi(x, 0) = Gamma(x).
    For a rigid gluing G = id + c, psi = Gamma + y c.  ``y`` is used as given, so
    callers wanting the periodic extension must reduce it to [0, 1) themselves.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g, dg = problem.gamma.eval(x)
    Gg, dGg, ddGg = problem.glue.eval(g, order=2)
    c = Gg - g
    dc = dGg * dg - dg
    m0 = 2 * c / (1 + dGg)
    dm0 = 2 * dc / (1 + dGg) - 2 * c * ddGg * dg / (1 + dGg) ** 2
    m1 = dGg * m0
    dm1 = ddGg * dg * m0 + dGg * dm0

    def base(yy):
        (h01, h10, h11), (d01, d10, d11) = _hermite(yy)
        A = g + c * h01 + m0 * h10 + m1 * h11
        Ax = dg + dc * h01 + dm0 * h10 + dm1 * h11
        Ay = c * d01 + m0 * d10 + m1 * d11
        return A, Ax, Ay

    A, Ax, Ay = base(y)
    Al, Alx, Aly = base(y - 1.0)
    s, ds = smooth_step(y)
    psi = A.copy()
    psi_x = Ax.copy()
    psi_y = Ay.copy()
    # the glue is only needed where the step is active (and may leave its strip elsewhere)
    act = np.broadcast_to(s > 1e-17, psi.shape)
    if act.any():
        S = np.broadcast_to(s, psi.shape)[act]
        dS = np.broadcast_to(ds, psi.shape)[act]
        al = Al[act]
        Gl, dGl = problem.glue.eval(al)
        psi[act] = (1 - S) * A[act] + S * Gl
        psi_x[act] = (1 - S) * Ax[act] + S * dGl * Alx[act]
        psi_y[act] = (1 - S) * Ay[act] + S * dGl * Aly[act] + dS * (Gl - A[act])
    return psi, psi_x, psi_y, complex(np.mean(c))


def interpolation_map(problem, N=DEFAULT_N, P=None, check=True):
    """Equivariant interpolation psi of the strip between Gamma and G(Gamma) on the grid.

    psi(x + 1, y) = psi(x, y) + 1 for boundary lifts; see :func:`interpolate`.
    P defaults to the mean of c.  Raises NonInjectiveInterpolation if the Jacobian
    (relative to the orientation of P) is not positive on the grid.
    """
    x = np.arange(N) / N
    y = np.arange(N) / N
    psi, psi_x, psi_y, cbar = interpolate(problem, x[:, None], y[None, :])
    if P is None:
        P = cbar
    # Jacobian of (x, y) -> psi relative to the orientation of the lattice (1, P)
    jac = np.imag(np.conj(psi_x) * psi_y) * np.sign(P.imag)
    interp = Interpolation(psi, psi_x, psi_y, P, jac)
    if check:
        i = np.unravel_index(int(np.argmin(jac)), jac.shape)
        if jac[i] <= 0:
            raise NonInjectiveInterpolation(float(jac[i]), (x[i[0]], y[i[1]]))
    return interp


@dataclass(eq=False)
class BeltramiGrid:
    mu: np.ndarray
    P: complex = 1j

    @property
    def sup_mu(self):
        return float(np.max(np.abs(self.mu)))

    @property
    def N(self):
        return self.mu.shape[0]


def beltrami_of(interp, limit=SUP_MU_LIMIT):
    """mu = psi_zbar / psi_z with z = x + y P the lattice coordinate."""
    P = interp.P
    num = P * interp.psi_x - interp.psi_y
    den = interp.psi_y - np.conj(P) * interp.psi_x
    mu = num / den
    grid = BeltramiGrid(mu, P)
    if grid.sup_mu >= limit:
        raise DilatationTooLarge(f"sup |mu| = {grid.sup_mu:.4f} >= {limit}")
    return grid


# ---------------------------------------------------------------- solver


@dataclass
class ModulusResult:
    tau: complex
    residual: float
    iterations: int
    N: int
    sup_mu: float = 0.0
    error: float | None = None
    alpha: complex = 1.0
    beta: complex = 0.0
    uhat: np.ndarray | None = field(default=None, repr=False)
    P: complex = 1j
    tail: float = 0.0

    def potential(self, x, y, derivative=False):
        """Phi = alpha z + beta zbar + u at lattice coordinates (x, y) (arrays).

        With ``derivative`` also returns (Phi_x, Phi_y).
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = x + y * self.P
        Nx, Ny = self.uhat.shape
        kx = np.fft.fftfreq(Nx, 1.0 / Nx)
        ky = np.fft.fftfreq(Ny, 1.0 / Ny)
        ex = np.exp(2j * math.pi * np.multiply.outer(x, kx))
        ey = np.exp(2j * math.pi * np.multiply.outer(y, ky))
        t = ex @ self.uhat
        u = np.sum(t * ey, axis=-1)
        phi = self.alpha * z + self.beta * np.conj(z) + u
        if not derivative:
            return phi
        ux = np.sum(((ex * (2j * math.pi * kx)) @ self.uhat) * ey, axis=-1)
        uy = np.sum(t * ey * (2j * math.pi * ky), axis=-1)
        ab = self.alpha + self.beta
        return phi, ab + ux, self.alpha * self.P + self.beta * np.conj(self.P) + uy


def _symbols(shape, P):
    Nx, Ny = shape
    k1 = np.fft.fftfreq(Nx, 1.0 / Nx)[:, None]
    k2 = np.fft.fftfreq(Ny, 1.0 / Ny)[None, :]
    xi = k1 + 0 * k2
    eta = (k2 - k1 * P.real) / P.imag
    dz = math.pi * (1j * xi + eta)  # symbol of d/dz
    dzb = math.pi * (1j * xi - eta)  # symbol of d/dzbar
    B = np.zeros(shape, dtype=complex)
    nz = (k1 != 0) | (k2 != 0)
    B[nz] = dz[nz] / dzb[nz]
    return dz, dzb, B


def _fixed_point(mu, B, tol, maxiter):
    mbar = mu.mean()
    v = np.zeros_like(mu)
    for it in range(1, maxiter + 1):
        alpha = (1.0 - np.mean(mu * v)) / (1.0 + mbar)
        w = mu * (alpha + v)
        vnew = np.fft.ifft2(B * np.fft.fft2(w - w.mean()))
        diff = math.sqrt(float(np.mean(np.abs(vnew - v) ** 2)))
        v = vnew
        if diff < tol:
            return v, it
    raise NoConvergence(f"fixed point stalled after {maxiter} sweeps (sup|mu| = {np.abs(mu).max():.4f})")


def _krylov(mu, B, tol, maxiter):
    """GMRES on (I - T) v = T(0) for the same affine sweep T."""
    shape = mu.shape
    mbar = mu.mean()

    def lin(v):
        a = -np.mean(mu * v) / (1.0 + mbar)
        w = mu * (a + v)
        return np.fft.ifft2(B * np.fft.fft2(w - w.mean()))

    w0 = mu / (1.0 + mbar)
    rhs = np.fft.ifft2(B * np.fft.fft2(w0 - w0.mean())).ravel()
    count = [0]

    def matvec(x):
        count[0] += 1
        v = x.reshape(shape)
        return (v - lin(v)).ravel()

    n = mu.size
    op = sparse_linalg.LinearOperator((n, n), matvec=matvec, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(rhs)))
    x, info = sparse_linalg.gmres(
        op, rhs, rtol=0.1 * tol * math.sqrt(n) / scale, atol=0.0, restart=80, maxiter=maxiter
    )
    if info != 0:
        raise NoConvergence(f"GMRES did not converge (info = {info}, sup|mu| = {np.abs(mu).max():.4f})")
    return x.reshape(shape), count[0]


def solve_torus(grid, tol=1e-12, maxiter=20000, alias_tol=1e-2, check_alias=True, method="fixed-point"):
    """Solve dPhi/dzbar = mu dPhi/dz with Phi(z+1) = Phi + 1, Phi(z+P) = Phi + tau.

    Ansatz Phi = alpha z + beta zbar + u with u doubly periodic.  Each sweep sets
    alpha from the period constraint, w = mu (alpha + v), beta = mean w and
    v = B(w - beta) with B the unit-modulus Fourier symbol of d o dbar^{-1}.
    ``method="krylov"`` solves the same affine sweep equation by GMRES.
    The relative spectral tail of v must stay below ``alias_tol``.
    """
    mu = np.asarray(grid.mu, dtype=complex)
    P = complex(grid.P)
    Nx, Ny = mu.shape
    N = Nx
    sup = float(np.max(np.abs(mu)))
    if sup >= 1:
        raise DilatationTooLarge(f"sup |mu| = {sup:.4f} >= 1")
    dz, dzb, B = _symbols(mu.shape, P)
    if method == "fixed-point":
        v, it = _fixed_point(mu, B, tol, maxiter)
    elif method == "krylov":
        v, it = _krylov(mu, B, tol, maxiter)
    else:
        raise ValueError(f"unknown method {method!r}")
    mbar = mu.mean()
    alpha = (1.0 - np.mean(mu * v)) / (1.0 + mbar)
    beta = 1.0 - alpha
    vhat = np.fft.fft2(v)
    uhat = np.zeros_like(vhat)
    nz = dz != 0
    uhat[nz] = vhat[nz] / dz[nz]
    dbar_u = np.fft.ifft2(dzb * uhat)
    res = math.sqrt(float(np.mean(np.abs(beta + dbar_u - mu * (alpha + v)) ** 2)))
    mag = np.abs(vhat) / (Nx * Ny)
    kx = np.abs(np.fft.fftfreq(Nx, 1.0 / Nx))
    ky = np.abs(np.fft.fftfreq(Ny, 1.0 / Ny))
    outer = (kx[:, None] > Nx / 3) | (ky[None, :] > Ny / 3)
    tail = float(mag[outer].max()) / max(1e-300, float(mag.max()), abs(alpha))
    if check_alias and min(Nx, Ny) >= 16 and tail > alias_tol:
        raise AliasingDetected(f"relative spectral tail {tail:.2e} at N = {N}")
    tau = alpha * P + beta * np.conj(P)
    out = ModulusResult(complex(tau), res, it, N, sup, None, complex(alpha), complex(beta), uhat / (Nx * Ny), P)
    out.tail = tail
    return out


RESOLVE_TOL = 1e-9


def modulus(problem, N=DEFAULT_N, tol=1e-12, adapt=True, error=False, mu_limit=SUP_MU_LIMIT, resolve_tol=RESOLVE_TOL):
    """Modulus of the glued torus, recovered through the cover.

    The a-posteriori error |tau(N) - tau(N/2)| is attached when ``error`` or ``adapt``
    is set; with ``adapt`` the grid doubles (up to MAX_N) while it exceeds
    ``resolve_tol`` or the spectral tail flags aliasing.
    """
    while True:
        try:
            grid = beltrami_of(interpolation_map(problem, N), limit=mu_limit)
            res = solve_torus(grid, tol=tol)
            res.tau = complex(problem.recover(res.tau))
            if error or adapt:
                half = beltrami_of(interpolation_map(problem, N // 2), limit=mu_limit)
                coarse = solve_torus(half, tol=tol, check_alias=False)
                res.error = abs(complex(problem.recover(coarse.tau)) - res.tau)
                if adapt and res.error > resolve_tol:
                    raise AliasingDetected(f"|tau(N) - tau(N/2)| = {res.error:.2e} at N = {N}")
            return res
        except AliasingDetected:
            if not adapt or N >= MAX_N:
                raise
            N *= 2


# ---------------------------------------------------------------- complex rotation numbers


def crot_omega(F, omega, N=DEFAULT_N, curve=None, tol=1e-12, error=False):
    """tau_F(omega), Im omega > 0.

    The fundamental annulus is bounded below by the real axis, or by ``curve``
    (a SuitableCurve for F), in which case the torus is glued by (F + omega)^q - p.
    """
    omega = complex(omega)
    if not omega.imag > 0:
        raise ValueError("Im omega must be positive")
    if curve is None:
        problem = GluedTorusProblem(RealAxis(), LiftGlue(F, omega))
    else:
        pq = Fraction(curve.pq)
        q, p = pq.denominator, pq.numerator
        problem = GluedTorusProblem(curve.trig, LiftGlue(F, omega, q, p), (q, p))
        return modulus(problem, N, tol=tol, error=error, mu_limit=CURVE_MU_LIMIT)
    return modulus(problem, N, tol=tol, error=error)


def crot_hyperbolic(F, gamma, N=DEFAULT_N, tol=1e-12, error=False, result=False):
    """tau(F) as the modulus of E_gamma(F); conjugated for anti-suitable curves."""
    pq = Fraction(gamma.pq)
    q, p = pq.denominator, pq.numerator
    problem = GluedTorusProblem(gamma.trig, LiftGlue(F, 0j, q, p), (q, p))
    res = modulus(problem, N, tol=tol, error=error, mu_limit=CURVE_MU_LIMIT)
    if gamma.polarity == "anti-suitable":
        res.tau = res.tau.conjugate()
    return res if result else res.tau


def richardson(hs, values, order=2):
    """Extrapolate values(h) to h = 0 from the ``order + 1`` smallest h.

    Polynomial (Neville) extrapolation in h, i.e. removes the h, ..., h^order terms.
    """
    pairs = sorted(zip(hs, values))[: order + 1]
    h = [float(a) for a, _ in pairs]
    T = [complex(b) for _, b in pairs]
    n = len(h)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            T[i] = (h[i - j] * T[i] - h[i] * T[i - 1]) / (h[i - j] - h[i])
    return T[-1]


def crot_omega_limit(F, curve, ks=range(4, 11), N=DEFAULT_N, order=3, tol=1e-12):
    """lim_{eps -> 0} tau_F(i eps) by Richardson extrapolation on eps = 2^-k.

    Returns (limit, [(eps, tau or None)]); an eps whose torus cannot be built (orbit
    leaves the strip, interpolation folds) is recorded as None and skipped.
    """
    seq = []
    for k in ks:
        eps = 2.0**-k
        try:
            seq.append((eps, crot_omega(F, 1j * eps, N=N, curve=curve, tol=tol).tau))
        except NumericalError:
            seq.append((eps, None))
    good = [(e, v) for e, v in seq if v is not None]
    if len(good) < order + 1:
        raise NoConvergence(f"only {len(good)} usable eps values for order-{order} extrapolation")
    return richardson([e for e, _ in good], [v for _, v in good], order), seq


@dataclass
class CrotResult:
    tau: complex
    pipeline: str  # "rational" | "suitable-curve" | "omega-limit"
    error: float = 0.0
    hyperbolic: bool = False
    engine: str = ""  # "bands" | "interpolation" | "richardson" for hyperbolic maps


CURVE_HEIGHTS = (0.1, 0.05, 0.025, 0.0125)


def crot(F, pq, N=DEFAULT_N, heights=CURVE_HEIGHTS, tol=1e-12, engines=("bands", "interpolation")):
    """tau(F) for rot F = p/q: p/q unless hyperbolic, else the modulus of the suitable-curve torus.

    The band-chain engine (Koenigs log-coordinates) runs first; on failure explicit
    curves are tried from the top height down.  Without any usable height the
    omega -> 0 limit through the lowest valid curve is returned.
    ``error`` is the engine's a-posteriori estimate (or the Richardson spread).
    """
    from .hyperbolic import build_suitable, crot_bands  # circular at import time
    from .rotation import is_hyperbolic

    pq = Fraction(pq)
    hyp, _ = is_hyperbolic(F, pq)
    if not hyp:
        return CrotResult(complex(float(pq)), "rational", 0.0, False)
    if "bands" in engines:
        try:
            tau, err, _ = crot_bands(F, pq, tol=tol)
            return CrotResult(tau, "suitable-curve", err, True, "bands")
        except NumericalError:
            pass
    lowest = None
    for h in heights:
        try:
            curve = build_suitable(F, pq, h)
        except NumericalError:
            continue
        lowest = curve
        if "interpolation" not in engines:
            continue
        try:
            res = crot_hyperbolic(F, curve, N=N, tol=tol, error=True, result=True)
            return CrotResult(res.tau, "suitable-curve", float(res.error), True, "interpolation")
        except NumericalError:
            continue
    if lowest is None:
        raise NoConvergence(f"no usable engine for {pq} (curves tried down to height {heights[-1]})")
    tau, seq = crot_omega_limit(F, lowest, N=N, tol=tol)
    good = [(e, v) for e, v in seq if v is not None]
    err = abs(tau - richardson([e for e, _ in good], [v for _, v in good], 1))
    return CrotResult(tau, "omega-limit", err, True, "richardson")
