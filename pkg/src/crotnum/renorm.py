"""One step of renormalization: fundamental data, rescaling chart, first return, Moebius check.

With F_m = F^{q_m} - p_m and L = F_m(0), the interval J between 0 and L with its
ends glued by F_m is a circle.  A chart Psi, real on R, analytic near J, with
Psi(0) = 0 and Psi(F_m(z)) = Psi(z) - 1, turns the first-return map of F to J
into a new circle-map lift.  Psi comes from the Beltrami solver: a
quasiconformal rectangle map psi(s, u) fills the region between a vertical
segment I through 0 and F_m(I), its dilatation is cut off away from the real
axis, and the solution Phi of the resulting torus gives Psi = -(Phi o psi^-1 - Phi(0)) / tau.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cf import RETURN_GAP, T_pq, cf_of, convergents, gauss_map, n_of_alpha
from .circle import fit_from_samples, iterate
from .errors import (
    ChartResidualTooLarge,
    DepthExceeded,
    FitFailure,
    NoConvergence,
    NoReturnWithinCap,
    NumericalError,
    TailNotDecaying,
)
from .rotation import rot
from .torus import (
    DEFAULT_N,
    BeltramiGrid,
    GluedTorusProblem,
    LiftGlue,
    beltrami_of,
    crot,
    interpolate,
    interpolation_map,
    smooth_step,
    solve_torus,
)

CHART_TOL = 1e-6
H_CHART = 0.25
# tried in order when no chart height is given: strongly nonlinear F_m folds the tall rectangle
CHART_HEIGHTS = (0.25, 0.15, 0.1, 0.05)
# dilatation is kept for |v| <= CUT_IN and removed for |v| >= CUT_OUT
CUT_IN = 0.5
CUT_OUT = 0.9
RENORM_SAMPLES = 64
FIT_THRESHOLD = 1e-9


# ---------------------------------------------------------------- fundamental data


@dataclass(frozen=True)
class FundamentalData:
    m: int
    p_m: int
    q_m: int
    p_next: int
    q_next: int
    L: float
    rot: Fraction | float

    @property
    def parity(self):
        return "even" if self.m % 2 == 0 else "odd"

    @property
    def interval(self):
        """The closed interval between 0 and L as (lo, hi)."""
        return (0.0, self.L) if self.L > 0 else (self.L, 0.0)


def _rot_value(F, pq):
    if pq is not None:
        return Fraction(pq)
    enc = rot(F, return_enclosure=True)
    return enc.exact if enc.exact is not None else enc.mid


def fundamental_data(F, m="auto", pq=None, return_gap=RETURN_GAP):
    """m, (p_m, q_m), (p_{m+1}, q_{m+1}) from the convergents of rot F, L = F^{q_m}(0) - p_m.

    ``m="auto"`` picks the smallest m with 0 < q_m alpha - p_m < return_gap.
    ``pq`` skips the rotation-number computation when rot F is known.
    """
    alpha = _rot_value(F, pq)
    frac = alpha - math.floor(alpha)
    shift = math.floor(alpha)
    if isinstance(alpha, Fraction):
        terms = cf_of(frac).terms if frac else ()
    else:
        terms = cf_of(frac).terms
    conv = convergents(terms)
    if m == "auto":
        m, _ = n_of_alpha(frac, return_gap)
    m = int(m)
    if m + 1 >= len(conv):
        raise DepthExceeded(f"rot F = {alpha} has {len(conv)} convergents, need index {m + 1}")
    (pm, qm), (pn, qn) = conv[m], conv[m + 1]
    pm += shift * qm
    pn += shift * qn
    L = float(iterate(F, 0.0, qm)) - pm
    if L == 0:
        raise DepthExceeded(f"F^{qm}(0) - {pm} = 0: rot F = {pm}/{qm}, the step is degenerate")
    return FundamentalData(m, pm, qm, pn, qn, L, alpha)


# ---------------------------------------------------------------- first return


def _reduce_into(y, L):
    """(y - k, k) with y - k in J = {t L : 0 <= t < 1} (contains 0, not L), or None."""
    k = math.floor(y) if L > 0 else math.ceil(y)
    r = y - k
    if 0 <= r / L < 1:
        return r, k
    return None


def first_return(F, fd, x):
    """(landing point, steps) of the first return of x to J (mod 1) under F.

    J is the interval from 0 (included) to L (excluded).  Steps are q_{m+1} or
    q_{m+1} + q_m.
    """
    cap = fd.q_next + 2 * fd.q_m
    y = float(x)
    for n in range(1, cap + 1):
        y = float(F.eval(y))
        hit = _reduce_into(y, fd.L)
        if hit is not None:
            return hit[0], n
    raise NoReturnWithinCap(f"x = {x} did not return to J within {cap} steps")


# ---------------------------------------------------------------- chart


@dataclass(frozen=True, eq=False)
class _Segment:
    """s -> eta(2s - 1), the vertical segment I = [-2 i h L, 2 i h L] through 0."""

    a: complex  # eta(v) = a v

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        return self.a * (2 * s - 1) + 0j, np.full(s.shape, 2 * self.a, dtype=complex)


def cutoff(v):
    """Even C-infinity cutoff: 1 on |v| <= CUT_IN, 0 on |v| >= CUT_OUT."""
    t = (np.abs(np.asarray(v, dtype=float)) - CUT_IN) / (CUT_OUT - CUT_IN)
    s, _ = smooth_step(t)
    return 1.0 - s


@dataclass(eq=False)
class RenormChart:
    """Psi = -(Phi o psi^-1 - Phi(0)) / tau; psi(s, u) with v = 2s - 1, u the F_m direction."""

    fd: FundamentalData
    h_chart: float
    problem: GluedTorusProblem
    solution: object = field(repr=False)
    phi0: complex = 0j
    sigma: int = -1
    residual: float = 0.0
    symmetry: float = 0.0

    @property
    def tau(self):
        return self.solution.tau

    def psi(self, s, u):
        """Rectangle map with the F_m-equivariant extension in u."""
        s = np.asarray(s, dtype=float)
        u = np.asarray(u, dtype=float)
        k = np.floor(u)
        z, zs, zu, _ = interpolate(self.problem, s, u - k)
        glue = self.problem.glue
        for shift in np.unique(k):
            sel = k == shift
            if shift == 0 or not sel.any():
                continue
            w, ws, wu = z[sel], zs[sel], zu[sel]
            n = int(shift)
            for _ in range(abs(n)):
                if n > 0:
                    w, d = glue.eval(w)
                else:
                    w = _glue_inverse(glue, w)
                    _, d0 = glue.eval(w)
                    d = 1.0 / d0
                ws, wu = ws * d, wu * d
            z[sel], zs[sel], zu[sel] = w, ws, wu
        return z, zs, zu

    def _phi(self, s, u, derivative=False):
        return self.solution.potential(s, u, derivative)

    def locate(self, z, guess=None, tol=1e-14, maxiter=50):
        """(s, u) with psi(s, u) = z by 2x2 real Newton."""
        z = np.asarray(z, dtype=complex)
        if guess is None:
            # psi(s, u) ~ a (2s - 1) + u L with a imaginary
            s = 0.5 + 0.5 * z.imag / self.problem.gamma.a.imag
            u = z.real / self.fd.L
        else:
            s, u = (np.asarray(g, dtype=float).copy() for g in guess)
        s = np.broadcast_to(s, z.shape).astype(float)
        u = np.broadcast_to(u, z.shape).astype(float)
        for _ in range(maxiter):
            w, ws, wu = self.psi(s, u)
            r = w - z
            det = ws.real * wu.imag - ws.imag * wu.real
            ds = (r.real * wu.imag - r.imag * wu.real) / det
            du = (ws.real * r.imag - ws.imag * r.real) / det
            s = s - ds
            u = u - du
            if np.all(np.abs(r) < tol * (1 + np.abs(z))):
                return s, u
        raise NoConvergence("chart inversion did not converge")

    def __call__(self, z):
        """Psi(z) for z near the strip over J (or its F_m translates)."""
        s, u = self.locate(z)
        return -(self._phi(s, u) - self.phi0) / self.tau

    def real_inverse(self, w, tol=1e-14, maxiter=60):
        """x in J with Psi(x) = w for real w in [-1, 0]."""
        w = np.asarray(w, dtype=float)
        u = -w.copy()
        s = np.full(w.shape, 0.5)
        for _ in range(maxiter):
            phi, _, phi_u = self._phi(s, u, derivative=True)
            W = (-(phi - self.phi0) / self.tau).real
            dW = (-phi_u / self.tau).real
            step = (W - w) / dW
            u = u - step
            if np.all(np.abs(step) < tol):
                break
        else:
            raise NoConvergence("chart real inversion did not converge")
        x, _, _ = self.psi(s, u)
        return x.real

    def real_values(self, x):
        """Psi at real points of J (u found on the real segment s = 1/2)."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.fd.interval
        s = np.full(x.shape, 0.5)
        u = x / self.fd.L
        for _ in range(60):
            z, _, zu = self.psi(s, u)
            step = (z.real - x) / zu.real
            u = u - step
            if np.all(np.abs(step) < 1e-15):
                break
        return -(self._phi(s, u) - self.phi0) / self.tau


def _glue_inverse(glue, w, maxiter=60):
    z = w - glue.eval(np.zeros(1))[0][0]
    for _ in range(maxiter):
        g, d = glue.eval(z)
        step = (g - w) / d
        z = z - step
        if np.all(np.abs(step) < 1e-15 * (1 + np.abs(z))):
            break
    return z


def build_chart(F, fd, h_chart=H_CHART, N=DEFAULT_N, tol=1e-12, check=True):
    """Rescaling chart for F_m via the Beltrami solver on the rectangle torus.

    The reference lattice is (1, P) with P = 1/(4 i h_chart), for which the rectangle
    map of a rigid translation is conformal, so rotations give an affine chart.
    """
    seg = _Segment(2j * h_chart * fd.L)
    glue = LiftGlue(F, 0j, fd.q_m, fd.p_m)
    problem = GluedTorusProblem(seg, glue)
    P = 1.0 / (4j * h_chart)
    interp = interpolation_map(problem, N, P=P)
    grid = beltrami_of(interp)
    v = 2 * np.arange(N) / N - 1
    mu = grid.mu * cutoff(v)[:, None]
    sol = solve_torus(BeltramiGrid(mu, P), tol=tol)
    chart = RenormChart(fd, h_chart, problem, sol)
    chart.phi0 = complex(sol.potential(0.5, 0.0))
    chart.residual = sol.residual
    if check:
        xs = np.linspace(*fd.interval, 17)[1:-1]
        inside = chart.real_values(xs)
        chart.symmetry = float(np.max(np.abs(inside.imag)))
        fx = np.asarray(iterate(F, xs, fd.q_m), dtype=float) - fd.p_m
        shifted = chart.real_values(fx)
        err = float(np.max(np.abs(shifted - inside - chart.sigma)))
        if err > CHART_TOL or chart.symmetry > CHART_TOL:
            raise ChartResidualTooLarge(
                f"shift residual {err:.2e}, imaginary part on R {chart.symmetry:.2e} (tolerance {CHART_TOL})"
            )
    return chart


def chart_for(F, fd, h_chart=None, heights=CHART_HEIGHTS, **kw):
    """build_chart at ``h_chart``, or at the first height in ``heights`` that succeeds."""
    if h_chart is not None:
        return build_chart(F, fd, h_chart, **kw)
    err = None
    for h in heights:
        try:
            return build_chart(F, fd, h, **kw)
        except NumericalError as exc:
            err = exc
    raise err


# ---------------------------------------------------------------- renormalization


def _return_samples(F, fd, chart, samples):
    w = np.arange(samples) / samples
    # R F(w) = R F(w - 1) + 1 keeps Psi^-1 inside J; w = 0 maps to the point 0 itself
    base = np.where(w > 0, w - 1.0, 0.0)
    x = chart.real_inverse(base)
    ys = np.empty(samples)
    js = np.empty(samples)
    for j, xj in enumerate(x):
        y, steps = first_return(F, fd, float(xj))
        k = steps - fd.q_next
        if k not in (0, fd.q_m):
            raise FitFailure(f"first return after {steps} steps, expected {fd.q_next} or {fd.q_next + fd.q_m}")
        ys[j], js[j] = y, k // fd.q_m
    vals = chart.real_values(ys).real + js
    d = vals - base
    # the lift is continuous: remove integer jumps of the displacement
    d = d[0] + np.concatenate([[0.0], np.cumsum(np.diff(d) - np.round(np.diff(d)))])
    return w, w + d


def renormalize(F, fd, chart=None, samples=RENORM_SAMPLES, threshold=FIT_THRESHOLD, max_samples=1024, **chart_kw):
    """The renormalized lift R F(w) = Psi(P(Psi^-1(w))) + (return correction), rot in [0, 1).

    The sample count doubles from ``samples`` until the Fourier refit resolves the
    displacement.  Returns (RF, integer shift applied).
    """
    chart = chart or chart_for(F, fd, **chart_kw)
    while True:
        w, y = _return_samples(F, fd, chart, samples)
        try:
            G = fit_from_samples(w, y, threshold=threshold, h=0.8 * chart.h_chart)
            break
        except TailNotDecaying as exc:
            if samples >= max_samples:
                raise FitFailure(str(exc)) from exc
            samples *= 2
    shift = math.floor(G.c0) if G.K == 0 else math.floor(rot(G))
    if shift:
        G = G.shifted(-shift)
    return G, shift


# ---------------------------------------------------------------- Moebius action


@dataclass
class MobiusReport:
    pq: Fraction
    m: int
    tau_F: complex
    tau_RF: complex
    direct: complex  # T(tau_F)
    conjugated: complex  # T(conj tau_F)
    err_direct: float
    err_conjugated: float
    matched: str  # "direct" | "conjugated"
    predicted: str

    @property
    def rel_error(self):
        return min(self.err_direct, self.err_conjugated) / abs(self.tau_RF)

    @property
    def separation(self):
        lo = min(self.err_direct, self.err_conjugated)
        hi = max(self.err_direct, self.err_conjugated)
        return hi / lo if lo > 0 else math.inf

    @property
    def consistent(self):
        return self.matched == self.predicted

    def to_record(self):
        return {
            "pq": str(self.pq), "m": self.m,
            "tau_F": [self.tau_F.real, self.tau_F.imag], "tau_RF": [self.tau_RF.real, self.tau_RF.imag],
            "err_direct": self.err_direct, "err_conjugated": self.err_conjugated,
            "matched": self.matched, "predicted": self.predicted, "rel_error": self.rel_error,
        }


def verify_mobius(F, pq, m, N=DEFAULT_N, **chart_kw):
    """Compare tau(R F) with T_{p/q}(tau F) and T_{p/q}(conj tau F); odd m predicts the first."""
    pq = Fraction(pq)
    fd = fundamental_data(F, m, pq=pq)
    RF, _ = renormalize(F, fd, **chart_kw)
    target = pq
    for _ in range(m + 1):
        target = gauss_map(target) if target else target
    tau_F = crot(F, pq, N=N).tau
    tau_RF = crot(RF, target, N=N).tau
    T = T_pq(pq - math.floor(pq), m)
    direct = complex(T(tau_F))
    conj = complex(T(tau_F.conjugate()))
    ed, ec = abs(tau_RF - direct), abs(tau_RF - conj)
    return MobiusReport(
        pq, m, tau_F, tau_RF, direct, conj, ed, ec,
        "direct" if ed <= ec else "conjugated", "direct" if m % 2 else "conjugated",
    )
