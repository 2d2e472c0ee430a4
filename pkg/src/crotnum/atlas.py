"""Bubble scans over monotone families, the q^-2 disc bound, golden-mean scaling, output files."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from .cf import PHI, TangentDisc, cf_of, convergents, disc_size, farey
from .circle import FourierLift, MonotoneFamily, distortion, standard_family
from .errors import EmptyLocking, NumericalError, PrecisionFloor
from .rotation import LockingInterval, locking_interval, rot
from .torus import DEFAULT_N, crot

FLOAT_FMT = ".17g"


# ---------------------------------------------------------------- config


@dataclass
class ScanConfig:
    """One scan; either ``epsilon`` (standard family) or ``family`` (a map record) is set."""

    epsilon: float | None = 0.6
    family: dict | None = None
    t_range: tuple[float, float] = (-0.1, 1.1)
    q_max: int = 8
    samples_per_bubble: int = 9
    grid: int = DEFAULT_N
    clip: float = 0.02
    tol: float = 1e-12
    jobs: int = 1

    def build_family(self):
        if self.family is not None:
            return MonotoneFamily(FourierLift.from_record(self.family), tuple(self.t_range))
        if self.epsilon is None:
            raise ValueError("config needs either epsilon or family")
        return standard_family(self.epsilon, tuple(self.t_range))

    def descriptor(self):
        return {"epsilon": self.epsilon, "family": self.build_family().to_record()}

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "t_range" in known:
            known["t_range"] = tuple(known["t_range"])
        return cls(**known)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ScalingConfig:
    epsilon: float = 0.3
    alpha: float = PHI
    r_max: int = 5
    samples_per_bubble: int = 9
    grid: int = DEFAULT_N
    clip: float = 0.02
    tol: float = 1e-12
    t_range: tuple[float, float] = (-0.1, 1.1)
    jobs: int = 1

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "t_range" in known:
            known["t_range"] = tuple(known["t_range"])
        return cls(**known)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------- records


@dataclass
class Sample:
    t: float
    tau: complex
    pipeline: str
    error: float
    distortion: float
    engine: str = ""


@dataclass
class BubbleRecord:
    pq: Fraction
    interval: LockingInterval | None
    samples: list[Sample] = field(default_factory=list)
    size: float = 0.0
    hyperbolic_gaps: list[float] = field(default_factory=list)
    failures: list[tuple[float, str]] = field(default_factory=list)


@dataclass
class ScanReport:
    family: dict
    q_max: int
    records: list[BubbleRecord]
    timing: float = field(default=0.0, compare=False)

    def record(self, pq):
        pq = Fraction(pq)
        for r in self.records:
            if r.pq == pq:
                return r
        raise KeyError(str(pq))


# ---------------------------------------------------------------- scan


def chebyshev_nodes(interval, n, clip=0.02):
    """n Chebyshev points of the interval shrunk by ``clip`` of its length at both ends, ascending."""
    lo, hi = interval.t_minus, interval.t_plus
    L = hi - lo
    a, b = lo + clip * L, hi - clip * L
    x = np.cos(math.pi * (2 * np.arange(n) + 1) / (2 * n))
    return sorted(float(0.5 * (a + b) - 0.5 * (b - a) * xi) for xi in x)


def _sample_task(args):
    """One (p/q, t) evaluation; returns a keyed, picklable result."""
    base_rec, pq, j, t, N, tol = args
    F = FourierLift.from_record(base_rec).shifted(t)
    try:
        res = crot(F, Fraction(pq), N=N, tol=tol)
    except NumericalError as exc:
        return (pq, j, t, None, f"{type(exc).__name__}: {exc}")
    return (pq, j, t, (res.tau.real, res.tau.imag, res.pipeline, float(res.error), res.hyperbolic, res.engine), None)


def _rot_range(fam):
    lo = rot(fam.at(fam.t_range[0]), return_enclosure=True)
    hi = rot(fam.at(fam.t_range[1]), return_enclosure=True)
    return Fraction(lo.lo).limit_denominator(10**12), Fraction(hi.hi).limit_denominator(10**12)


def bubble_fractions(fam, q_max):
    """Reduced p/q, q <= q_max, whose locking interval meets the family's t-range."""
    lo, hi = _rot_range(fam)
    lo_i, hi_i = math.floor(lo), math.ceil(hi)
    out = []
    for pq in farey(q_max, Fraction(lo_i), Fraction(hi_i)):
        if lo <= pq <= hi:
            out.append(pq)
    return out


def _run(tasks, jobs):
    if jobs <= 1:
        return [_sample_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sample_task, tasks, chunksize=1))


def scan_fractions(fam, fractions, n_samples=9, N=DEFAULT_N, clip=0.02, tol=1e-12, jobs=1):
    """Bubble records for the given fractions (locking interval, Chebyshev samples, crot)."""
    base_rec = fam.base.to_record()
    D = distortion(fam.base)  # D_{f_t} does not depend on t
    intervals = {}
    tasks = []
    for pq in fractions:
        try:
            I = locking_interval(fam, pq)
        except EmptyLocking:
            continue
        intervals[pq] = I
        if I.length <= 0:
            continue
        for j, t in enumerate(chebyshev_nodes(I, n_samples, clip)):
            tasks.append((base_rec, str(pq), j, t, N, tol))
    results = _run(tasks, jobs)
    # keyed deterministic merge: order by (p/q, sample index) whatever the completion order
    results.sort(key=lambda r: (Fraction(r[0]), r[1]))
    records = {pq: BubbleRecord(pq, I) for pq, I in intervals.items()}
    for pq_s, j, t, val, err in results:
        rec = records[Fraction(pq_s)]
        if val is None:
            rec.failures.append((t, err))
            continue
        re_, im_, pipe, e, hyp, engine = val
        rec.samples.append(Sample(t, complex(re_, im_), pipe, e, D, engine))
        if not hyp:
            rec.hyperbolic_gaps.append(t)
    for rec in records.values():
        pts = [s.tau for s in rec.samples if s.tau.imag > 0]
        rec.size = disc_size(rec.pq, pts) if pts else 0.0
    return [records[pq] for pq in sorted(records)]


def scan(config):
    t0 = time.perf_counter()
    fam = config.build_family()
    fractions = bubble_fractions(fam, config.q_max)
    records = scan_fractions(
        fam, fractions, config.samples_per_bubble, config.grid, config.clip, config.tol, config.jobs
    )
    return ScanReport(config.descriptor(), config.q_max, records, time.perf_counter() - t0)


# ---------------------------------------------------------------- checks


@dataclass
class BoundCheck:
    pq: Fraction
    worst_margin: float
    passed: bool
    imag_positive: bool


def bound_disc(pq, D):
    """Tangent disc at p/q of radius q^-2 D / 4 pi (diameter twice that)."""
    pq = Fraction(pq)
    return TangentDisc(pq, 2.0 * D / (4 * math.pi * pq.denominator**2))


def verify_q2_bound(report):
    """Per record: worst membership margin of the samples in the q^-2 D_f / 4 pi disc."""
    out = []
    for rec in report.records:
        worst = math.inf
        pos = True
        for s in rec.samples:
            worst = min(worst, bound_disc(rec.pq, s.distortion).margin(s.tau))
            if s.pipeline != "rational" and not s.tau.imag > 0:
                pos = False
        if worst == math.inf:
            worst = 0.0
        out.append(BoundCheck(rec.pq, worst, worst >= 0 and pos, pos))
    return out


@dataclass
class EndpointCheck:
    pq: Fraction
    tau_minus: complex
    tau_plus: complex
    deviation: float  # max |tau(endpoint) - p/q|
    spread: float  # difference between two extrapolation orders
    solver_error: float  # max reported a-posteriori error of the samples

    @property
    def within_solver_error(self):
        return self.deviation <= 10 * self.solver_error


def endpoint_extrapolation(rec):
    """tau at both ends of the locking interval, extrapolated from the samples.

    The samples are polynomials in theta with t = c - r cos(theta) over the full interval;
    functions analytic in sqrt(t - t_minus) and sqrt(t_plus - t) are analytic in theta.
    """
    if rec.interval is None or len(rec.samples) < 3:
        return None
    lo, hi = rec.interval.t_minus, rec.interval.t_plus
    c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
    th = np.array([math.acos(min(1.0, max(-1.0, (c - s.t) / r))) for s in rec.samples])
    tau = np.array([s.tau for s in rec.samples])
    n = len(th)

    def extrap(deg):
        coef = np.polynomial.polynomial.polyfit(th, np.c_[tau.real, tau.imag], deg)
        ends = np.polynomial.polynomial.polyval(np.array([0.0, math.pi]), coef)
        return ends[0] + 1j * ends[1]

    hi_o = extrap(n - 1)
    lo_o = extrap(n - 2)
    target = float(rec.pq)
    dev = float(np.max(np.abs(hi_o - target)))
    spread = float(np.max(np.abs(hi_o - lo_o)))
    err = max(s.error for s in rec.samples)
    return EndpointCheck(rec.pq, complex(hi_o[0]), complex(hi_o[1]), dev, spread, err)


# ---------------------------------------------------------------- scaling


@dataclass
class ScalingRow:
    r: int
    p: int
    q: int
    size: float
    y: float
    error: float


@dataclass
class ScalingReport:
    alpha: float
    t0: float
    rows: list[ScalingRow]
    log_lambda: float
    lam: float
    xi: float
    decreasing: bool
    truncated_at: int | None = None

    @property
    def lam_below_one(self):
        return self.lam < 1

    @property
    def xi_above_one(self):
        return self.xi > 1


def solve_rotation_parameter(fam, alpha, tol=1e-13):
    """t with rot(f_t) = alpha by bisection (rot is nondecreasing in t)."""
    def g(t):
        enc = rot(fam.at(t), tol=1e-13, return_enclosure=True)
        if enc.exact is not None:
            return float(enc.exact) - alpha
        return enc.mid - alpha

    return float(optimize.brentq(g, *fam.t_range, xtol=tol))


def scaling(config):
    """Bubble sizes s_r at the convergents p_r/q_r of alpha, y_r = s_r q_r^2, fitted decay."""
    fam = standard_family(config.epsilon, tuple(config.t_range))
    t0 = solve_rotation_parameter(fam, config.alpha)
    conv = convergents(cf_of(config.alpha), config.r_max)
    fracs = [Fraction(p, q) for p, q in conv[1: config.r_max + 1]]
    recs = scan_fractions(fam, fracs, config.samples_per_bubble, config.grid, config.clip, config.tol, config.jobs)
    by_pq = {r.pq: r for r in recs}
    rows = []
    truncated = None
    for r, pq in enumerate(fracs, start=1):
        rec = by_pq.get(pq)
        size = rec.size if rec else 0.0
        err = max((s.error for s in rec.samples), default=0.0) if rec else 0.0
        if config.epsilon > 0 and (rec is None or size <= err):
            truncated = r
            break
        rows.append(ScalingRow(r, pq.numerator, pq.denominator, size, size * pq.denominator**2, err))
    fit = [row for row in rows if row.r >= 2 and row.y > 0]
    if len(fit) >= 2:
        slope = float(np.polyfit([row.r for row in fit], [math.log(row.y) for row in fit], 1)[0])
    else:
        slope = 0.0
    lam = math.exp(slope)
    xi = slope / math.log(PHI**2)
    ys = [row.y for row in rows]
    decreasing = len(ys) >= 2 and all(b < a for a, b in zip(ys, ys[1:]))
    rep = ScalingReport(config.alpha, t0, rows, slope, lam, xi, decreasing, truncated)
    return rep


def check_precision(report):
    if report.truncated_at is not None:
        raise PrecisionFloor(f"bubble size below solver error at r = {report.truncated_at}")


# ---------------------------------------------------------------- serialisation


def _fmt(x):
    return format(float(x), FLOAT_FMT)


def _encode(obj):
    """JSON with every float printed at 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        return _fmt(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _interval_rec(I):
    if I is None:
        return None
    return {"t_minus": I.t_minus, "t_plus": I.t_plus, "clipped": list(I.clipped)}


def report_lines(report):
    """JSONL records: a header, then per bubble a summary and one line per tau sample."""
    lines = [_encode({"kind": "scan", "family": report.family, "q_max": report.q_max})]
    for rec in report.records:
        lines.append(_encode({
            "kind": "bubble", "pq": str(rec.pq), "interval": _interval_rec(rec.interval), "size": rec.size,
            "hyperbolic_gaps": list(rec.hyperbolic_gaps), "failures": [[t, m] for t, m in rec.failures],
        }))
        for s in rec.samples:
            lines.append(_encode({
                "kind": "sample", "pq": str(rec.pq), "t": s.t, "re_tau": s.tau.real, "im_tau": s.tau.imag,
                "pipeline": s.pipeline, "engine": s.engine, "error": s.error, "distortion": s.distortion,
            }))
    return lines


def to_jsonl(report):
    return "".join(line + "\n" for line in report_lines(report))


def from_jsonl(text):
    report = None
    current = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        if d["kind"] == "scan":
            report = ScanReport(d["family"], d["q_max"], [])
        elif d["kind"] == "bubble":
            pq = Fraction(d["pq"])
            iv = d["interval"]
            I = None if iv is None else LockingInterval(pq, iv["t_minus"], iv["t_plus"], tuple(iv["clipped"]))
            rec = BubbleRecord(pq, I, [], d["size"], list(d["hyperbolic_gaps"]), [tuple(x) for x in d["failures"]])
            report.records.append(rec)
            current[pq] = rec
        elif d["kind"] == "sample":
            current[Fraction(d["pq"])].samples.append(
                Sample(
                    d["t"], complex(d["re_tau"], d["im_tau"]), d["pipeline"], d["error"], d["distortion"],
                    d.get("engine", ""),
                )
            )
    if report is None:
        raise ValueError("no scan header")
    return report


CSV_HEADER = ["pq", "t", "re_tau", "im_tau", "pipeline", "error"]


def to_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in report.records:
        for s in rec.samples:
            w.writerow([str(rec.pq), _fmt(s.t), _fmt(s.tau.real), _fmt(s.tau.imag), s.pipeline, _fmt(s.error)])
    return buf.getvalue()


def to_svg(report, width=800, height=400):
    """Upper half-plane: bubble polylines with their q^-2 tangent discs."""
    taus = [s.tau for r in report.records for s in r.samples]
    xs = [float(r.pq) for r in report.records] + [z.real for z in taus]
    x0, x1 = (min(xs) - 0.05, max(xs) + 0.05) if xs else (0.0, 1.0)
    top = max([z.imag for z in taus] + [1e-3]) * 1.2
    sx = width / (x1 - x0)
    sy = (height - 20) / top

    def X(x):
        return _fmt(round((x - x0) * sx, 6))

    def Y(y):
        return _fmt(round(height - 10 - y * sy, 6))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<line x1="0" y1="{Y(0)}" x2="{width}" y2="{Y(0)}" stroke="black" stroke-width="1"/>',
    ]
    for rec in report.records:
        pts = [s.tau for s in rec.samples]
        if pts:
            D = pts and rec.samples[0].distortion
            disc = bound_disc(rec.pq, D)
            c = disc.center
            out.append(
                f'<ellipse cx="{X(c.real)}" cy="{Y(c.imag)}" rx="{_fmt(round(disc.radius * sx, 6))}" '
                f'ry="{_fmt(round(disc.radius * sy, 6))}" fill="none" stroke="#999999" stroke-width="0.5"/>'
            )
            line = [float(rec.pq)] + pts + [float(rec.pq)]
            coords = " ".join(f"{X(complex(z).real)},{Y(complex(z).imag)}" for z in line)
            out.append(f'<polyline points="{coords}" fill="none" stroke="#1f4e9c" stroke-width="1"/>')
        out.append(f'<text x="{X(float(rec.pq))}" y="{height - 1}" font-size="8">{rec.pq}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit(report, fmt, path):
    text = {"jsonl": to_jsonl, "csv": to_csv, "svg": to_svg}[fmt](report)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def scaling_record(rep):
    d = asdict(rep)
    d["lam_below_one"] = rep.lam_below_one
    d["xi_above_one"] = rep.xi_above_one
    return d


__all__ = [
    "BoundCheck", "BubbleRecord", "EndpointCheck", "Sample", "ScalingConfig", "ScalingReport", "ScanConfig",
    "ScanReport", "bound_disc", "bubble_fractions", "chebyshev_nodes", "emit", "endpoint_extrapolation",
    "from_jsonl", "scaling", "scan", "scan_fractions", "to_csv", "to_jsonl", "to_svg", "verify_q2_bound",
]
