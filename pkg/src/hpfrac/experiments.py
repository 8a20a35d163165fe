"""Convergence studies: run (sigma, L) sweeps, extrapolate energies, fit rates, CSV."""

import csv
from dataclasses import dataclass, field
import io
import logging
import math
import os
import time

import numpy as np

from .assembly import assemble, forcing, solve
from .kernel import KernelParams, QuadOrders
from .mesh import VARIANTS, geometric_mesh
from .norms import EnergySequence, extrapolate_energy
from .space import build_space

log = logging.getLogger(__name__)

CSV_HEADER = ["d", "sigma", "L", "q", "N", "energy", "energy_error_est",
              "assemble_s", "solve_s"]


@dataclass
class ExperimentConfig:
    dim: int = 1
    s: float = 0.25
    sigmas: list = field(default_factory=lambda: [0.5])
    layers: list = field(default_factory=lambda: [1, 2, 3])
    degree: object = "L"  # "L" or a fixed integer
    max_degree: int = None
    rhs: str = "const:1"
    variant: str = "figure"
    quad_near: int = None
    quad_far: int = None
    out: str = None
    deterministic: bool = False
    dump_matrix: str = None
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        for sg in self.sigmas:
            if not 0.0 < sg < 1.0:
                raise ValueError(f"sigma must lie in (0, 1), got {sg}")
        for L in self.layers:
            if int(L) != L or L < 1:
                raise ValueError(f"layer counts must be positive integers, got {L}")
        if self.degree != "L" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"degree must be 'L' or a positive integer, got {self.degree!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        for name in ("quad_near", "quad_far", "max_degree"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be positive")
        forcing(self.rhs)

    def degree_for(self, L):
        q = L if self.degree == "L" else int(self.degree)
        if self.max_degree is not None:
            q = min(q, self.max_degree)
        return q

    def orders(self):
        return QuadOrders(near=self.quad_near, far=self.quad_far)


@dataclass
class ExperimentRecord:
    d: int
    s: float
    sigma: float
    L: int
    q: int
    N: int
    energy: float
    error_estimate: float = math.nan
    assemble_seconds: float = 0.0
    solve_seconds: float = 0.0
    status: str = "ok"


@dataclass
class SigmaSummary:
    sigma: float
    extrapolation: object  # norms.Extrapolation or None
    ratios: list           # (L, L_next, error(L_next) / error(L))
    fit: object = None     # RateFit or None
    message: str = ""


@dataclass
class RateFit:
    b: float
    c: float
    r2: float


def fit_rate(records, d=None):
    """Least squares ln(error) ~ ln(c) - b N^(1/(2d)); returns RateFit(b, c, r2).

    Accepts ExperimentRecords (their error estimates) or (N, error) pairs
    together with ``d``.
    """
    pts = []
    for r in records:
        if isinstance(r, ExperimentRecord):
            N, err, dd = r.N, r.error_estimate, r.d
        else:
            (N, err), dd = r, d
        if dd is None:
            raise ValueError("dimension needed for (N, error) pairs")
        if math.isfinite(err) and err > 0.0:
            pts.append((N ** (1.0 / (2 * dd)), math.log(err)))
    if len(pts) < 3:
        raise ValueError(f"rate fit needs at least 3 valid points, got {len(pts)}")
    x, y = np.array(pts).T
    A = np.stack([np.ones_like(x), -x], axis=1)
    (lnc, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([lnc, b])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    if abs(b) < 1e-14 * max(1.0, abs(lnc)):
        b = 0.0
    return RateFit(float(b), float(math.exp(lnc)), r2)


def _dump_path(base, sigma, L, many):
    if not many:
        return base
    stem, ext = os.path.splitext(base)
    return f"{stem}_sigma{sigma:g}_L{L}{ext}"


def run_one(config, sigma, L):
    q = config.degree_for(L)
    mesh = geometric_mesh(sigma, L, config.dim, config.variant)
    space = build_space(mesh, q)
    t0 = time.perf_counter()
    system = assemble(space, KernelParams(config.dim, config.s), config.rhs,
                      config.orders(), workers=1 if config.deterministic else config.workers)
    t1 = time.perf_counter()
    sol = solve(system)
    t2 = time.perf_counter()
    rec = ExperimentRecord(config.dim, config.s, sigma, L, q, space.N, sol.energy,
                           assemble_seconds=t1 - t0, solve_seconds=t2 - t1)
    return rec, system


def run_convergence(config):
    """Sweep sigma x L; returns (records, {sigma: SigmaSummary}).

    Failures of single rows are recorded (status, NaN energy) and the sweep
    continues.
    """
    records, summaries = [], {}
    many = len(config.sigmas) * len(config.layers) > 1
    for sigma in config.sigmas:
        rows = []
        for L in config.layers:
            try:
                rec, system = run_one(config, sigma, L)
                if config.dump_matrix:
                    system.dump_matrix(_dump_path(config.dump_matrix, sigma, L, many))
            except Exception as exc:  # noqa: BLE001 - recorded per row
                log.error("sigma=%g L=%d failed: %s", sigma, L, exc)
                q = config.degree_for(L)
                rec = ExperimentRecord(config.dim, config.s, sigma, L, q, -1, math.nan,
                                       status=f"failed: {exc}")
            log.info("d=%d sigma=%g L=%d q=%d N=%d energy=%.12g (%.1fs)", rec.d, sigma, L,
                     rec.q, rec.N, rec.energy, rec.assemble_seconds + rec.solve_seconds)
            rows.append(rec)
        summaries[sigma] = _summarize(sigma, rows)
        records.extend(rows)
    return records, summaries


def _summarize(sigma, rows):
    good = [r for r in rows if r.status == "ok"]
    if len(good) < 3:
        return SigmaSummary(sigma, None, [], None,
                            "fewer than 3 levels; no extrapolation")
    seq = EnergySequence([r.N for r in good], [r.energy for r in good])
    ext = extrapolate_energy(seq)
    if ext.ok:
        for r, e in zip(good, ext.errors):
            r.error_estimate = float(e)
    ratios = []
    for a, b in zip(good[:-1], good[1:]):
        ea, eb = a.error_estimate, b.error_estimate
        if ea > 0 and math.isfinite(ea) and math.isfinite(eb):
            ratios.append((a.L, b.L, eb / ea))
    fit = None
    try:
        fit = fit_rate(good)
    except ValueError:
        pass
    return SigmaSummary(sigma, ext, ratios, fit, ext.message)


def _fmt(v):
    return format(v, ".17g")


def write_csv(records, fh, deterministic=False):
    """CSV with the fixed header; floats with 17 significant digits.

    Timings are wall-clock and differ between runs, so deterministic mode
    writes them as 0.
    """
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        ta, ts = (0.0, 0.0) if deterministic else (r.assemble_seconds, r.solve_seconds)
        w.writerow([r.d, _fmt(r.sigma), r.L, r.q, r.N, _fmt(r.energy),
                    _fmt(r.error_estimate), _fmt(ta), _fmt(ts)])


def csv_text(records, deterministic=False):
    buf = io.StringIO()
    write_csv(records, buf, deterministic)
    return buf.getvalue()


def read_csv(fh, s=math.nan):
    """Parse rows written by write_csv (the CSV has no s column; pass it in)."""
    rd = csv.reader(fh)
    header = next(rd)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    out = []
    for row in rd:
        d, sigma, L, q, N, energy, err, ta, ts = row
        e = float(energy)
        out.append(ExperimentRecord(int(d), s, float(sigma), int(L), int(q), int(N), e,
                                    float(err), float(ta), float(ts),
                                    "ok" if math.isfinite(e) else "failed"))
    return out


def summary_lines(config, summaries):
    lines = []
    for sigma, sm in summaries.items():
        ext = sm.extrapolation
        if ext is None or not ext.ok:
            lines.append(f"sigma={sigma:g}: extrapolation failed ({sm.message})")
        else:
            lines.append(f"sigma={sigma:g}: a_inf={ext.a_inf:.15g} rho={ext.rho:.6g}")
        if sm.fit is not None:
            lines.append(f"sigma={sigma:g}: rate b={sm.fit.b:.6g} R2={sm.fit.r2:.6g}")
        if config.dim == 3 and sm.ratios:
            guide = math.sqrt(sigma)
            for la, lb, r in sm.ratios:
                lines.append(f"sigma={sigma:g}: error ratio L={lb}/L={la} = "
                             f"{r:.4g} (sigma^(1/2) = {guide:.4g})")
    return lines
