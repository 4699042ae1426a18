"""Fidelity, the (Delta, delta) characteristic surface, and theory-vs-simulation reports."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import capacity, flip_probability_monte_carlo, flip_probability_theoretical, lookup_preset
from .codes import best_repetition_rate, shannon_rate
from .errors import ConvergenceError, InfeasibleError, KappaTooSmallError, NoSolutionError, SSBError
from .lattice import INF, EmbeddingMoments, LatticeParams, auto_params, embedding_moments, params_from_spec
from .numerics import as_generator
from .security import security_ratio

DEFAULT_DELTA_GRID = tuple(np.round(np.linspace(0.2, 4.0, 20), 10)) + (INF,)
DEFAULT_FINE_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)
REPORT_TAG = "AWGN analog"


def fidelity_from_moments(mu, sigma_sq):
    """KL(N(0,1) || N(mu, sigma_sq)) in nats."""
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    u = sigma_sq - 1.0
    # 1/s - 1 + log s, written to avoid cancellation near s = 1; it is >= 0.
    shape = math.log1p(u) - u / sigma_sq
    return 0.5 * (max(shape, 0.0) + mu * mu / sigma_sq)


def fidelity_per_element(params):
    """Per-element fidelity (nats); a system with M' elements costs M' times this."""
    m = params if isinstance(params, EmbeddingMoments) else embedding_moments(params)
    return fidelity_from_moments(m.mu, m.sigma_sq)


def _reason(exc):
    if isinstance(exc, KappaTooSmallError):
        return "kappa_too_small"
    if isinstance(exc, ConvergenceError):
        return "no_convergence"
    if isinstance(exc, NoSolutionError):
        return "no_solution"
    if isinstance(exc, InfeasibleError):
        return "infeasible"
    return "domain_error"


@dataclass(frozen=True)
class SurfaceRow:
    delta_coarse: float
    delta_fine: float
    alpha: float
    sigma: float
    p: float
    capacity: float
    fidelity_per_element: float
    eta: float
    status: str = "ok"


SURFACE_HEADER = ("delta", "delta_fine", "alpha", "sigma", "p", "capacity", "fidelity_per_element", "eta", "status")


def surface_cell(delta_coarse, fraction, alpha, sigma, kappa=10, quad=None, backend=None):
    """One surface row; failures come back as NaN columns with a reason code."""
    D = float(delta_coarse)
    d = INF if math.isinf(D) else float(fraction) * D
    try:
        params = auto_params(D, d, kappa)
        moments = embedding_moments(params)
        p = flip_probability_theoretical(params, sigma, quad, backend)
        eta = security_ratio(alpha, math.sqrt(moments.sigma_sq)).eta
        return SurfaceRow(D, d, alpha, sigma, p, capacity(p), fidelity_per_element(moments), eta)
    except SSBError as exc:
        nan = math.nan
        return SurfaceRow(D, d, alpha, sigma, nan, nan, nan, nan, _reason(exc))


def sweep_surface(delta_grid=None, fine_fraction_grid=None, alpha=0.5, sigma=0.42, kappa=10, quad=None, backend=None):
    """Rows in grid order: coarse size outermost, fine fraction innermost.

    kappa is raised per cell as needed so small coarse sizes stay covered.
    For Delta = inf every fraction maps to the sign decision.
    """
    deltas = list(DEFAULT_DELTA_GRID if delta_grid is None else delta_grid)
    fractions = list(DEFAULT_FINE_FRACTIONS if fine_fraction_grid is None else fine_fraction_grid)
    if not deltas or not fractions:
        raise ValueError("grids must be non-empty")
    if any(not 0.0 <= f <= 1.0 for f in fractions):
        raise ValueError("fine fractions must lie in [0, 1]")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    return [surface_cell(D, f, alpha, sigma, kappa, quad, backend) for D in deltas for f in fractions]


# --- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class SchemeConfig:
    """A system to validate.

    ``kind`` is ``ssb`` (Shannon-rate reporting), ``gaussian-shading`` (sign
    decision with a repetition code) or ``prc`` (literature baseline only).
    """

    name: str
    kind: str = "ssb"
    params: LatticeParams = field(default_factory=lambda: LatticeParams(INF, INF))
    alpha: float = 0.5
    L: int = 16384

    def __post_init__(self):
        if self.kind not in ("ssb", "gaussian-shading", "prc"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")


def default_schemes(alpha=0.5, L=16384, kappa=10):
    return [
        SchemeConfig("SSB(inf,inf)", "ssb", LatticeParams(INF, INF), alpha, L),
        SchemeConfig("SSB(1.6,0)", "ssb", LatticeParams(1.6, 0.0, kappa), alpha, L),
        SchemeConfig("SSB(1.6,auto)", "ssb", params_from_spec("1.6,auto", kappa), alpha, L),
        SchemeConfig("Gaussian-Shading", "gaussian-shading", LatticeParams(INF, INF), alpha, L),
        SchemeConfig("PRC", "prc", LatticeParams(INF, INF), alpha, L),
    ]


@dataclass(frozen=True)
class ValidationRow:
    scheme: str
    sigma: float
    p_theory: float
    p_empirical: float
    stderr: float
    rate_theory: float
    rate_empirical: float
    fidelity: float
    eta: float
    preset: str = ""
    status: str = "ok"


VALIDATION_HEADER = (
    "scheme",
    "preset",
    "sigma",
    "p_theory",
    "p_empirical",
    "stderr",
    "abs_diff",
    "rate_theory",
    "rate_empirical",
    "fidelity",
    "eta",
    "status",
)


def resolve_sigma(entry):
    """A number is used as sigma; a "Model/Transform" preset gives sigma = sqrt(variance)."""
    if isinstance(entry, str):
        try:
            return float(entry), ""
        except ValueError:
            preset = lookup_preset(entry)
            return preset.sigma, preset.name
    return float(entry), ""


def validate_system(scheme_configs, sigma_list, n_mc, rng, M=32, pe_target=1e-6, quad=None, backend=None):
    """Theoretical and Monte Carlo flip rates with the rate each scheme reports.

    SSB schemes report the Shannon rate, Gaussian-Shading the best repetition
    rate at message error ``pe_target`` over M bits, PRC only its literature
    security ratio 1/L.
    """
    if int(n_mc) < 10**4:
        raise ValueError("n_mc must be at least 1e4")
    gen = as_generator(rng)
    nan = math.nan
    rows = []
    for scheme in scheme_configs:
        for entry in sigma_list:
            sigma, label = resolve_sigma(entry)
            if scheme.kind == "prc":
                rows.append(
                    ValidationRow(scheme.name, sigma, nan, nan, nan, nan, nan, nan, 1.0 / scheme.L, label, "literature")
                )
                continue
            try:
                p_th = flip_probability_theoretical(scheme.params, sigma, quad, backend)
                mc = flip_probability_monte_carlo(scheme.params, sigma, n_mc, gen)
                fid = fidelity_per_element(scheme.params)
                if scheme.kind == "ssb":
                    r_th, r_emp = shannon_rate(p_th).rate, shannon_rate(mc.p).rate
                    sigma_u = math.sqrt(embedding_moments(scheme.params).sigma_sq)
                    eta = security_ratio(scheme.alpha, sigma_u).eta
                else:
                    r_th = _repetition_rate(p_th, M, pe_target)
                    r_emp = _repetition_rate(mc.p, M, pe_target)
                    eta = 1.0 / scheme.L
                rows.append(ValidationRow(scheme.name, sigma, p_th, mc.p, mc.stderr, r_th, r_emp, fid, eta, label))
            except SSBError as exc:
                rows.append(ValidationRow(scheme.name, sigma, nan, nan, nan, nan, nan, nan, nan, label, _reason(exc)))
    return rows


def _repetition_rate(p, M, pe_target):
    if p >= 0.5:
        return 0.0
    try:
        return best_repetition_rate(p, M, pe_target).rate
    except InfeasibleError:
        return 0.0


# --- export --------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_surface_csv(path, rows, comments=()):
    with open(path, "w", newline="") as fh:
        for line in (f"{REPORT_TAG}: closed-form surface",) + tuple(comments):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(SURFACE_HEADER)
        for r in rows:
            w.writerow(
                [_fmt(v) for v in (r.delta_coarse, r.delta_fine, r.alpha, r.sigma, r.p, r.capacity, r.fidelity_per_element, r.eta)]
                + [r.status]
            )


def write_validation_csv(path, rows, comments=()):
    with open(path, "w", newline="") as fh:
        header = (f"{REPORT_TAG}: latent noise modeled as white Gaussian; Monte Carlo in watermark space",)
        for line in header + tuple(comments):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(VALIDATION_HEADER)
        for r in rows:
            diff = abs(r.p_theory - r.p_empirical)
            w.writerow(
                [r.scheme, r.preset]
                + [_fmt(v) for v in (r.sigma, r.p_theory, r.p_empirical, r.stderr, diff, r.rate_theory, r.rate_empirical, r.fidelity, r.eta)]
                + [r.status]
            )


def write_surface_gnuplot(path, rows):
    """Blocks of (delta, fraction, capacity, fidelity, eta) separated by blank lines, one block per delta."""
    with open(path, "w") as fh:
        fh.write(f"# {REPORT_TAG}: delta fine_fraction capacity fidelity_per_element eta\n")
        last = None
        for r in rows:
            if last is not None and r.delta_coarse != last:
                fh.write("\n")
            last = r.delta_coarse
            frac = 1.0 if math.isinf(r.delta_coarse) else (r.delta_fine / r.delta_coarse)
            vals = (r.delta_coarse, frac, r.capacity, r.fidelity_per_element, r.eta)
            fh.write(" ".join("nan" if isinstance(v, float) and math.isnan(v) else _fmt(v) for v in vals) + "\n")
