"""AWGN channel model, the flip-probability characteristic, capacity, presets.

The characteristic is the probability that a watermark-space entry, drawn by
the lattice sampler and hit by N(0, sigma^2) noise, leaves its coarse decision
region. By the symmetry ``Lambda(-x) = 1 - Lambda(x)`` it does not depend on
the bit, so everything is computed for bit 1.
"""

import csv
import math
import re
from dataclasses import dataclass

import numpy as np

from ._accel import njit, resolve_backend
from .errors import ConvergenceError, DomainError
from .lattice import LatticeParams, cell_table, lattice_decide, sample_watermark
from .numerics import QuadratureSpec, as_generator, binary_entropy, integrate, normal_mass

# Integration and noise reach, in standard deviations.
REACH = 12.0
SKIP_WEIGHT = 1e-12
_SIMPSON_MAX_DEPTH = 60
_MC_CHUNK = 1 << 20


@dataclass(frozen=True)
class ChannelPoint:
    sigma: float
    p: float
    stderr: float = 0.0
    n: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.5:
            raise DomainError(f"flip probability must lie in [0, 0.5], got {self.p}")
        if self.stderr < 0:
            raise DomainError("stderr must be nonnegative")


@dataclass(frozen=True)
class NoisePreset:
    model: str
    transform: str
    sigma_sq: float

    @property
    def name(self):
        return f"{self.model}/{self.transform}"

    @property
    def sigma(self):
        return math.sqrt(self.sigma_sq)


def awgn(z, sigma, rng):
    """Add i.i.d. N(0, sigma^2) noise; sigma = 0 returns an unchanged copy."""
    sigma = float(sigma)
    if not sigma >= 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    z = np.array(z, dtype=float)
    if sigma == 0.0:
        return z
    return z + sigma * as_generator(rng).standard_normal(z.shape)


# --- theoretical characteristic -------------------------------------------


@njit(cache=True)
def _stay(t, sigma, delta, kmin, kmax):
    """P(t + sigma * N(0,1) lands in a bit-1 coarse cell)."""
    s = 1.0 / (sigma * math.sqrt(2.0))
    if math.isinf(delta):
        return 0.5 * math.erfc(-t * s)
    acc = 0.0
    for k in range(kmin, kmax + 1):
        a = 2.0 * k * delta
        # Phi((b - t)/sigma) - Phi((a - t)/sigma), via erfc to keep tails exact.
        acc += 0.5 * (math.erfc((a - t) * s) - math.erfc((a + delta - t) * s))
    return acc


@njit(cache=True)
def _density_times_stay(t, sigma, delta, kmin, kmax, inv_mass):
    return math.exp(-0.5 * t * t) * 0.3989422804014327 * inv_mass * _stay(t, sigma, delta, kmin, kmax)


@njit(cache=True)
def _simpson_cell(lo, hi, sigma, delta, kmin, kmax, inv_mass, tol, max_splits):
    """Adaptive Simpson of phi(t)/Z * stay(t) over [lo, hi]; returns (value, ok)."""
    panels = 8
    cap = 4 * _SIMPSON_MAX_DEPTH + 4 * panels
    st_lo = np.empty(cap)
    st_hi = np.empty(cap)
    st_flo = np.empty(cap)
    st_fmid = np.empty(cap)
    st_fhi = np.empty(cap)
    st_whole = np.empty(cap)
    st_eps = np.empty(cap)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    width = hi - lo
    for i in range(panels):
        a = lo + width * i / panels
        b = hi if i == panels - 1 else lo + width * (i + 1) / panels
        m = 0.5 * (a + b)
        fa = _density_times_stay(a, sigma, delta, kmin, kmax, inv_mass)
        fm = _density_times_stay(m, sigma, delta, kmin, kmax, inv_mass)
        fb = _density_times_stay(b, sigma, delta, kmin, kmax, inv_mass)
        st_lo[top] = a
        st_hi[top] = b
        st_flo[top] = fa
        st_fmid[top] = fm
        st_fhi[top] = fb
        st_whole[top] = (b - a) * (fa + 4.0 * fm + fb) / 6.0
        st_eps[top] = tol * (b - a) / width
        st_depth[top] = 0
        top += 1
    total = 0.0
    splits = 0
    while top > 0:
        top -= 1
        a = st_lo[top]
        b = st_hi[top]
        fa = st_flo[top]
        fm = st_fmid[top]
        fb = st_fhi[top]
        whole = st_whole[top]
        eps = st_eps[top]
        depth = st_depth[top]
        m = 0.5 * (a + b)
        flm = _density_times_stay(0.5 * (a + m), sigma, delta, kmin, kmax, inv_mass)
        frm = _density_times_stay(0.5 * (m + b), sigma, delta, kmin, kmax, inv_mass)
        left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
        right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
        diff = left + right - whole
        if abs(diff) <= 15.0 * eps or depth >= _SIMPSON_MAX_DEPTH:
            total += left + right + diff / 15.0
            continue
        splits += 1
        if splits > max_splits:
            return total, False
        st_lo[top] = a
        st_hi[top] = m
        st_flo[top] = fa
        st_fmid[top] = flm
        st_fhi[top] = fm
        st_whole[top] = left
        st_eps[top] = 0.5 * eps
        st_depth[top] = depth + 1
        top += 1
        st_lo[top] = m
        st_hi[top] = b
        st_flo[top] = fm
        st_fmid[top] = frm
        st_fhi[top] = fb
        st_whole[top] = right
        st_eps[top] = 0.5 * eps
        st_depth[top] = depth + 1
        top += 1
    return total, True


def _inner_range(lo, hi, sigma, delta):
    if math.isinf(delta):
        return 0, 0
    kmin = math.floor((lo - REACH * sigma) / (2.0 * delta)) - 1
    kmax = math.ceil((hi + REACH * sigma) / (2.0 * delta)) + 1
    return int(kmin), int(kmax)


def _cell_integral(lo, hi, sigma, delta, inv_mass, quad, backend):
    kmin, kmax = _inner_range(lo, hi, sigma, delta)
    if backend == "numba":
        value, ok = _simpson_cell(
            lo, hi, sigma, delta, kmin, kmax, inv_mass, quad.absolute_tolerance, quad.max_subdivisions
        )
        if not ok:
            raise ConvergenceError("flip-probability quadrature did not converge", best_estimate=value)
        return value
    stay = _py(_stay)
    return integrate(
        lambda t: math.exp(-0.5 * t * t) * 0.3989422804014327 * inv_mass * stay(t, sigma, delta, kmin, kmax),
        lo,
        hi,
        quad,
    )


def _py(fn):
    """Interpreted version of a jitted helper."""
    return getattr(fn, "py_func", fn)


def stay_probability(params: LatticeParams, sigma, quad=None, backend=None):
    """Probability that a sampled entry keeps its decoded bit under noise sigma."""
    quad = quad or QuadratureSpec()
    backend = resolve_backend(backend)
    sigma = float(sigma)
    if params.is_sign:
        inv_mass = 2.0
        return _cell_integral(0.0, REACH, sigma, math.inf, inv_mass, quad, backend)
    cells = cell_table(params)
    D = params.delta_coarse
    total = 0.0
    for j in range(cells.k.size):
        w = cells.weight[j]
        if w < SKIP_WEIGHT:
            continue
        al, be = cells.alpha[j], cells.beta[j]
        if params.is_discrete:
            m = 0.5 * (cells.a[j] + cells.b[j])
            kmin, kmax = _inner_range(m, m, sigma, D)
            stay = _stay if backend == "numba" else _py(_stay)
            total += w * stay(m, sigma, D, kmin, kmax)
            continue
        lo, hi = max(al, -REACH), min(be, REACH)
        if lo >= hi:
            continue
        inv_mass = 1.0 / normal_mass(al, be)
        total += w * _cell_integral(lo, hi, sigma, D, inv_mass, quad, backend)
    return total


def flip_probability_theoretical(params: LatticeParams, sigma, quad=None, backend=None):
    """Closed-form flip probability, inner integrals by adaptive Simpson.

    Cells with weight below 1e-12 are skipped, integration is clipped to
    |t| <= 12, and the result is clamped to [0, 0.5].
    """
    sigma = float(sigma)
    if not sigma >= 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0.0:
        return 0.0
    p = 1.0 - stay_probability(params, sigma, quad, backend)
    return float(min(max(p, 0.0), 0.5))


def flip_probability_monte_carlo(params: LatticeParams, sigma, n, rng) -> ChannelPoint:
    """Empirical flip rate of n sampled entries under watermark-space AWGN."""
    n = int(n)
    if n < 1000:
        raise DomainError("Monte Carlo needs n >= 1000 trials")
    sigma = float(sigma)
    if not sigma >= 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    gen = as_generator(rng)
    flips = 0
    done = 0
    while done < n:
        m = min(_MC_CHUNK, n - done)
        bits = gen.integers(0, 2, size=m)
        z = sample_watermark(params, bits, gen)
        z_hat = awgn(z, sigma, gen)
        flips += int(np.count_nonzero(lattice_decide(z_hat, params.delta_coarse) != bits))
        done += m
    return _point(sigma, flips, n)


def _point(sigma, flips, n):
    p = flips / n
    stderr = math.sqrt(p * (1.0 - p) / n)
    # The decision is symmetric; an estimate above 1/2 is sampling noise.
    return ChannelPoint(sigma, min(p, 0.5), stderr, n)


def pool_channel_points(points):
    """Merge Monte Carlo points for the same sigma by pooling their counts."""
    points = list(points)
    if not points:
        raise DomainError("nothing to pool")
    sigmas = {pt.sigma for pt in points}
    if len(sigmas) != 1:
        raise DomainError("can only pool points sharing one sigma")
    n = sum(pt.n for pt in points)
    flips = sum(round(pt.p * pt.n) for pt in points)
    return _point(points[0].sigma, flips, n)


def capacity(p):
    """Shannon capacity 1 - h2(p) of a BSC with crossover p in [0, 0.5]."""
    p = float(p)
    if not 0.0 <= p <= 0.5:
        raise DomainError(f"crossover probability must lie in [0, 0.5], got {p}")
    return 1.0 - binary_entropy(p)


# --- presets ---------------------------------------------------------------

# Equivalent latent-space noise variances for three generators under common
# image transformations.
_PRESET_TRANSFORMS = ("Identity", "Brightness 0.2", "Contrast 2.0", "JPEG QF80", "JPEG QF50", "Center Crop 50%")
_PRESET_VALUES = {
    "Sana": (0.21, 0.29, 0.46, 0.31, 0.42, 1.94),
    "Z-image": (0.35, 0.45, 0.66, 0.9, 1.08, 1.51),
    "Qwen": (0.34, 0.44, 0.78, 0.78, 1.09, 2.09),
}


def preset_table():
    return [
        NoisePreset(model, transform, value)
        for model, values in _PRESET_VALUES.items()
        for transform, value in zip(_PRESET_TRANSFORMS, values)
    ]


def _norm(text):
    return re.sub(r"[^a-z0-9]", "", text.lower())


def lookup_preset(model, transform=None):
    """Find a preset by model and transform, or by a single "Model/Transform" name.

    Matching ignores case, spaces and punctuation, so "JPEG-QF50" and
    "jpeg qf50" both work.
    """
    if transform is None:
        if "/" not in model:
            raise DomainError(f"preset name must look like 'Model/Transform', got {model!r}")
        model, transform = model.split("/", 1)
    for preset in preset_table():
        if _norm(preset.model) == _norm(model) and _norm(preset.transform) == _norm(transform):
            return preset
    raise DomainError(f"unknown preset {model}/{transform}")


def lookup(model, transform):
    """Table variance sigma^2 for a (model, transform) pair."""
    return lookup_preset(model, transform).sigma_sq


# --- export ----------------------------------------------------------------

CURVE_HEADER = ("delta", "delta_fine", "sigma", "p_theory", "p_mc", "stderr", "capacity")


def characteristic_curve(params: LatticeParams, sigmas, n_mc=0, rng=None, quad=None, backend=None):
    """Rows of CURVE_HEADER; the Monte Carlo columns are NaN when n_mc is 0."""
    gen = as_generator(rng if rng is not None else 0)
    rows = []
    for sigma in sigmas:
        p = flip_probability_theoretical(params, sigma, quad, backend)
        if n_mc:
            mc = flip_probability_monte_carlo(params, sigma, n_mc, gen)
            p_mc, se = mc.p, mc.stderr
        else:
            p_mc = se = math.nan
        rows.append((params.delta_coarse, params.delta_fine, float(sigma), p, p_mc, se, capacity(p)))
    return rows


def write_curve_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_HEADER)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)
