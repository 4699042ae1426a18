"""Nested one-dimensional lattices: decision, sampling, moments.

Conventions
-----------
Coarse cells carrying bit 1 are ``[a_k, b_k) = [2k*D, 2k*D + D)`` for integer
``k``; the fine cell inside is ``[alpha_k, beta_k]``, centred, of width ``d``.
A codeword bit ``c`` is carried by ``sign(c) * Z`` with ``sign(0) = -1`` and
``Z`` a standard normal draw conditioned on a fine cell, the cell itself being
chosen with probability ``P_k = 2 (Phi(b_k) - Phi(a_k))``.

``D = inf`` is the sign decision: one cell ``[0, inf)`` whose fine cell is the
whole cell.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri

from .errors import DimensionError, DomainError, KappaTooSmallError, NoSolutionError
from .numerics import as_generator, normal_mass, std_normal_pdf, truncated_std_normal

INF = math.inf
MASS_TOLERANCE = 1e-6
# Cells whose weight falls below this are dropped from moment sums.
NEGLIGIBLE_WEIGHT = 1e-15


@dataclass(frozen=True)
class LatticeParams:
    delta_coarse: float
    delta_fine: float
    kappa: int = 10

    def __post_init__(self):
        D = float(self.delta_coarse)
        d = float(self.delta_fine)
        if math.isnan(D) or not D > 0:
            raise DomainError(f"delta_coarse must be positive, got {self.delta_coarse}")
        if math.isinf(D):
            # Sign decision: the fine cell is the whole half-line.
            d = INF
        elif math.isnan(d) or not 0.0 <= d <= D:
            raise DomainError(f"delta_fine must lie in [0, delta_coarse], got {self.delta_fine}")
        if int(self.kappa) < 1:
            raise DomainError("kappa must be >= 1")
        object.__setattr__(self, "delta_coarse", D)
        object.__setattr__(self, "delta_fine", d)
        object.__setattr__(self, "kappa", int(self.kappa))

    @property
    def is_sign(self):
        return math.isinf(self.delta_coarse)

    @property
    def is_discrete(self):
        """True when the fine cells collapse onto their midpoints."""
        return not self.is_sign and self.delta_fine == 0.0

    def label(self):
        return f"({_fmt(self.delta_coarse)}, {_fmt(self.delta_fine)})"


def _fmt(x):
    return "inf" if math.isinf(x) else f"{x:g}"


def required_kappa(delta_coarse, coverage=1e-12):
    """Smallest kappa whose cells leave at most ``coverage`` mass uncovered."""
    if math.isinf(delta_coarse):
        return 1
    reach = -float(ndtri(coverage / 2))
    return max(1, int(math.ceil(reach / (2.0 * delta_coarse))) + 1)


def auto_params(delta_coarse, delta_fine, kappa=10):
    """LatticeParams with kappa raised as needed for small coarse cells."""
    k = kappa if math.isinf(delta_coarse) else max(kappa, required_kappa(delta_coarse))
    return LatticeParams(delta_coarse, delta_fine, k)


@dataclass(frozen=True)
class CellGeometry:
    k: int
    a_k: float
    b_k: float
    alpha_k: float
    beta_k: float
    weight: float


@dataclass(frozen=True)
class CellTable:
    """Column view of the cells, convenient for vectorized work."""

    k: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    weight: np.ndarray
    raw_mass: float

    def rows(self):
        return [
            CellGeometry(int(k), float(a), float(b), float(al), float(be), float(w))
            for k, a, b, al, be, w in zip(self.k, self.a, self.b, self.alpha, self.beta, self.weight)
        ]


def cell_table(params: LatticeParams) -> CellTable:
    if params.is_sign:
        one = np.ones(1)
        return CellTable(np.zeros(1, dtype=int), 0 * one, INF * one, 0 * one, INF * one, one, 1.0)
    D, d = params.delta_coarse, params.delta_fine
    k = np.arange(-params.kappa, params.kappa + 1)
    a = 2.0 * k * D
    b = a + D
    alpha = a + 0.5 * (D - d)
    beta = alpha + d
    raw = 2.0 * normal_mass(a, b)
    total = float(np.sum(raw))
    if total < 1.0 - MASS_TOLERANCE:
        raise KappaTooSmallError(
            f"kappa={params.kappa} covers only {total:.9f} of the mass for delta={D:g}; "
            f"use kappa >= {required_kappa(D)}"
        )
    return CellTable(k, a, b, alpha, beta, raw / total, total)


def cell_weights(params: LatticeParams):
    """Cells ``k`` in [-kappa, kappa] with renormalized weights summing to 1."""
    return cell_table(params).rows()


def lattice_decide(x, delta_coarse):
    """Bits ((-1)^floor(x/D) + 1) / 2; for D = inf, 1 iff x > 0."""
    x = np.asarray(x, dtype=float)
    if math.isinf(delta_coarse):
        return (x > 0).astype(np.uint8)
    return (np.mod(np.floor(x / delta_coarse), 2.0) == 0).astype(np.uint8)


def bit_signs(codeword):
    c = np.asarray(codeword)
    if c.size and not np.all((c == 0) | (c == 1)):
        raise DomainError("codeword entries must be 0 or 1")
    return np.where(c == 1, 1.0, -1.0)


def sample_unsigned(params: LatticeParams, size, rng):
    """Unsigned magnitudes Z (before applying the codeword signs)."""
    gen = as_generator(rng)
    size = (int(size),) if np.ndim(size) == 0 else tuple(size)
    if params.is_sign:
        return truncated_std_normal(0.0, INF, gen, size=size)
    cells = cell_table(params)
    idx = np.searchsorted(np.cumsum(cells.weight), gen.random(size), side="right")
    idx = np.minimum(idx, cells.k.size - 1)
    mid = 0.5 * (cells.a[idx] + cells.b[idx])
    if params.is_discrete:
        return mid
    lo, hi = cells.alpha[idx], cells.beta[idx]
    # Fine cells narrower than the float spacing collapse to their midpoint.
    point = ~(lo < hi)
    if np.any(point):
        out = mid.copy()
        out[~point] = truncated_std_normal(lo[~point], hi[~point], gen)
        return out
    return truncated_std_normal(lo, hi, gen)


def sample_watermark(params: LatticeParams, codeword, rng, n=None):
    """Watermark-space vector(s) whose coarse decision equals ``codeword``.

    With ``n`` given, returns an (n, M') array of independent draws for the
    same codeword.
    """
    signs = bit_signs(codeword)
    if signs.ndim != 1 or signs.size < 1:
        raise DimensionError("codeword must be a non-empty bit vector")
    shape = signs.shape if n is None else (int(n), signs.size)
    z = signs * sample_unsigned(params, shape, rng)
    # Rounding in x / D can push a draw sitting on a cell edge into the
    # neighbouring cell; such entries are moved to their cell midpoint.
    target = np.broadcast_to(signs > 0, shape)
    bad = lattice_decide(z, params.delta_coarse).astype(bool) != target
    if np.any(bad) and not params.is_sign:
        D = params.delta_coarse
        s_bad = np.broadcast_to(signs, shape)[bad]
        k = np.floor(s_bad * z[bad] / (2.0 * D) + 0.25)
        z[bad] = s_bad * (2.0 * k + 0.5) * D
    return z


@dataclass(frozen=True)
class EmbeddingMoments:
    mu: float
    sigma_sq: float

    @property
    def second_moment(self):
        return self.sigma_sq + self.mu * self.mu


def embedding_moments(params: LatticeParams) -> EmbeddingMoments:
    """Unsigned mean and variance of one watermark-space entry."""
    if params.is_sign:
        mu = math.sqrt(2.0 / math.pi)
        return EmbeddingMoments(mu, 1.0 - 2.0 / math.pi)
    cells = cell_table(params)
    keep = cells.weight >= NEGLIGIBLE_WEIGHT
    w = cells.weight[keep]
    if params.is_discrete:
        m = 0.5 * (cells.a[keep] + cells.b[keep])
        mean, second = m, m * m
    else:
        al, be = cells.alpha[keep], cells.beta[keep]
        mean, second = _truncated_moments(al, be)
    mu = float(np.sum(w * mean))
    var = float(np.sum(w * second)) - mu * mu
    return EmbeddingMoments(mu, var)


def _truncated_moments(al, be):
    """E[Z] and E[Z^2] of N(0,1) conditioned on [al, be], elementwise."""
    mass = normal_mass(al, be)
    pa, pb = std_normal_pdf(al), std_normal_pdf(be)
    mean = (pa - pb) / mass
    second = 1.0 + (al * pa - be * pb) / mass
    # Very narrow cells lose digits to cancellation; there the midpoint
    # expansion is exact to O(width^2).
    narrow = (be - al) < 1e-5
    if np.any(narrow):
        m = 0.5 * (al + be)
        h2 = (0.5 * (be - al)) ** 2
        mean = np.where(narrow, m - m * h2 / 3.0, mean)
        second = np.where(narrow, m * m + h2 * (1.0 - 2.0 * m * m) / 3.0, second)
    return mean, second


def _sigma_sq(delta_coarse, delta_fine, kappa):
    return embedding_moments(LatticeParams(delta_coarse, delta_fine, kappa)).sigma_sq


def perfect_security_limit(kappa=10):
    """The coarse size above which no fine size gives unit variance."""
    return brentq(lambda D: _sigma_sq(D, 0.0, max(kappa, required_kappa(D))) - 1.0, 1.0, 2.5, xtol=1e-14)


def solve_perfect_security_delta(delta_coarse, kappa=10, tol=1e-8):
    """Fine size d* with sigma_sq(D, d*) = 1, by bisection on [0, D].

    sigma_sq decreases from sigma_sq(D, 0) to 1 - mu^2 < 1 as d grows to D, so a
    root exists iff sigma_sq(D, 0) > 1.
    """
    D = float(delta_coarse)
    if not (D > 0 and math.isfinite(D)):
        raise DomainError("delta_coarse must be a positive finite number")
    kappa = max(kappa, required_kappa(D))

    def g(d):
        return _sigma_sq(D, d, kappa) - 1.0

    g0 = g(0.0)
    if g0 <= 0.0:
        raise NoSolutionError(
            f"no fine size reaches unit variance for delta_coarse={D:g}: sigma_sq(D, 0) = {g0 + 1.0:.6f} <= 1"
        )
    values = np.array([g(d) for d in np.linspace(0.0, D, 33)])
    if np.any(np.diff(values) > 1e-12):
        raise NoSolutionError(f"sigma_sq is not monotone in the fine size for delta_coarse={D:g}")
    if values[-1] >= 0.0:
        # Whole-cell variance is 1 - mu^2, so this only happens when mu ~ 0.
        return D
    lo, hi = 0.0, D
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if abs(g(root)) > tol:
        root = brentq(g, lo, hi, xtol=1e-15)
    return root


def params_from_spec(text, kappa=10):
    """Parse ``"D,d"`` where either side may be ``inf`` and d may be ``auto``."""
    parts = [p.strip().lower() for p in str(text).split(",")]
    if len(parts) != 2:
        raise DomainError(f"lattice parameters must look like 'D,d', got {text!r}")
    D = INF if parts[0] in ("inf", "+inf", "infinity") else float(parts[0])
    if parts[1] == "auto":
        if math.isinf(D):
            raise DomainError("'auto' fine size needs a finite coarse size")
        d = solve_perfect_security_delta(D, kappa=kappa)
    else:
        d = INF if parts[1] in ("inf", "+inf", "infinity") else float(parts[1])
    return auto_params(D, d, kappa)
