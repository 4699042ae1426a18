"""Spectral security analysis: Marchenko-Pastur baselines, PCA key recovery, spoofing."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .keying import CarrierMatrix, decode, embed_latent, orthonormal_columns
from .lattice import LatticeParams, embedding_moments, lattice_decide, sample_watermark
from .numerics import as_generator, symmetric_eigen

DEFAULT_TOL = 0.02
POLE_TOLERANCE = 1e-9
# 0.999 quantile of the Tracy-Widom (beta = 1) law.
TW_QUANTILE = 3.27


def mp_support(L, N):
    """Marchenko-Pastur support for aspect ratio L/N."""
    if L < 1 or N < 1:
        raise DomainError("L and N must be positive")
    r = math.sqrt(L / N)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


@dataclass(frozen=True)
class SecurityRatio:
    eta: float

    @property
    def perfect(self):
        return math.isinf(self.eta)

    def samples_needed(self, L):
        """Observation count eta * L, floored at one observation."""
        return math.inf if self.perfect else max(1.0, self.eta * L)


def security_ratio(alpha, sigma_u):
    """eta = ((1 - sqrt(alpha) sigma_u) / (1 - sigma_u))^2, infinite at sigma_u = 1."""
    alpha = float(alpha)
    sigma_u = float(sigma_u)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not sigma_u > 0.0:
        raise DomainError(f"sigma_u must be positive, got {sigma_u}")
    if abs(sigma_u - 1.0) < POLE_TOLERANCE:
        return SecurityRatio(math.inf)
    return SecurityRatio(((1.0 - math.sqrt(alpha) * sigma_u) / (1.0 - sigma_u)) ** 2)


def floor_eta(eta, L):
    """At least one observation is always needed: eta >= 1/L."""
    return max(float(eta), 1.0 / L)


def params_security_ratio(params: LatticeParams, M_prime, L):
    return security_ratio(M_prime / L, math.sqrt(embedding_moments(params).sigma_sq))


# --- spectra -----------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    mp_lower: float
    mp_upper: float
    outliers_low: int
    outliers_high: int
    N: int
    L: int
    low_threshold: float
    high_threshold: float

    @property
    def low_mask(self):
        return self.eigenvalues < self.low_threshold

    @property
    def high_mask(self):
        return self.eigenvalues > self.high_threshold

    def low_cluster_mean(self):
        low = self.eigenvalues[self.low_mask]
        return float(low.mean()) if low.size else math.nan

    def high_cluster_mean(self):
        high = self.eigenvalues[self.high_mask]
        return float(high.mean()) if high.size else math.nan


def _samples(samples):
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise DimensionError("samples must be an (N, L) array")
    if x.shape[0] < 2:
        raise DomainError("at least two samples are needed")
    return x


def empirical_covariance(samples, centered=True):
    """(N-1)-normalized covariance around the sample mean, or the raw second moment."""
    x = _samples(samples)
    if centered:
        x = x - x.mean(axis=0)
        return x.T @ x / (x.shape[0] - 1)
    return x.T @ x / x.shape[0]


def edge_fluctuation_scales(L, N):
    """Tracy-Widom scales of the smallest and largest null eigenvalues.

    The lower scale is 0 when L >= N (hard edge at zero).
    """
    n, p = float(N), float(L)
    upper = (math.sqrt(n) + math.sqrt(p)) * (1.0 / math.sqrt(n) + 1.0 / math.sqrt(p)) ** (1.0 / 3.0) / n
    if p >= n:
        return 0.0, upper
    lower = (math.sqrt(n) - math.sqrt(p)) * (1.0 / math.sqrt(p) - 1.0 / math.sqrt(n)) ** (1.0 / 3.0) / n
    return lower, upper


def outlier_thresholds(L, N, tol=DEFAULT_TOL):
    """MP edges widened by the larger of ``tol`` (relative) and edge fluctuations."""
    lo, hi = mp_support(L, N)
    s_lo, s_hi = edge_fluctuation_scales(L, N)
    return lo - max(tol * lo, TW_QUANTILE * s_lo), hi + max(tol * hi, TW_QUANTILE * s_hi)


def _classify(values, N, L, tol, centered=True):
    # Centering spends one degree of freedom, so the null spectrum is that of
    # N - 1 samples; near the lower edge that shift exceeds the tolerance.
    n_eff = N - 1 if centered else N
    lo, hi = mp_support(L, n_eff)
    t_lo, t_hi = outlier_thresholds(L, n_eff, tol)
    n_low = int(np.count_nonzero(values < t_lo))
    n_high = int(np.count_nonzero(values > t_hi))
    return SpectrumReport(values, lo, hi, n_low, n_high, N, L, t_lo, t_hi)


def eigen_spectrum_report(samples, tol=DEFAULT_TOL, centered=True, backend=None):
    x = _samples(samples)
    values, _ = symmetric_eigen(empirical_covariance(x, centered), want_vectors=False, backend=backend)
    return _classify(values, x.shape[0], x.shape[1], tol, centered)


def spectrum_histogram(eigenvalues, bins=50, value_range=None):
    counts, edges = np.histogram(np.asarray(eigenvalues, dtype=float), bins=bins, range=value_range)
    return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]


def write_histogram_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("bin_lo", "bin_hi", "count"))
        w.writerows(rows)


# --- attack ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KeyEstimate:
    """Estimated watermark directions, most deviant eigenvalue first."""

    subspace: np.ndarray
    cluster_mean_eigenvalue: float
    eigenvalues: np.ndarray
    report: SpectrumReport = None

    @property
    def m(self):
        return self.subspace.shape[1]


def pca_attack(samples, tol=DEFAULT_TOL, centered=True, backend=None):
    """Eigenvectors of the sample covariance lying outside the widened MP support."""
    x = _samples(samples)
    values, vectors = symmetric_eigen(empirical_covariance(x, centered), want_vectors=True, backend=backend)
    report = _classify(values, x.shape[0], x.shape[1], tol, centered)
    idx = np.flatnonzero(report.low_mask | report.high_mask)
    idx = idx[np.argsort(-np.abs(np.log(values[idx])), kind="stable")]
    sub = vectors[:, idx]
    mean = float(values[idx].mean()) if idx.size else math.nan
    return KeyEstimate(sub, mean, values[idx], report)


def complete_subspace(basis, M_prime, rng):
    """Extend orthonormal columns to M_prime columns with random orthogonal directions."""
    basis = np.asarray(basis, dtype=float)
    L, m = basis.shape
    if m >= M_prime:
        return basis[:, :M_prime]
    g = as_generator(rng).standard_normal((L, M_prime - m))
    g -= basis @ (basis.T @ g)
    return np.hstack([basis, orthonormal_columns(g)])


def spoof_trial(estimate: KeyEstimate, codeword, true_key, params: LatticeParams, rng, samples=None):
    """Forge a latent with the estimated key and check it decodes to ``codeword``.

    An eigenvector is only defined up to sign. When the attacker's observed
    ``samples`` are given, the attacker first decodes them with the estimate
    (majority vote per bit) and embeds that codeword, which cancels any sign
    flip. Without samples the target codeword is embedded directly.
    """
    gen = as_generator(rng)
    codeword = np.asarray(codeword, dtype=np.uint8)
    U_true = true_key.U if isinstance(true_key, CarrierMatrix) else np.asarray(true_key, dtype=float)
    M_prime = U_true.shape[1]
    if codeword.size != M_prime:
        raise DimensionError(f"codeword length {codeword.size} does not match M'={M_prime}")
    U_hat = complete_subspace(estimate.subspace, M_prime, gen)
    if samples is not None:
        votes = lattice_decide(np.asarray(samples, dtype=float) @ U_hat, params.delta_coarse)
        forged_bits = (2 * votes.sum(axis=0) > votes.shape[0]).astype(np.uint8)
    else:
        forged_bits = codeword
    z = embed_latent(U_hat, sample_watermark(params, forged_bits, gen), gen)
    return bool(np.array_equal(decode(U_true, z, params.delta_coarse), codeword))


def watermarked_samples(carrier, params: LatticeParams, codeword, N, rng):
    """N latents all carrying the same codeword, as an attacker would collect."""
    gen = as_generator(rng)
    return embed_latent(carrier, sample_watermark(params, codeword, gen, n=N), gen)


ATTACK_HEADER = (
    "N",
    "L",
    "m_prime",
    "delta",
    "delta_fine",
    "lambda_min",
    "lambda_max",
    "mp_lo",
    "mp_hi",
    "outliers_low",
    "outliers_high",
    "spoof_success_rate",
)


def attack_row(report: SpectrumReport, M_prime, params: LatticeParams, spoof_rate):
    return (
        report.N,
        report.L,
        M_prime,
        params.delta_coarse,
        params.delta_fine,
        float(report.eigenvalues[0]),
        float(report.eigenvalues[-1]),
        report.mp_lower,
        report.mp_upper,
        report.outliers_low,
        report.outliers_high,
        spoof_rate,
    )


def write_attack_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ATTACK_HEADER)
        for row in rows:
            w.writerow(["inf" if isinstance(v, float) and math.isinf(v) else v for v in row])
