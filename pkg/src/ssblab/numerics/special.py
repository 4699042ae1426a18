"""Gaussian special functions and the binary entropy.

Scalars in, scalars out; numpy arrays are accepted elementwise. The CDF is
built on the complementary error function so that upper-tail masses stay
accurate in relative terms.
"""

import math

import numpy as np
from scipy import special as _sp

from ..errors import DomainError

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _out(INV_SQRT_2PI * np.exp(-0.5 * x * x))


def std_normal_cdf(x):
    x = np.asarray(x, dtype=float)
    return _out(0.5 * _sp.erfc(-x / SQRT2))


def std_normal_sf(x):
    """Upper tail 1 - Phi(x), accurate for large positive x."""
    x = np.asarray(x, dtype=float)
    return _out(0.5 * _sp.erfc(x / SQRT2))


def std_normal_cdf_inv(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("std_normal_cdf_inv requires p in the open interval (0, 1)")
    return _out(_sp.ndtri(p))


def normal_mass(a, b):
    """P(a <= X <= b) for X ~ N(0, 1), without cancellation in either tail.

    Intervals on the positive side are computed from upper-tail values.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = a >= 0.0
    lower_side = std_normal_cdf(b) - std_normal_cdf(a)
    upper_side = std_normal_sf(a) - std_normal_sf(b)
    return _out(np.where(upper, upper_side, lower_side))


def binary_entropy(p):
    """h2(p) in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p >= 0.0) & (p <= 1.0))):
        raise DomainError("binary_entropy requires p in [0, 1]")
    return _out((_sp.entr(p) + _sp.entr(1.0 - p)) / math.log(2.0))
