"""Scalar special functions, quadrature, truncated-normal sampling and a
symmetric eigensolver."""

from .eigen import symmetric_eigen
from .quadrature import QuadratureSpec, integrate
from .rng import RngStream, as_generator
from .special import (
    binary_entropy,
    normal_mass,
    std_normal_cdf,
    std_normal_cdf_inv,
    std_normal_pdf,
    std_normal_sf,
)
from .truncnorm import sample_truncated_std_normal, truncated_std_normal

__all__ = [
    "QuadratureSpec",
    "RngStream",
    "as_generator",
    "binary_entropy",
    "integrate",
    "normal_mass",
    "sample_truncated_std_normal",
    "std_normal_cdf",
    "std_normal_cdf_inv",
    "std_normal_pdf",
    "std_normal_sf",
    "symmetric_eigen",
    "truncated_std_normal",
]
