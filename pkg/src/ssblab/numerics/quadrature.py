"""Adaptive Simpson quadrature with interval bisection."""

import math
from dataclasses import dataclass

from ..errors import ConvergenceError, DomainError

_MAX_DEPTH = 60


@dataclass(frozen=True)
class QuadratureSpec:
    absolute_tolerance: float = 1e-10
    max_subdivisions: int = 2**16

    def __post_init__(self):
        if not self.absolute_tolerance > 0:
            raise DomainError("absolute_tolerance must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


def integrate(f, a, b, spec=None, initial_panels=8):
    """Integrate ``f`` over the finite interval [a, b].

    The interval is first cut into ``initial_panels`` equal panels so that
    narrow features are not missed by the first Simpson estimate; each panel
    gets a share of the tolerance proportional to its width. A panel is
    bisected until the Richardson error estimate |S2 - S1| / 15 meets its
    share.

    Raises ConvergenceError (carrying the running estimate) when more than
    ``spec.max_subdivisions`` bisections would be needed.
    """
    spec = spec or QuadratureSpec()
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integration bounds must be finite")
    if a > b:
        raise DomainError("integrate requires a <= b")
    if a == b:
        return 0.0

    width = b - a
    tol = spec.absolute_tolerance
    stack = []
    for i in range(initial_panels):
        lo = a + width * i / initial_panels
        hi = b if i == initial_panels - 1 else a + width * (i + 1) / initial_panels
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        whole = (hi - lo) * (flo + 4.0 * fmid + fhi) / 6.0
        stack.append((lo, hi, flo, fmid, fhi, whole, tol * (hi - lo) / width, 0))

    total = 0.0
    splits = 0
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) * (flo + 4.0 * flm + fmid) / 6.0
        right = (hi - mid) * (fmid + 4.0 * frm + fhi) / 6.0
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or depth >= _MAX_DEPTH:
            total += left + right + delta / 15.0
            continue
        splits += 1
        if splits > spec.max_subdivisions:
            pending = sum(item[5] for item in stack)
            raise ConvergenceError(
                f"adaptive Simpson exceeded {spec.max_subdivisions} subdivisions",
                best_estimate=total + left + right + pending,
            )
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return total
