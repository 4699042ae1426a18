"""Backend selection for the hot kernels.

Set ``SSBLAB_BACKEND=numpy`` to force the pure-numpy paths even when numba
is importable. The default is ``numba`` when available.
"""

import os

try:
    import numba
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


BACKENDS = ("numba", "numpy")


def _default_backend():
    requested = os.environ.get("SSBLAB_BACKEND", "").strip().lower()
    if requested == "numpy":
        return "numpy"
    if requested not in ("", "numba"):
        raise RuntimeError(f"SSBLAB_BACKEND must be one of {BACKENDS}, got {requested!r}")
    return "numba" if HAS_NUMBA else "numpy"


DEFAULT_BACKEND = _default_backend()


def resolve_backend(backend=None):
    """Return the concrete backend name for an optional override."""
    if backend is None:
        return DEFAULT_BACKEND
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
