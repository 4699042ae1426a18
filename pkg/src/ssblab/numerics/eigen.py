"""Symmetric eigendecomposition by Jacobi rotations.

Two kernels compute the same decomposition:

* ``_jacobi_cyclic`` (numba): row-cyclic sweeps, one rotation at a time,
  touching only the upper triangle.
* ``_jacobi_round_robin`` (numpy): each sweep is split into n - 1 rounds of
  n/2 disjoint rotations (tournament ordering), applied together with fancy
  indexing.

Both stop once the off-diagonal Frobenius norm drops below
``rtol * ||A||_F``.
"""

import math

import numpy as np

from .._accel import njit, resolve_backend
from ..errors import ConvergenceError, DimensionError, DomainError

RTOL = 1e-14
MAX_SWEEPS = 60
_ROW_PAD = 24


@njit(cache=True)
def _off_norm_sq(a):
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += a[i, j] * a[i, j]
    return 2.0 * s


@njit(cache=True)
def _jacobi_cyclic(a, vt, want_vectors, threshold_sq, max_sweeps):
    # a is overwritten; only its upper triangle stays meaningful.
    n = a.shape[0]
    for sweep in range(max_sweeps):
        if _off_norm_sq(a) <= threshold_sq:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                for j in range(p):
                    g = a[j, p]
                    h = a[j, q]
                    a[j, p] = g - s * (h + g * tau)
                    a[j, q] = h + s * (g - h * tau)
                for j in range(p + 1, q):
                    g = a[p, j]
                    h = a[j, q]
                    a[p, j] = g - s * (h + g * tau)
                    a[j, q] = h + s * (g - h * tau)
                for j in range(q + 1, n):
                    g = a[p, j]
                    h = a[q, j]
                    a[p, j] = g - s * (h + g * tau)
                    a[q, j] = h + s * (g - h * tau)
                if want_vectors:
                    # vt holds eigenvectors as rows, keeping this loop contiguous.
                    for j in range(n):
                        g = vt[p, j]
                        h = vt[q, j]
                        vt[p, j] = g - s * (h + g * tau)
                        vt[q, j] = h + s * (g - h * tau)
    if _off_norm_sq(a) <= threshold_sq:
        return max_sweeps
    return -1


def _round_robin_pairs(n):
    """n - 1 rounds of n/2 disjoint pairs covering every pair once (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array(players[: n // 2])
        q = np.array(players[n // 2 :][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi_round_robin(a, v, want_vectors, threshold_sq, max_sweeps):
    n = a.shape[0]
    rounds = _round_robin_pairs(n)
    for sweep in range(max_sweeps):
        if 2.0 * np.sum(np.triu(a, 1) ** 2) <= threshold_sq:
            return sweep
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J with J[p,p] = J[q,q] = c, J[p,q] = s, J[q,p] = -s.
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            if want_vectors:
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return max_sweeps if 2.0 * np.sum(np.triu(a, 1) ** 2) <= threshold_sq else -1


def symmetric_eigen(matrix, want_vectors=True, backend=None, rtol=RTOL, max_sweeps=MAX_SWEEPS):
    """Eigenvalues (ascending) and optionally orthonormal eigenvectors.

    Returns ``(w, V)`` with ``V[:, i]`` the eigenvector of ``w[i]``; ``V`` is
    None when ``want_vectors`` is false. The input is not modified.
    """
    a = np.array(matrix, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    n = a.shape[0]
    scale = max(np.max(np.abs(a)), 1.0) if n else 1.0
    if n and np.max(np.abs(a - a.T)) > 1e-9 * scale:
        raise DomainError("matrix is not symmetric within 1e-9")
    if n == 0:
        return np.empty(0), (np.empty((0, 0)) if want_vectors else None)
    a = 0.5 * (a + a.T)

    norm_sq = float(np.sum(a * a))
    threshold_sq = (rtol * rtol) * norm_sq
    backend = resolve_backend(backend)
    if backend == "numba":
        # Pad the row stride so column walks do not alias onto one cache set.
        buf = np.zeros((n, n + _ROW_PAD))
        buf[:, :n] = a
        a = buf[:, :n]
        vt = np.eye(n)
        sweeps = _jacobi_cyclic(a, vt, bool(want_vectors), threshold_sq, max_sweeps)
        v = vt.T
    else:
        padded = n % 2 == 1
        if padded:
            a = np.pad(a, ((0, 1), (0, 1)))
        v = np.eye(a.shape[0])
        sweeps = _jacobi_round_robin(a, v, bool(want_vectors), threshold_sq, max_sweeps)
        if padded:
            a = a[:n, :n]
            v = v[:n, :n]
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps", best_estimate=np.sort(np.diag(a)))

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    if not want_vectors:
        return w, None
    return w, np.ascontiguousarray(v[:, order])
