"""Pairwise gauge-kernel primitives with a numba and a pure-numpy path.

Everything O(N^2) in the package funnels through three operations on packed
point arrays (columns [x_1..x_n, y_1..y_n, t]):

* ``kernel_matrix``    -- dense matrix K_ij = |xi_j^{-1} xi_i|^{-beta}, i != j
* ``potential_apply``  -- out_i = sum_{j != i} a_j K_ij + diag_i * b_i
* ``quad_form``        -- sum_{i != j} a_i a_j K_ij

The backend is selected by the environment variable ``HEISHLS_BACKEND``:
``numba`` (default when importable), ``numpy``, or ``auto``. The numpy path
is a blocked vectorized implementation with a fixed accumulation order, so
it doubles as the deterministic reference. ``bench/bench_backends.py``
compares the two.

Exponents beta in {1, 2, 4} get sqrt-based fast paths; these cover the
kernel pair (Q - alpha, Q - alpha - 1) for the workhorse case n=1, alpha=2.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

try:
    # the sandboxed TBB probe is noisy and irrelevant: the workqueue/omp
    # threading layers serve fine
    warnings.filterwarnings("ignore", message=".*TBB.*", module="numba.*")
    from numba import njit, prange, set_num_threads

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore
        def wrap(f):
            return f

        return wrap

    prange = range

    def set_num_threads(k):  # type: ignore
        pass


_VALID_BACKENDS = ("auto", "numba", "numpy")


def active_backend() -> str:
    """Resolve the backend from HEISHLS_BACKEND (re-read on every call)."""
    choice = os.environ.get("HEISHLS_BACKEND", "auto").strip().lower()
    if choice not in _VALID_BACKENDS:
        raise ValueError(
            f"HEISHLS_BACKEND must be one of {_VALID_BACKENDS}, got {choice!r}"
        )
    if choice == "numba" and not HAS_NUMBA:
        raise RuntimeError("HEISHLS_BACKEND=numba but numba is not importable")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


def set_threads(k: int | None) -> None:
    """Cap the numba thread pool; None leaves the default."""
    if k is not None and HAS_NUMBA:
        set_num_threads(max(1, int(k)))


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------
# The kernel value is g4**(-beta/4) with g4 = |dz|^4 + dt^2 the fourth power
# of the gauge distance. `code` picks a sqrt fast path: 1 -> beta=2,
# 2 -> beta=1, 3 -> beta=4, 0 -> generic pow.


def _beta_code(beta: float) -> int:
    if beta == 2.0:
        return 1
    if beta == 1.0:
        return 2
    if beta == 4.0:
        return 3
    return 0


@njit(inline="always")
def _kval(g4, expo, code):
    if code == 1:
        return 1.0 / np.sqrt(g4)
    if code == 2:
        return 1.0 / np.sqrt(np.sqrt(g4))
    if code == 3:
        return 1.0 / g4
    return g4 ** expo


# Triangular loops are folded: parallel index k handles rows k and N-1-k,
# so every chunk carries the same N-1 inner iterations and the two-thread
# static schedule stays balanced.


@njit(inline="always", fastmath=True)
def _matrix_row_n1(pts, i, expo, code, out):
    N = pts.shape[0]
    xi, yi, ti = pts[i, 0], pts[i, 1], pts[i, 2]
    for j in range(i + 1, N):
        dx = xi - pts[j, 0]
        dy = yi - pts[j, 1]
        dt = ti - pts[j, 2] + 2.0 * (pts[j, 1] * xi - pts[j, 0] * yi)
        z2 = dx * dx + dy * dy
        g4 = z2 * z2 + dt * dt
        v = _kval(g4, expo, code)
        out[i, j] = v
        out[j, i] = v


@njit(parallel=True, fastmath=True, cache=True)
def _matrix_n1(pts, beta, code, out):
    N = pts.shape[0]
    expo = -0.25 * beta
    half = (N + 1) // 2
    for k in prange(half):
        _matrix_row_n1(pts, k, expo, code, out)
        m = N - 1 - k
        if m != k:
            _matrix_row_n1(pts, m, expo, code, out)


@njit(inline="always", fastmath=True)
def _matrix_row_gen(pts, n, i, expo, code, out):
    N = pts.shape[0]
    for j in range(i + 1, N):
        z2 = 0.0
        twist = 0.0
        for k in range(n):
            dx = pts[i, k] - pts[j, k]
            dy = pts[i, n + k] - pts[j, n + k]
            z2 += dx * dx + dy * dy
            twist += pts[j, n + k] * pts[i, k] - pts[j, k] * pts[i, n + k]
        dt = pts[i, 2 * n] - pts[j, 2 * n] + 2.0 * twist
        g4 = z2 * z2 + dt * dt
        v = _kval(g4, expo, code)
        out[i, j] = v
        out[j, i] = v


@njit(parallel=True, fastmath=True, cache=True)
def _matrix_gen(pts, n, beta, code, out):
    N = pts.shape[0]
    expo = -0.25 * beta
    half = (N + 1) // 2
    for k in prange(half):
        _matrix_row_gen(pts, n, k, expo, code, out)
        m = N - 1 - k
        if m != k:
            _matrix_row_gen(pts, n, m, expo, code, out)


@njit(parallel=True, fastmath=True, cache=True)
def _apply_n1(pts, beta, code, a, diag_b):
    N = pts.shape[0]
    expo = -0.25 * beta
    out = np.empty(N)
    for i in prange(N):
        xi, yi, ti = pts[i, 0], pts[i, 1], pts[i, 2]
        acc = 0.0
        for j in range(N):
            if j == i:
                continue
            dx = xi - pts[j, 0]
            dy = yi - pts[j, 1]
            dt = ti - pts[j, 2] + 2.0 * (pts[j, 1] * xi - pts[j, 0] * yi)
            z2 = dx * dx + dy * dy
            g4 = z2 * z2 + dt * dt
            acc += a[j] * _kval(g4, expo, code)
        out[i] = acc + diag_b[i]
    return out


@njit(parallel=True, fastmath=True, cache=True)
def _apply_gen(pts, n, beta, code, a, diag_b):
    N = pts.shape[0]
    expo = -0.25 * beta
    out = np.empty(N)
    for i in prange(N):
        acc = 0.0
        for j in range(N):
            if j == i:
                continue
            z2 = 0.0
            twist = 0.0
            for k in range(n):
                dx = pts[i, k] - pts[j, k]
                dy = pts[i, n + k] - pts[j, n + k]
                z2 += dx * dx + dy * dy
                twist += pts[j, n + k] * pts[i, k] - pts[j, k] * pts[i, n + k]
            dt = pts[i, 2 * n] - pts[j, 2 * n] + 2.0 * twist
            g4 = z2 * z2 + dt * dt
            acc += a[j] * _kval(g4, expo, code)
        out[i] = acc + diag_b[i]
    return out


@njit(inline="always", fastmath=True)
def _quad_row_n1(pts, i, expo, code, a):
    N = pts.shape[0]
    xi, yi, ti = pts[i, 0], pts[i, 1], pts[i, 2]
    acc = 0.0
    for j in range(i + 1, N):
        dx = xi - pts[j, 0]
        dy = yi - pts[j, 1]
        dt = ti - pts[j, 2] + 2.0 * (pts[j, 1] * xi - pts[j, 0] * yi)
        z2 = dx * dx + dy * dy
        g4 = z2 * z2 + dt * dt
        acc += a[j] * _kval(g4, expo, code)
    return 2.0 * a[i] * acc


# branch-free copy of the row sum for the workhorse exponent beta = 2
# (n = 1, alpha = 2, s = 0): the per-element branch in _kval defeats SIMD
# vectorization, which costs about 2x on this innermost loop.


@njit(inline="always", fastmath=True)
def _quad_row_n1_b2(pts, i, a):
    N = pts.shape[0]
    xi, yi, ti = pts[i, 0], pts[i, 1], pts[i, 2]
    acc = 0.0
    for j in range(i + 1, N):
        dx = xi - pts[j, 0]
        dy = yi - pts[j, 1]
        dt = ti - pts[j, 2] + 2.0 * (pts[j, 1] * xi - pts[j, 0] * yi)
        z2 = dx * dx + dy * dy
        g4 = z2 * z2 + dt * dt
        acc += a[j] / np.sqrt(g4)
    return 2.0 * a[i] * acc


@njit(parallel=True, fastmath=True, cache=True)
def _quad_n1_b2(pts, a):
    N = pts.shape[0]
    half = (N + 1) // 2
    total = 0.0
    for k in prange(half):
        part = _quad_row_n1_b2(pts, k, a)
        m = N - 1 - k
        if m != k:
            part += _quad_row_n1_b2(pts, m, a)
        total += part
    return total


@njit(parallel=True, fastmath=True, cache=True)
def _quad_n1(pts, beta, code, a):
    N = pts.shape[0]
    expo = -0.25 * beta
    half = (N + 1) // 2
    total = 0.0
    for k in prange(half):
        part = _quad_row_n1(pts, k, expo, code, a)
        m = N - 1 - k
        if m != k:
            part += _quad_row_n1(pts, m, expo, code, a)
        total += part
    return total


@njit(inline="always", fastmath=True)
def _quad_row_gen(pts, n, i, expo, code, a):
    N = pts.shape[0]
    acc = 0.0
    for j in range(i + 1, N):
        z2 = 0.0
        twist = 0.0
        for k in range(n):
            dx = pts[i, k] - pts[j, k]
            dy = pts[i, n + k] - pts[j, n + k]
            z2 += dx * dx + dy * dy
            twist += pts[j, n + k] * pts[i, k] - pts[j, k] * pts[i, n + k]
        dt = pts[i, 2 * n] - pts[j, 2 * n] + 2.0 * twist
        g4 = z2 * z2 + dt * dt
        acc += a[j] * _kval(g4, expo, code)
    return 2.0 * a[i] * acc


@njit(parallel=True, fastmath=True, cache=True)
def _quad_gen(pts, n, beta, code, a):
    N = pts.shape[0]
    expo = -0.25 * beta
    half = (N + 1) // 2
    total = 0.0
    for k in prange(half):
        part = _quad_row_gen(pts, n, k, expo, code, a)
        m = N - 1 - k
        if m != k:
            part += _quad_row_gen(pts, n, m, expo, code, a)
        total += part
    return total


# ---------------------------------------------------------------------------
# numpy path (blocked; fixed block order, so deterministic)
# ---------------------------------------------------------------------------

_BLOCK = 2048


def _block_kernel(pts, n, beta, i0, i1, j0, j1):
    """Kernel values for the block [i0:i1] x [j0:j1] of packed points."""
    zi = pts[i0:i1, : 2 * n]
    zj = pts[j0:j1, : 2 * n]
    xi, yi = zi[:, :n], zi[:, n:]
    xj, yj = zj[:, :n], zj[:, n:]
    z2 = (
        (zi * zi).sum(1)[:, None]
        + (zj * zj).sum(1)[None, :]
        - 2.0 * (zi @ zj.T)
    )
    np.maximum(z2, 0.0, out=z2)
    twist = yj @ xi.T - xj @ yi.T  # twist_ij = sum_k (y_j x_i - x_j y_i)
    dt = pts[i0:i1, 2 * n][:, None] - pts[j0:j1, 2 * n][None, :] + 2.0 * twist.T
    g4 = z2 * z2 + dt * dt
    with np.errstate(divide="ignore"):  # same-block diagonal is zeroed by callers
        if beta == 2.0:
            return 1.0 / np.sqrt(g4)
        if beta == 1.0:
            return 1.0 / np.sqrt(np.sqrt(g4))
        if beta == 4.0:
            return 1.0 / g4
        return g4 ** (-0.25 * beta)


def _np_matrix(pts, n, beta, out):
    N = pts.shape[0]
    for i0 in range(0, N, _BLOCK):
        i1 = min(i0 + _BLOCK, N)
        for j0 in range(0, N, _BLOCK):
            j1 = min(j0 + _BLOCK, N)
            blk = _block_kernel(pts, n, beta, i0, i1, j0, j1)
            if i0 == j0:
                np.fill_diagonal(blk, 0.0)
            out[i0:i1, j0:j1] = blk


def _np_apply(pts, n, beta, a, diag_b):
    N = pts.shape[0]
    out = diag_b.astype(float).copy()
    for i0 in range(0, N, _BLOCK):
        i1 = min(i0 + _BLOCK, N)
        for j0 in range(0, N, _BLOCK):
            j1 = min(j0 + _BLOCK, N)
            blk = _block_kernel(pts, n, beta, i0, i1, j0, j1)
            if i0 == j0:
                np.fill_diagonal(blk, 0.0)
            out[i0:i1] += blk @ a[j0:j1]
    return out


def _np_quad(pts, n, beta, a):
    N = pts.shape[0]
    total = 0.0
    for i0 in range(0, N, _BLOCK):
        i1 = min(i0 + _BLOCK, N)
        for j0 in range(0, N, _BLOCK):
            j1 = min(j0 + _BLOCK, N)
            blk = _block_kernel(pts, n, beta, i0, i1, j0, j1)
            if i0 == j0:
                np.fill_diagonal(blk, 0.0)
            total += a[i0:i1] @ blk @ a[j0:j1]
    return total


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _as_contig(pts: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(pts, dtype=np.float64)


def kernel_matrix(pts: np.ndarray, n: int, beta: float, diag: np.ndarray) -> np.ndarray:
    """Dense gauge-kernel matrix with the supplied diagonal."""
    pts = _as_contig(pts)
    N = pts.shape[0]
    out = np.zeros((N, N))
    if active_backend() == "numba":
        code = _beta_code(beta)
        if n == 1:
            _matrix_n1(pts, beta, code, out)
        else:
            _matrix_gen(pts, n, beta, code, out)
    else:
        _np_matrix(pts, n, beta, out)
    out[np.diag_indices(N)] = diag
    return out


def potential_apply(
    pts: np.ndarray, n: int, beta: float, a: np.ndarray, diag_b: np.ndarray
) -> np.ndarray:
    """out_i = sum_{j != i} a_j K_ij + diag_b_i, evaluated without a matrix."""
    pts = _as_contig(pts)
    a = np.ascontiguousarray(a, dtype=np.float64)
    diag_b = np.ascontiguousarray(diag_b, dtype=np.float64)
    if active_backend() == "numba":
        code = _beta_code(beta)
        if n == 1:
            return _apply_n1(pts, beta, code, a, diag_b)
        return _apply_gen(pts, n, beta, code, a, diag_b)
    return _np_apply(pts, n, beta, a, diag_b)


def quad_form(pts: np.ndarray, n: int, beta: float, a: np.ndarray) -> float:
    """Off-diagonal quadratic form sum_{i != j} a_i a_j K_ij."""
    pts = _as_contig(pts)
    a = np.ascontiguousarray(a, dtype=np.float64)
    if active_backend() == "numba":
        code = _beta_code(beta)
        if n == 1:
            if beta == 2.0:
                return float(_quad_n1_b2(pts, a))
            return float(_quad_n1(pts, beta, code, a))
        return float(_quad_gen(pts, n, beta, code, a))
    return float(_np_quad(pts, n, beta, a))
