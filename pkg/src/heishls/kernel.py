"""Singular gauge kernels, HLS energies, and the closed-form sharp constant.

The kernel family is |eta^{-1} xi|^{-(Q - alpha - s)} with shift s in
{0, 1}; s = 0 is the main Riesz-type kernel, s = 1 the milder companion
weighted by the coupling lam. Discrete potentials use the midpoint rule off
the diagonal plus a self-cell correction: the cell is replaced by the gauge
ball of equal volume, over which the kernel integrates in closed form to
c_Q * Q * r^(alpha+s) / (alpha+s).

Pairwise sums are delegated to ``_backend`` (numba or numpy); for grids
small enough, the kernel matrix is cached on the grid so solver loops pay
O(N^2) once and BLAS matvecs afterwards.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Union

import numpy as np

from . import _backend, hgroup
from .domain import Grid
from .hgroup import HPoint


@dataclass(frozen=True)
class KernelSpec:
    """Exponent data (n, alpha, shift s, coupling lam) of the kernel family."""

    n: int
    alpha: float
    s: int = 0
    lam: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.n != int(self.n):
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.s not in (0, 1):
            raise ValueError(f"shift s must be 0 or 1, got {self.s}")
        if not (0.0 < self.alpha and self.alpha + self.s < self.Q):
            raise ValueError(
                f"alpha must satisfy 0 < alpha and alpha + s < Q = {self.Q}, got "
                f"alpha={self.alpha}, s={self.s}"
            )

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    @property
    def exponent(self) -> float:
        """Kernel decay exponent Q - alpha - s."""
        return self.Q - self.alpha - self.s

    @property
    def q_critical(self) -> float:
        """HLS-critical integrability 2Q / (Q + alpha)."""
        return 2.0 * self.Q / (self.Q + self.alpha)

    @property
    def p_critical(self) -> float:
        """Conjugate critical exponent 2Q / (Q - alpha)."""
        return 2.0 * self.Q / (self.Q - self.alpha)


@dataclass(eq=False)
class GridFunction:
    """Cell values paired with a grid; the discrete stand-in for f on Omega."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"values must have shape ({self.grid.size},), got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    def copy_with(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)


def grid_function(grid: Grid, fn: Union[float, Callable[[np.ndarray], np.ndarray]]) -> GridFunction:
    """Sample a callable (on packed points) or a constant onto a grid."""
    if callable(fn):
        vals = np.asarray(fn(grid.points), dtype=float)
    else:
        vals = np.full(grid.size, float(fn))
    return GridFunction(grid, vals)


# ---------------------------------------------------------------------------
# special functions and closed-form constants
# ---------------------------------------------------------------------------

def gamma_fn(x: float) -> float:
    """Euler Gamma on (0, inf); wraps the C library implementation."""
    if x <= 0:
        raise ValueError(f"gamma_fn needs a positive argument, got {x}")
    return math.gamma(x)


def sharp_constant(n: int, alpha: float) -> float:
    """Best constant of the diagonal HLS inequality on H^n.

    Closed form: (pi^(n+1) / (2^(n-1) n!))^((Q-alpha)/Q)
                 * n! Gamma(alpha/2) / Gamma((Q+alpha)/4)^2.
    """
    if n < 1 or n != int(n):
        raise ValueError(f"n must be a positive integer, got {n}")
    Q = 2 * n + 2
    if not 0.0 < alpha < Q:
        raise ValueError(f"alpha must lie in (0, Q) = (0, {Q}), got {alpha}")
    nf = gamma_fn(n + 1.0)
    lead = (math.pi ** (n + 1) / (2 ** (n - 1) * nf)) ** ((Q - alpha) / Q)
    return lead * nf * gamma_fn(alpha / 2.0) / gamma_fn((Q + alpha) / 4.0) ** 2


def gauge_ball_volume(n: int) -> float:
    """Lebesgue volume c_Q of the unit gauge ball {|xi| < 1} in H^n.

    Radial reduction: integrating 2*sqrt(1-|z|^4) over |z| < 1 in R^(2n)
    gives a Beta integral, hence
    c_Q = pi^n Gamma(n/2) Gamma(3/2) / (Gamma(n) Gamma((n+3)/2)).
    """
    if n < 1 or n != int(n):
        raise ValueError(f"n must be a positive integer, got {n}")
    return (
        math.pi**n
        * gamma_fn(n / 2.0)
        * gamma_fn(1.5)
        / (gamma_fn(float(n)) * gamma_fn((n + 3) / 2.0))
    )


def extremal_values(pts: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """The HLS extremal profile ((1+|z|^2)^2 + t^2)^(-(Q+alpha)/4) on packed points."""
    pts = np.asarray(pts, dtype=float)
    n = spec.n
    z2 = (pts[..., : 2 * n] ** 2).sum(axis=-1)
    base = (1.0 + z2) ** 2 + pts[..., 2 * n] ** 2
    return base ** (-(spec.Q + spec.alpha) / 4.0)


def extremal_H(p: HPoint, spec: KernelSpec) -> float:
    if p.n != spec.n:
        raise hgroup.DimensionMismatchError(f"point has n={p.n}, spec has n={spec.n}")
    return float(extremal_values(p.packed(), spec))


def conformal_values(
    pts: np.ndarray, eps: float, zeta: HPoint, spec: KernelSpec
) -> np.ndarray:
    """Conformal family eps^(-(Q+alpha)/2) H(dilate(1/eps, zeta^{-1} xi))."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    n = spec.n
    pts = np.asarray(pts, dtype=float)
    scale = eps ** (-(spec.Q + spec.alpha) / 2.0)
    if np.all(zeta.packed() == 0.0):
        # centered family: skip the group translation machinery
        z2 = (pts[..., : 2 * n] ** 2).sum(axis=-1) / (eps * eps)
        base = (1.0 + z2) ** 2 + (pts[..., 2 * n] / (eps * eps)) ** 2
        return scale * base ** (-(spec.Q + spec.alpha) / 4.0)
    rel = hgroup.mul_packed(hgroup.inv_packed(zeta.packed()), pts, n)
    rel = hgroup.dilate_packed(1.0 / eps, rel, n)
    return scale * extremal_values(rel, spec)


def conformal_family(p: HPoint, eps: float, zeta: HPoint, spec: KernelSpec) -> float:
    return float(conformal_values(p.packed(), eps, zeta, spec))


# ---------------------------------------------------------------------------
# discrete potentials and energies
# ---------------------------------------------------------------------------

def _matrix_entry_budget() -> int:
    return int(os.environ.get("HEISHLS_MATRIX_BUDGET", 150_000_000))


def self_coefficients(grid: Grid, spec: KernelSpec) -> np.ndarray:
    """Per-cell self-interaction S_i: kernel integral over the equal-volume gauge ball.

    With |B_r| = c_Q r^Q the layer-cake formula gives
    int_{B_r} |eta|^{-(Q-alpha-s)} d eta = c_Q Q r^(alpha+s) / (alpha+s),
    evaluated at r = (w_i / c_Q)^(1/Q).
    """
    cQ = gauge_ball_volume(spec.n)
    r = (grid.weights / cQ) ** (1.0 / spec.Q)
    a = spec.alpha + spec.s
    return cQ * spec.Q * r**a / a


def _cached_matrix(grid: Grid, spec: KernelSpec) -> np.ndarray | None:
    """Kernel matrix A with A_ii = S_i / w_i, or None when over budget.

    potential(f) == A @ (w * f) exactly, and (wf)' A (wf) is the energy.
    """
    N = grid.size
    if N * N > _matrix_entry_budget():
        return None
    key = ("matrix", spec.n, spec.alpha, spec.s, _backend.active_backend())
    A = grid._op_cache.get(key)
    if A is None:
        diag = self_coefficients(grid, spec) / grid.weights
        A = _backend.kernel_matrix(grid.points, spec.n, spec.exponent, diag)
        grid._op_cache[key] = A
    return A


def potential(f: GridFunction, spec: KernelSpec) -> GridFunction:
    """Discrete singular potential of f for the kernel selected by spec.s.

    out_i = sum_{j != i} w_j f_j |xi_j^{-1} xi_i|^{-(Q-alpha-s)} + S_i f_i.
    """
    grid = f.grid
    A = _cached_matrix(grid, spec)
    if A is not None:
        out = A @ (grid.weights * f.values)
    else:
        out = _backend.potential_apply(
            grid.points,
            spec.n,
            spec.exponent,
            grid.weights * f.values,
            self_coefficients(grid, spec) * f.values,
        )
    return GridFunction(grid, out)


def _energy_single(f: GridFunction, spec: KernelSpec) -> float:
    grid = f.grid
    wf = grid.weights * f.values
    A = _cached_matrix(grid, spec)
    if A is not None:
        return float(wf @ (A @ wf))
    off = _backend.quad_form(grid.points, spec.n, spec.exponent, wf)
    diag = float(np.sum(self_coefficients(grid, spec) * grid.weights * f.values**2))
    return off + diag


def hls_energy(f: GridFunction, spec: KernelSpec) -> float:
    """E_lam[f] = <f, I_s0 f> + lam <f, I_s1 f> in the weighted grid pairing."""
    e = _energy_single(f, replace(spec, s=0))
    if spec.lam != 0.0:
        e += spec.lam * _energy_single(f, replace(spec, s=1))
    return e


def lp_norm(f: GridFunction, q: float) -> float:
    """Discrete L^q norm (sum w |f|^q)^(1/q)."""
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return float(np.sum(f.grid.weights * np.abs(f.values) ** q) ** (1.0 / q))


def energy_quotient(f: GridFunction, spec: KernelSpec, q: float) -> float:
    """Scale-invariant quotient E_lam[f] / ||f||_q^2."""
    if q <= 1:
        raise ValueError(f"q must exceed 1, got {q}")
    nrm = lp_norm(f, q)
    if nrm == 0.0:
        raise ValueError("energy quotient of the zero function is undefined")
    return hls_energy(f, spec) / nrm**2
