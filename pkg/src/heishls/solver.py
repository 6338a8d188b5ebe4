"""Fixed-point maximization of the HLS quotient and its diagnostics.

The subcritical maximizer is found by a normalized fixed-point iteration on
the stationarity equation mu f^(q-1) = I_s0 f + lam I_s1 f: apply the
potential, take the power 1/(q-1), optionally blend geometrically with the
previous iterate (damping), renormalize to ||f||_q = 1. Since the kernel
matrix is symmetric positive, each undamped step is an ascent step for the
energy, which is monitored and reported.

Also here: the Euler-Lagrange residual, the dilation-identity check that
balances bulk against boundary flux (boundary data from
``domain.boundary_quadrature``), the unnormalized nonexistence probe, the
peak rescaling map, and the subcritical-to-critical continuation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from . import hgroup
from .domain import BoundaryQuad, Grid, is_delta_starshaped
from .hgroup import HPoint
from .kernel import (
    GridFunction,
    KernelSpec,
    _energy_single,
    extremal_values,
    lp_norm,
    potential,
    self_coefficients,
    sharp_constant,
)

InitSpec = Union[str, GridFunction]


@dataclass(frozen=True)
class SolverConfig:
    q: float
    spec: KernelSpec
    tol_residual: float = 1e-8
    tol_energy: float = 1e-12
    max_iter: int = 500
    damping: float = 1.0
    init: InitSpec = "constant"

    def __post_init__(self):
        if self.q <= 1:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.tol_residual <= 0 or self.tol_energy <= 0 or self.max_iter < 1:
            raise ValueError("tolerances must be positive and max_iter >= 1")
        if isinstance(self.init, str) and self.init not in ("constant", "truncated_H"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(eq=False)
class SolveReport:
    solution: GridFunction
    multiplier: float
    energy_trace: list[float]
    el_residual: float
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _init_values(grid: Grid, spec: KernelSpec, init: InitSpec) -> np.ndarray:
    if isinstance(init, GridFunction):
        if init.grid is not grid:
            raise ValueError("custom init must live on the solve grid")
        vals = init.values.copy()
    elif init == "truncated_H":
        vals = extremal_values(grid.points, spec)
    else:
        vals = np.ones(grid.size)
    if vals.min() <= 0:
        raise ValueError("initial iterate must be strictly positive")
    return vals


def potential_combined(f: GridFunction, spec: KernelSpec) -> GridFunction:
    """I_s0 f + lam I_s1 f, the operator the stationarity equation uses."""
    out = potential(f, replace(spec, s=0))
    if spec.lam != 0.0:
        out = GridFunction(f.grid, out.values + spec.lam * potential(f, replace(spec, s=1)).values)
    return out


def _weighted_norm(grid: Grid, v: np.ndarray) -> float:
    return float(np.sqrt(np.sum(grid.weights * v * v)))


def el_residual(f: GridFunction, mu: float, cfg: SolverConfig) -> float:
    """Relative weighted-L2 defect of mu f^(q-1) = (I_s0 + lam I_s1) f."""
    if np.any(f.values < 0):
        raise ValueError("el_residual expects a nonnegative grid function")
    u = potential_combined(f, cfg.spec).values
    defect = mu * f.values ** (cfg.q - 1.0) - u
    denom = _weighted_norm(f.grid, u)
    if denom == 0.0:
        return 0.0
    return _weighted_norm(f.grid, defect) / denom


def _fixed_point(
    grid: Grid,
    spec: KernelSpec,
    q: float,
    init: InitSpec,
    tol_residual: float,
    tol_energy: float,
    max_iter: int,
    damping: float,
    require_sup_settle: bool = False,
) -> SolveReport:
    power = 1.0 / (q - 1.0)
    vals = _init_values(grid, spec, init)
    vals = vals / lp_norm(GridFunction(grid, vals), q)
    f = GridFunction(grid, vals)

    trace: list[float] = []
    diagnostics: dict = {}
    theta = damping
    descent_streak = 0
    prev_energy = None
    prev_sup = None
    residual = np.inf
    converged = False
    it = 0

    for it in range(1, max_iter + 1):
        u = potential_combined(f, spec).values
        if u.min() <= 0.0:
            diagnostics["abort"] = "kernel not positivity-preserving"
            break
        energy = float(np.sum(grid.weights * f.values * u))
        trace.append(energy)
        defect = energy * f.values ** (q - 1.0) - u
        residual = _weighted_norm(grid, defect) / _weighted_norm(grid, u)

        sup = float(f.values.max())
        energy_settled = (
            prev_energy is not None
            and abs(energy - prev_energy) <= tol_energy * abs(energy)
        )
        sup_settled = not require_sup_settle or (
            prev_sup is not None and abs(sup - prev_sup) <= tol_residual * abs(sup)
        )
        if energy_settled and sup_settled and residual < tol_residual:
            converged = True
            break

        if prev_energy is not None and energy < prev_energy * (1.0 - 10.0 * tol_energy):
            descent_streak += 1
            if descent_streak == 3 and theta > 0.5:
                theta = 0.5
                diagnostics["damping_fallback"] = it
            elif descent_streak >= 12:
                diagnostics["abort"] = "energy descent persists"
                break
        else:
            descent_streak = 0

        new_vals = u**power
        if theta != 1.0:
            new_vals = f.values ** (1.0 - theta) * new_vals**theta
        new_vals = new_vals / lp_norm(GridFunction(grid, new_vals), q)
        prev_energy = energy
        prev_sup = sup
        f = GridFunction(grid, new_vals)

    multiplier = trace[-1] if trace else 0.0
    if theta != damping:
        diagnostics["damping_used"] = theta
    return SolveReport(
        solution=f,
        multiplier=multiplier,
        energy_trace=trace,
        el_residual=float(residual),
        iterations=it,
        converged=converged,
        diagnostics=diagnostics,
    )


def solve_subcritical(grid: Grid, cfg: SolverConfig) -> SolveReport:
    """Maximize the quotient at a subcritical exponent q in (q_alpha, 2)."""
    q_alpha = cfg.spec.q_critical
    if not (q_alpha < cfg.q < 2.0):
        raise ValueError(
            f"subcritical solve needs q in (q_alpha, 2) = ({q_alpha:.6g}, 2), got {cfg.q}"
        )
    return _fixed_point(
        grid,
        cfg.spec,
        cfg.q,
        cfg.init,
        cfg.tol_residual,
        cfg.tol_energy,
        cfg.max_iter,
        cfg.damping,
    )


# ---------------------------------------------------------------------------
# dilation (Pohozaev-type) identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PohozaevReport:
    lhs: float
    rhs_bulk: float
    rhs_boundary: float
    rel_residual: float


def pohozaev_lhs_coefficient(spec: KernelSpec, p: float) -> float:
    """Bulk coefficient Q/p + (alpha - Q)/2; vanishes exactly at p = p_alpha."""
    if p == 0:
        raise ValueError("p must be nonzero")
    return spec.Q / p + (spec.alpha - spec.Q) / 2.0


def pohozaev_residual(
    f: GridFunction, p: float, spec: KernelSpec, boundary: BoundaryQuad
) -> PohozaevReport:
    """Check the dilation identity for a (near-)solution of the p-form equation.

    lhs  = (Q/p + (alpha-Q)/2) * int f^p
    bulk = -(lam/2) * double integral of f^(p-1) против the s=1 kernel
           (the milder exponent Q - alpha - 1, as produced by the
           integration-by-parts computation)
    bdry = (1/p) * surface integral of (E . nu) f^p, with f extended to the
           boundary by its nearest interior cell value.
    """
    if p == 0:
        raise ValueError("p must be nonzero")
    if np.any(f.values < 0):
        raise ValueError("identity check expects a nonnegative grid function")
    grid = f.grid
    fp = f.values**p
    lhs = pohozaev_lhs_coefficient(spec, p) * float(np.sum(grid.weights * fp))

    if spec.lam != 0.0:
        g = GridFunction(grid, f.values ** (p - 1.0))
        rhs_bulk = -0.5 * spec.lam * _energy_single(g, replace(spec, s=1))
    else:
        rhs_bulk = 0.0

    # Boundary values of f^p by a two-layer linear extension along the
    # inward normal (nearest cell at each layer). Plain nearest-cell
    # sampling reads f half a cell inside the wall, a systematic O(h) bias
    # that dominated the residual; the extrapolation cancels it.
    tree = cKDTree(grid.points)
    step = grid.h * np.linalg.norm(boundary.normals[:, : 2 * spec.n], axis=1) + (
        grid.ht * np.abs(boundary.normals[:, 2 * spec.n])
    )
    off = step[:, None] * boundary.normals
    _, idx1 = tree.query(boundary.points - 0.5 * off)
    _, idx2 = tree.query(boundary.points - 1.5 * off)
    fp_b = np.maximum(1.5 * fp[idx1] - 0.5 * fp[idx2], 0.0)
    e_dot_nu = np.einsum(
        "ij,ij->i", hgroup.euler_field_packed(boundary.points, spec.n), boundary.normals
    )
    rhs_boundary = float(np.sum(boundary.weights * e_dot_nu * fp_b)) / p

    scale = max(abs(lhs), abs(rhs_boundary), np.finfo(float).eps)
    rel = abs(lhs - rhs_bulk - rhs_boundary) / scale
    return PohozaevReport(lhs, rhs_bulk, rhs_boundary, rel)


def pohozaev_input_from_solution(
    report: SolveReport, cfg: SolverConfig
) -> tuple[GridFunction, float]:
    """Convert a converged quotient maximizer to the identity's normalization.

    The maximizer satisfies mu f^(q-1) = Kf; rescaling by a = mu^(-1/(2-q))
    absorbs the multiplier, and g = (a f)^(q-1) then solves the p-form
    equation with p = q' = q/(q-1).
    """
    q = cfg.q
    if not report.converged:
        warnings.warn("identity input built from a non-converged solve")
    a = report.multiplier ** (-1.0 / (2.0 - q))
    g_vals = (a * report.solution.values) ** (q - 1.0)
    return GridFunction(report.solution.grid, g_vals), q / (q - 1.0)


# ---------------------------------------------------------------------------
# nonexistence probe
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ProbeReport:
    sup_norm_trace: list[float]
    verdict: str  # decayed | non_convergent | converged_nontrivial
    final: GridFunction
    starshaped: bool


def nonexistence_probe(
    grid: Grid, spec: KernelSpec, q: float, cfg: SolverConfig
) -> ProbeReport:
    """Track the unnormalized iteration at lam <= 0 and classify the path.

    This is a diagnostic, not a proof: the discrete map always fixes 0, so
    the verdict only describes the trajectory started from cfg.init.
    Negative potential values are clamped to zero before the power.
    """
    if spec.lam > 0:
        raise ValueError("the probe is meant for lam <= 0")
    if not (1.0 < q <= spec.q_critical + 1e-12):
        raise ValueError(
            f"probe exponent must satisfy 1 < q <= q_alpha = {spec.q_critical:.6g}"
        )
    starshaped = is_delta_starshaped(grid.domain)
    if not starshaped:
        warnings.warn("probe domain is not (verifiably) delta-starshaped")

    power = 1.0 / (q - 1.0)
    # unlike the normalized solve, the probe admits nonnegative starts
    # (zero is a legitimate, trivially fixed, initial state)
    if isinstance(cfg.init, GridFunction):
        if cfg.init.grid is not grid:
            raise ValueError("custom init must live on the probe grid")
        if cfg.init.values.min() < 0:
            raise ValueError("probe init must be nonnegative")
        f = GridFunction(grid, cfg.init.values.copy())
    else:
        f = GridFunction(grid, _init_values(grid, spec, cfg.init))
    trace: list[float] = []
    verdict = "non_convergent"
    for _ in range(cfg.max_iter):
        u = potential_combined(f, spec).values
        f = GridFunction(grid, np.clip(u, 0.0, None) ** power)
        sup = float(f.values.max())
        trace.append(sup)
        if sup < 1e-10:
            verdict = "decayed"
            break
        if not np.isfinite(sup) or sup > 1e12:
            verdict = "non_convergent"
            break
    else:
        tail = trace[-10:]
        stabilized = (
            len(tail) == 10
            and max(tail) > 0
            and (max(tail) - min(tail)) <= 1e-6 * max(tail)
        )
        if stabilized and el_residual(f, 1.0, replace(cfg, q=q)) < cfg.tol_residual:
            verdict = "converged_nontrivial"
    return ProbeReport(trace, verdict, f, starshaped)


# ---------------------------------------------------------------------------
# peak rescaling and the coupling-term diagnostic
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BlowupMap:
    mu: float
    peak: HPoint
    g: Callable[[np.ndarray], np.ndarray]
    domain_map: dict


def blowup_rescale(f: GridFunction, q: float, spec: KernelSpec) -> BlowupMap:
    """Peak-normalized zoom: mu = f(peak)^(-(2-q)/alpha) and g = f/f(peak)
    read off at the pulled-back point peak o dilate(mu, .) by nearest cell.
    """
    vals = f.values
    peak_idx = int(np.argmax(vals))  # ties resolve to the lowest index
    peak_val = float(vals[peak_idx])
    if peak_val <= 0:
        raise ValueError("rescaling needs a strictly positive maximum")
    if np.all(vals == peak_val):
        warnings.warn("constant grid function: peak ill-defined, using first cell")
        peak_idx = 0
    peak = HPoint.from_packed(f.grid.points[peak_idx])
    mu = peak_val ** (-(2.0 - q) / spec.alpha)

    tree = cKDTree(f.grid.points)
    n = spec.n

    def g(zeta: np.ndarray) -> np.ndarray:
        zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
        pulled = hgroup.mul_packed(peak.packed(), hgroup.dilate_packed(mu, zeta, n), n)
        _, idx = tree.query(pulled)
        return vals[idx] / peak_val

    dom = f.grid.domain
    if dom.kind == "cylinder":
        new_center = hgroup.dilate_packed(
            1.0 / mu,
            hgroup.mul_packed(hgroup.inv_packed(peak.packed()), dom.center.packed(), n),
            n,
        )
        domain_map = {
            "kind": "cylinder",
            "radius": dom.radius / mu,
            "center": new_center.tolist(),
        }
    else:
        domain_map = {"kind": "dilated-translate", "mu": mu, "peak": peak.packed().tolist()}
    return BlowupMap(mu=mu, peak=peak, g=g, domain_map=domain_map)


def lambda_term_magnitude(
    f: GridFunction, spec: KernelSpec, q: float, delta: float = 0.1
) -> float:
    """Ratio of the coupling term to the main term at the peak cell.

    Returns lam * (I_s1 f)(peak) / (I_s0 f)(peak), the relative size of the
    milder-kernel term in the stationarity equation; it shrinks as the peak
    sharpens. ``delta`` is the exponent split of the analytic envelope
    |lam| f(peak)^(-delta) ||f||_q^(2-q+delta) this ratio tracks; the split
    cancels in the measured ratio, but must be a legal one (0 < delta < q-1).
    """
    if not (0.0 < delta < q - 1.0):
        raise ValueError(f"delta must lie in (0, q-1) = (0, {q - 1.0:.6g}), got {delta}")
    if spec.lam == 0.0:
        return 0.0
    grid = f.grid
    peak_idx = int(np.argmax(f.values))
    wf = grid.weights * f.values
    dists = hgroup.dist_packed(grid.points[peak_idx], grid.points, spec.n)
    dists[peak_idx] = 1.0  # excluded below
    terms = []
    for s in (0, 1):
        sub = replace(spec, s=s)
        row = dists ** (-sub.exponent)
        row[peak_idx] = 0.0
        self_term = self_coefficients(grid, sub)[peak_idx] * f.values[peak_idx]
        terms.append(float(row @ wf) + self_term)
    return spec.lam * terms[1] / terms[0]


# ---------------------------------------------------------------------------
# subcritical-to-critical continuation
# ---------------------------------------------------------------------------

def solve_critical_via_limit(
    grid: Grid,
    spec: KernelSpec,
    schedule: list[float],
    cfg: SolverConfig,
) -> SolveReport:
    """Warm-started continuation down a decreasing q-schedule ending at q_alpha.

    Requires lam > 0 (the regime where the critical level is attainable).
    Each stage reuses the previous stage's solution as its initial iterate;
    the final stage runs at q = q_alpha with the same fixed-point map.
    """
    q_alpha = spec.q_critical
    if spec.lam <= 0:
        raise ValueError("critical continuation needs lam > 0")
    if len(schedule) < 1 or abs(schedule[-1] - q_alpha) > 1e-9:
        raise ValueError(f"schedule must end at q_alpha = {q_alpha:.12g}")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly decreasing")
    if schedule[0] >= 2.0:
        raise ValueError("schedule must start below 2")

    init: InitSpec = cfg.init
    stage_multipliers: list[float] = []
    report: Optional[SolveReport] = None
    for k, qk in enumerate(schedule):
        report = _fixed_point(
            grid,
            spec,
            qk,
            init,
            cfg.tol_residual,
            cfg.tol_energy,
            cfg.max_iter,
            cfg.damping,
            require_sup_settle=(k == len(schedule) - 1),
        )
        stage_multipliers.append(report.multiplier)
        if not report.converged:
            report.diagnostics["failed_stage"] = k
            report.diagnostics["failed_stage_q"] = qk
            report.diagnostics["stage_multipliers"] = stage_multipliers
            return report
        init = report.solution

    report.diagnostics["stage_multipliers"] = stage_multipliers
    report.diagnostics["exceeds_sharp_constant"] = bool(
        report.multiplier > sharp_constant(spec.n, spec.alpha)
    )
    return report
