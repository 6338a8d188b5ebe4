"""Bounded domains of H^n, quadrature grids, and cylinder boundary data.

Two kinds of domain are supported. A *cylinder* with gauge radius R is the
left translate zeta o {|z| < R, |t| < R^2}; membership is tested by pulling
the point back with the group inverse. An *indicator* domain is any user
predicate together with a bounding box.

Grids are uniform midpoint lattices over the bounding box, kept where the
cell center lies inside the domain, with weight = cell volume (the Haar
measure of H^n is Lebesgue measure). The t spacing follows the parabolic
scaling of the dilations: by default ht = h * min(T/W, aspect_limit) where
W and T are the xy and t half-extents of the box, i.e. the grid is the
dilation image of a near-isotropic grid on the unit cylinder. The cap keeps
cell counts polynomial in R for elongated cylinders; pass ``ht`` explicitly
to override.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from . import hgroup
from .hgroup import HPoint


class DegenerateDomainError(ValueError):
    """Grid construction produced no cells."""


class UnsupportedDomainError(ValueError):
    """Operation not available for this domain kind or placement."""


@dataclass(frozen=True)
class GaugeDomain:
    """A bounded subset of H^n with a bounding box in (x, y, t) coordinates.

    bbox has shape (2n+1, 2) with rows [lo, hi] in packed coordinate order.
    """

    kind: str  # "cylinder" | "indicator"
    n: int
    bbox: np.ndarray
    center: Optional[HPoint] = None
    radius: float = 0.0
    indicator: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("cylinder", "indicator"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        bbox = np.asarray(self.bbox, dtype=float)
        if bbox.shape != (2 * self.n + 1, 2) or np.any(bbox[:, 1] <= bbox[:, 0]):
            raise ValueError("bbox must be (2n+1, 2) with hi > lo on every axis")
        object.__setattr__(self, "bbox", bbox)
        if self.kind == "cylinder":
            if self.center is None or self.radius <= 0:
                raise ValueError("cylinder needs a center and a positive radius")
        elif self.indicator is None:
            raise ValueError("indicator domain needs a predicate")

    def contains_packed(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership for packed points of shape (..., 2n+1)."""
        pts = np.asarray(pts, dtype=float)
        if self.kind == "cylinder":
            rel = hgroup.mul_packed(
                hgroup.inv_packed(self.center.packed()), pts, self.n
            )
            z2 = (rel[..., : 2 * self.n] ** 2).sum(axis=-1)
            return (z2 < self.radius**2) & (
                np.abs(rel[..., 2 * self.n]) < self.radius**2
            )
        return np.asarray(self.indicator(pts), dtype=bool)


def cylinder(n: int, radius: float, center: Optional[HPoint] = None) -> GaugeDomain:
    """The cylindrical set of gauge radius R translated to `center`."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if center is None:
        center = hgroup.identity(n)
    if center.n != n:
        raise hgroup.DimensionMismatchError(f"center has n={center.n}, expected {n}")
    base = np.empty((2 * n + 1, 2))
    base[: 2 * n, 0] = -radius
    base[: 2 * n, 1] = radius
    base[2 * n] = (-radius**2, radius**2)
    # Left translation is affine in the point, so the axis-aligned hull of
    # the translated box corners contains the translated cylinder.
    corners = np.stack(
        np.meshgrid(*[base[k] for k in range(2 * n + 1)], indexing="ij"), axis=-1
    ).reshape(-1, 2 * n + 1)
    moved = hgroup.mul_packed(center.packed(), corners, n)
    bbox = np.stack([moved.min(axis=0), moved.max(axis=0)], axis=1)
    return GaugeDomain(kind="cylinder", n=n, bbox=bbox, center=center, radius=radius)


def indicator_domain(
    n: int, predicate: Callable[[np.ndarray], np.ndarray], bbox: np.ndarray
) -> GaugeDomain:
    """Domain defined by a vectorized predicate on packed points."""
    return GaugeDomain(kind="indicator", n=n, bbox=np.asarray(bbox, float), indicator=predicate)


def contains(d: GaugeDomain, p: HPoint) -> bool:
    if p.n != d.n:
        raise hgroup.DimensionMismatchError(f"point has n={p.n}, domain has n={d.n}")
    # indicator predicates may assume 2-d input; query with a single row
    return bool(d.contains_packed(p.packed()[None, :])[0])


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def default_t_spacing(d: GaugeDomain, h: float, aspect_limit: float = 4.0) -> float:
    """Parabolic default for the t spacing, capped for elongated boxes."""
    half = 0.5 * (d.bbox[:, 1] - d.bbox[:, 0])
    W = float(half[: 2 * d.n].max())
    T = float(half[2 * d.n])
    return h * min(T / W, aspect_limit)


def _axis_centers(lo: float, hi: float, spacing: float):
    """Midpoint lattice snapped so the cells tile [lo, hi] exactly."""
    extent = hi - lo
    m = max(1, int(np.ceil(extent / spacing - 1e-12)))
    actual = extent / m
    return lo + (np.arange(m) + 0.5) * actual, actual


@dataclass(eq=False)
class Grid:
    """Cell-centered quadrature grid: packed centers and Lebesgue weights."""

    points: np.ndarray  # (N, 2n+1)
    weights: np.ndarray  # (N,)
    h: float
    ht: float
    domain: GaugeDomain
    _op_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def iter_cells(self) -> Iterator[tuple[HPoint, float]]:
        for row, w in zip(self.points, self.weights):
            yield HPoint.from_packed(row), float(w)

    def volume(self) -> float:
        return float(self.weights.sum())


def build_grid(
    d: GaugeDomain,
    h: float,
    ht: Optional[float] = None,
    aspect_limit: float = 4.0,
) -> Grid:
    """Uniform midpoint grid over the bounding box, trimmed to the domain."""
    if h <= 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    extents = d.bbox[:, 1] - d.bbox[:, 0]
    if h > extents[: 2 * d.n].min():
        raise ValueError(f"h={h} exceeds an xy bbox extent {extents[:2 * d.n].min()}")
    if ht is None:
        ht = default_t_spacing(d, h, aspect_limit)
    if ht <= 0 or ht > extents[2 * d.n]:
        raise ValueError(f"t spacing {ht} invalid for t extent {extents[2 * d.n]}")

    axes = []
    cell_vol = 1.0
    for k in range(2 * d.n):
        c, actual = _axis_centers(d.bbox[k, 0], d.bbox[k, 1], h)
        axes.append(c)
        cell_vol *= actual
    tc, t_actual = _axis_centers(d.bbox[2 * d.n, 0], d.bbox[2 * d.n, 1], ht)
    axes.append(tc)
    cell_vol *= t_actual

    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    keep = d.contains_packed(pts)
    pts = pts[keep]
    if pts.shape[0] == 0:
        raise DegenerateDomainError("no cell centers fall inside the domain")
    w = np.full(pts.shape[0], cell_vol)
    return Grid(points=pts, weights=w, h=h, ht=ht, domain=d)


def integrate(
    d: GaugeDomain,
    fn: Callable[[np.ndarray], np.ndarray],
    h: float,
    ht: Optional[float] = None,
    chunk: int = 1 << 22,
) -> float:
    """Midpoint-rule integral of ``fn`` over the domain, streamed by t-slices.

    Same quadrature as ``build_grid`` + a cell sum, but never materializes
    the grid, so it scales to resolutions far beyond what the O(N^2) kernel
    machinery can hold. ``fn`` maps packed points (M, 2n+1) to values (M,).

    For cylinders the xy condition is t-independent, so the xy lattice is
    filtered once and only the (cheap) t condition runs per slice.
    """
    if ht is None:
        ht = default_t_spacing(d, h)
    axes = []
    cell_vol = 1.0
    for k in range(2 * d.n):
        c, actual = _axis_centers(d.bbox[k, 0], d.bbox[k, 1], h)
        axes.append(c)
        cell_vol *= actual
    tc, t_actual = _axis_centers(d.bbox[2 * d.n, 0], d.bbox[2 * d.n, 1], ht)
    cell_vol *= t_actual

    mesh = np.meshgrid(*axes, indexing="ij")
    xy = np.stack([m.ravel() for m in mesh], axis=-1)  # (Mxy, 2n)

    cyl = d.kind == "cylinder"
    t_shift = None
    if cyl:
        c = d.center.packed()
        cz, ct = c[: 2 * d.n], c[2 * d.n]
        keep = ((xy - cz) ** 2).sum(axis=1) < d.radius**2
        xy = xy[keep]
        # t part of center^{-1} o p, up to the p.t summand
        t_shift = -ct + 2.0 * (
            xy[:, d.n :] @ c[: d.n] - xy[:, : d.n] @ c[d.n : 2 * d.n]
        )
    Mxy = xy.shape[0]
    if Mxy == 0:
        return 0.0

    slice_stride = max(1, chunk // Mxy)
    total = 0.0
    buf = np.empty((slice_stride, Mxy, 2 * d.n + 1))
    for s0 in range(0, tc.size, slice_stride):
        ts = tc[s0 : s0 + slice_stride]
        block = buf[: ts.size]
        block[..., : 2 * d.n] = xy[None, :, :]
        block[..., 2 * d.n] = ts[:, None]
        flat = block.reshape(ts.size * Mxy, 2 * d.n + 1)
        if cyl:
            inside = (
                np.abs(ts[:, None] + t_shift[None, :]) < d.radius**2
            ).ravel()
        else:
            inside = d.contains_packed(flat)
        if inside.all():
            total += float(fn(flat).sum())
        elif inside.any():
            total += float(fn(flat[inside]).sum())
    return total * cell_vol


# ---------------------------------------------------------------------------
# starshape test
# ---------------------------------------------------------------------------

def is_delta_starshaped(
    d: GaugeDomain,
    boundary_samples: int = 512,
    lambda_steps: int = 33,
    seed: int = 0,
) -> bool:
    """Sampling check of the dilation-invariance form of starshapedness.

    Draws interior points and verifies dilate(lam, xi) stays inside for a
    uniform grid of lam in (0, 1]. This is a falsifier, not a prover: a True
    answer means no sampled violation was found.
    """
    if boundary_samples < 1 or lambda_steps < 1:
        raise ValueError("boundary_samples and lambda_steps must be positive")
    origin = hgroup.identity(d.n)
    if not contains(d, origin):
        return False

    rng = np.random.default_rng(seed)
    lo, hi = d.bbox[:, 0], d.bbox[:, 1]
    samples = []
    needed = boundary_samples
    for _ in range(64):
        cand = rng.uniform(lo, hi, size=(4 * needed, 2 * d.n + 1))
        cand = cand[d.contains_packed(cand)]
        samples.append(cand[:needed])
        needed -= samples[-1].shape[0]
        if needed <= 0:
            break
    pts = np.concatenate(samples, axis=0)
    if pts.shape[0] == 0:
        return False

    lams = np.linspace(0.0, 1.0, lambda_steps + 1)[1:]  # lam=0 is the origin
    for lam in lams:
        shrunk = hgroup.dilate_packed(lam, pts, d.n)
        if not d.contains_packed(shrunk).all():
            return False
    return True


# ---------------------------------------------------------------------------
# boundary quadrature (origin-centered cylinder, n = 1)
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BoundaryQuad:
    """Surface quadrature: points, outward Euclidean normals, dsigma weights."""

    points: np.ndarray  # (M, 3)
    normals: np.ndarray  # (M, 3)
    weights: np.ndarray  # (M,)


def boundary_quadrature(d: GaugeDomain, m: int) -> BoundaryQuad:
    """Euclidean surface quadrature of the origin-centered cylinder, n = 1.

    The lateral wall {|z| = R, |t| <= R^2} carries normal (x/R, y/R, 0) and
    measure R dtheta dt; the caps {t = +-R^2, |z| < R} carry (0, 0, +-1) and
    rho drho dtheta. `m` sets the point count per parameter direction; the
    per-piece weight sums are exact for any m.
    """
    if d.kind != "cylinder":
        raise UnsupportedDomainError("boundary quadrature needs a cylinder domain")
    if d.n != 1:
        raise UnsupportedDomainError("boundary quadrature is implemented for n=1 only")
    if not np.allclose(d.center.packed(), 0.0):
        raise UnsupportedDomainError("boundary quadrature needs an origin-centered cylinder")
    if m < 1:
        raise ValueError("m must be positive")
    R = d.radius

    theta = (np.arange(m) + 0.5) * (2 * np.pi / m)
    ct, st = np.cos(theta), np.sin(theta)

    # lateral wall: m angles x m t-levels
    tlev = (np.arange(m) + 0.5) * (2 * R * R / m) - R * R
    TH, TT = np.meshgrid(theta, tlev, indexing="ij")
    wall_pts = np.stack(
        [R * np.cos(TH).ravel(), R * np.sin(TH).ravel(), TT.ravel()], axis=-1
    )
    wall_nrm = np.stack(
        [np.cos(TH).ravel(), np.sin(TH).ravel(), np.zeros(m * m)], axis=-1
    )
    wall_w = np.full(m * m, R * (2 * np.pi / m) * (2 * R * R / m))

    # caps: ceil(m/2) radial rings x m angles each, midpoint in rho
    mr = (m + 1) // 2
    rho = (np.arange(mr) + 0.5) * (R / mr)
    RHO, TH2 = np.meshgrid(rho, theta, indexing="ij")
    cap_xy = np.stack([(RHO * np.cos(TH2)).ravel(), (RHO * np.sin(TH2)).ravel()], axis=-1)
    cap_w = (RHO.ravel() * (R / mr) * (2 * np.pi / m))
    pieces_p, pieces_n, pieces_w = [wall_pts], [wall_nrm], [wall_w]
    for sgn in (1.0, -1.0):
        pcap = np.concatenate(
            [cap_xy, np.full((cap_xy.shape[0], 1), sgn * R * R)], axis=-1
        )
        ncap = np.zeros_like(pcap)
        ncap[:, 2] = sgn
        pieces_p.append(pcap)
        pieces_n.append(ncap)
        pieces_w.append(cap_w)
    return BoundaryQuad(
        points=np.concatenate(pieces_p, axis=0),
        normals=np.concatenate(pieces_n, axis=0),
        weights=np.concatenate(pieces_w, axis=0),
    )
