"""Heisenberg group algebra in real coordinates.

A point of H^n is stored as (x, y, t) with x, y in R^n and t in R; the
complex coordinate is z_j = x_j + i y_j but all arithmetic here is real,
so the twist term 2*Im(z . conj(z')) appears as an explicit bilinear form.

Two layers share the same formulas:

* ``HPoint`` -- a single point, convenient for scalar work and the CLI.
* packed arrays -- shape ``(..., 2n+1)`` with columns ``[x_1..x_n,
  y_1..y_n, t]``, used by grids and kernels. Functions suffixed ``_packed``
  broadcast over leading axes.

All operations are pure; nothing here mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionMismatchError(ValueError):
    """Operands live on Heisenberg groups of different n."""


@dataclass(frozen=True)
class HPoint:
    """A point xi = (x, y, t) of H^n."""

    x: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", float(self.t))
        if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape or x.size < 1:
            raise DimensionMismatchError(
                f"x and y must be equal-length 1-d vectors, got {x.shape} and {y.shape}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.isfinite(self.t)):
            raise ValueError("HPoint coordinates must be finite")

    @property
    def n(self) -> int:
        return self.x.size

    def packed(self) -> np.ndarray:
        """Coordinates as a flat [x, y, t] vector of length 2n+1."""
        return np.concatenate([self.x, self.y, [self.t]])

    @staticmethod
    def from_packed(v: np.ndarray) -> "HPoint":
        v = np.asarray(v, dtype=float)
        n = (v.size - 1) // 2
        return HPoint(v[:n], v[n : 2 * n], v[2 * n])


@dataclass(frozen=True)
class GroupDim:
    """Dimension bookkeeping: homogeneous dimension Q = 2n + 2."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def Q(self) -> int:
        return 2 * self.n + 2


def identity(n: int) -> HPoint:
    return HPoint(np.zeros(n), np.zeros(n), 0.0)


def _check_same_n(a: HPoint, b: HPoint) -> None:
    if a.n != b.n:
        raise DimensionMismatchError(f"points have n={a.n} and n={b.n}")


def mul(a: HPoint, b: HPoint) -> HPoint:
    """Group product a*b; the t component picks up 2*sum(a.y*b.x - a.x*b.y)."""
    _check_same_n(a, b)
    twist = 2.0 * float(np.dot(a.y, b.x) - np.dot(a.x, b.y))
    return HPoint(a.x + b.x, a.y + b.y, a.t + b.t + twist)


def inv(a: HPoint) -> HPoint:
    """Group inverse: negate every coordinate (the twist vanishes on (z, -z))."""
    return HPoint(-a.x, -a.y, -a.t)


def gauge_norm(a: HPoint) -> float:
    """Koranyi gauge |xi| = (|z|^4 + t^2)^(1/4)."""
    z2 = float(np.dot(a.x, a.x) + np.dot(a.y, a.y))
    return (z2 * z2 + a.t * a.t) ** 0.25


def dilate(r: float, a: HPoint) -> HPoint:
    """Anisotropic dilation (z, t) -> (r z, r^2 t), r > 0."""
    if r <= 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    return HPoint(r * a.x, r * a.y, r * r * a.t)


def dist(a: HPoint, b: HPoint) -> float:
    """Left-invariant gauge distance |b^{-1} a|."""
    return gauge_norm(mul(inv(b), a))


def euler_field(a: HPoint) -> np.ndarray:
    """Coefficients (x, y, 2t) of the dilation generator at a."""
    return np.concatenate([a.x, a.y, [2.0 * a.t]])


# ---------------------------------------------------------------------------
# packed-array layer
# ---------------------------------------------------------------------------

def mul_packed(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Group product on packed [x, y, t] arrays, broadcasting leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay, at = a[..., :n], a[..., n : 2 * n], a[..., 2 * n]
    bx, by, bt = b[..., :n], b[..., n : 2 * n], b[..., 2 * n]
    twist = 2.0 * ((ay * bx).sum(axis=-1) - (ax * by).sum(axis=-1))
    out_shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.empty(out_shape)
    out[..., :n] = ax + bx
    out[..., n : 2 * n] = ay + by
    out[..., 2 * n] = at + bt + twist
    return out


def inv_packed(a: np.ndarray) -> np.ndarray:
    return -np.asarray(a, dtype=float)


def gauge_norm_packed(a: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    z2 = (a[..., : 2 * n] ** 2).sum(axis=-1)
    return (z2 * z2 + a[..., 2 * n] ** 2) ** 0.25


def dilate_packed(r: float, a: np.ndarray, n: int) -> np.ndarray:
    if r <= 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    out = np.array(a, dtype=float, copy=True)
    out[..., : 2 * n] *= r
    out[..., 2 * n] *= r * r
    return out


def dist_packed(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Gauge distance |b^{-1} a| on packed arrays."""
    return gauge_norm_packed(mul_packed(inv_packed(b), a, n), n)


def euler_field_packed(a: np.ndarray, n: int) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out[..., 2 * n] *= 2.0
    return out
