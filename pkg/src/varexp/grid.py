"""Uniform node-centred grids on intervals and rectangles.

Everything downstream works with nodal values on a :class:`Grid`.  The
integral of a field is the composite trapezoidal rule, so quadrature points
and nodes coincide, and the boundary distance ``d(x)`` is known in closed
form because the domains are axis-aligned boxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "make_grid",
    "distance_field",
    "integrate",
    "gradient",
]


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid on ``prod_i [low_i, high_i]`` with ``n_i`` nodes per axis."""

    dim: int
    extents: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.n) != self.dim:
            raise ValueError("extents and n must have one entry per axis")
        for (lo, hi), m in zip(self.extents, self.n):
            if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
                raise ValueError(f"degenerate extent ({lo}, {hi})")
            if m < 3:
                raise ValueError(f"need at least 3 nodes per axis, got {m}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (m - 1) for (lo, hi), m in zip(self.extents, self.n))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        # low + i*h rather than linspace so node coordinates follow the stated formula
        return tuple(lo + np.arange(m) * h for (lo, _), m, h in zip(self.extents, self.n, self.h))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``grid.shape`` (``ij`` indexing)."""
        out = np.meshgrid(*self.axes, indexing="ij")
        for c in out:
            c.setflags(write=False)
        return tuple(out)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior_mask(self) -> np.ndarray:
        mask = ~self.boundary_mask
        mask.setflags(write=False)
        return mask

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights, one per node."""
        w = np.ones(1)
        for m, h in zip(self.n, self.h):
            w1 = np.full(m, h)
            w1[0] = w1[-1] = 0.5 * h
            w = np.multiply.outer(w, w1)
        w = w.reshape(self.shape)
        w.setflags(write=False)
        return w

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.extents]))

    @property
    def inradius(self) -> float:
        return 0.5 * min(hi - lo for lo, hi in self.extents)

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def constant(self, c: float) -> "ScalarField":
        return ScalarField(self, np.full(self.shape, float(c)))

    def sample(self, fn) -> "ScalarField":
        """Evaluate ``fn(*coords)`` at every node."""
        vals = np.broadcast_to(np.asarray(fn(*self.coords), dtype=float), self.shape)
        return ScalarField(self, vals)


class ScalarField:
    """Real nodal values attached to a grid.  Immutable."""

    __slots__ = ("grid", "values")
    __array_priority__ = 20

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=float)
        if vals.shape != grid.shape:
            try:
                vals = np.broadcast_to(vals, grid.shape).copy()
            except ValueError:
                raise ValueError(
                    f"values of shape {vals.shape} do not fit grid of shape {grid.shape}"
                ) from None
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self):
        return f"ScalarField(shape={self.values.shape}, min={self.min():.6g}, max={self.max():.6g})"

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __abs__(self):
        return ScalarField(self.grid, np.abs(self.values))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior_mask]


def make_grid(dim: int, extents, n) -> Grid:
    """Build a uniform grid.

    ``extents`` is ``(low, high)`` for an interval or a sequence of such pairs;
    ``n`` is a node count or one count per axis.

    >>> make_grid(1, (0, 1), 3).axes[0]
    array([0. , 0.5, 1. ])
    """
    ext = np.asarray(extents, dtype=float)
    if ext.ndim == 1:
        ext = ext[None, :]
    if ext.shape != (dim, 2):
        raise ValueError(f"expected {dim} (low, high) pairs, got {extents!r}")
    if np.isscalar(n):
        n = (int(n),) * dim
    n = tuple(int(m) for m in n)
    return Grid(dim, tuple((float(lo), float(hi)) for lo, hi in ext), n)


def distance_field(grid: Grid) -> ScalarField:
    """Exact distance to the boundary of the box, ``min_i min(x_i - low_i, high_i - x_i)``."""
    d = np.full(grid.shape, np.inf)
    for c, (lo, hi) in zip(grid.coords, grid.extents):
        d = np.minimum(d, np.minimum(c - lo, hi - c))
    d = np.maximum(d, 0.0)
    d[grid.boundary_mask] = 0.0
    return ScalarField(grid, d)


def integrate(u) -> float:
    """Composite trapezoidal integral of a field over its grid."""
    if not isinstance(u, ScalarField):
        raise TypeError("integrate expects a ScalarField")
    # fixed, flattened summation order keeps results reproducible
    return float(np.sum((u.grid.weights * u.values).ravel()))


def gradient(u: ScalarField) -> tuple[np.ndarray, ...]:
    """Per-axis partial derivatives at the nodes.

    Centred differences inside, second-order one-sided differences on the
    boundary (``numpy.gradient`` with ``edge_order=2``).
    """
    g = np.gradient(u.values, *u.grid.h, edge_order=2)
    if u.grid.dim == 1:
        g = [g]
    return tuple(g)


def as_values(u: ScalarField | np.ndarray | float, grid: Grid) -> np.ndarray:
    if isinstance(u, ScalarField):
        if u.grid != grid:
            raise ValueError("field lives on a different grid")
        return u.values
    return np.broadcast_to(np.asarray(u, dtype=float), grid.shape)


def check_same_grid(*fields: ScalarField) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("fields live on different grids")
    return grid

