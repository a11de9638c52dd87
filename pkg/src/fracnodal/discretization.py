"""Uniform cell-centred grid on [-L, L]^N and the discrete Gagliardo form.

A field is piecewise constant on the cells and extended by zero outside
the box.  The double integral over R^N x R^N then splits into

* box x box: the off-diagonal cell pairs, weight w^2 / |x_i - x_j|^(N+2s);
  the within-cell (i == j) contribution vanishes for piecewise constants
  and is dropped, which costs an O(h^(2-2s)) consistency error;
* box x exterior (counted twice): u_i^2 times a closed-form exterior
  integral, stored as the tail weight T_i.

With D_i = sum_j K_ij the form is 2 u^T Q v where Q = diag(D + T) - K.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi
from pathlib import Path

import numpy as np

from .model import ModelParams


@dataclass(frozen=True)
class Grid:
    dim: int
    points_per_axis: int
    half_width: float

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def cell_measure(self) -> float:
        return self.spacing**self.dim

    @property
    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + (np.arange(self.points_per_axis) + 0.5) * h

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def nodes(self) -> np.ndarray:
        """Cell centres, shape (M,) in 1D and (M**dim, dim) otherwise."""
        ax = self.axis
        if self.dim == 1:
            return ax
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def make_grid(mp: ModelParams) -> Grid:
    return Grid(int(mp.dim), int(mp.grid_points), float(mp.half_width))


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Field:
    """Grid function, zero outside the box."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise GridMismatch(f"field has shape {vals.shape}, grid needs ({self.grid.size},)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "Field") -> "Field":
        _check_same(self.grid, other.grid)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same(self.grid, other.grid)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


def _check_same(g1: Grid, g2: Grid) -> None:
    if g1 != g2:
        raise GridMismatch(f"grid mismatch: {g1} vs {g2}")


def values_of(u, grid: Grid | None = None) -> np.ndarray:
    """Raw value array of a Field or array-like, checked against ``grid``."""
    if isinstance(u, Field):
        if grid is not None:
            _check_same(u.grid, grid)
        return u.values
    arr = np.asarray(u, dtype=float)
    if grid is not None and arr.shape != (grid.size,):
        raise GridMismatch(f"array of shape {arr.shape} does not live on a grid of {grid.size} nodes")
    return arr


def _like(u, vals: np.ndarray):
    return Field(u.grid, vals) if isinstance(u, Field) else vals


def positive_part(u):
    return _like(u, np.maximum(values_of(u), 0.0))


def negative_part(u):
    return _like(u, np.minimum(values_of(u), 0.0))


def integrate(grid: Grid, g) -> float:
    """Midpoint rule: cell measure times the sum of the values."""
    return grid.cell_measure * float(np.sum(values_of(g, grid)))


def exterior_integral(grid: Grid, s: float) -> np.ndarray:
    """int_{|y| outside box} |x_i - y|^(-N-2s) dy for every node.

    Exact in 1D.  For dim >= 2 the exterior of the box is replaced by the
    exterior of the largest ball around x_i inside the box, an upper bound
    (experimental).
    """
    L = grid.half_width
    x = grid.nodes
    if grid.dim == 1:
        return ((L - x) ** (-2 * s) + (L + x) ** (-2 * s)) / (2 * s)
    rho = np.min(L - np.abs(x), axis=1)
    n = grid.dim
    sphere_area = 2 * pi ** (n / 2) / gamma(n / 2)
    return sphere_area * rho ** (-2 * s) / (2 * s)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    grid: Grid
    s: float
    K: np.ndarray
    tail: np.ndarray
    row_sum: np.ndarray

    @property
    def diag(self) -> np.ndarray:
        return self.row_sum + self.tail

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Q u with Q = diag(D + T) - K; the form is 2 u.Q v."""
        return self.diag * u - self.K @ u

    def apply_no_tail(self, u: np.ndarray) -> np.ndarray:
        return self.row_sum * u - self.K @ u


MAX_DENSE_NODES = 8192


def build_kernel(grid: Grid, s: float, tail: bool = True) -> KernelMatrix:
    """Dense kernel; refuses grids above MAX_DENSE_NODES nodes."""
    if grid.size > MAX_DENSE_NODES:
        raise ValueError(f"{grid.size} nodes exceed the dense kernel limit of {MAX_DENSE_NODES}")
    w = grid.cell_measure
    x = grid.nodes
    if grid.dim == 1:
        dist = np.abs(x[:, None] - x[None, :])
    else:
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.sum(diff**2, axis=-1))
    np.fill_diagonal(dist, 1.0)
    K = w * w * dist ** (-(grid.dim + 2 * s))
    np.fill_diagonal(K, 0.0)
    T = w * exterior_integral(grid, s) if tail else np.zeros(grid.size)
    K.setflags(write=False)
    return KernelMatrix(grid, float(s), K, T, K.sum(axis=1))


def gagliardo_form(K: KernelMatrix, u, v) -> float:
    """sum_{i!=j} K_ij (u_i-u_j)(v_i-v_j) + 2 sum_i T_i u_i v_i."""
    uv = values_of(u, K.grid)
    vv = values_of(v, K.grid)
    return 2.0 * float(uv @ K.apply(vv))


def cross_term(K: KernelMatrix, u) -> float:
    """Gagliardo cross form of (u+, u-), tail excluded (u+ u- = 0 pointwise)."""
    uv = values_of(u, K.grid)
    up = np.maximum(uv, 0.0)
    um = np.minimum(uv, 0.0)
    return 2.0 * float(up @ K.apply_no_tail(um))


def h_norm_sq(K: KernelMatrix, V: np.ndarray, a: float, u) -> float:
    """Gagliardo energy plus (1/a) int V u^2."""
    uv = values_of(u, K.grid)
    return gagliardo_form(K, uv, uv) + integrate(K.grid, V * uv * uv) / a


def write_field(path: str | Path, u: Field) -> None:
    """Plain text dump: one node per line, ``x u`` (``x y u`` in 2D)."""
    nodes = u.grid.nodes
    cols = nodes[:, None] if nodes.ndim == 1 else nodes
    data = np.column_stack([cols, u.values])
    np.savetxt(path, data, fmt="%.17g", delimiter=" ")


def read_field(path: str | Path, grid: Grid) -> Field:
    data = np.loadtxt(path, ndmin=2)
    if data.shape != (grid.size, grid.dim + 1):
        raise GridMismatch(f"{path}: expected {grid.size} rows of {grid.dim + 1} columns, got {data.shape}")
    coords = data[:, :-1]
    nodes = grid.nodes
    nodes = nodes[:, None] if nodes.ndim == 1 else nodes
    if not np.allclose(coords, nodes, rtol=0, atol=1e-12 * max(1.0, grid.half_width)):
        raise GridMismatch(f"{path}: node coordinates do not match the grid")
    return Field(grid, data[:, -1])
