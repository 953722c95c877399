"""Uniform cell grids on a centered box, sampled functions, weighted norms.

Everything downstream works on midpoint samples: a function is its vector of
cell-center values, integrals are midpoint sums, and a "weight" is a strictly
positive sampled function.  The box is [-L/2, L/2]^dim and the number of cells
per side is a power of two so that dyadic cubes align with cell boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "make_grid",
    "make_function",
    "make_weight",
    "lp_norm",
    "weak_lp_norm",
    "distribution",
    "save_function",
    "load_function",
]


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [-side_length/2, side_length/2]^dim into cells."""

    dim: int
    cells_per_side: int
    side_length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = self.cells_per_side
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"cells_per_side must be a power of two >= 8, got {n}")
        if not (self.side_length > 0 and math.isfinite(self.side_length)):
            raise ValueError(f"side_length must be positive, got {self.side_length}")

    @property
    def cell_width(self) -> float:
        return self.side_length / self.cells_per_side

    @property
    def cell_volume(self) -> float:
        return self.cell_width**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_side,) * self.dim

    @property
    def n_cells(self) -> int:
        return self.cells_per_side**self.dim

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        n, h = self.cells_per_side, self.cell_width
        return -self.side_length / 2 + h * (np.arange(n) + 0.5)

    def center_mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, one per axis, each of shape `shape`."""
        c = self.axis_centers()
        if self.dim == 1:
            return (c,)
        return tuple(np.meshgrid(c, c, indexing="ij"))

    def radii(self) -> np.ndarray:
        """Euclidean distance of each cell center from the origin."""
        mesh = self.center_mesh()
        return np.sqrt(sum(x**2 for x in mesh))


@dataclass
class GridFunction:
    """Cell-center samples of a function on `grid`.

    `weight=True` asserts strict positivity; constructors enforce it so code
    that needs a weight can rely on the tag.
    """

    grid: Grid
    values: np.ndarray
    weight: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        if self.weight and not np.all(vals > 0):
            raise ValueError("a weight must be strictly positive everywhere")
        self.values = vals

    def with_values(self, values: np.ndarray, weight: bool = False) -> "GridFunction":
        return GridFunction(self.grid, np.asarray(values, dtype=float), weight=weight)


def make_grid(dim: int, cells_per_side: int, side_length: float) -> Grid:
    return Grid(dim, cells_per_side, side_length)


def make_function(grid: Grid, values: np.ndarray) -> GridFunction:
    return GridFunction(grid, values)


def make_weight(grid: Grid, values: np.ndarray) -> GridFunction:
    return GridFunction(grid, values, weight=True)


def _check_same_grid(f: GridFunction, w: GridFunction):
    if f.grid != w.grid:
        raise ValueError("grid mismatch")


def _weight_values(f: GridFunction, w: GridFunction | None) -> np.ndarray:
    if w is None:
        return np.ones(f.grid.shape)
    _check_same_grid(f, w)
    if not w.weight:
        raise ValueError("w must be tagged as a weight")
    return w.values


def lp_norm(f: GridFunction, w: GridFunction | None, p: float) -> float:
    """(sum |f|^p w * cellvol)^(1/p); w=None means Lebesgue."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    wv = _weight_values(f, w)
    s = float(np.sum(np.abs(f.values) ** p * wv)) * f.grid.cell_volume
    return s ** (1.0 / p)


def distribution(f: GridFunction, w: GridFunction | None, t: float) -> float:
    """w-measure of the strict superlevel set {|f| > t}."""
    if t < 0:
        raise ValueError("level t must be >= 0")
    wv = _weight_values(f, w)
    return float(np.sum(wv[np.abs(f.values) > t])) * f.grid.cell_volume


def weak_lp_norm(f: GridFunction, w: GridFunction | None, p: float) -> float:
    """sup_t t * w({|f| > t})^(1/p) over achieved levels, both > and >= conventions.

    On a finite grid the sup over t>0 is attained at an achieved value of |f|;
    evaluating each level with the strict and the non-strict superlevel set and
    taking the larger covers both conventions.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    wv = _weight_values(f, w)
    a = np.abs(f.values).ravel()
    mass = wv.ravel() * f.grid.cell_volume
    order = np.argsort(a, kind="stable")
    a, mass = a[order], mass[order]
    # suffix sums: tail_ge[i] = mass of {|f| >= a[i]}
    tail = np.cumsum(mass[::-1])[::-1]
    levels, first_idx = np.unique(a, return_index=True)
    mass_ge = tail[first_idx]
    # mass of {|f| > level_i} is the >= mass of the next higher level
    mass_gt = np.concatenate([mass_ge[1:], [0.0]])
    pos = levels > 0
    if not np.any(pos):
        return 0.0
    lv = levels[pos]
    best_ge = np.max(lv * mass_ge[pos] ** (1.0 / p))
    best_gt = np.max(lv * mass_gt[pos] ** (1.0 / p))
    return float(max(best_ge, best_gt))


_HEADER = "dim,cells_per_side,side_length"


def save_function(path, f: GridFunction):
    """Plain-text format: one header line `dim,cells_per_side,side_length`,
    then cell values in row-major order, one repr per line (round-trip exact)."""
    lines = [f"{f.grid.dim},{f.grid.cells_per_side},{f.grid.side_length!r}"]
    # repr of a builtin float is the shortest string that parses back exactly;
    # numpy scalar reprs are wrapped and would not round-trip through float()
    lines.extend(repr(float(v)) for v in f.values.ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_function(path, weight: bool = False) -> GridFunction:
    with open(path) as fh:
        header = fh.readline().strip()
        parts = header.split(",")
        if len(parts) != 3:
            raise ValueError(f"bad header {header!r}, expected `{_HEADER}`")
        dim, n, side = int(parts[0]), int(parts[1]), float(parts[2])
        vals = np.array([float(line) for line in fh if line.strip()])
    grid = Grid(dim, n, side)
    if vals.size != grid.n_cells:
        raise ValueError(f"expected {grid.n_cells} values, got {vals.size}")
    return GridFunction(grid, vals.reshape(grid.shape), weight=weight)
