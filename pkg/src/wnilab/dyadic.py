"""Dyadic cubes on a grid, cube averages, and sparse families of cubes.

Cubes are identified by (level, index): level 0 is the whole box, each level
halves the side, and the index counts cubes per axis from the low corner.  A
sparse family carries, for every cube Q, a "major subset" E_Q (stored as flat
cell indices) with the two certificate conditions: the E_Q are pairwise
disjoint and |E_Q| >= eta * |Q|.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridFunction, _check_same_grid

__all__ = [
    "DyadicCube",
    "SparseFamily",
    "lattice_cubes",
    "cube_side_cells",
    "cube_slices",
    "cube_cells",
    "cube_cell_count",
    "cube_volume",
    "cube_contains",
    "average",
    "s_average",
    "weighted_average",
    "verify_sparse",
    "stopping_family",
    "principal_pair_family",
    "carleson_sum",
    "family_to_json",
    "family_from_json",
]


@dataclass(frozen=True)
class DyadicCube:
    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        idx = tuple(int(i) for i in self.index)
        object.__setattr__(self, "index", idx)
        if any(i < 0 or i >= (1 << self.level) for i in idx):
            raise ValueError(f"index {idx} out of range at level {self.level}")


def _check_cube(grid: Grid, q: DyadicCube):
    if len(q.index) != grid.dim:
        raise ValueError(f"cube index arity {len(q.index)} != grid dim {grid.dim}")
    if (1 << q.level) > grid.cells_per_side:
        raise ValueError(f"cube level {q.level} finer than the grid")


def cube_side_cells(grid: Grid, q: DyadicCube) -> int:
    _check_cube(grid, q)
    return grid.cells_per_side >> q.level


def cube_slices(grid: Grid, q: DyadicCube) -> tuple[slice, ...]:
    side = cube_side_cells(grid, q)
    return tuple(slice(i * side, (i + 1) * side) for i in q.index)


def cube_cells(grid: Grid, q: DyadicCube) -> np.ndarray:
    """Flat (row-major) cell indices covered by the cube, sorted."""
    side = cube_side_cells(grid, q)
    if grid.dim == 1:
        i0 = q.index[0] * side
        return np.arange(i0, i0 + side)
    r0, c0 = q.index[0] * side, q.index[1] * side
    rows = np.arange(r0, r0 + side)
    cols = np.arange(c0, c0 + side)
    return (rows[:, None] * grid.cells_per_side + cols[None, :]).ravel()


def cube_cell_count(grid: Grid, q: DyadicCube) -> int:
    return cube_side_cells(grid, q) ** grid.dim


def cube_volume(grid: Grid, q: DyadicCube) -> float:
    return cube_cell_count(grid, q) * grid.cell_volume


def cube_contains(a: DyadicCube, b: DyadicCube) -> bool:
    """True iff cube b is contained in cube a (possibly equal)."""
    if b.level < a.level:
        return False
    shift = b.level - a.level
    return all((ib >> shift) == ia for ia, ib in zip(a.index, b.index))


def lattice_cubes(grid: Grid, max_level: int) -> list[DyadicCube]:
    """All cubes of levels 0..max_level, coarse to fine."""
    if max_level < 0:
        raise ValueError("max_level must be >= 0")
    if (1 << max_level) > grid.cells_per_side:
        raise ValueError("2^max_level exceeds cells_per_side")
    out = []
    for lev in range(max_level + 1):
        n = 1 << lev
        if grid.dim == 1:
            out.extend(DyadicCube(lev, (i,)) for i in range(n))
        else:
            out.extend(DyadicCube(lev, (i, j)) for i in range(n) for j in range(n))
    return out


def average(f: GridFunction, q: DyadicCube) -> float:
    """Plain mean of |f| over the cube's cells (midpoint-rule cube average)."""
    sl = cube_slices(f.grid, q)
    return float(np.mean(np.abs(f.values[sl])))


def s_average(f: GridFunction, q: DyadicCube, s: float) -> float:
    """(<|f|^s>_Q)^(1/s) for s >= 1."""
    if not s >= 1:
        raise ValueError(f"s must be >= 1, got {s}")
    sl = cube_slices(f.grid, q)
    return float(np.mean(np.abs(f.values[sl]) ** s)) ** (1.0 / s)


def weighted_average(f: GridFunction, w: GridFunction, q: DyadicCube) -> float:
    """w-weighted mean of f over the cube (cell volume cancels)."""
    _check_same_grid(f, w)
    if not w.weight:
        raise ValueError("w must be tagged as a weight")
    sl = cube_slices(f.grid, q)
    wv = w.values[sl]
    return float(np.sum(f.values[sl] * wv) / np.sum(wv))


@dataclass
class SparseFamily:
    grid: Grid
    cubes: list[DyadicCube]
    majors: list[np.ndarray]  # flat cell indices of E_Q, aligned with cubes
    eta: float

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0,1), got {self.eta}")
        if len(self.cubes) != len(self.majors):
            raise ValueError("cubes and majors must align")


def verify_sparse(fam: SparseFamily, tol: float = 1e-9) -> tuple[bool, float]:
    """Check E_Q subset of Q, pairwise disjointness, and eta|Q| <= |E_Q|.

    Returns (ok, worst_eta) with worst_eta = min_Q |E_Q|/|Q| in cell counts.
    """
    worst = 1.0
    total = 0
    seen = np.zeros(fam.grid.n_cells, dtype=bool)
    ok = True
    for q, e in zip(fam.cubes, fam.majors):
        cells = cube_cells(fam.grid, q)
        if e.size and not np.all(np.isin(e, cells)):
            ok = False
        if e.size:
            if np.any(seen[e]):
                ok = False
            seen[e] = True
        total += e.size
        frac = e.size / cells.size
        worst = min(worst, frac)
        if fam.eta * cells.size > e.size + tol:
            ok = False
    if total != int(np.count_nonzero(seen)):
        ok = False
    return ok, worst


def _level_sums(values: np.ndarray, max_level: int, dim: int) -> list[np.ndarray]:
    out = []
    n = values.shape[0]
    for lev in range(max_level + 1):
        nb = 1 << lev
        side = n // nb
        if dim == 1:
            out.append(values.reshape(nb, side).sum(axis=1))
        else:
            out.append(values.reshape(nb, side, nb, side).sum(axis=(1, 3)))
    return out


def _children(q: DyadicCube, dim: int) -> list[DyadicCube]:
    lev = q.level + 1
    if dim == 1:
        (i,) = q.index
        return [DyadicCube(lev, (2 * i,)), DyadicCube(lev, (2 * i + 1,))]
    i, j = q.index
    return [DyadicCube(lev, (2 * i + a, 2 * j + b)) for a in (0, 1) for b in (0, 1)]


def _max_lattice_level(grid: Grid, lattice: list[DyadicCube]) -> int:
    if not lattice:
        raise ValueError("lattice must be non-empty")
    top = max(q.level for q in lattice)
    if (1 << top) > grid.cells_per_side:
        raise ValueError("lattice finer than the grid")
    return top


def _maximal_selected(tau, parent: DyadicCube, threshold: float, max_level: int, dim: int):
    """Maximal proper subcubes Q of `parent` (down to max_level) with tau(Q) > threshold."""
    selected = []
    stack = _children(parent, dim) if parent.level < max_level else []
    while stack:
        q = stack.pop()
        if tau(q) > threshold:
            selected.append(q)
        elif q.level < max_level:
            stack.extend(_children(q, dim))
    return selected


def _build_stopping(grid: Grid, tau, max_level: int, ratio: float):
    """Generic stopping-time recursion: under each kept cube F, select the
    maximal proper subcubes with tau > ratio*tau(F), recurse on those, and
    certify F with E_F = F minus the selected subcubes."""
    root = DyadicCube(0, (0,) * grid.dim)
    cubes, majors, dropped = [], [], 0
    work = [root]
    while work:
        f_cube = work.pop()
        children = _maximal_selected(tau, f_cube, ratio * tau(f_cube), max_level, grid.dim)
        cells = cube_cells(grid, f_cube)
        if children:
            taken = np.concatenate([cube_cells(grid, q) for q in children])
            e = np.setdiff1d(cells, taken, assume_unique=True)
        else:
            e = cells
        if e.size == 0:
            dropped += 1
        else:
            cubes.append(f_cube)
            majors.append(e)
        work.extend(children)
    return cubes, majors, dropped


def stopping_family(f: GridFunction, lattice: list[DyadicCube], ratio: float = 2.0) -> SparseFamily:
    """Stopping cubes of <|f|> with doubling threshold `ratio`.

    The selected subcubes of F are maximal with <|f|>_Q > ratio * <|f|>_F, so
    they cover less than |F|/ratio and the family is (1 - 1/ratio)-sparse.
    """
    if not ratio > 1:
        raise ValueError(f"ratio must exceed 1, got {ratio}")
    if not np.any(f.values):
        raise ValueError("f must not be identically zero")
    max_level = _max_lattice_level(f.grid, lattice)
    sums = _level_sums(np.abs(f.values), max_level, f.grid.dim)

    def tau(q: DyadicCube) -> float:
        return float(sums[q.level][q.index]) / cube_cell_count(f.grid, q)

    cubes, majors, dropped = _build_stopping(f.grid, tau, max_level, ratio)
    assert dropped == 0  # selected subcubes cover < |F|/ratio, so E_F is never empty
    return SparseFamily(f.grid, cubes, majors, eta=1.0 - 1.0 / ratio)


def principal_pair_family(
    f: GridFunction,
    g: GridFunction,
    w: GridFunction,
    lattice: list[DyadicCube],
    sr: float,
    ratio: float = 2.0,
) -> SparseFamily:
    """Stopping cubes of the pair functional <|f|>_Q * (w-avg of |g|^sr)^(1/sr).

    Unlike the single-function rule, a very skewed (g, w) can let the selected
    subcubes of F exhaust F; such cubes carry no certificate and are dropped
    from the family (their selected subcubes are still recursed on).  The
    declared eta is the observed minimum of |E_Q|/|Q|, capped at 1 - 1/ratio.
    """
    if not ratio > 1:
        raise ValueError(f"ratio must exceed 1, got {ratio}")
    if not sr >= 1:
        raise ValueError(f"sr must be >= 1, got {sr}")
    _check_same_grid(f, g)
    if not np.any(f.values) or not np.any(g.values):
        raise ValueError("f and g must not be identically zero")
    max_level = _max_lattice_level(f.grid, lattice)
    fsums = _level_sums(np.abs(f.values), max_level, f.grid.dim)
    wsums = _level_sums(w.values, max_level, f.grid.dim)
    gwsums = _level_sums(np.abs(g.values) ** sr * w.values, max_level, f.grid.dim)

    def tau(q: DyadicCube) -> float:
        mean_f = float(fsums[q.level][q.index]) / cube_cell_count(f.grid, q)
        wavg = float(gwsums[q.level][q.index]) / float(wsums[q.level][q.index])
        return mean_f * wavg ** (1.0 / sr)

    cubes, majors, _ = _build_stopping(f.grid, tau, max_level, ratio)
    if not cubes:
        raise ValueError("no cube retained a certificate; input too degenerate")
    observed = min(e.size / cube_cell_count(f.grid, q) for q, e in zip(cubes, majors))
    return SparseFamily(f.grid, cubes, majors, eta=min(observed, 1.0 - 1.0 / ratio))


def carleson_sum(f: GridFunction, w: GridFunction, fam: SparseFamily) -> float:
    """Sum over the family of <|f|>_Q * w(Q)."""
    _check_same_grid(f, w)
    total = 0.0
    for q in fam.cubes:
        sl = cube_slices(f.grid, q)
        wq = float(np.sum(w.values[sl])) * f.grid.cell_volume
        total += average(f, q) * wq
    return total


def family_to_json(fam: SparseFamily) -> dict:
    """Portable form: cube ids plus each cube's realized |E_Q|/|Q|."""
    ok, _ = verify_sparse(fam)
    if not ok:
        raise ValueError("refusing to export a family that fails verification")
    return {
        "eta": fam.eta,
        "cubes": [
            {
                "level": q.level,
                "index": list(q.index),
                "eta_local": e.size / cube_cell_count(fam.grid, q),
            }
            for q, e in zip(fam.cubes, fam.majors)
        ],
    }


def family_from_json(grid: Grid, data: dict) -> SparseFamily:
    """Rebuild a family from its exported cube list.

    E_Q is reconstructed as Q minus the family cubes strictly inside Q; for
    families built by the stopping recursions this reproduces the original
    major subsets.
    """
    cubes = [DyadicCube(c["level"], tuple(c["index"])) for c in data["cubes"]]
    majors = []
    for q in cubes:
        cells = cube_cells(grid, q)
        inner = [p for p in cubes if p != q and cube_contains(q, p)]
        if inner:
            taken = np.unique(np.concatenate([cube_cells(grid, p) for p in inner]))
            cells = np.setdiff1d(cells, taken, assume_unique=True)
        majors.append(cells)
    return SparseFamily(grid, cubes, majors, eta=float(data["eta"]))
