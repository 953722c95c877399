"""Bundled input fixtures: smooth bumps, seeded random test functions, the
standard weight sweep, and the concentrated adversarial pair.

Everything is seeded in physical coordinates, so a fixed seed produces the
same underlying object at every resolution.
"""
from __future__ import annotations

import numpy as np

from .grid import Grid, GridFunction, make_function, make_weight
from .weights import power_weight, random_a1_weight
from .young import maximal

__all__ = ["bump", "random_smooth", "weight_suite", "adversarial_pair"]

POWER_SWEEP = (0.0, 0.3, -0.3, 0.6, -0.6, 0.9, -0.9)


def _offset_radii(grid: Grid, center) -> np.ndarray:
    if np.isscalar(center):
        center = (center,) * grid.dim
    mesh = grid.center_mesh()
    return np.sqrt(sum((x - c) ** 2 for x, c in zip(mesh, center)))


def bump(grid: Grid, center=0.0, width: float | None = None) -> GridFunction:
    """C-infinity mollifier, support |x - center| < width (default: a quarter
    of the side, so a centred bump stays in the central half of the box)."""
    if width is None:
        width = grid.side_length / 4.0
    t2 = (_offset_radii(grid, center) / width) ** 2
    vals = np.zeros(grid.shape)
    inside = t2 < 1.0
    vals[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    return make_function(grid, vals)


def random_smooth(grid: Grid, seed: int, nonneg: bool = False) -> GridFunction:
    """Seeded band-limited noise tapered into the central half of the box.

    The modes live in physical frequency and the stream never touches the
    lattice, so a fixed seed samples one continuum function at every
    resolution.  Frequencies stay below eight periods per side; resolve them
    with at least 64 cells per side.
    """
    rng = np.random.default_rng(seed)
    n_modes = 32
    freqs = rng.uniform(-8.0, 8.0, size=(n_modes, grid.dim))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
    amps = rng.standard_normal(n_modes)
    mesh = grid.center_mesh()
    vals = np.zeros(grid.shape)
    scale = 2.0 * np.pi / grid.side_length
    for k, phase, a in zip(freqs, phases, amps):
        vals += a * np.cos(scale * sum(x * kc for x, kc in zip(mesh, k)) + phase)
    vals *= bump(grid).values
    if nonneg:
        vals = np.abs(vals)
    peak = float(np.max(np.abs(vals)))
    if peak == 0.0:
        raise RuntimeError("degenerate random draw")
    return make_function(grid, vals / peak)


def weight_suite(
    grid: Grid,
    power_exponents=POWER_SWEEP,
    random_count: int = 10,
    delta: float = 0.5,
    base_seed: int = 20240601,
) -> list[tuple[str, GridFunction]]:
    """The standard sweep: radial powers plus seeded controlled-A_1 weights."""
    suite = [(f"power_{a:g}", power_weight(grid, a)) for a in power_exponents]
    suite += [
        (f"rand_{i}", random_a1_weight(grid, base_seed + i, delta))
        for i in range(random_count)
    ]
    return suite


def adversarial_pair(grid: Grid, eps: float = 0.125) -> tuple[GridFunction, GridFunction]:
    """Concentrated near-critical pair: w = (M of a near-atom)^(1-eps) and a
    bump sitting on the atom.  Small eps pushes the A_1 constant up."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0,1)")
    density = np.zeros(grid.shape)
    density[(grid.cells_per_side // 2,) * grid.dim] = 1.0 / grid.cell_volume
    mu = GridFunction(grid, density)
    vals = maximal(mu, "lebesgue").values ** (1.0 - eps)
    w = make_weight(grid, vals / vals.mean())
    return bump(grid, width=grid.side_length / 8.0), w
