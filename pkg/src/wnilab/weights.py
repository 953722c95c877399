"""Muckenhoupt characteristics and weight generators.

Outer suprema run over a caller-supplied dyadic cube list by default; the
`all_windows` flag switches ap_constant to every axis-aligned window (the
brute-force oracle).  Inner maximal functions always range over all windows.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, GridFunction, make_weight
from .dyadic import DyadicCube, cube_slices, cube_side_cells
from . import windows
from .young import maximal

__all__ = [
    "ap_constant",
    "a1_constant",
    "ainf_constant",
    "reverse_holder_check",
    "calibrate_tau",
    "power_weight",
    "random_a1_weight",
    "WeightReport",
    "weight_report",
]

log = logging.getLogger(__name__)

_CLAMP = 1e-300
clamped_cells_total = 0  # diagnostic; degenerate weights clamp instead of crash


def _dual_density(w: GridFunction, p: float) -> np.ndarray:
    """w^(1-p') with tiny values clamped so the sweep stays total."""
    global clamped_cells_total
    vals = w.values
    tiny = int(np.count_nonzero(vals < _CLAMP))
    if tiny:
        clamped_cells_total += tiny
        log.warning("clamped %d cells below %.0e in dual-density computation", tiny, _CLAMP)
        vals = np.maximum(vals, _CLAMP)
    pprime = p / (p - 1.0)
    return vals ** (1.0 - pprime)


def _require_weight(w: GridFunction):
    if not w.weight:
        raise ValueError("expected a GridFunction tagged as a weight")


def ap_constant(w: GridFunction, lattice: list[DyadicCube], p: float, all_windows: bool = False) -> float:
    """sup_Q <w>_Q <w^(1-p')>_Q^(p-1), outer sup over `lattice` cubes or,
    with all_windows, over every axis-aligned cube window."""
    _require_weight(w)
    if not p > 1:
        raise ValueError(f"ap_constant needs p > 1, got {p}")
    sigma = _dual_density(w, p)
    wv = w.values
    if all_windows:
        n = w.grid.cells_per_side
        best = 0.0
        for l in range(1, n + 1):
            mw = windows.window_means(wv, l)
            ms = windows.window_means(sigma, l)
            best = max(best, float(np.max(mw * ms ** (p - 1.0))))
        return best
    best = 0.0
    for q in lattice:
        sl = cube_slices(w.grid, q)
        val = float(np.mean(wv[sl])) * float(np.mean(sigma[sl])) ** (p - 1.0)
        best = max(best, val)
    return best


def a1_constant(w: GridFunction) -> float:
    """max over cells of Mw/w, the pointwise A_1 bound."""
    _require_weight(w)
    mw = maximal(w, "lebesgue")
    return float(np.max(mw.values / w.values))


def _local_maximal_block(block: np.ndarray, dim: int) -> np.ndarray:
    """M(w chi_Q) restricted to Q, for the cube whose cells are `block`.

    Windows longer than the cube side are dominated by the Q-window itself,
    and windows reaching past the grid edge are dominated by shifted in-grid
    ones, so zero-padding by side-1 and sweeping lengths 1..side is exact.
    """
    side = block.shape[0]
    pad = side - 1
    if dim == 1:
        padded = np.zeros(side + 2 * pad)
        padded[pad : pad + side] = block
        best = block.copy()
        for l in range(2, side + 1):
            means = windows.window_means(padded, l)
            full = windows.containing_max(means, l, padded.size)
            np.maximum(best, full[pad : pad + side], out=best)
        return best
    padded = np.zeros((side + 2 * pad, side + 2 * pad))
    padded[pad : pad + side, pad : pad + side] = block
    best = block.copy()
    for l in range(2, side + 1):
        means = windows.window_means(padded, l)
        full = windows.containing_max_2d(means, l, padded.shape[0])
        np.maximum(best, full[pad : pad + side, pad : pad + side], out=best)
    return best


def ainf_constant(w: GridFunction, lattice: list[DyadicCube]) -> float:
    """Fujii-Wilson constant sup_Q (1/w(Q)) int_Q M(w chi_Q)."""
    _require_weight(w)
    best = 0.0
    for q in lattice:
        sl = cube_slices(w.grid, q)
        block = w.values[sl]
        if block.size == 1:
            best = max(best, 1.0)
            continue
        m = _local_maximal_block(block, w.grid.dim)
        best = max(best, float(np.sum(m) / np.sum(block)))
    return best


def reverse_holder_check(w: GridFunction, lattice: list[DyadicCube], delta: float) -> float:
    """worst over cubes of <w^(1+delta)>_Q^(1/(1+delta)) / <w>_Q.

    The self-improvement estimate predicts a value <= 2 whenever
    delta <= 1/(tau * [w]_Ainf) with tau large enough for the dimension.
    """
    _require_weight(w)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    wv = w.values
    hi = wv ** (1.0 + delta)
    worst = 0.0
    for q in lattice:
        sl = cube_slices(w.grid, q)
        lhs = float(np.mean(hi[sl])) ** (1.0 / (1.0 + delta))
        worst = max(worst, lhs / float(np.mean(wv[sl])))
    return worst


def calibrate_tau(weight_suite: list[GridFunction], lattice: list[DyadicCube], floor: float = 1.0) -> float:
    """Smallest tau >= floor making the reverse Hölder bound pass at
    delta = 1/(tau * [w]_Ainf) for every suite member, by bisection."""
    if not weight_suite:
        raise ValueError("weight suite must be non-empty")
    ainfs = [ainf_constant(w, lattice) for w in weight_suite]

    def passes(tau: float) -> bool:
        return all(
            reverse_holder_check(w, lattice, 1.0 / (tau * ai)) <= 2.0
            for w, ai in zip(weight_suite, ainfs)
        )

    if passes(floor):
        return floor
    lo, hi = floor, 2.0 * floor
    for _ in range(40):
        if passes(hi):
            break
        lo = hi
        hi *= 2.0
    else:
        raise RuntimeError("reverse Hölder calibration did not converge")
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return hi


def power_weight(grid: Grid, a: float) -> GridFunction:
    """w(x) = |x|^a at cell centers; centers sit at half-integer multiples of
    the cell width, so the origin is never sampled."""
    return make_weight(grid, grid.radii() ** a)


def random_a1_weight(grid: Grid, seed: int, delta: float = 0.5) -> GridFunction:
    """(M mu)^delta for a seeded atomic mass mu, delta in (0,1).

    Atom positions are drawn in physical coordinates so the weight is stable
    across resolutions for a fixed seed.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0,1), got {delta}")
    rng = np.random.default_rng(seed)
    n_atoms = int(rng.integers(1, 4))
    span = 0.45 * grid.side_length
    positions = rng.uniform(-span, span, size=(n_atoms, grid.dim))
    masses = rng.uniform(0.5, 2.0, size=n_atoms)
    density = np.zeros(grid.shape)
    h = grid.cell_width
    for pos, m in zip(positions, masses):
        idx = tuple(
            int(np.clip((x + grid.side_length / 2) // h, 0, grid.cells_per_side - 1))
            for x in pos
        )
        density[idx] += m / grid.cell_volume
    mu = GridFunction(grid, density)
    vals = maximal(mu, "lebesgue").values ** delta
    return make_weight(grid, vals / vals.mean())


@dataclass(frozen=True)
class WeightReport:
    """A_p characteristics of one weight, plus its reverse Hölder margin."""

    label: str
    ap: dict = field(default_factory=dict)
    a1: float = math.nan
    ainf: float = math.nan
    rh_delta: float = math.nan
    tau_calibrated: float = math.nan

    def __post_init__(self):
        for p, val in self.ap.items():
            if val < 1.0 - 1e-9:
                raise ValueError(f"A_{p} constant {val} below 1")
        if not (math.isnan(self.ainf) or self.ainf >= 1.0 - 1e-9):
            raise ValueError(f"A_inf constant {self.ainf} below 1")
        ps = sorted(self.ap)
        for a, b in zip(ps, ps[1:]):
            if self.ap[b] > self.ap[a] * (1 + 1e-9):
                raise ValueError(f"A_p not non-increasing: p={a} -> {b}")

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "ap": {str(p): v for p, v in sorted(self.ap.items())},
            "a1": self.a1,
            "ainf": self.ainf,
            "rh_delta": self.rh_delta,
            "tau_calibrated": self.tau_calibrated,
        }


def weight_report(
    w: GridFunction,
    lattice: list[DyadicCube],
    label: str = "weight",
    ps: tuple = (1.5, 2.0, 3.0, 4.0),
    tau: float | None = None,
) -> WeightReport:
    ap = {p: ap_constant(w, lattice, p) for p in ps}
    a1 = a1_constant(w)
    ainf = ainf_constant(w, lattice)
    if tau is None:
        tau = calibrate_tau([w], lattice)
    delta = 1.0 / (tau * ainf)
    # the margin actually verified, not just requested
    worst = reverse_holder_check(w, lattice, delta)
    if worst > 2.0:
        log.warning("reverse Hölder ratio %.3f exceeds 2 at delta=%.3g", worst, delta)
    return WeightReport(label=label, ap=ap, a1=a1, ainf=ainf, rh_delta=delta, tau_calibrated=tau)
