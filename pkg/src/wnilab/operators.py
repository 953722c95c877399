"""Discretized singular operators.

T_Omega is the exact direct sum Σ_{y≠x} Omega((x-y)') |x-y|^{-n} f(y) cellvol,
evaluated through an FFT convolution with an integer-offset kernel table (the
cell width cancels against cellvol for a kernel homogeneous of degree -n).
Bochner-Riesz at the critical index is a periodic Fourier multiplier.  The
dyadic kernel pieces K_j and the Calderon-Zygmund decomposition feed the
low-exponent experiments.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .grid import Grid, GridFunction
from .dyadic import DyadicCube, cube_slices, _children, _level_sums, _max_lattice_level

__all__ = [
    "KernelSpec",
    "rough_kernel",
    "sign_kernel",
    "sample_angles",
    "t_omega",
    "bochner_riesz_critical",
    "apply_operator",
    "smooth_cutoff",
    "kj_piece",
    "kj_radial",
    "CZDecomposition",
    "cz_decompose",
    "bj_group",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel description.  rough_omega carries sphere samples of Omega:
    two values (directions +1, -1) in 1D, uniform angular samples in 2D.
    zero_average certifies |mean(omega)| <= 1e-12."""

    kind: str
    omega: np.ndarray | None = None
    xi_max: float = 2.0
    zero_average: bool = False
    mean_removed: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rough_omega", "bochner_riesz"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rough_omega":
            if self.omega is None or np.asarray(self.omega).ndim != 1:
                raise ValueError("rough_omega needs a 1D array of sphere samples")
            object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))
            if self.zero_average and abs(float(np.mean(self.omega))) > 1e-12:
                raise ValueError("zero_average certificate does not match the samples")
        else:
            if not self.xi_max > 1:
                raise ValueError("xi_max must exceed 1 so the multiplier vanishes in-band")


def rough_kernel(omega_samples) -> KernelSpec:
    """Build a rough_omega spec, enforcing zero average by mean subtraction."""
    om = np.asarray(omega_samples, dtype=float)
    if om.ndim != 1 or om.size < 2:
        raise ValueError("need at least two sphere samples")
    m = float(np.mean(om))
    if abs(m) > 1e-12:
        log.info("removing nonzero sphere mean %.3e from kernel samples", m)
    return KernelSpec("rough_omega", omega=om - m, zero_average=True, mean_removed=m)


def sign_kernel() -> KernelSpec:
    """1D Omega = sign, i.e. the kernel 1/x."""
    return rough_kernel([1.0, -1.0])


def sample_angles(m: int) -> np.ndarray:
    """Angles of the m uniform sphere samples in 2D."""
    return 2 * np.pi * np.arange(m) / m


def _check_central_support(f: GridFunction):
    n = f.grid.cells_per_side
    lo, hi = n // 4, 3 * n // 4
    nz = np.nonzero(f.values)
    for ax in nz:
        if ax.size and (ax.min() < lo or ax.max() >= hi):
            log.warning("input extends outside the central half of the box; "
                        "far-field truncation error is uncontrolled")
            break


def _omega_offset_table(K: KernelSpec, n: int) -> np.ndarray:
    """Omega((d)') / |d|^dim on integer offsets d, diagonal zeroed."""
    om = K.omega
    if om.size == 2:
        d = np.arange(-(n - 1), n, dtype=float)
        tab = np.zeros(d.size)
        tab[d > 0] = om[0] / d[d > 0]
        tab[d < 0] = om[1] / np.abs(d[d < 0])
        return tab
    d = np.arange(-(n - 1), n, dtype=float)
    dx, dy = np.meshgrid(d, d, indexing="ij")
    r2 = dx**2 + dy**2
    step = 2 * np.pi / om.size
    idx = np.rint(np.arctan2(dy, dx) / step).astype(int) % om.size
    with np.errstate(divide="ignore", invalid="ignore"):
        tab = om[idx] / r2
    tab[n - 1, n - 1] = 0.0
    return tab


def t_omega(f: GridFunction, K: KernelSpec) -> GridFunction:
    """Principal-value convolution with Omega((x-y)')|x-y|^(-n).

    Only the singular diagonal cell is omitted; for odd-symmetric sample sets
    the near field cancels pairwise.  Exact discrete sum up to FFT rounding.
    """
    if K.kind != "rough_omega":
        raise ValueError(f"t_omega needs a rough_omega kernel, got {K.kind!r}")
    if not K.zero_average:
        raise ValueError("kernel must carry the zero-average certificate")
    if (f.grid.dim == 1) != (K.omega.size == 2):
        raise ValueError("kernel sphere sampling does not match the grid dimension")
    _check_central_support(f)
    n = f.grid.cells_per_side
    tab = _omega_offset_table(K, n)
    full = fftconvolve(f.values, tab, mode="full")
    sl = (slice(n - 1, 2 * n - 1),) * f.grid.dim
    return f.with_values(full[sl])


def bochner_riesz_critical(f: GridFunction, xi_max: float = 2.0, unsafe_1d: bool = False) -> GridFunction:
    """Fourier multiplier (1-|xi|^2)_+^((n-1)/2), grid modes scaled into
    [-xi_max, xi_max]^n.

    Genuinely two-dimensional content; the 1D variant (the ball multiplier,
    critical index 0) is exposed only behind unsafe_1d.
    """
    if f.grid.dim != 2 and not unsafe_1d:
        raise ValueError("critical Bochner-Riesz needs a 2D grid")
    if not xi_max > 1:
        raise ValueError("xi_max must exceed 1")
    n = f.grid.cells_per_side
    xi = np.fft.fftfreq(n, d=1.0 / n) * (2.0 * xi_max / n)
    if f.grid.dim == 1:
        mult = (np.abs(xi) < 1.0).astype(float)
        out = np.fft.ifft(np.fft.fft(f.values) * mult)
    else:
        xx, yy = np.meshgrid(xi, xi, indexing="ij")
        mult = np.sqrt(np.maximum(1.0 - xx**2 - yy**2, 0.0))
        out = np.fft.ifft2(np.fft.fft2(f.values) * mult)
    # output can be legitimately ~0 (band fully outside the unit ball), so
    # the residue is measured against the input scale as well
    scale = max(float(np.max(np.abs(out))), float(np.max(np.abs(f.values)))) or 1.0
    residue = float(np.max(np.abs(out.imag))) / scale
    if residue >= 1e-10:
        raise RuntimeError(f"imaginary residue {residue:.2e} too large for a real multiplier")
    log.debug("multiplier imaginary residue %.2e (relative)", residue)
    return f.with_values(out.real)


def apply_operator(f: GridFunction, K: KernelSpec) -> GridFunction:
    if K.kind == "rough_omega":
        return t_omega(f, K)
    return bochner_riesz_critical(f, xi_max=K.xi_max)


# ---------------------------------------------------------------------------
# dyadic kernel pieces


def smooth_cutoff(t):
    """C-infinity profile: 1 on t <= 1, 0 on t >= 2, exponential glue between."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    out[t <= 1.0] = 1.0
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        s = t[mid]
        a = np.exp(-1.0 / (2.0 - s))
        b = np.exp(-1.0 / (s - 1.0))
        out[mid] = a / (a + b)
    return out if out.shape else float(out)


def _annulus_factor(r: np.ndarray, j: int, phi) -> np.ndarray:
    t1 = 2.0 ** (-j + 1) * r
    out = np.asarray(phi(t1) - phi(2.0 * t1))
    if phi is smooth_cutoff:
        # just inside the inner edge phi(2t) rounds to 1 and the difference
        # cancels below one ulp of 1; recover the sub-ulp value from the
        # complement of the glue.  The patched values sit under 2^-53, so
        # every telescoping float sum they enter is unchanged bit for bit.
        t2 = 2.0 * t1
        dead = (out == 0.0) & (t1 <= 1.0) & (1.0 < t2) & (t2 < 2.0)
        if np.any(dead):
            s = t2[dead]
            a = np.exp(-1.0 / (2.0 - s))
            b = np.exp(-1.0 / (s - 1.0))
            out[dead] = b / (a + b)
    return out


def kj_piece(K: KernelSpec, j: int, grid: Grid, phi=None) -> np.ndarray:
    """Offset table of K_j(x) = K(x)(phi(2^(1-j)|x|) - phi(2^(2-j)|x|)),
    supported in the open annulus 2^(j-2) < |x| < 2^j (physical units)."""
    if K.kind != "rough_omega":
        raise ValueError("kernel pieces are defined for rough_omega kernels")
    phi = smooth_cutoff if phi is None else phi
    n, h = grid.cells_per_side, grid.cell_width
    tab = _omega_offset_table(K, n) / h**grid.dim  # physical kernel values
    d = np.arange(-(n - 1), n, dtype=float) * h
    if grid.dim == 1:
        r = np.abs(d)
    else:
        dx, dy = np.meshgrid(d, d, indexing="ij")
        r = np.sqrt(dx**2 + dy**2)
    piece = tab * _annulus_factor(r, j, phi)
    if not np.any(piece):
        raise ValueError(f"annulus for j={j} contains no grid offsets at this resolution")
    return piece


def kj_radial(K: KernelSpec, j: int, phi=None):
    """Radial profile r -> K_j(r e_1), for derivative-bound sweeps."""
    if K.kind != "rough_omega":
        raise ValueError("kernel pieces are defined for rough_omega kernels")
    phi = smooth_cutoff if phi is None else phi
    om0 = float(K.omega[0])
    dim = 1 if K.omega.size == 2 else 2

    def profile(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        pos = r > 0
        out[pos] = om0 / r[pos] ** dim * _annulus_factor(r[pos], j, phi)
        return out if out.shape else float(out)

    return profile


# ---------------------------------------------------------------------------
# Calderon-Zygmund decomposition


@dataclass
class CZDecomposition:
    good: GridFunction
    bad_pieces: list  # (DyadicCube, GridFunction) pairs
    alpha: float
    omega_norm: float

    @property
    def height(self) -> float:
        return self.alpha / self.omega_norm


def cz_decompose(f: GridFunction, alpha: float, omega_norm: float, lattice: list[DyadicCube]) -> CZDecomposition:
    """Stopping-time decomposition of f >= 0 at height alpha/omega_norm.

    Selects the maximal dyadic cubes whose average first exceeds the height;
    on them good = <f>_Q and b_Q = (f - <f>_Q) chi_Q.  The lattice must reach
    single-cell depth or the pointwise bound on good fails.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    vals = f.values
    if np.any(vals < 0):
        raise ValueError("decomposition needs f >= 0")
    grid = f.grid
    full = grid.cells_per_side.bit_length() - 1
    if _max_lattice_level(grid, lattice) != full:
        raise ValueError("lattice must reach single-cell depth")
    height = alpha / omega_norm
    if float(np.mean(vals)) > height:
        raise ValueError("height too small: the root cube already exceeds it")
    sums = _level_sums(vals, full, grid.dim)

    def avg(q: DyadicCube) -> float:
        cells = (grid.cells_per_side >> q.level) ** grid.dim
        return float(sums[q.level][q.index]) / cells

    selected = []
    stack = [DyadicCube(0, (0,) * grid.dim)]
    while stack:
        q = stack.pop()
        for child in _children(q, grid.dim):
            if avg(child) > height:
                selected.append(child)
            elif child.level < full:
                stack.append(child)
    good = vals.copy()
    pieces = []
    for q in selected:
        sl = cube_slices(grid, q)
        m = float(np.mean(vals[sl]))
        b = np.zeros_like(vals)
        b[sl] = vals[sl] - m
        good[sl] = m
        pieces.append((q, f.with_values(b)))
    return CZDecomposition(good=f.with_values(good), bad_pieces=pieces, alpha=alpha, omega_norm=omega_norm)


def bj_group(dec: CZDecomposition, level: int) -> GridFunction:
    """Sum of bad pieces whose cube sits at the given dyadic level."""
    grid = dec.good.grid
    out = np.zeros(grid.shape)
    for q, b in dec.bad_pieces:
        if q.level == level:
            out += b.values
    return GridFunction(grid, out)
