"""The inequality engine: sparse forms, the iteration-built majorant weight,
good-lambda level-set measurements, and all ratio experiments.

Every experiment returns a RatioReport that records numerator, denominator
and parameters; ratios are measurements, not certified suprema.  Degenerate
denominators produce a NaN-tagged report so sweeps always complete.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .grid import Grid, GridFunction, make_weight, lp_norm, weak_lp_norm
from .dyadic import (
    SparseFamily,
    average,
    cube_slices,
    cube_volume,
    lattice_cubes,
    s_average,
)
from .young import YoungFunction, beta_p, iterated_maximal, maximal
from .weights import _dual_density, a1_constant, ainf_constant, ap_constant
from .operators import KernelSpec, apply_operator

__all__ = [
    "sparse_form",
    "sparse_operator",
    "domination_ratio",
    "RdFResult",
    "rubio_de_francia",
    "good_lambda_measure",
    "RatioReport",
    "make_report",
    "domination_exponents",
    "cf_ratio",
    "ap_strong_ratios",
    "two_weight_bump_ratio",
    "iterated_ratio",
    "weak11_ratio",
    "sawyer_ratio",
    "vector_valued_ratio",
    "sparse_r_two_weight_ratio",
]

log = logging.getLogger(__name__)


def sparse_form(f: GridFunction, g: GridFunction, S: SparseFamily, s: float) -> float:
    """Sum over the family of |Q| <|f|>_Q <|g|^s>_Q^(1/s)."""
    if not s >= 1:
        raise ValueError(f"s must be >= 1, got {s}")
    total = 0.0
    for q in S.cubes:
        total += cube_volume(f.grid, q) * average(f, q) * s_average(g, q, s)
    return total


def sparse_operator(f: GridFunction, S: SparseFamily, r: float) -> GridFunction:
    """Sum of <f^r>_Q^(1/r) chi_Q over the family; needs f >= 0."""
    if not r >= 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if np.any(f.values < 0):
        raise ValueError("sparse operator is defined for nonnegative f")
    out = np.zeros(f.grid.shape)
    for q in S.cubes:
        sl = cube_slices(f.grid, q)
        out[sl] += float(np.mean(f.values[sl] ** r)) ** (1.0 / r)
    return GridFunction(f.grid, out)


def domination_ratio(T_out: GridFunction, f: GridFunction, g: GridFunction, S: SparseFamily, s: float) -> float:
    """|<Tf, g>| over s' times the sparse form: the empirical domination
    constant.  NaN when the form degenerates."""
    pairing = abs(float(np.sum(T_out.values * g.values)) * f.grid.cell_volume)
    sprime = s / (s - 1.0) if s > 1 else math.inf
    den = sprime * sparse_form(f, g, S, s)
    if not (den > 0 and math.isfinite(den)):
        return math.nan
    return pairing / den


# ---------------------------------------------------------------------------
# the majorant-building iteration


@dataclass
class RdFResult:
    Rh: GridFunction
    terms_used: int
    op_norm_S: float  # empirical corpus estimate, includes the 1.5 safety factor
    a1_of_product: float


def _corpus_functions(grid: Grid) -> list[np.ndarray]:
    """Small fixed corpus used to estimate the maximal-step norm."""
    out = [np.ones(grid.shape)]
    r = grid.radii()
    out.append(np.exp(-((4.0 * r / grid.side_length) ** 2)))
    sigma = max(grid.cells_per_side / 32.0, 1.0)
    for seed in (101, 102, 103):
        rng = np.random.default_rng(seed)
        noise = gaussian_filter(rng.standard_normal(grid.shape), sigma=sigma)
        out.append(np.abs(noise) + 0.1)
    return out


def rubio_de_francia(h: GridFunction, v: GridFunction, p: float, terms: int = 20) -> RdFResult:
    """Truncated series R(h) = sum_k 2^(-k) S^k h / ||S||^k with
    S(x) = v^(-1/p) M(x v^(1/p)).

    ||S|| is the corpus maximum of ||Sg||/||g|| in L^p(v) times a 1.5 safety
    factor; an over-estimate only speeds up convergence.  R(h) >= h holds
    exactly (the k=0 term is h) and ||Rh|| <= 2||h||(1 + 2^(1-terms)).
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if terms < 8:
        raise ValueError("need at least 8 series terms")
    if np.any(h.values < 0):
        raise ValueError("h must be nonnegative")
    if not np.any(h.values):
        raise ValueError("h must not vanish identically")
    if not v.weight:
        raise ValueError("v must be a weight")
    grid = h.grid
    vp = v.values ** (1.0 / p)

    def step(x: np.ndarray) -> np.ndarray:
        return maximal(GridFunction(grid, x * vp), "lebesgue").values / vp

    best = 0.0
    for g in _corpus_functions(grid) + [h.values]:
        gn = lp_norm(GridFunction(grid, g), v, p)
        if gn == 0:
            continue
        best = max(best, lp_norm(GridFunction(grid, step(g)), v, p) / gn)
    op = 1.5 * best

    term = h.values.copy()
    acc = term.copy()
    for k in range(1, terms):
        term = step(term) / op
        acc = acc + term / 2.0**k
    Rh = GridFunction(grid, acc)
    prod = make_weight(grid, acc * vp)
    return RdFResult(Rh=Rh, terms_used=terms, op_norm_S=op, a1_of_product=a1_constant(prod))


# ---------------------------------------------------------------------------
# good-lambda level sets


def good_lambda_measure(f: GridFunction, K: KernelSpec, lam: float, eps: float, w="lebesgue"):
    """(w-measure of {|Tf| > 3 lam, Mf <= eps lam}, w-measure of {Mf > lam}).

    The caller plots lhs/rhs against 1/eps; a vanishing rhs is the
    degenerate-sweep sentinel.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0,1)")
    tf = np.abs(apply_operator(f, K).values)
    mf = maximal(f, "lebesgue").values
    vol = f.grid.cell_volume
    if isinstance(w, str) or w is None:
        density = np.ones(f.grid.shape)
    else:
        density = w.values
    lhs_mask = (tf > 3.0 * lam) & (mf <= eps * lam)
    rhs_mask = mf > lam
    return float(density[lhs_mask].sum() * vol), float(density[rhs_mask].sum() * vol)


# ---------------------------------------------------------------------------
# ratio reports


@dataclass
class RatioReport:
    name: str
    numerator: float
    denominator: float
    ratio: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.denominator > 0 and math.isfinite(self.denominator):
            expect = self.numerator / self.denominator
            if math.isfinite(expect) and abs(self.ratio - expect) > 1e-12 * max(abs(expect), 1.0):
                raise ValueError("ratio does not match numerator/denominator")
        elif not math.isnan(self.ratio):
            raise ValueError("degenerate denominator requires a NaN ratio")


def make_report(name: str, numerator: float, denominator: float, **params) -> RatioReport:
    if denominator > 0 and math.isfinite(denominator):
        ratio = numerator / denominator
    else:
        ratio = math.nan
        params["degenerate"] = True
        log.warning("degenerate denominator in %s", name)
    return RatioReport(name=name, numerator=numerator, denominator=denominator, ratio=ratio, params=params)


def domination_exponents(p: float, tau: float, ainf: float) -> tuple[float, float]:
    """The stopping exponents s = 1 + 1/(8 p tau [w]_Ainf), r = 1 + 1/(4p);
    they satisfy sr < 1 + 1/(2p) < p' for every p > 1 and tau, ainf >= 1."""
    if not (p > 1 and tau >= 1 and ainf >= 1):
        raise ValueError("need p > 1 and tau, ainf >= 1")
    return 1.0 + 1.0 / (8.0 * p * tau * ainf), 1.0 + 1.0 / (4.0 * p)


def cf_ratio(f: GridFunction, w: GridFunction, p: float, K: KernelSpec, lattice) -> RatioReport:
    """||Tf||_{L^p(w)} against [w]_Ainf^2 ||Mf||_{L^p(w)}; the unsquared
    variant (one power of the constant) rides along in params."""
    tf = apply_operator(f, K)
    mf = maximal(f, "lebesgue")
    num = lp_norm(tf, w, p)
    mnorm = lp_norm(mf, w, p)
    ainf = ainf_constant(w, lattice)
    rep = make_report("cf", num, ainf**2 * mnorm, p=p, ainf=ainf)
    rep.params["ratio_unsquared"] = num / (ainf * mnorm) if mnorm > 0 else math.nan
    return rep


def ap_strong_ratios(f: GridFunction, w: GridFunction, p: float, K: KernelSpec, lattice) -> list[RatioReport]:
    """The three strong/weak characteristic bounds measured side by side:
    mixed constants, the plain A_p power p', and the weak-type power
    min(2, p')."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    tf = apply_operator(f, K)
    fn = lp_norm(f, w, p)
    strong = lp_norm(tf, w, p)
    weak = weak_lp_norm(tf, w, p)
    sigma = make_weight(w.grid, _dual_density(w, p))
    apw = ap_constant(w, lattice, p)
    aw = ainf_constant(w, lattice)
    asig = ainf_constant(sigma, lattice)
    pprime = p / (p - 1.0)
    mixed = apw ** (1.0 / p) * (aw ** (1.0 / pprime) + asig ** (1.0 / p)) * min(aw, asig)
    common = dict(p=p, ap=apw, ainf_w=aw, ainf_sigma=asig)
    return [
        make_report("ap_mixed", strong, mixed * fn, **common),
        make_report("ap_power", strong, apw**pprime * fn, **common),
        make_report("ap_weak", weak, apw ** min(2.0, pprime) * fn, **common),
    ]


def two_weight_bump_ratio(f: GridFunction, w: GridFunction, p: float, A: YoungFunction, K: KernelSpec) -> RatioReport:
    """||Tf||_{L^p(w)} against ||f||_{L^p(M_{A_p} w)} with A_p(t) = A(t^{1/p})."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    tf = apply_operator(f, K)
    bumped = make_weight(w.grid, maximal(w, A.argument_power(1.0 / p)).values)
    return make_report(
        "bump",
        lp_norm(tf, w, p),
        lp_norm(f, bumped, p),
        p=p,
        bump=A.label,
    )


def iterated_ratio(f: GridFunction, w: GridFunction, p: float, K: KernelSpec) -> RatioReport:
    """||Tf||_{L^p(w)} against ||f||_{L^p(M^k w)} at k = floor(p)+1; the
    k = floor(p) companion (expected to degrade) rides along in params."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    k_hi = math.floor(p) + 1
    k_lo = max(math.floor(p), 1)
    tf = apply_operator(f, K)
    num = lp_norm(tf, w, p)
    maj_hi = make_weight(w.grid, iterated_maximal(w, k_hi).values)
    maj_lo = make_weight(w.grid, iterated_maximal(w, k_lo).values)
    rep = make_report("iterated", num, lp_norm(f, maj_hi, p), p=p, k=k_hi)
    lo_den = lp_norm(f, maj_lo, p)
    rep.params["k_floor"] = k_lo
    rep.params["ratio_floor"] = num / lo_den if lo_den > 0 else math.nan
    return rep


def weak11_ratio(f: GridFunction, w: GridFunction, K: KernelSpec) -> RatioReport:
    """Weak L^1(w) norm of Tf against ||f||_{L^1(w)} [w]_A1 [w]_Ainf log2([w]_Ainf + 1).

    theta and s0 (the level-splitting tuning numbers of the underlying proof,
    at unit dimensional constant and unit epsilon) are exposed as metadata
    only; nothing downstream reads them.
    """
    lattice = lattice_cubes(w.grid, w.grid.cells_per_side.bit_length() - 1)
    a1 = a1_constant(w)
    ainf = ainf_constant(w, lattice)
    tf = apply_operator(f, K)
    num = weak_lp_norm(tf, w, 1.0)
    den = lp_norm(f, w, 1.0) * a1 * ainf * math.log2(ainf + 1.0)
    rep = make_report("weak11", num, den, a1=a1, ainf=ainf)
    theta = ainf / (1.0 + ainf)
    rep.params["theta"] = theta
    rep.params["s0_unit_eps"] = math.log2(ainf + 1.0) / (1.0 - theta)
    return rep


def sawyer_ratio(f: GridFunction, u: GridFunction, v: GridFunction, K: KernelSpec) -> RatioReport:
    """Weak L^1(uv) norm of T(fv)/v against ||f||_{L^1(uv)}."""
    if not (u.weight and v.weight):
        raise ValueError("u and v must be weights")
    uv = make_weight(u.grid, u.values * v.values)
    tfv = apply_operator(GridFunction(f.grid, f.values * v.values), K)
    quotient = GridFunction(f.grid, tfv.values / v.values)
    return make_report("sawyer", weak_lp_norm(quotient, uv, 1.0), lp_norm(f, uv, 1.0))


def vector_valued_ratio(fs: list[GridFunction], w: GridFunction, p: float, q: float, K: KernelSpec) -> RatioReport:
    """l^q-valued norm ratio: ||(sum |Tf_j|^q)^(1/q)|| over ||(sum (Mf_j)^q)^(1/q)||
    in L^p(w)."""
    if not fs:
        raise ValueError("need a non-empty family")
    if not q > 0:
        raise ValueError("q must be positive")
    grid = fs[0].grid
    num_field = np.zeros(grid.shape)
    den_field = np.zeros(grid.shape)
    for fj in fs:
        num_field += np.abs(apply_operator(fj, K).values) ** q
        den_field += maximal(fj, "lebesgue").values ** q
    return make_report(
        "vector",
        lp_norm(GridFunction(grid, num_field ** (1.0 / q)), w, p),
        lp_norm(GridFunction(grid, den_field ** (1.0 / q)), w, p),
        p=p,
        q=q,
        family=len(fs),
    )


def sparse_r_two_weight_ratio(
    f: GridFunction,
    w: GridFunction,
    p: float,
    r: float,
    A: YoungFunction,
    S: SparseFamily,
) -> RatioReport:
    """||A_{r,S} f||_{L^p(w)} against ||f||_{L^p(M_{A_p} w)} for p > r >= 1.

    The conjugate bump must pass the B_{p'} tail test or the comparison is
    vacuous, so an infinite beta integral is rejected up front.
    """
    if not (p > r and r >= 1):
        raise ValueError(f"need p > r >= 1, got p={p}, r={r}")
    pprime = p / (p - 1.0)
    beta = beta_p(A.conjugate, pprime)
    if not math.isfinite(beta):
        raise ValueError("conjugate bump fails the B tail test at p'")
    out = sparse_operator(f, S, r)
    bumped = make_weight(w.grid, maximal(w, A.argument_power(1.0 / p)).values)
    return make_report(
        "sparse_r",
        lp_norm(out, w, p),
        lp_norm(f, bumped, p),
        p=p,
        r=r,
        beta_dual=beta,
    )
