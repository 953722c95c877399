"""Sparse forms, the majorant iteration, level-set measurements, and the
ratio experiments, cross-checked against naive re-summations, closed forms,
and exact scaling identities."""
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wnilab import (
    SparseFamily,
    ap_strong_ratios,
    apply_operator,
    bump,
    cf_ratio,
    domination_exponents,
    domination_ratio,
    good_lambda_measure,
    iterated_ratio,
    lattice_cubes,
    lp_norm,
    make_function,
    make_grid,
    make_report,
    make_weight,
    maximal,
    power,
    power_log,
    power_r,
    power_weight,
    random_smooth,
    rubio_de_francia,
    RatioReport,
    sawyer_ratio,
    sign_kernel,
    sparse_form,
    sparse_operator,
    sparse_r_two_weight_ratio,
    stopping_family,
    two_weight_bump_ratio,
    vector_valued_ratio,
    weak11_ratio,
    weak_lp_norm,
)
from wnilab.dyadic import cube_cells

from oracles import resum_sparse_form, resum_sparse_operator

K = sign_kernel()


def grid1(n):
    return make_grid(dim=1, cells_per_side=n, side_length=2.0)


def full_lattice(g):
    return lattice_cubes(g, g.cells_per_side.bit_length() - 1)


def lifted(g, seed):
    # strictly positive test function so every stopping average is nonzero
    base = random_smooth(g, seed, nonneg=True)
    return make_function(g, base.values + 0.05)


def rand_weight(g, seed, spread=2.0):
    rng = np.random.default_rng(seed)
    return make_weight(g, np.exp(spread * rng.uniform(-1, 1, g.shape)))


# ---------------------------------------------------------------------------
# sparse forms


@pytest.mark.parametrize("s", [1.0, 1.5, 2.0])
def test_sparse_form_matches_resummation(s):
    g = grid1(64)
    f = lifted(g, 11)
    h = random_smooth(g, 12)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    assert sparse_form(f, h, fam, s) == pytest.approx(
        resum_sparse_form(f, h, fam, s), rel=1e-12
    )


def test_sparse_form_monotone_in_exponent():
    g = grid1(64)
    f = lifted(g, 21)
    h = random_smooth(g, 22)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    vals = [sparse_form(f, h, fam, s) for s in (1.0, 1.5, 3.0)]
    assert vals[0] <= vals[1] <= vals[2]


def test_sparse_form_shrinks_on_subfamily():
    g = grid1(64)
    f = lifted(g, 31)
    h = random_smooth(g, 32, nonneg=True)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    assert len(fam.cubes) >= 2
    sub = SparseFamily(fam.grid, fam.cubes[::2], fam.majors[::2], fam.eta)
    assert sparse_form(f, h, sub, 1.5) <= sparse_form(f, h, fam, 1.5)


def test_sparse_form_rejects_bad_exponent():
    g = grid1(8)
    f = lifted(g, 1)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    with pytest.raises(ValueError, match="s must be"):
        sparse_form(f, f, fam, 0.5)


@pytest.mark.parametrize("r", [1.0, 2.0])
def test_sparse_operator_matches_resummation(r):
    g = grid1(64)
    f = lifted(g, 41)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    out = sparse_operator(f, fam, r)
    np.testing.assert_allclose(out.values, resum_sparse_operator(f, fam, r), rtol=1e-12)


def test_sparse_operator_validation():
    g = grid1(16)
    f = lifted(g, 5)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    with pytest.raises(ValueError, match="r must be"):
        sparse_operator(f, fam, 0.9)
    signed = make_function(g, f.values - 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        sparse_operator(signed, fam, 1.5)


def test_domination_ratio_recomputed():
    g = grid1(128)
    f = lifted(g, 51)
    h = random_smooth(g, 52)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    tf = apply_operator(f, K)
    s = 1.25
    got = domination_ratio(tf, f, h, fam, s)
    pairing = abs(float(np.sum(tf.values * h.values)) * g.cell_volume)
    expect = pairing / ((s / (s - 1.0)) * sparse_form(f, h, fam, s))
    assert got == pytest.approx(expect, rel=1e-12)
    assert got > 0


def test_domination_ratio_degenerate_sentinels():
    g = grid1(32)
    f = lifted(g, 61)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    tf = apply_operator(f, K)
    # s = 1 makes s' infinite, a vanishing pair function kills the form
    assert math.isnan(domination_ratio(tf, f, f, fam, 1.0))
    zero = make_function(g, np.zeros(32))
    assert math.isnan(domination_ratio(tf, f, zero, fam, 1.25))


def test_domination_ratio_scale_invariant():
    g = grid1(64)
    f = lifted(g, 71)
    h = random_smooth(g, 72)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    tf = apply_operator(f, K)
    base = domination_ratio(tf, f, h, fam, 1.25)
    cf = make_function(g, 3.7 * f.values)
    ctf = apply_operator(cf, K)
    assert domination_ratio(ctf, cf, h, fam, 1.25) == pytest.approx(base, rel=1e-12)
    ch = make_function(g, 0.2 * h.values)
    assert domination_ratio(tf, f, ch, fam, 1.25) == pytest.approx(base, rel=1e-12)


# ---------------------------------------------------------------------------
# the majorant iteration


def _rdf_cases(n=128):
    g = grid1(n)
    ones_f = make_function(g, np.ones(g.shape))
    ones_w = make_weight(g, np.ones(g.shape))
    return [
        (ones_f, ones_w, 2.0),
        (bump(g), power_weight(g, 0.5), 2.0),
        (lifted(g, 81), power_weight(g, -0.6), 1.5),
    ]


def test_majorant_sits_above_input():
    for h, v, p in _rdf_cases():
        res = rubio_de_francia(h, v, p)
        # the k = 0 term is h itself and every later term is nonnegative
        assert np.all(res.Rh.values >= h.values)


@pytest.mark.parametrize("terms", [8, 12, 20])
def test_majorant_norm_bound(terms):
    for h, v, p in _rdf_cases():
        res = rubio_de_francia(h, v, p, terms=terms)
        bound = 2.0 * (1.0 + 2.0 ** (1 - terms)) * lp_norm(h, v, p)
        assert lp_norm(res.Rh, v, p) <= bound


def test_majorant_grows_with_terms():
    g = grid1(64)
    h, v, p = bump(g), power_weight(g, 0.5), 2.0
    r8 = rubio_de_francia(h, v, p, terms=8)
    r20 = rubio_de_francia(h, v, p, terms=20)
    assert np.all(r20.Rh.values >= r8.Rh.values)
    # the tail of the series is worth at most 2^(1-8) of the input norm
    gap = lp_norm(make_function(g, r20.Rh.values - r8.Rh.values), v, p)
    assert gap <= 2.0 ** (-7) * lp_norm(h, v, p) * 1.001


def test_majorant_constant_inputs_closed_form():
    g = grid1(128)
    ones = np.ones(g.shape)
    res = rubio_de_francia(make_function(g, ones), make_weight(g, ones), 2.0)
    # the maximal step fixes constants, so the series telescopes to a number
    expect = sum((2.0 * res.op_norm_S) ** (-k) for k in range(res.terms_used))
    np.testing.assert_allclose(res.Rh.values, expect, rtol=1e-12)
    assert res.a1_of_product == pytest.approx(1.0, abs=1e-12)


def test_majorant_product_weight_is_controlled():
    for h, v, p in _rdf_cases():
        res = rubio_de_francia(h, v, p)
        assert res.a1_of_product >= 1.0
        assert res.a1_of_product <= 2.0 * res.op_norm_S * (1.0 + 2.0 ** (-18))


def test_majorant_validation():
    g = grid1(32)
    h = bump(g)
    v = power_weight(g, 0.5)
    with pytest.raises(ValueError, match="p must exceed 1"):
        rubio_de_francia(h, v, 1.0)
    with pytest.raises(ValueError, match="at least 8"):
        rubio_de_francia(h, v, 2.0, terms=7)
    with pytest.raises(ValueError, match="nonnegative"):
        rubio_de_francia(make_function(g, -h.values), v, 2.0)
    with pytest.raises(ValueError, match="vanish"):
        rubio_de_francia(make_function(g, np.zeros(32)), v, 2.0)
    with pytest.raises(ValueError, match="weight"):
        rubio_de_francia(h, make_function(g, np.ones(32)), 2.0)


# ---------------------------------------------------------------------------
# level-set measurements


def test_level_sets_match_mask_recount():
    g = grid1(256)
    f = random_smooth(g, 91)
    w = rand_weight(g, 92)
    lam, eps = 0.05, 0.25
    tf = np.abs(apply_operator(f, K).values)
    mf = maximal(f, "lebesgue").values
    vol = g.cell_volume
    for wsel, density in [("lebesgue", np.ones(g.shape)), (None, np.ones(g.shape)), (w, w.values)]:
        lhs, rhs = good_lambda_measure(f, K, lam, eps, wsel)
        assert lhs == pytest.approx(
            float(density[(tf > 3 * lam) & (mf <= eps * lam)].sum() * vol), rel=1e-12, abs=0
        )
        assert rhs == pytest.approx(float(density[mf > lam].sum() * vol), rel=1e-12)
        assert rhs > 0


def test_level_sets_eps_sweep_directions():
    g = grid1(256)
    f = bump(g)
    lam = 0.1
    pairs = [good_lambda_measure(f, K, lam, e) for e in (1 / 16, 1 / 8, 1 / 4, 1 / 2)]
    lhss = [p[0] for p in pairs]
    rhss = [p[1] for p in pairs]
    # the exceptional set grows with eps while the comparison set ignores it
    assert all(a <= b for a, b in zip(lhss, lhss[1:]))
    assert all(r == rhss[0] for r in rhss)
    # a smooth bump never beats the maximal function by the factor 3/eps
    assert lhss[-1] == 0.0


def test_level_sets_validation():
    g = grid1(16)
    f = bump(g)
    with pytest.raises(ValueError, match="lam"):
        good_lambda_measure(f, K, 0.0, 0.5)
    for eps in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError, match="eps"):
            good_lambda_measure(f, K, 1.0, eps)


# ---------------------------------------------------------------------------
# report plumbing


def test_report_checks_ratio_against_parts():
    with pytest.raises(ValueError, match="does not match"):
        RatioReport(name="x", numerator=1.0, denominator=2.0, ratio=0.7)
    rep = RatioReport(name="x", numerator=1.0, denominator=2.0, ratio=0.5)
    assert rep.ratio == 0.5


def test_report_degenerate_requires_nan():
    with pytest.raises(ValueError, match="NaN"):
        RatioReport(name="x", numerator=1.0, denominator=0.0, ratio=1.0)
    rep = RatioReport(name="x", numerator=1.0, denominator=0.0, ratio=math.nan)
    assert math.isnan(rep.ratio)


def test_make_report_degenerate_path(caplog):
    with caplog.at_level(logging.WARNING, logger="wnilab.analysis"):
        rep = make_report("probe", 1.0, 0.0, p=2.0)
    assert math.isnan(rep.ratio)
    assert rep.params["degenerate"] is True
    assert rep.params["p"] == 2.0
    assert any("degenerate denominator" in r.message for r in caplog.records)


# ---------------------------------------------------------------------------
# stopping exponents and the split they feed


def test_stopping_exponents_reference_point():
    s, r = domination_exponents(2.0, 1.0, 1.0)
    assert s == pytest.approx(1.0 + 1.0 / 16.0, abs=0)
    assert r == pytest.approx(1.0 + 1.0 / 8.0, abs=0)


@pytest.mark.parametrize("p", [1.1, 1.5, 2.0, 3.0, 10.0])
@pytest.mark.parametrize("tau", [1.0, 5.0])
@pytest.mark.parametrize("ainf", [1.0, 8.0])
def test_stopping_exponents_stay_below_duality(p, tau, ainf):
    s, r = domination_exponents(p, tau, ainf)
    assert 1.0 < s * r < 1.0 + 1.0 / (2.0 * p) < p / (p - 1.0)


def test_stopping_exponents_validation():
    for bad in [(1.0, 1.0, 1.0), (2.0, 0.5, 1.0), (2.0, 1.0, 0.9)]:
        with pytest.raises(ValueError):
            domination_exponents(*bad)


def test_power_split_average_bound():
    # <|gw|^s>^(1/s) <= <|g|^{sr} w>^(1/sr) <w^{(s-1/r)r'}>^(1/sr') on every
    # cube: the split that turns a weighted s-average into a bump pairing
    g = grid1(32)
    h = random_smooth(g, 101)
    w = rand_weight(g, 102)
    s, r = domination_exponents(2.5, 1.3, 2.0)
    rp = r / (r - 1.0)
    flat_g = np.abs(h.values.ravel())
    flat_w = w.values.ravel()
    for q in full_lattice(g):
        cells = cube_cells(g, q)
        gv, wv = flat_g[cells], flat_w[cells]
        lhs = float(np.mean((gv * wv) ** s)) ** (1.0 / s)
        rhs1 = float(np.mean(gv ** (s * r) * wv)) ** (1.0 / (s * r))
        rhs2 = float(np.mean(wv ** ((s - 1.0 / r) * rp))) ** (1.0 / (s * rp))
        assert lhs <= rhs1 * rhs2 * (1.0 + 1e-10)


# ---------------------------------------------------------------------------
# ratio families


def test_cf_report_fields():
    g = grid1(128)
    f = bump(g)
    w = power_weight(g, 0.5)
    lat = full_lattice(g)
    rep = cf_ratio(f, w, 2.0, K, lat)
    assert rep.name == "cf"
    assert rep.ratio == pytest.approx(rep.numerator / rep.denominator, rel=1e-12)
    assert rep.params["ratio_unsquared"] == pytest.approx(rep.ratio * rep.params["ainf"], rel=1e-12)
    assert rep.numerator == pytest.approx(lp_norm(apply_operator(f, K), w, 2.0), rel=1e-12)


def test_ap_strong_trio():
    g = grid1(128)
    f = random_smooth(g, 111)
    w = power_weight(g, 0.3)
    lat = full_lattice(g)
    reps = ap_strong_ratios(f, w, 2.0, K, lat)
    assert [r.name for r in reps] == ["ap_mixed", "ap_power", "ap_weak"]
    for key in ("p", "ap", "ainf_w", "ainf_sigma"):
        assert len({r.params[key] for r in reps}) == 1
    mixed, strong, weak = reps
    assert strong.denominator == pytest.approx(
        mixed.params["ap"] ** 2.0 * lp_norm(f, w, 2.0), rel=1e-12
    )  # p' = 2 at p = 2
    assert weak.numerator <= mixed.numerator * (1.0 + 1e-12)
    with pytest.raises(ValueError, match="p must exceed 1"):
        ap_strong_ratios(f, w, 1.0, K, lat)


def test_bump_report_direction_in_delta():
    g = grid1(128)
    f = bump(g)
    w = power_weight(g, 0.5)
    reps = [two_weight_bump_ratio(f, w, 2.0, power_log(2.0, d), K) for d in (0.25, 0.5, 1.0)]
    # fattening the bump only grows the majorant, so the ratio can only drop
    assert reps[0].numerator == reps[1].numerator == reps[2].numerator
    assert reps[0].ratio >= reps[1].ratio >= reps[2].ratio
    assert reps[0].params["bump"] == power_log(2.0, 0.25).label
    with pytest.raises(ValueError, match="p must exceed 1"):
        two_weight_bump_ratio(f, w, 1.0, power_log(2.0, 0.5), K)


@pytest.mark.parametrize("p,k_hi,k_lo", [(2.5, 3, 2), (3.0, 4, 3), (1.5, 2, 1)])
def test_iterated_report_exponents(p, k_hi, k_lo):
    g = grid1(64)
    f = bump(g)
    w = rand_weight(g, 121)
    rep = iterated_ratio(f, w, p, K)
    assert rep.params["k"] == k_hi
    assert rep.params["k_floor"] == k_lo
    # one more iteration only grows the majorant
    assert rep.ratio <= rep.params["ratio_floor"] * (1.0 + 1e-12)


def test_weak11_plain_weight_reduction():
    g = grid1(128)
    f = random_smooth(g, 131)
    w = make_weight(g, np.ones(g.shape))
    rep = weak11_ratio(f, w, K)
    tf = apply_operator(f, K)
    assert rep.params["a1"] == 1.0
    assert rep.params["ainf"] == 1.0
    assert rep.params["theta"] == 0.5
    assert rep.params["s0_unit_eps"] == 2.0
    assert rep.numerator == weak_lp_norm(tf, w, 1.0)
    assert rep.denominator == lp_norm(f, w, 1.0)


def test_sawyer_unit_denominator_reduction():
    g = grid1(128)
    f = random_smooth(g, 141)
    u = rand_weight(g, 142)
    ones = make_weight(g, np.ones(g.shape))
    rep = sawyer_ratio(f, u, ones, K)
    assert rep.numerator == pytest.approx(weak_lp_norm(apply_operator(f, K), u, 1.0), rel=1e-12)
    assert rep.denominator == pytest.approx(lp_norm(f, u, 1.0), rel=1e-12)
    with pytest.raises(ValueError, match="weights"):
        sawyer_ratio(f, make_function(g, np.ones(g.shape)), ones, K)


def test_vector_report_copy_cancellation():
    g = grid1(64)
    f = random_smooth(g, 151)
    w = power_weight(g, 0.3)
    one = vector_valued_ratio([f], w, 2.0, 3.0, K)
    five = vector_valued_ratio([f] * 5, w, 2.0, 3.0, K)
    # identical entries scale numerator and denominator by the same 5^(1/q)
    assert five.ratio == pytest.approx(one.ratio, rel=1e-12)
    assert five.params["family"] == 5
    with pytest.raises(ValueError, match="non-empty"):
        vector_valued_ratio([], w, 2.0, 2.0, K)
    with pytest.raises(ValueError, match="q must be positive"):
        vector_valued_ratio([f], w, 2.0, 0.0, K)


def test_sparse_r_report_recomputed():
    g = grid1(64)
    f = lifted(g, 161)
    w = power_weight(g, 0.5)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    A = power_r(3.0, 1.5)
    rep = sparse_r_two_weight_ratio(f, w, 3.0, 1.5, A, fam)
    assert rep.numerator == pytest.approx(lp_norm(sparse_operator(f, fam, 1.5), w, 3.0), rel=1e-12)
    assert math.isfinite(rep.params["beta_dual"]) and rep.params["beta_dual"] > 0
    assert rep.ratio > 0


def test_sparse_r_rejects_fat_conjugate():
    # conjugate of t^2 grows quadratically, too fat for the tail test at p'=1.5
    g = grid1(32)
    f = lifted(g, 171)
    fam = stopping_family(f, full_lattice(g), ratio=2.0)
    w = power_weight(g, 0.5)
    with pytest.raises(ValueError, match="tail test"):
        sparse_r_two_weight_ratio(f, w, 3.0, 1.5, power(2.0), fam)
    with pytest.raises(ValueError, match="p > r"):
        sparse_r_two_weight_ratio(f, w, 1.5, 1.5, power_r(1.5, 1.5), fam)


def test_ratio_families_scale_invariant():
    # every reported ratio has homogeneity degree zero in f and in w
    g = grid1(64)
    f = lifted(g, 181)
    w = rand_weight(g, 182, spread=1.0)
    u = rand_weight(g, 183, spread=1.0)
    lat = full_lattice(g)
    fam = stopping_family(f, lat, ratio=2.0)
    cf_, cw_ = 3.7, 0.2
    f2 = make_function(g, cf_ * f.values)
    w2 = make_weight(g, cw_ * w.values)
    fam2 = stopping_family(f2, lat, ratio=2.0)
    assert fam2.cubes == fam.cubes

    def pairs(fn):
        return fn(f, w), fn(f2, w2)

    cases = {
        "cf": lambda a, b: cf_ratio(a, b, 2.0, K, lat),
        "ap_mixed": lambda a, b: ap_strong_ratios(a, b, 2.0, K, lat)[0],
        "bump": lambda a, b: two_weight_bump_ratio(a, b, 2.0, power_log(2.0, 0.5), K),
        "iterated": lambda a, b: iterated_ratio(a, b, 2.5, K),
        "weak11": lambda a, b: weak11_ratio(a, b, K),
        "sawyer": lambda a, b: sawyer_ratio(a, u, b, K),
        # the companion entry must scale with a or the l^q mix itself changes
        "vector": lambda a, b: vector_valued_ratio(
            [a, make_function(g, np.roll(a.values, 5))], b, 2.0, 2.0, K
        ),
        "sparse_r": lambda a, b: sparse_r_two_weight_ratio(
            a, b, 3.0, 1.5, power_r(3.0, 1.5), fam
        ),
    }
    for name, fn in cases.items():
        base, scaled = pairs(fn)
        assert scaled.ratio == pytest.approx(base.ratio, rel=1e-9), name
