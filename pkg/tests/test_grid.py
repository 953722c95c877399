import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wnilab import (
    distribution,
    load_function,
    lp_norm,
    make_function,
    make_grid,
    make_weight,
    save_function,
    weak_lp_norm,
)


def test_grid_geometry_1d():
    g = make_grid(dim=1, cells_per_side=8, side_length=4.0)
    assert g.cell_width == 0.5
    assert g.cell_volume == 0.5
    assert g.shape == (8,)
    assert g.n_cells == 8
    c = g.axis_centers()
    assert c.shape == (8,)
    assert np.allclose(c, -2.0 + 0.5 * (np.arange(8) + 0.5))
    # centers are symmetric about the origin
    assert np.allclose(c + c[::-1], 0.0)
    assert np.allclose(g.radii(), np.abs(c))


def test_grid_geometry_2d():
    g = make_grid(dim=2, cells_per_side=8, side_length=2.0)
    assert g.cell_width == 0.25
    assert g.cell_volume == 0.0625
    assert g.shape == (8, 8)
    assert g.n_cells == 64
    xs, ys = g.center_mesh()
    assert xs.shape == (8, 8) and ys.shape == (8, 8)
    r = g.radii()
    assert r.shape == (8, 8)
    assert np.allclose(r, np.hypot(xs, ys))
    # corner cell is farthest from the origin
    assert r[0, 0] == r.max()


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dim=3, cells_per_side=8, side_length=1.0),
        dict(dim=1, cells_per_side=12, side_length=1.0),
        dict(dim=1, cells_per_side=4, side_length=1.0),
        dict(dim=1, cells_per_side=8, side_length=0.0),
        dict(dim=1, cells_per_side=8, side_length=-2.0),
    ],
)
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        make_grid(**kwargs)


def test_function_validation():
    g = make_grid(dim=1, cells_per_side=8, side_length=1.0)
    with pytest.raises(ValueError):
        make_function(g, np.zeros(7))
    with pytest.raises(ValueError):
        make_function(g, np.full(8, np.nan))
    with pytest.raises(ValueError):
        make_function(g, np.array([1.0, 2.0, np.inf, 0, 0, 0, 0, 0]))
    with pytest.raises(ValueError):
        make_weight(g, np.zeros(8))
    with pytest.raises(ValueError):
        make_weight(g, np.array([1.0, -1.0, 1, 1, 1, 1, 1, 1]))
    w = make_weight(g, np.ones(8))
    assert w.weight
    f = make_function(g, np.arange(8.0))
    assert not f.weight
    f2 = f.with_values(f.values * 2)
    assert np.array_equal(f2.values, 2 * f.values)
    assert f2.grid is f.grid


def test_lp_norm_constant():
    g = make_grid(dim=2, cells_per_side=16, side_length=3.0)
    f = make_function(g, np.full(g.shape, 5.0))
    # ||c||_p = c * |box|^(1/p)
    for p in (1.0, 2.0, 3.5):
        assert np.isclose(lp_norm(f, None, p), 5.0 * 9.0 ** (1.0 / p), rtol=1e-12)


def test_lp_norm_midpoint_quadrature():
    # f(x) = x on [-2,2]: integral of x^2 is 16/3, and against |x|^(1/2)
    # it is 32*sqrt(2)/7; the midpoint sums converge at O(h^2)
    g = make_grid(dim=1, cells_per_side=4096, side_length=4.0)
    x = g.axis_centers()
    f = make_function(g, x)
    assert np.isclose(lp_norm(f, None, 2.0), math.sqrt(16.0 / 3.0), rtol=1e-6)
    w = make_weight(g, np.abs(x) ** 0.5)
    assert np.isclose(
        lp_norm(f, w, 2.0), math.sqrt(32.0 * math.sqrt(2.0) / 7.0), rtol=1e-5
    )


def test_lp_norm_rejects_p_below_one():
    g = make_grid(dim=1, cells_per_side=8, side_length=1.0)
    f = make_function(g, np.ones(8))
    with pytest.raises(ValueError):
        lp_norm(f, None, 0.5)
    with pytest.raises(ValueError):
        weak_lp_norm(f, None, 0.99)


def test_distribution_levels():
    g = make_grid(dim=1, cells_per_side=8, side_length=8.0)
    f = make_function(g, np.array([0.0, 1, 1, 2, 2, 2, 3, -3]))
    # cell volume is 1, so the measure counts cells
    assert distribution(f, None, 0.0) == 7.0
    assert distribution(f, None, 1.0) == 5.0  # strict: the 1s drop out
    assert distribution(f, None, 2.5) == 2.0  # |-3| counts
    assert distribution(f, None, 3.0) == 0.0
    with pytest.raises(ValueError):
        distribution(f, None, -1.0)
    w = make_weight(g, np.array([1.0, 1, 1, 1, 1, 1, 10.0, 10.0]))
    assert distribution(f, w, 2.5) == 20.0


def test_weak_norm_two_level():
    g = make_grid(dim=1, cells_per_side=8, side_length=8.0)
    # |f| takes values 1 (6 cells) and 4 (2 cells); sup_t t*m(|f|>=t)^(1/p)
    f = make_function(g, np.array([1.0, -1, 1, 1, 1, 1, 4, -4]))
    for p in (1.0, 2.0):
        expected = max(1.0 * 8.0 ** (1 / p), 4.0 * 2.0 ** (1 / p))
        assert np.isclose(weak_lp_norm(f, None, p), expected, rtol=1e-12)


def test_weak_norm_zero_function():
    g = make_grid(dim=1, cells_per_side=8, side_length=1.0)
    f = make_function(g, np.zeros(8))
    assert weak_lp_norm(f, None, 2.0) == 0.0


def test_weak_norm_below_strong():
    rng = np.random.default_rng(3)
    g = make_grid(dim=2, cells_per_side=16, side_length=2.0)
    f = make_function(g, rng.standard_normal(g.shape))
    w = make_weight(g, np.exp(rng.standard_normal(g.shape)))
    for p in (1.0, 1.7, 3.0):
        assert weak_lp_norm(f, w, p) <= lp_norm(f, w, p) + 1e-12


def test_chebyshev():
    # t * m(|f| > t)^(1/p) <= ||f||_p at every level t
    rng = np.random.default_rng(11)
    g = make_grid(dim=1, cells_per_side=64, side_length=2.0)
    f = make_function(g, rng.standard_normal(64))
    strong = lp_norm(f, None, 2.0)
    for t in (0.1, 0.5, 1.0, 2.0):
        assert t * distribution(f, None, t) ** 0.5 <= strong + 1e-12


@settings(max_examples=40, deadline=None)
@given(
    c=st.floats(min_value=0.01, max_value=100.0),
    p=st.floats(min_value=1.0, max_value=6.0),
)
def test_norm_homogeneity(c, p):
    rng = np.random.default_rng(5)
    g = make_grid(dim=1, cells_per_side=32, side_length=1.0)
    f = make_function(g, rng.standard_normal(32))
    base = lp_norm(f, None, p)
    scaled = lp_norm(f.with_values(c * f.values), None, p)
    assert np.isclose(scaled, c * base, rtol=1e-9)
    assert np.isclose(
        weak_lp_norm(f.with_values(c * f.values), None, p),
        c * weak_lp_norm(f, None, p),
        rtol=1e-9,
    )


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    for dim, n in ((1, 16), (2, 8)):
        g = make_grid(dim=dim, cells_per_side=n, side_length=2.5)
        f = make_function(g, rng.standard_normal(g.shape) * 1e-7)
        path = tmp_path / f"f{dim}.txt"
        save_function(path, f)
        back = load_function(path)
        assert back.grid.dim == dim
        assert back.grid.cells_per_side == n
        assert back.grid.side_length == 2.5
        # repr round-trip is exact, not approximate
        assert np.array_equal(back.values, f.values)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1,8\n1.0\n")
    with pytest.raises(ValueError):
        load_function(path)
    path2 = tmp_path / "short.txt"
    path2.write_text("1,8,1.0\n" + "0.5\n" * 5)
    with pytest.raises(ValueError):
        load_function(path2)


def test_load_weight_flag(tmp_path):
    g = make_grid(dim=1, cells_per_side=8, side_length=1.0)
    w = make_weight(g, np.full(8, 2.0))
    path = tmp_path / "w.txt"
    save_function(path, w)
    back = load_function(path, weight=True)
    assert back.weight
    assert np.array_equal(back.values, w.values)
