"""Young functions, Luxemburg norms, Orlicz maximal operators, B_p integrals.

A Young function here is a strictly increasing convex profile A with A(0)=0,
evaluable on arrays.  The bundled kinds:

    power(p)         A(t) = t^p
    power_log(p, d)  A(t) = t^p (1+log+ t)^(p-1+d)
    power_r(p, r)    A(t) = t^(pr)
    custom(ts, vs)   log-log interpolation through sample points

Every kind also carries its profile in log-log form so tail integrals can be
evaluated far beyond float overflow of A itself.  Conjugates of pure powers
are closed-form; everything else gets a memoized log-grid table, because the
conjugate is evaluated millions of times inside the Orlicz maximal function.
"""
from __future__ import annotations

import math
import warnings
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate

from .grid import GridFunction
from .dyadic import DyadicCube, cube_slices
from . import windows

__all__ = [
    "YoungFunction",
    "power",
    "power_log",
    "power_r",
    "custom",
    "complementary",
    "orlicz_norm",
    "maximal",
    "iterated_maximal",
    "beta_p",
    "beta_p_dual",
    "holder_defect",
    "lorentz_logl_norm",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class YoungFunction:
    """Evaluable convex profile with structural hints.

    power_form = (c, m) means A(t) = c * t^m exactly, which unlocks closed
    conjugates and the fast exponent route in `maximal`.  log_profile maps
    log t -> log A(t) and never overflows for the bundled kinds.
    """

    def __init__(
        self,
        kind: str,
        log_profile: Callable,
        label: str,
        power_form: tuple[float, float] | None = None,
    ):
        self.kind = kind
        self.log_profile = log_profile
        self.label = label
        self.power_form = power_form

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("Young functions take t >= 0")
        out = np.zeros(t.shape)
        pos = t > 0
        with np.errstate(over="ignore"):
            out[pos] = np.exp(self.log_profile(np.log(t[pos])))
        return out if out.shape else float(out)

    def __repr__(self):
        return f"YoungFunction({self.label})"

    def inverse(self, y):
        """Monotone inverse by bisection in log-log space, vectorized over y."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(y < 0):
            raise ValueError("inverse takes y >= 0")
        ly = np.log(np.where(y > 0, y, 1.0))
        lo = np.full(y.shape, -700.0)
        hi = np.zeros(y.shape)
        for _ in range(1200):
            need = self.log_profile(hi) < ly
            if not need.any():
                break
            hi[need] += 0.7
        else:
            raise RuntimeError("inverse bracket failed; profile may not be superlinear")
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            too_low = self.log_profile(mid) < ly
            lo = np.where(too_low, mid, lo)
            hi = np.where(too_low, hi, mid)
        out = np.exp(0.5 * (lo + hi))
        out[y == 0] = 0.0
        return out if out.size > 1 else float(out[0])

    @cached_property
    def inverse_at_one(self) -> float:
        return float(self.inverse(1.0))

    def argument_power(self, c: float) -> "YoungFunction":
        """The profile t -> A(t^c).  With c = 1/p this is the usual p-rescaled
        bump; the result must stay superlinear."""
        if not c > 0:
            raise ValueError("argument power must be positive")
        if self.power_form is not None and self.power_form[1] * c < 1:
            raise ValueError(f"t^{self.power_form[1] * c:g} is not superlinear")
        base = self.log_profile
        pf = None
        if self.power_form is not None:
            pf = (self.power_form[0], self.power_form[1] * c)
        return YoungFunction(
            "arg_power",
            lambda lt, _c=c: base(_c * lt),
            f"{self.label}@t^{c:g}",
            power_form=pf,
        )

    @cached_property
    def conjugate(self) -> "YoungFunction":
        """The complementary function sup_t (st - A(t)) as a YoungFunction."""
        if self.power_form is not None:
            coeff, m = self.power_form
            mprime = m / (m - 1.0)
            scale = coeff ** (-1.0 / (m - 1.0)) * m ** (-1.0 / (m - 1.0)) * (1.0 - 1.0 / m)
            return _power_function("conjugate_power", scale, mprime, f"conj({self.label})")
        return _conjugate_table(self)


def _power_function(kind: str, coeff: float, m: float, label: str) -> YoungFunction:
    lc = math.log(coeff)
    return YoungFunction(kind, lambda lt: lc + m * lt, label, power_form=(coeff, m))


def power(p: float) -> YoungFunction:
    if not p > 1:
        raise ValueError(f"power kind needs p > 1, got {p}")
    return _power_function("power", 1.0, p, f"t^{p:g}")


def power_log(p: float, delta: float) -> YoungFunction:
    """t^p (1 + log+ t)^(p-1+delta)."""
    if not p > 1:
        raise ValueError(f"power_log kind needs p > 1, got {p}")
    if not delta > 0:
        raise ValueError(f"power_log kind needs delta > 0, got {delta}")
    b = p - 1.0 + delta
    return YoungFunction(
        "power_log",
        lambda lt: p * lt + b * np.log1p(np.maximum(lt, 0.0)),
        f"t^{p:g}(1+log+t)^{b:g}",
    )


def power_r(p: float, r: float) -> YoungFunction:
    if not p > 1:
        raise ValueError(f"power_r kind needs p > 1, got {p}")
    if not r >= 1:
        raise ValueError(f"power_r kind needs r >= 1, got {r}")
    return _power_function("power_r", 1.0, p * r, f"t^{p * r:g}")


def custom(ts: np.ndarray, values: np.ndarray) -> YoungFunction:
    """Profile through (ts, values) samples, power-law interpolated in log-log
    coordinates and extrapolated with the edge slopes."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.ndim != 1 or ts.size < 2 or values.shape != ts.shape:
        raise ValueError("need matching 1D sample arrays with >= 2 points")
    if np.any(ts <= 0) or np.any(values <= 0):
        raise ValueError("samples must be strictly positive (A(0)=0 is implicit)")
    if np.any(np.diff(ts) <= 0) or np.any(np.diff(values) <= 0):
        raise ValueError("samples must be strictly increasing")
    slopes = np.diff(np.log(values)) / np.diff(np.log(ts))
    if slopes[-1] <= 1:
        raise ValueError("table tail grows sublinearly; not a usable Young function")
    return YoungFunction("custom", _loglog_interp(np.log(ts), np.log(values)), "custom-table")


def _loglog_interp(logx: np.ndarray, logy: np.ndarray) -> Callable:
    slope_lo = (logy[1] - logy[0]) / (logx[1] - logx[0])
    slope_hi = (logy[-1] - logy[-2]) / (logx[-1] - logx[-2])

    def log_profile(lt):
        lt = np.asarray(lt, dtype=float)
        ly = np.interp(lt, logx, logy)
        ly = np.where(lt < logx[0], logy[0] + slope_lo * (lt - logx[0]), ly)
        ly = np.where(lt > logx[-1], logy[-1] + slope_hi * (lt - logx[-1]), ly)
        return ly

    return log_profile


def _conjugate_value_array(A: YoungFunction, s: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    """sup_t (s t - A(t)) per entry, golden-section on the concave objective."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    pos = s > 0
    if not pos.any():
        return out
    sp = s[pos]
    hi = np.ones_like(sp)
    with np.errstate(over="ignore"):
        for _ in range(4000):
            need = np.asarray(A(hi)) / hi < sp
            if not need.any():
                break
            hi[need] *= 2.0
        else:
            raise RuntimeError("conjugate bracket failed; A(t)/t does not exceed s")
        a = np.zeros_like(sp)
        b = hi

        def obj(t):
            return sp * t - np.asarray(A(t))

        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1, f2 = obj(x1), obj(x2)
        for _ in range(120):
            if np.all((b - a) <= rel * np.maximum(b, 1e-300)):
                break
            right = f1 < f2  # the max lies in [x1, b]
            a = np.where(right, x1, a)
            b = np.where(right, b, x2)
            x1 = b - _GOLDEN * (b - a)
            x2 = a + _GOLDEN * (b - a)
            f1, f2 = obj(x1), obj(x2)
        out[pos] = np.maximum(obj(0.5 * (a + b)), 0.0)
    return out


def complementary(A: YoungFunction, s: float) -> float:
    """Value of the complementary function at s.

    Numeric golden-section by default; closed form for the pure-power kind
    power_r, where conj(t^m)(s) = s^(m') (1/m)^(1/(m-1)) (1 - 1/m)."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return 0.0
    if A.kind == "power_r":
        _, m = A.power_form
        mprime = m / (m - 1.0)
        return s**mprime * (1.0 / m) ** (1.0 / (m - 1.0)) * (1.0 - 1.0 / m)
    return float(_conjugate_value_array(A, np.array([s]))[0])


_CONJ_GRID = np.exp(np.linspace(np.log(1e-9), np.log(1e12), 1261))


def _conjugate_table(A: YoungFunction) -> YoungFunction:
    vals = _conjugate_value_array(A, _CONJ_GRID)
    if np.any(vals <= 0):
        raise RuntimeError("conjugate table degenerate")
    return YoungFunction(
        "conjugate_table",
        _loglog_interp(np.log(_CONJ_GRID), np.log(vals)),
        f"conj({A.label})",
    )


# ---------------------------------------------------------------------------
# Luxemburg norms


def _cube_values(f: GridFunction, cube) -> np.ndarray:
    if cube is None:
        return f.values.ravel()
    if isinstance(cube, DyadicCube):
        return f.values[cube_slices(f.grid, cube)].ravel()
    return f.values[cube].ravel()  # tuple of slices = window


def orlicz_norm(f: GridFunction, cube, A: YoungFunction) -> float:
    """Luxemburg norm inf{lam > 0 : <A(|f|/lam)>_Q <= 1} by bisection.

    The bracket comes from doubling off the certain bounds
    mean/A^{-1}(1) <= norm <= max/A^{-1}(1); termination at relative width 1e-10.
    """
    a = np.abs(_cube_values(f, cube))
    if not np.any(a):
        return 0.0
    inv1 = A.inverse_at_one
    mean, mx = float(np.mean(a)), float(np.max(a))
    lo, hi = mean / inv1, mx / inv1
    if hi <= lo * (1 + 1e-14):
        return hi

    def excess(lam):
        return float(np.mean(np.asarray(A(a / lam)))) - 1.0

    # safety doubling in case interpolation error nudges a bound inside
    for _ in range(60):
        if excess(hi) <= 0:
            break
        hi *= 2.0
    for _ in range(60):
        if excess(lo) >= 0:
            break
        lo /= 2.0
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _norms_root_vec(W: np.ndarray, A: YoungFunction, rel: float = 1e-9, max_iter: int = 110) -> np.ndarray:
    """Luxemburg norm per row of W (rows = windows), bracketed false-position
    with periodic bisection so every row converges."""
    rows = W.shape[0]
    out = np.zeros(rows)
    mx = W.max(axis=1)
    alive = mx > 0
    if not alive.any():
        return out
    Wa = W[alive]
    inv1 = A.inverse_at_one
    mean = Wa.mean(axis=1)
    lam_lo, lam_hi = mean / inv1, mx[alive] / inv1
    const = lam_hi <= lam_lo * (1 + 1e-13)
    ulo, uhi = np.log(lam_lo), np.log(lam_hi)

    def g_of(u, idx):
        lam = np.exp(u)
        return np.asarray(A(Wa[idx] / lam[:, None])).mean(axis=1) - 1.0

    idx_all = np.arange(Wa.shape[0])
    work = idx_all[~const]
    glo = np.zeros(Wa.shape[0])
    ghi = np.zeros(Wa.shape[0])
    if work.size:
        glo[work] = g_of(ulo[work], work)
        ghi[work] = g_of(uhi[work], work)
    # interpolation-table drift can spoil a bound; patch by widening
    for arr, gval, sgn, step in ((ulo, glo, 1.0, -0.15), (uhi, ghi, -1.0, 0.15)):
        bad = work[sgn * gval[work] < 0]
        tries = 0
        while bad.size and tries < 80:
            arr[bad] += step
            gval[bad] = g_of(arr[bad], bad)
            bad = bad[sgn * gval[bad] < 0]
            tries += 1
    active = work[(uhi[work] - ulo[work]) > rel]
    for it in range(max_iter):
        if not active.size:
            break
        a, b = ulo[active], uhi[active]
        ga, gb = glo[active], ghi[active]
        if it % 3 == 2:
            u = 0.5 * (a + b)
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                u = a + ga * (b - a) / (ga - gb)
            width = b - a
            u = np.clip(np.nan_to_num(u, nan=0.0), a + 0.02 * width, b - 0.02 * width)
        gu = g_of(u, active)
        go_lo = gu > 0
        ulo[active] = np.where(go_lo, u, ulo[active])
        glo[active] = np.where(go_lo, gu, glo[active])
        uhi[active] = np.where(go_lo, uhi[active], u)
        ghi[active] = np.where(go_lo, ghi[active], gu)
        active = active[(uhi[active] - ulo[active]) > rel]
    res = np.exp(0.5 * (ulo + uhi))
    res[const] = lam_hi[const]
    out[alive] = res
    return out


def _pruned_lengths(n: int) -> list[int]:
    ls = {1, n}
    j = 1
    while (1 << j) <= n:
        for e in (-1, 0, 1):
            l = (1 << j) + e
            if 1 <= l <= n:
                ls.add(l)
        j += 1
    return sorted(ls)


_CHUNK = 4_000_000  # elements per solver block, keeps peak memory modest


def _orlicz_norms_per_start(a: np.ndarray, l: int, A: YoungFunction) -> np.ndarray:
    if a.ndim == 1:
        W = sliding_window_view(a, l)
    else:
        V = sliding_window_view(a, (l, l))
        W = V.reshape(V.shape[0] * V.shape[1], l * l)
    rows, cols = W.shape
    per = max(1, _CHUNK // cols)
    chunks = [
        _norms_root_vec(np.ascontiguousarray(W[i : i + per]), A)
        for i in range(0, rows, per)
    ]
    flat = np.concatenate(chunks)
    if a.ndim == 1:
        return flat
    side = a.shape[0] - l + 1
    return flat.reshape(side, side)


def maximal(f: GridFunction, kind="lebesgue") -> GridFunction:
    """Uncentred maximal function over axis-aligned cube windows.

    kind = "lebesgue" averages |f|; a float r gives M_r = M(|f|^r)^(1/r);
    a YoungFunction gives the Orlicz maximal function M_A.  Pure-power kinds
    reduce exactly to M_r over the full window set; other Young kinds are
    evaluated on the pruned set of power-of-two (+/-1) side lengths, a
    documented approximation whose defect is measured in the test suite.
    """
    if isinstance(kind, str):
        if kind != "lebesgue":
            raise ValueError(f"unknown maximal kind {kind!r}")
        return _maximal_power(f, 1.0)
    if isinstance(kind, YoungFunction):
        if kind.power_form is not None:
            coeff, m = kind.power_form
            scaled = _maximal_power(f, m)
            return scaled.with_values(scaled.values * coeff ** (1.0 / m))
        return _maximal_orlicz(f, kind)
    if isinstance(kind, (int, float)):
        r = float(kind)
        if not r > 0:
            raise ValueError("exponent r must be positive")
        return _maximal_power(f, r)
    raise TypeError(f"cannot interpret maximal kind {kind!r}")


def _maximal_power(f: GridFunction, r: float) -> GridFunction:
    n = f.grid.cells_per_side
    a = np.abs(f.values) ** r
    best = a.copy()
    contain = windows.containing_max if f.grid.dim == 1 else windows.containing_max_2d
    for l in range(2, n + 1):
        means = windows.window_means(a, l)
        np.maximum(best, contain(means, l, n), out=best)
    return f.with_values(best ** (1.0 / r))


def _maximal_orlicz(f: GridFunction, A: YoungFunction) -> GridFunction:
    n = f.grid.cells_per_side
    a = np.abs(f.values)
    best = a / A.inverse_at_one  # the single-cell windows, solved exactly
    contain = windows.containing_max if f.grid.dim == 1 else windows.containing_max_2d
    for l in _pruned_lengths(n):
        if l == 1:
            continue
        norms = _orlicz_norms_per_start(a, l, A)
        np.maximum(best, contain(norms, l, n), out=best)
    return f.with_values(best)


def iterated_maximal(f: GridFunction, k: int) -> GridFunction:
    """k-fold composition of the Lebesgue maximal operator."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = f
    for _ in range(k):
        out = maximal(out, "lebesgue")
    return out


# ---------------------------------------------------------------------------
# B_p integrals and friends


def _tail_integral(log_h: Callable, lower: float) -> float:
    """integral_lower^inf exp(log_h(log t)) dt/t.

    Doubling upper limit: blocks [log T, log 2T].  Stops when the running
    block plus a power-law tail estimate is below 1e-12 of the total; three
    consecutive non-decreasing blocks fire the divergence sentinel.
    """
    if not lower > 0:
        raise ValueError("lower cutoff must be positive")
    u0 = math.log(lower)
    width = math.log(2.0)

    def h(u):
        return math.exp(min(log_h(u), 700.0))

    total = 0.0
    prev = None
    grow = 0
    for k in range(2000):
        a = u0 + k * width
        with warnings.catch_warnings():
            # huge divergent blocks trip quad's roundoff warning; the
            # divergence sentinel below is the real handler
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            seg, _ = integrate.quad(h, a, a + width, limit=100)
        total += seg
        if total > 1e200:
            return math.inf
        if prev is not None and prev > 0:
            if seg >= prev * (1 - 1e-12):
                grow += 1
                if grow >= 3:
                    return math.inf
            else:
                grow = 0
            # estimate the remaining tail from the local decay law
            umid_prev, umid = a - width / 2, a + width / 2
            if seg > 0 and k >= 4:
                if seg / prev < 0.5:  # geometric regime
                    tail = seg * (seg / prev) / (1 - seg / prev)
                elif umid_prev > 1.0:  # power-law regime h ~ u^-s
                    s = math.log(prev / seg) / math.log(umid / umid_prev)
                    if s <= 1.0:
                        continue
                    tail = seg * umid / (width * (s - 1.0))
                else:
                    continue
                if tail < 1e-12 * total:
                    return total + tail
            elif seg == 0.0 and prev == 0.0:
                return total
        if seg == 0.0 and total > 0 and k > 8:
            return total
        prev = seg
    return math.inf


def beta_p(A: YoungFunction, p: float, lower: float = 1.0) -> float:
    """integral_lower^inf A(t)/t^p dt/t; +inf when the tail does not decay."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    lp = A.log_profile
    return _tail_integral(lambda u: float(np.asarray(lp(u))) - p * u, lower)


def beta_p_dual(A: YoungFunction, p: float, lower: float = 1.0) -> float:
    """The companion integral_lower^inf (t^{p'}/conj(A)(t))^(p-1) dt/t.

    Finite exactly when beta_p(A, p) is, up to an unpinned constant; callers
    compare the two and report the ratio."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    pprime = p / (p - 1.0)
    conj_lp = A.conjugate.log_profile
    return _tail_integral(
        lambda u: (p - 1.0) * (pprime * u - float(np.asarray(conj_lp(u)))), lower
    )


def holder_defect(f: GridFunction, g: GridFunction, cube, A: YoungFunction) -> float:
    """<|fg|>_Q divided by ||f||_{A,Q} ||g||_{conj A,Q}; at most 2 in theory."""
    fa = np.abs(_cube_values(f, cube))
    ga = np.abs(_cube_values(g, cube))
    num = float(np.mean(fa * ga))
    if num == 0.0:
        return 0.0
    den = orlicz_norm(f, cube, A) * orlicz_norm(g, cube, A.conjugate)
    return num / den


def lorentz_logl_norm(omega_values: np.ndarray, q: float, sphere_measure: float = 2 * math.pi) -> float:
    """q * integral_0^inf log(e+t) |{|Omega| > t}|^(1/q) dt for uniform sphere
    samples carrying sphere_measure/#samples each; exact per step using the
    antiderivative (e+t) log(e+t) - t."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    vals = np.abs(np.asarray(omega_values, dtype=float).ravel())
    if vals.size == 0:
        raise ValueError("need at least one sample")
    per_sample = sphere_measure / vals.size
    levels = np.unique(vals)
    breaks = levels if levels[0] == 0.0 else np.concatenate([[0.0], levels])
    counts_gt = np.array([(vals > b).sum() for b in breaks], dtype=float)

    def anti(t):
        return (math.e + t) * math.log(math.e + t) - t

    total = 0.0
    for i in range(len(breaks) - 1):
        m = counts_gt[i] * per_sample
        if m > 0:
            total += m ** (1.0 / q) * (anti(breaks[i + 1]) - anti(breaks[i]))
    return q * total
