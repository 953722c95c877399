"""Batch experiment runner.

Subcommands: constants, dominate, cf, bump, iterated, weak11, sawyer, vector,
sparse-r, goodlambda, rdf, compare.  Each run writes <experiment>.jsonl (one
report per line), <experiment>.csv with the fixed column contract
name,p,r_or_delta_or_q,weight_id,seed,N,numerator,denominator,ratio, and a
manifest with the config hash.  Same config and seed give byte-identical
report files; wall time lives only in the manifest.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .grid import GridFunction, lp_norm, make_grid, make_weight
from .dyadic import lattice_cubes, principal_pair_family, stopping_family
from .young import maximal, power_log, power_r
from .weights import power_weight, random_a1_weight, weight_report
from .operators import KernelSpec, apply_operator, rough_kernel, sample_angles, sign_kernel
from .analysis import (
    ap_strong_ratios,
    cf_ratio,
    good_lambda_measure,
    iterated_ratio,
    make_report,
    rubio_de_francia,
    sawyer_ratio,
    sparse_form,
    sparse_r_two_weight_ratio,
    two_weight_bump_ratio,
    vector_valued_ratio,
    weak11_ratio,
)
from . import corpus

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "constants",
    "dominate",
    "cf",
    "bump",
    "iterated",
    "weak11",
    "sawyer",
    "vector",
    "sparse-r",
    "goodlambda",
    "rdf",
)

CSV_COLUMNS = ("name", "p", "r_or_delta_or_q", "weight_id", "seed", "N", "numerator", "denominator", "ratio")

# exponent lists each experiment refuses to run without
_NEEDS = {
    "cf": ("ps",),
    "bump": ("ps", "deltas"),
    "iterated": ("ps",),
    "vector": ("ps", "qs"),
    "sparse-r": ("ps", "rs"),
    "dominate": ("ss",),
    "rdf": ("ps",),
    "goodlambda": ("eps_list",),
}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = ""
    dim: int = 1
    side_length: float = 8.0
    resolutions: list = field(default_factory=lambda: [256])
    kernel: dict = field(default_factory=lambda: {"kind": "rough_omega"})
    weights: dict = field(default_factory=lambda: {"power_exponents": list(corpus.POWER_SWEEP), "random_count": 2, "random_delta": 0.5})
    ps: list = field(default_factory=lambda: [1.5, 2.0])
    qs: list = field(default_factory=lambda: [2.0])
    rs: list = field(default_factory=lambda: [1.5])
    ss: list = field(default_factory=lambda: [2.0])
    deltas: list = field(default_factory=lambda: [1.0, 0.5, 0.25])
    eps_list: list = field(default_factory=lambda: [0.5, 0.25, 0.125, 0.0625])
    lam_rel: float = 0.25
    function_seeds: int = 2
    vector_family: int = 8
    seed: int = 7
    threads: int = 0
    out_dir: str = "reports"


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return i
    return 0


def load_config(path: str | None, experiment: str) -> ExperimentConfig:
    cfg = ExperimentConfig(experiment=experiment)
    if path is None:
        _validate(cfg, raw_text="")
        return cfg
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: not valid JSON: {e.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{path}:{_line_of(text, key)}: unknown config key {key!r}")
        setattr(cfg, key, value)
    if data.get("experiment") and data["experiment"] != experiment:
        raise ConfigError(
            f"{path}:{_line_of(text, 'experiment')}: config is for "
            f"{data['experiment']!r}, subcommand is {experiment!r}"
        )
    cfg.experiment = experiment
    try:
        _validate(cfg, raw_text=text, path=path)
    except ConfigError:
        raise
    return cfg


def _validate(cfg: ExperimentConfig, raw_text: str = "", path: str = "config"):
    def bad(key, msg):
        raise ConfigError(f"{path}:{_line_of(raw_text, key)}: {msg}")

    if cfg.experiment not in EXPERIMENTS:
        bad("experiment", f"unknown experiment {cfg.experiment!r}")
    if cfg.dim not in (1, 2):
        bad("dim", f"dim must be 1 or 2, got {cfg.dim}")
    if not cfg.resolutions:
        bad("resolutions", "resolutions must be non-empty")
    for n in cfg.resolutions:
        if not (isinstance(n, int) and n >= 8 and (n & (n - 1)) == 0):
            bad("resolutions", f"resolution {n} is not a power of two >= 8")
    if not cfg.side_length > 0:
        bad("side_length", "side_length must be positive")
    for key in _NEEDS.get(cfg.experiment, ()):
        if not getattr(cfg, key):
            bad(key, f"{key} must be non-empty for experiment {cfg.experiment!r}")
    for p in cfg.ps:
        if not p > 1:
            bad("ps", f"exponent p={p} must exceed 1")
    for e in cfg.eps_list:
        if not 0 < e < 1:
            bad("eps_list", f"eps={e} must lie in (0,1)")
    wcfg = cfg.weights
    if not isinstance(wcfg, dict):
        bad("weights", "weights must be an object")
    delta = wcfg.get("random_delta", 0.5)
    if not 0 < delta < 1:
        bad("weights", f"random_delta={delta} must lie in (0,1)")
    kcfg = cfg.kernel
    if not isinstance(kcfg, dict) or kcfg.get("kind", "rough_omega") not in ("rough_omega", "bochner_riesz"):
        bad("kernel", "kernel.kind must be rough_omega or bochner_riesz")
    if kcfg.get("kind") == "bochner_riesz" and cfg.dim != 2:
        bad("kernel", "bochner_riesz needs dim = 2")


# ---------------------------------------------------------------------------
# fixtures from config


def build_kernel(cfg: ExperimentConfig) -> KernelSpec:
    kcfg = cfg.kernel
    kind = kcfg.get("kind", "rough_omega")
    if kind == "bochner_riesz":
        return KernelSpec("bochner_riesz", xi_max=float(kcfg.get("xi_max", 2.0)))
    if "omega_csv" in kcfg:
        samples = np.loadtxt(kcfg["omega_csv"], delimiter=",").ravel()
        return rough_kernel(samples)
    if cfg.dim == 1:
        return sign_kernel()
    m = int(kcfg.get("sphere_samples", 256))
    return rough_kernel(np.sign(np.cos(sample_angles(m))))


def _grid(cfg: ExperimentConfig, n: int):
    return make_grid(cfg.dim, n, cfg.side_length)


def _suite(cfg: ExperimentConfig, grid) -> list:
    w = cfg.weights
    return corpus.weight_suite(
        grid,
        power_exponents=w.get("power_exponents", corpus.POWER_SWEEP),
        random_count=int(w.get("random_count", 2)),
        delta=float(w.get("random_delta", 0.5)),
        base_seed=cfg.seed * 1000,
    )


def _functions(cfg: ExperimentConfig, grid) -> list:
    out = [("bump", corpus.bump(grid))]
    for k in range(cfg.function_seeds):
        out.append((f"rs_{k}", corpus.random_smooth(grid, cfg.seed * 100 + k)))
    return out


def _full_lattice(grid):
    return lattice_cubes(grid, grid.cells_per_side.bit_length() - 1)


# ---------------------------------------------------------------------------
# report plumbing


def _jsonify(x):
    if isinstance(x, dict):
        return {k: _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _row(report, weight_id: str, seed, N: int) -> dict:
    params = dict(report.params)
    params.update(weight_id=weight_id, seed=seed, N=N)
    return {
        "name": report.name,
        "numerator": report.numerator,
        "denominator": report.denominator,
        "ratio": report.ratio,
        "params": params,
    }


def _aux_key(params: dict):
    for key in ("r", "delta", "q", "s", "eps"):
        if key in params:
            return params[key]
    return ""


def _csv_cell(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float) and not math.isfinite(x):
        return "nan"
    return repr(x) if isinstance(x, float) else str(x)


def _write_reports(cfg: ExperimentConfig, rows: list[dict], wall: float) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = out / cfg.experiment
    with open(f"{base}.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(_jsonify(row), sort_keys=True))
            fh.write("\n")
    with open(f"{base}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            p = row.get("params", {})
            writer.writerow(
                [
                    row.get("name", cfg.experiment),
                    _csv_cell(p.get("p", "")),
                    _csv_cell(_aux_key(p)),
                    p.get("weight_id", ""),
                    p.get("seed", ""),
                    p.get("N", ""),
                    _csv_cell(row.get("numerator")),
                    _csv_cell(row.get("denominator")),
                    _csv_cell(row.get("ratio")),
                ]
            )
    sentinels = sum(
        1
        for row in rows
        if row.get("ratio") is None
        or (isinstance(row.get("ratio"), float) and not math.isfinite(row["ratio"]))
    )
    canon = json.dumps(_jsonify(asdict(cfg)), sort_keys=True).encode()
    manifest = {
        "experiment": cfg.experiment,
        "config_sha256": hashlib.sha256(canon).hexdigest(),
        "version": __version__,
        "wall_seconds": wall,
        "rows": len(rows),
        "sentinels": sentinels,
    }
    with open(f"{base}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return base


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# experiment drivers; each returns ordered report rows


def _run_constants(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        lattice = _full_lattice(grid)
        for wid, w in _suite(cfg, grid):
            rep = weight_report(w, lattice, label=wid)
            payload = rep.as_dict()
            print(json.dumps(_jsonify(payload), sort_keys=True))
            rows.append(
                {
                    "name": "constants",
                    "numerator": rep.ainf,
                    "denominator": 1.0,
                    "ratio": rep.ainf,
                    "params": {"weight_id": wid, "seed": cfg.seed, "N": n, **payload},
                }
            )
    return rows


def _run_cf(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    points = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        lattice = _full_lattice(grid)
        suite = _suite(cfg, grid)
        funcs = _functions(cfg, grid)
        for wid, w in suite:
            for fid, f in funcs:
                for p in cfg.ps:
                    points.append((n, lattice, wid, w, fid, f, p))

    def work(pt):
        n, lattice, wid, w, fid, f, p = pt
        reps = [cf_ratio(f, w, p, K, lattice)]
        reps.extend(ap_strong_ratios(f, w, p, K, lattice))
        out = []
        for rep in reps:
            rep.params["fid"] = fid
            out.append(_row(rep, wid, cfg.seed, n))
        return out

    return [r for chunk in _pmap(work, points, cfg.threads) for r in chunk]


def _run_dominate(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    rows = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        lattice = _full_lattice(grid)
        ones = make_weight(grid, np.ones(grid.shape))
        f = corpus.bump(grid)
        tf = apply_operator(f, K)
        for k in range(cfg.function_seeds):
            g = corpus.random_smooth(grid, cfg.seed * 100 + k)
            for s in cfg.ss:
                fam = principal_pair_family(f, g, ones, lattice, sr=s)
                pairing = abs(float(np.sum(tf.values * g.values)) * grid.cell_volume)
                sprime = s / (s - 1.0)
                rep = make_report("dominate", pairing, sprime * sparse_form(f, g, fam, s), s=s, eta=fam.eta)
                rep.params["fid"] = f"bump|rs_{k}"
                rows.append(_row(rep, "ones", cfg.seed, n))
    return rows


def _run_bump(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    points = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        f = corpus.bump(grid)
        for wid, w in _suite(cfg, grid):
            for p in cfg.ps:
                for d in cfg.deltas:
                    points.append((n, wid, w, f, p, d))

    def work(pt):
        n, wid, w, f, p, d = pt
        rep = two_weight_bump_ratio(f, w, p, power_log(p, d), K)
        rep.params["delta"] = d
        return _row(rep, wid, cfg.seed, n)

    return _pmap(work, points, cfg.threads)


def _run_iterated(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    rows = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        f = corpus.bump(grid)
        entries = list(_suite(cfg, grid))
        fa, wa = corpus.adversarial_pair(grid)
        for p in cfg.ps:
            for wid, w in entries:
                rows.append(_row(iterated_ratio(f, w, p, K), wid, cfg.seed, n))
            rep = iterated_ratio(fa, wa, p, K)
            rep.params["adversarial"] = True
            rows.append(_row(rep, "adversarial", cfg.seed, n))
    return rows


def _run_weak11(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    rows = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        f = corpus.bump(grid)
        for wid, w in _suite(cfg, grid):
            rows.append(_row(weak11_ratio(f, w, K), wid, cfg.seed, n))
    return rows


def _run_sawyer(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    rows = []
    count = int(cfg.weights.get("random_count", 2))
    delta = float(cfg.weights.get("random_delta", 0.5))
    powers = cfg.weights.get("power_exponents", corpus.POWER_SWEEP)
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        f = corpus.bump(grid)
        for i in range(max(count, 1)):
            u = random_a1_weight(grid, cfg.seed * 1000 + i, delta)
            for a in powers:
                v = power_weight(grid, a)
                rep = sawyer_ratio(f, u, v, K)
                rows.append(_row(rep, f"rand_{i}|power_{a:g}", cfg.seed, n))
    return rows


def _run_vector(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    rows = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        fs = [corpus.random_smooth(grid, cfg.seed * 100 + j) for j in range(cfg.vector_family)]
        for wid, w in _suite(cfg, grid):
            for p in cfg.ps:
                for q in cfg.qs:
                    rows.append(_row(vector_valued_ratio(fs, w, p, q, K), wid, cfg.seed, n))
    return rows


def _run_sparse_r(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    skipped = set()
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        lattice = _full_lattice(grid)
        f = corpus.bump(grid)
        fam = stopping_family(f, lattice)
        for wid, w in _suite(cfg, grid):
            for p in cfg.ps:
                for r in cfg.rs:
                    if not p > r:
                        continue
                    try:
                        rep = sparse_r_two_weight_ratio(f, w, p, r, power_r(p, r), fam)
                    except ValueError:
                        # pure-power bump at r <= 1 has no dual tail; skip the
                        # grid point rather than abort the sweep
                        if (p, r) not in skipped:
                            skipped.add((p, r))
                            log.warning("sparse-r: bump for p=%g r=%g fails the tail test, skipping", p, r)
                        continue
                    rep.params["eta"] = fam.eta
                    rows.append(_row(rep, wid, cfg.seed, n))
    return rows


def _run_goodlambda(cfg: ExperimentConfig) -> list[dict]:
    K = build_kernel(cfg)
    rows = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        for fid, f in _functions(cfg, grid):
            lam = cfg.lam_rel * float(np.max(maximal(f, "lebesgue").values))
            for eps in cfg.eps_list:
                lhs, rhs = good_lambda_measure(f, K, lam, eps)
                rep = make_report("goodlambda", lhs, rhs, eps=eps, lam=lam)
                rep.params["fid"] = fid
                rows.append(_row(rep, "lebesgue", cfg.seed, n))
    return rows


def _run_rdf(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for n in cfg.resolutions:
        grid = _grid(cfg, n)
        for wid, v in _suite(cfg, grid):
            for p in cfg.ps:
                for k in range(cfg.function_seeds):
                    h = corpus.random_smooth(grid, cfg.seed * 100 + k, nonneg=True)
                    res = rubio_de_francia(h, v, p)
                    rep = make_report("rdf", lp_norm(res.Rh, v, p), lp_norm(h, v, p), p=p)
                    rep.params.update(
                        op_norm_S=res.op_norm_S,
                        a1_of_product=res.a1_of_product,
                        terms=res.terms_used,
                        slack=2.0 ** (1 - res.terms_used),
                        fid=f"rs_{k}",
                    )
                    rows.append(_row(rep, wid, cfg.seed, n))
    return rows


_RUNNERS = {
    "constants": _run_constants,
    "dominate": _run_dominate,
    "cf": _run_cf,
    "bump": _run_bump,
    "iterated": _run_iterated,
    "weak11": _run_weak11,
    "sawyer": _run_sawyer,
    "vector": _run_vector,
    "sparse-r": _run_sparse_r,
    "goodlambda": _run_goodlambda,
    "rdf": _run_rdf,
}


def run(cfg: ExperimentConfig) -> int:
    start = time.perf_counter()
    rows = _RUNNERS[cfg.experiment](cfg)
    base = _write_reports(cfg, rows, wall=time.perf_counter() - start)
    print(f"{cfg.experiment}: {len(rows)} rows -> {base}.jsonl / .csv")
    return 0


# ---------------------------------------------------------------------------
# report comparison (regression gate)


def _load_rows(path: str) -> list[dict]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _compare_key(row: dict, with_n: bool):
    p = row.get("params", {})
    key = [row.get("name"), p.get("weight_id"), p.get("seed"), p.get("fid"), p.get("p"), _aux_key(p)]
    if with_n:
        key.append(p.get("N"))
    return tuple(key)


def compare(path_a: str, path_b: str, tolerance: float) -> int:
    rows_a, rows_b = _load_rows(path_a), _load_rows(path_b)
    names_a = {r.get("name") for r in rows_a}
    names_b = {r.get("name") for r in rows_b}
    if names_a != names_b:
        print(f"experiment mismatch: {sorted(names_a)} vs {sorted(names_b)}", file=sys.stderr)
        return 2
    for with_n in (True, False):
        a = {_compare_key(r, with_n): r for r in rows_a}
        b = {_compare_key(r, with_n): r for r in rows_b}
        common = sorted(set(a) & set(b), key=repr)
        if common:
            break
    if not common:
        print("no joinable rows between the two reports", file=sys.stderr)
        return 2
    worst = 0.0
    for key in common:
        ra, rb = a[key].get("ratio"), b[key].get("ratio")
        if ra is None and rb is None:
            drift = 0.0
        elif ra is None or rb is None or rb == 0:
            drift = math.inf
        else:
            drift = abs(ra / rb - 1.0)
        worst = max(worst, drift)
        print(f"{key}: {ra} vs {rb} drift={drift:.4g}")
    print(f"max drift {worst:.4g} over {len(common)} rows (tolerance {tolerance:g})")
    return 1 if worst > tolerance else 0


# ---------------------------------------------------------------------------
# argument parsing


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wnilab", description="weighted-norm inequality measurements on a grid")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None, help="worker threads (env WNILAB_THREADS)")
        sp.add_argument("--out", default=None, help="output directory")
    cp = sub.add_parser("compare", help="diff two .jsonl reports")
    cp.add_argument("report_a")
    cp.add_argument("report_b")
    cp.add_argument("--tolerance", type=float, default=0.35)
    args = parser.parse_args(argv)

    if args.command == "compare":
        return compare(args.report_a, args.report_b, args.tolerance)

    try:
        cfg = load_config(args.config, args.command)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if cfg.threads <= 0:
        cfg.threads = int(os.environ.get("WNILAB_THREADS", "1"))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
