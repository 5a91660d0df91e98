"""Command-line entry point: ``netmis probs|estimate|pba|simulate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np
import yaml

from .design import Design
from .estimators import ObservedData, effect
from .exposure import SchoolMapping, ThresholdMapping
from .graph import load_cluster_file, load_edge_list, max_index_in_edge_list
from .pba import KERNELS, ThetaDist, make_kernel, run_pba, summarize
from .prob import check_positivity, estimate_tables
from .sim import SCENARIOS, ScenarioSpec, run_scenario


class UsageError(Exception):
    pass


# defaults applied after merging config file and flags
DEFAULTS = {
    "network": [],
    "mapping": "threshold",
    "design": "bernoulli:0.5",
    "R": None,
    "seed": 0,
    "threads": 1,
    "one_based": False,
    "contrast": [],
    "estimator": ["HT", "Hajek"],
    "variance": True,
    "exact_bias": None,
    "iters": 1000,
    "kernel": None,
    "theta": {},
    "k": None,
    "random_error": False,
    "percentiles": [2.5, 97.5],
    "scenario": "misreport",
    "reps": 1000,
    "n": None,
    "clusters_spec": None,
}


COMMAND_DEFAULTS = {
    "pba": {"estimator": ["Hajek"]},
    # simulate falls back to the ScenarioSpec defaults
    "simulate": {"estimator": None, "variance": None},
}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    """Write atomically: a temp file in the target directory, then rename."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    data = buf.getvalue().encode("utf-8")
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".netmis-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_unit_column(path, n=None, column=None, dtype=float):
    """Read ``unit,value`` CSV (header required). Returns a length-n vector."""
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if row.strip() and not row.startswith("#"))
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: expected a header row 'unit,<value>'")
        col = 1 if column is None else header.index(column)
        units, vals = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                units.append(int(row[0]))
                vals.append(dtype(row[col]))
            except (ValueError, IndexError):
                raise ValueError(f"{path}: malformed row {lineno}: {row!r}") from None
    units = np.asarray(units)
    size = (units.max() + 1 if units.size else 0) if n is None else n
    if units.size and (units.min() < 0 or units.max() >= size):
        raise ValueError(f"{path}: unit id out of range [0, {size})")
    if np.unique(units).size != units.size:
        raise ValueError(f"{path}: duplicate unit ids")
    if units.size != size:
        raise ValueError(f"{path}: {units.size} rows for {size} units")
    out = np.empty(size, dtype=np.asarray(vals).dtype if vals else float)
    out[units] = vals
    return out


def parse_design(spec, n, clusters=None) -> Design:
    if isinstance(spec, dict):
        d = spec
    else:
        s = str(spec).strip()
        if s.startswith("{"):
            d = json.loads(s)
        else:
            kind, _, arg = s.partition(":")
            vals = [v for v in arg.split(",") if v]
            keys = {"bernoulli": ["p"], "cluster_bernoulli": ["p"], "complete": ["m"],
                    "cluster": ["U"], "two_stage": ["cluster_frac", "within_frac"]}.get(kind)
            if keys is None:
                raise UsageError(f"unknown design kind {kind!r}")
            if len(vals) != len(keys):
                raise UsageError(f"design {kind} takes {len(keys)} parameter(s): {','.join(keys)}")
            d = {"kind": kind, **{k: float(v) for k, v in zip(keys, vals)}}
    if d.get("kind") in ("cluster", "cluster_bernoulli", "two_stage") and clusters is None:
        raise UsageError(f"design {d['kind']} needs --clusters")
    return Design.from_dict(d, n=n, clusters=clusters)


def parse_theta(value) -> dict:
    """``name=kind:args`` strings or a mapping to ThetaDist specs."""
    if isinstance(value, dict):
        return {k: ThetaDist.parse(v) for k, v in value.items()}
    out = {}
    for item in value:
        name, _, dist = item.partition("=")
        kind, _, arg = dist.partition(":")
        vals = [float(v) for v in arg.split(",") if v]
        if kind == "uniform":
            out[name] = ThetaDist.uniform(*vals)
        elif kind == "beta":
            out[name] = ThetaDist.beta(*vals)
        elif kind in ("point_mass", "point"):
            out[name] = ThetaDist.point_mass(*vals)
        else:
            raise UsageError(f"unknown theta distribution in {item!r}")
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="netmis", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        # every flag defaults to None so a config file can fill it in
        sp.add_argument("--config", help="YAML file with option values; flags override it")
        sp.add_argument("--network", action="append", help="edge list path (repeatable)")
        sp.add_argument("--one-based", dest="one_based", action="store_const", const=True,
                        help="edge list ids start at 1")
        sp.add_argument("--n", type=int, help="unit count (default: inferred from inputs)")
        sp.add_argument("--mapping", choices=["threshold", "school"], help="exposure mapping (default threshold)")
        sp.add_argument("--thresholds", help="CSV unit,nu for the threshold mapping (default nu=0)")
        sp.add_argument("--school", help="CSV unit,s for the school mapping")
        sp.add_argument("--clusters", help="cluster file 'unit cluster [x y]'")
        sp.add_argument("--design", help="e.g. bernoulli:0.5, complete:10, cluster:3, "
                                         "cluster_bernoulli:0.5, two_stage:0.5,0.5 or JSON (default bernoulli:0.5)")
        sp.add_argument("--R", type=int, help="Monte Carlo replicates for probabilities")
        sp.add_argument("--seed", type=int, help="random seed (default 0)")
        sp.add_argument("--threads", type=int, help="worker threads (default 1)")
        sp.add_argument("--out", help="output CSV path")

    sp = sub.add_parser("probs", help="exposure probability table")
    common(sp)
    sp.add_argument("--pairwise-out", dest="pairwise_out", help="also write nonzero same-level pairwise entries")

    sp = sub.add_parser("estimate", help="HT / Hajek / NMR estimates with conservative SEs")
    common(sp)
    sp.add_argument("--outcomes", help="CSV unit,y")
    sp.add_argument("--assignment", help="CSV unit,z")
    sp.add_argument("--contrast", action="append", help="level pair 'c11:c00' (repeatable; default each level vs the last)")
    sp.add_argument("--estimator", action="append", choices=["HT", "Hajek"])
    sp.add_argument("--no-variance", dest="variance", action="store_const", const=False)

    sp = sub.add_parser("pba", help="probabilistic bias analysis")
    common(sp)
    sp.add_argument("--outcomes", help="CSV unit,y")
    sp.add_argument("--assignment", help="CSV unit,z")
    sp.add_argument("--contrast", action="append", help="level pair 'c11:c00' (first one is used)")
    sp.add_argument("--estimator", action="append", choices=["HT", "Hajek"])
    sp.add_argument("--kernel", help=f"deviation kernel: {', '.join(KERNELS)}")
    sp.add_argument("--theta", action="append", help="name=uniform:lo,hi | beta:a,b | point_mass:v")
    sp.add_argument("--k", type=int, help="degree cap for censor_fill")
    sp.add_argument("--blocks", help="CSV unit,block for contamination")
    sp.add_argument("--covariate", help="CSV unit,value for the contamination covariate form")
    sp.add_argument("--iters", type=int, help="iterations (default 1000)")
    sp.add_argument("--random-error", dest="random_error", action="store_const", const=True)
    sp.add_argument("--percentiles", type=float, nargs="+")
    sp.add_argument("--summary-out", dest="summary_out", help="summary CSV path")

    sp = sub.add_parser("simulate", help="run a simulation scenario")
    sp.add_argument("--config", help="YAML file with option values; flags override it")
    sp.add_argument("--scenario", choices=SCENARIOS)
    sp.add_argument("--grid", type=float, nargs="+")
    sp.add_argument("--reps", type=int, help="replications per grid point (default 1000)")
    sp.add_argument("--n", type=int, help="units for PA-based scenarios (default 3000)")
    sp.add_argument("--R", type=int, help="Monte Carlo replicates (default 10000)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--estimator", action="append", choices=["HT", "Hajek"])
    sp.add_argument("--variance", action="store_const", const=True, help="also report mean SE")
    sp.add_argument("--exact-bias", dest="exact_bias", action="store_const", const=True)
    sp.add_argument("--clusters-spec", dest="clusters_spec", help='JSON, e.g. {"V":500,"size":20}')
    sp.add_argument("--pa-zero-appeal", dest="pa_zero_appeal", type=float,
                    help="attachment weight is degree + this (default 0)")
    sp.add_argument("--out", help="output CSV path")
    return p


def merge_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: top level must be a mapping")
        cfg = {k.replace("-", "_"): v for k, v in loaded.items()}
    merged = dict(DEFAULTS)
    merged.update(COMMAND_DEFAULTS.get(args.command, {}))
    merged.update(cfg)
    for k, v in vars(args).items():
        if v is not None:
            merged[k] = v
    if isinstance(merged.get("network"), str):
        merged["network"] = [merged["network"]]
    return merged


def _require(cfg, key, flag=None):
    if not cfg.get(key):
        raise UsageError(f"missing required input '{key}' (--{flag or key})")
    path = cfg[key]
    for p in (path if isinstance(path, list) else [path]):
        if not os.path.exists(p):
            raise UsageError(f"{key}: file not found: {p}")
    return path


def _infer_n(cfg):
    if cfg.get("n") is not None:
        return int(cfg["n"])
    for key in ("thresholds", "school", "outcomes", "assignment"):
        if cfg.get(key):
            return int(read_unit_column(cfg[key]).size)
    if cfg.get("clusters"):
        return load_cluster_file(cfg["clusters"]).n
    return max(max_index_in_edge_list(p, cfg["one_based"]) for p in cfg["network"]) + 1


def load_inputs(cfg):
    paths = _require(cfg, "network")
    n = _infer_n(cfg)
    nets = [load_edge_list(p, n, one_based=cfg["one_based"]) for p in paths]
    clusters = None
    if cfg.get("clusters"):
        clusters = load_cluster_file(_require(cfg, "clusters"), n=n).cluster_of
    if cfg["mapping"] == "threshold":
        nu = read_unit_column(cfg["thresholds"], n) if cfg.get("thresholds") else np.zeros(n)
        m = ThresholdMapping(nu)
    else:
        m = SchoolMapping(read_unit_column(_require(cfg, "school"), n, dtype=int))
    d = parse_design(cfg["design"], n, clusters)
    return n, nets, m, d


def _data(cfg, n):
    y = read_unit_column(_require(cfg, "outcomes"), n)
    z = read_unit_column(_require(cfg, "assignment"), n, dtype=int)
    return ObservedData(z, y)


def _contrasts(cfg, m):
    pairs = cfg.get("contrast") or []
    if not pairs:
        ref = m.levels[-1]
        return [(lv, ref) for lv in m.levels[:-1]]
    out = []
    for c in pairs:
        if isinstance(c, (list, tuple)):
            l, k = c
        else:
            l, _, k = str(c).partition(":")
        m.level_index(l)
        m.level_index(k)
        out.append((l, k))
    return out


def cmd_probs(cfg, log):
    n, nets, m, d = load_inputs(cfg)
    R = int(cfg["R"] or 10_000)
    t = estimate_tables(nets, m, d, R=R, seed=cfg["seed"], threads=cfg["threads"])
    rep = check_positivity(t)
    if not rep.ok:
        log(f"warning: {len(rep.violations)} (unit, level) pairs never observed: {rep.by_level()}")
    out = cfg.get("out") or "probs.csv"
    write_csv(out, ["unit", "level", "p", "count"],
              ((i, lv, p, int(t.counts[t.level_index(lv), i])) for i, lv, p in t.to_rows()))
    if cfg.get("pairwise_out"):
        rows = []
        for k, lv in enumerate(t.levels):
            P = t.pairwise(k)
            ii, jj = np.nonzero(np.triu(P))
            rows += [(int(i), int(j), lv, float(P[i, j])) for i, j in zip(ii, jj)]
            t.drop_pairwise()
        write_csv(cfg["pairwise_out"], ["i", "j", "level", "p"], rows)
    return 0


def cmd_estimate(cfg, log):
    n, nets, m, d = load_inputs(cfg)
    data = _data(cfg, n)
    R = int(cfg["R"] or 10_000)
    contrasts = _contrasts(cfg, m)
    collections = [([i], [nets[i]]) for i in range(len(nets))]
    if len(nets) > 1:
        collections.append((list(range(len(nets))), nets))
    rows = []
    for idx, coll in collections:
        label = "+".join(str(i) for i in idx)
        t = estimate_tables(coll, m, d, R=R, seed=cfg["seed"], threads=cfg["threads"])
        for l, k in contrasts:
            for e in cfg["estimator"]:
                res = effect(data, t, l, k, e, variance=cfg["variance"])
                rows.append((label, res.estimator, l, k, res.point, res.se, res.n_effective, res.status))
        log(f"estimate: networks {label} done")
    write_csv(cfg.get("out") or "estimates.csv",
              ["networks", "estimator", "level_a", "level_b", "point", "se", "n_effective", "status"], rows)
    return 0


def cmd_pba(cfg, log):
    n, nets, m, d = load_inputs(cfg)
    if len(nets) != 1:
        raise UsageError("pba takes exactly one --network (the specified network)")
    data = _data(cfg, n)
    name = cfg.get("kernel")
    if name not in KERNELS:
        raise UsageError(f"unknown kernel {name!r}; valid kernels: {', '.join(KERNELS)}")
    kw = {}
    if name == "censor_fill":
        if cfg.get("k") is None:
            raise UsageError("censor_fill needs --k")
        kw["k"] = cfg["k"]
    if name == "contamination":
        kw["blocks"] = read_unit_column(_require(cfg, "blocks"), n, dtype=str)
        if cfg.get("covariate"):
            kw["covariate"] = read_unit_column(cfg["covariate"], n, dtype=str)
    kernel = make_kernel(name, **kw)
    theta = parse_theta(cfg.get("theta") or {})
    estimators = cfg["estimator"] if isinstance(cfg["estimator"], list) else [cfg["estimator"]]
    l, k = _contrasts(cfg, m)[0]
    R = int(cfg["R"] or 1000)
    res = run_pba(data, nets[0], kernel, theta, m, d, (l, k), iters=int(cfg["iters"]), R=R,
                  estimator=estimators[-1], random_error=bool(cfg["random_error"]),
                  seed=cfg["seed"], threads=cfg["threads"])
    log(f"pba: {res.estimates.size} iterations kept, {res.degenerate_count} degenerate")
    names = list(kernel.params)
    header = ["iteration", *names, "estimate"] + (["redraw"] if res.with_random_error is not None else [])
    rows = []
    for j, it in enumerate(res.iterations):
        r = [int(it), *(res.thetas[p][j] for p in names), res.estimates[j]]
        if res.with_random_error is not None:
            r.append(res.with_random_error[j])
        rows.append(r)
    out = cfg.get("out") or "pba.csv"
    summary_rows = [("baseline", res.baseline, None, None)]
    pct = [float(x) for x in cfg["percentiles"]]
    if res.estimates.size:
        s = summarize(res, pct)
        summary_rows.append(("systematic", s["mean"], s[f"p{pct[0]:g}"], s[f"p{pct[-1]:g}"]))
        if res.with_random_error is not None:
            s = summarize(res.with_random_error, pct)
            summary_rows.append(("with_random_error", s["mean"], s[f"p{pct[0]:g}"], s[f"p{pct[-1]:g}"]))
    else:
        log("error: every PBA iteration was degenerate")
    write_csv(out, header, rows)
    if cfg.get("summary_out"):
        write_csv(cfg["summary_out"], ["row", "mean", "lower", "upper"],
                  summary_rows + [("degenerate", res.degenerate_count, None, None)])
    return 0 if res.estimates.size else 1


def cmd_simulate(cfg, log):
    kw = {k: cfg[k] for k in ("scenario", "reps", "seed", "threads") if cfg.get(k) is not None}
    for key in ("n", "R"):
        if cfg.get(key) is not None:
            kw[key] = int(cfg[key])
    if cfg.get("grid") is not None:
        kw["grid"] = list(cfg["grid"])
        if cfg["scenario"] in ("censor", "nmr_tradeoff"):
            kw["grid"] = [int(g) for g in kw["grid"]]
    if cfg.get("estimator"):
        est = cfg["estimator"]
        kw["estimators"] = tuple(est if isinstance(est, list) else [est])
    for key in ("variance", "exact_bias"):
        if cfg.get(key) is not None:
            kw[key] = bool(cfg[key])
    if cfg.get("clusters_spec"):
        c = cfg["clusters_spec"]
        kw["clusters"] = json.loads(c) if isinstance(c, str) else dict(c)
    for key in ("estimands", "pool_size", "pool_eta", "truth_only", "p", "pa_zero_appeal"):
        if cfg.get(key) is not None:
            kw[key] = cfg[key]
    spec = ScenarioSpec(progress=True, **kw)
    rows = run_scenario(spec)
    header = ["scenario", "point", "M", "contains_truth", "estimator", "estimand", "abs_bias", "sd",
              "rmse", "mean_se", "n_valid", "exact_bias"]
    write_csv(cfg.get("out") or "simulation.csv", header,
              ([getattr(r, h) for h in header] for r in rows))
    return 0


COMMANDS = {"probs": cmd_probs, "estimate": cmd_estimate, "pba": cmd_pba, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    log = lambda msg: print(msg, file=sys.stderr, flush=True)  # noqa: E731
    try:
        cfg = merge_config(args)
        return COMMANDS[args.command](cfg, log)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, OSError, KeyError) as exc:
        log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
