"""Command-line runner: generate, analyze, attack, spectral.

Exit codes: 0 success, 2 usage or bad input, 3 generation failure,
4 graph-condition failure.  Failures print one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .anonymity import CRITERIA, DEFAULT_THRESHOLD, convergence_profile, random_starts
from .attacks import (CompromiseScenario, batch_table_csv, gilbert_bound, network_batch_size,
                      random_nodes, simulate_compromise, top_degree_nodes)
from .generators import MODELS, GenerationError, GeneratorConfig, generate
from .graph import (BuildReport, EdgeListError, degree_stats, giant_component, is_connected,
                    load_edge_list, save_edge_list)
from .markov import (MAX_CONDUCTANCE_NODES, GraphConditionError, StationaryError,
                     cheeger_bounds, conductance_exact, lambda2_estimate,
                     lambda2_size_experiment, point_mass, size_spread, stationary,
                     transition_matrix, uniform)

OUT_ENV = "MIXTOPO_OUT"
SCHEMA_VERSION = 1
EXIT_USAGE, EXIT_GENERATION, EXIT_CONDITION = 2, 3, 4

# named sub-streams of the single --seed
STREAM_STARTS, STREAM_SELECTION = 2, 3

log = logging.getLogger("mixtopo")


class UsageError(Exception):
    pass


def _fail(code: int, kind: str, msg: str) -> int:
    print(json.dumps({"error": kind, "code": code, "message": str(msg)}), file=sys.stderr)
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.exit(_fail(EXIT_USAGE, "usage", message))


# ---------------------------------------------------------------------------
# output plumbing

def _out_path(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUT_ENV, ".")) / default_name


def _write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return str(path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _manifest(main: Path, command: str, config: dict, seed, outputs: list, started: float):
    path = main.with_name(main.stem + ".manifest.json")
    outputs = outputs + [str(path)]
    _write(path, _dump({"schema_version": SCHEMA_VERSION, "command": command,
                        "config": config, "seed": seed, "tool_version": __version__,
                        "outputs": outputs,
                        "duration_s": round(time.perf_counter() - started, 6)}))
    return outputs


def _load(args, need_connected: bool = True):
    """Read --graph, optionally reduce to the giant component."""
    rep = BuildReport()
    g = load_edge_list(args.graph, report=rep)
    info = {"graph": str(args.graph), "n_file": g.n, "self_loops_dropped": rep.self_loops,
            "duplicates_dropped": rep.duplicates}
    if getattr(args, "giant_component", False):
        gc_rep = BuildReport()
        g = giant_component(g, gc_rep)
        info["retained_fraction"] = gc_rep.retained_fraction
    elif need_connected and not is_connected(g):
        raise GraphConditionError("graph is disconnected; rerun with --giant-component")
    info["n"] = g.n
    return g, info


def _graph_meta(path) -> dict:
    """Model and params from the graph's generation manifest, when present."""
    p = Path(path)
    m = p.with_name(p.stem + ".manifest.json")
    if m.exists():
        try:
            cfg = json.loads(m.read_text()).get("config", {})
            return {"model": cfg.get("model"),
                    "params": {k: v for k, v in cfg.items() if k not in ("model", "seed", "n")},
                    "seed": cfg.get("seed")}
        except (ValueError, OSError):
            pass
    return {"model": "file", "params": {}, "seed": None}


# ---------------------------------------------------------------------------
# generate

def _config_from_args(args) -> GeneratorConfig:
    base = {}
    if args.config:
        base = asdict(GeneratorConfig.loads(Path(args.config).read_text()))
    flags = {"model": args.model, "n": args.nodes, "seed": args.seed, "p": args.p, "m": args.m,
             "beta": args.beta, "alpha": args.alpha, "mean_degree": args.mean_degree,
             "side": args.side, "radius": args.radius, "q": args.q, "r_exp": args.r_exp,
             "D": args.degree}
    base.update({k: v for k, v in flags.items() if v is not None})
    if "model" not in base:
        raise UsageError("--model is required")
    if base["model"] == "kws" and "side" in base and "n" not in base:
        base["n"] = base["side"] ** 2
    if "n" not in base:
        raise UsageError("--nodes is required")
    if base["model"] == "kws" and "side" not in base:
        side = math.isqrt(base["n"])
        if side * side != base["n"]:
            raise UsageError("kws needs a square --nodes or an explicit --side")
    base.setdefault("seed", 0)
    try:
        return GeneratorConfig(**base)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(args) -> int:
    started = time.perf_counter()
    cfg = _config_from_args(args)
    g = generate(cfg)
    out = _out_path(args.out, f"{cfg.model}.edges")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_edge_list(g, out)
    outputs = [str(out)]
    stats = degree_stats(g)
    config = {k: v for k, v in asdict(cfg).items() if v is not None}
    _manifest(out, "generate", config, cfg.seed, outputs, started)
    print(f"wrote {out}: n={g.n} edges={g.edge_count} mean_degree={stats.mean:.4f} "
          f"max_degree={stats.max}")
    return 0


# ---------------------------------------------------------------------------
# analyze

def cmd_analyze(args) -> int:
    started = time.perf_counter()
    if args.t_max < 1:
        raise UsageError("--t-max must be >= 1")
    g, info = _load(args)
    P = transition_matrix(g, lazy=args.lazy)
    pi = stationary(P)
    if args.start == "uniform":
        q0 = uniform(g.n)
    elif args.start == "node":
        if not 0 <= args.node < g.n:
            raise UsageError(f"--node must lie in [0, {g.n})")
        q0 = point_mass(g.n, args.node)
    else:
        q0 = random_starts(g.n, args.starts, seed=[args.seed, STREAM_STARTS])
    rep = convergence_profile(P, q0, args.t_max, args.criterion, args.threshold, pi=pi)
    rep.meta.update(_graph_meta(args.graph))
    rep.criterion["start"] = args.start
    out = _out_path(args.out, "analyze.json")
    body = rep.to_dict()
    body["graph"] = info
    outputs = [_write(out, _dump(body)), _write(out.with_suffix(".csv"), rep.to_csv())]
    config = {"graph": str(args.graph), "t_max": args.t_max, "criterion": args.criterion,
              "threshold": rep.criterion["threshold"], "lazy": args.lazy, "start": args.start,
              "starts": args.starts, "node": args.node,
              "giant_component": args.giant_component}
    _manifest(out, "analyze", config, args.seed, outputs, started)
    tc = "not reached" if rep.t_converge is None else rep.t_converge
    print(f"max_anonymity_bits={rep.max_anonymity_bits:.4f} t_converge={tc}")
    return 0


# ---------------------------------------------------------------------------
# attack

def _parse_lengths(text: str) -> tuple:
    try:
        vals = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad --length {text!r}") from None
    if not vals or min(vals) < 1:
        raise UsageError("--length values must be >= 1")
    return vals


def cmd_compromise(args) -> int:
    started = time.perf_counter()
    g, info = _load(args, need_connected=False)
    if args.nodes_file:
        sel = "explicit"
        nodes = np.loadtxt(args.nodes_file, dtype=np.int64, ndmin=1, comments="#")
        if nodes.size and (nodes.min() < 0 or nodes.max() >= g.n):
            raise UsageError("node id in --nodes-file out of range")
    else:
        k = args.top_k if args.top_k is not None else args.random_k
        if k is None:
            raise UsageError("one of --top-k, --random-k, --nodes-file is required")
        if not 0 <= k <= g.n:
            raise UsageError(f"k={k} must lie in [0, n={g.n}]")
        if args.top_k is not None:
            sel, nodes = "top-degree", top_degree_nodes(g, k)
        else:
            sel, nodes = "random", random_nodes(g, k, seed=[args.seed, STREAM_SELECTION])
    if args.walks < 1 or args.threads < 1:
        raise UsageError("--walks and --threads must be >= 1")
    scen = CompromiseScenario(nodes, _parse_lengths(args.length), args.walks, args.seed, sel,
                              args.threads)
    try:
        rep = simulate_compromise(g, scen)
    except ValueError as exc:
        raise GraphConditionError(str(exc)) from None
    if not g.directed and g.edge_count and is_connected(g):
        P = transition_matrix(g)
        pi = stationary(P)
        rep.pi_mass = float(pi[scen.compromised].sum())
        rep.gap = lambda2_estimate(P, pi).gap
        rep.gilbert = {t: gilbert_bound(min(rep.pi_mass, 1.0), min(max(rep.gap, 0.0), 1.0), t)
                       for t in scen.walk_lengths}
    out = _out_path(args.out, "compromise.json")
    body = rep.to_dict()
    body["graph"] = info
    outputs = [_write(out, _dump(body))]
    config = {"graph": str(args.graph), "selection": sel, "k": int(scen.compromised.size),
              "lengths": list(scen.walk_lengths), "walks": args.walks, "threads": args.threads,
              "giant_component": args.giant_component}
    _manifest(out, "attack compromise", config, args.seed, outputs, started)
    for t in scen.walk_lengths:
        print(f"length={t} fraction={rep.fractions[t]:.6g} ci95={rep.halfwidths[t]:.3g}")
    return 0


def cmd_batch_size(args) -> int:
    started = time.perf_counter()
    if args.f <= 0:
        raise UsageError("--f must be positive")
    g, info = _load(args, need_connected=False)
    row = network_batch_size(g, args.f)
    row.update(_graph_meta(args.graph))
    out = _out_path(args.out, "batch.json")
    body = {"schema_version": SCHEMA_VERSION, "batch": row, "graph": info}
    outputs = [_write(out, _dump(body)), _write(out.with_suffix(".csv"), batch_table_csv([row]))]
    _manifest(out, "attack batch-size", {"graph": str(args.graph), "f": args.f}, None,
              outputs, started)
    print(f"p_min={row['p_min']:.6g} batch_size={row['batch_size']:.2f}")
    return 0


# ---------------------------------------------------------------------------
# spectral

def cmd_spectral(args) -> int:
    started = time.perf_counter()
    if args.size_sweep:
        if args.graph:
            raise UsageError("--size-sweep works from a --model template, not --graph")
        try:
            sizes = [int(x) for x in args.size_sweep.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad --size-sweep {args.size_sweep!r}") from None
        first = sizes[0] if sizes else None
        args.nodes = args.nodes or first
        template = _config_from_args(args)
        rows = lambda2_size_experiment(template, sizes, args.trials, lazy=args.lazy)
        body = {"schema_version": SCHEMA_VERSION, "template": asdict(template),
                "trials": args.trials, "rows": [r.to_dict() for r in rows],
                "spread": size_spread(rows)}
        out = _out_path(args.out, "spectral.json")
        outputs = [_write(out, _dump(body))]
        _manifest(out, "spectral", body["template"] | {"sizes": sizes, "trials": args.trials},
                  template.seed, outputs, started)
        for r in rows:
            print(f"n={r.n} mean_lambda2={r.mean:.4f} std={r.std:.4f}")
        print(f"spread={body['spread']:.4f}")
        return 0

    if not args.graph:
        raise UsageError("need --graph, or --model with --size-sweep")
    g, info = _load(args)
    if args.conductance and g.n > MAX_CONDUCTANCE_NODES:
        raise UsageError(f"exact conductance limited to n <= {MAX_CONDUCTANCE_NODES}")
    P = transition_matrix(g, lazy=args.lazy)
    pi = stationary(P)
    summ = lambda2_estimate(P, pi, method=args.method, seed=args.seed)
    body = {"schema_version": SCHEMA_VERSION, "graph": info, **summ.to_dict()}
    line = f"lambda2={summ.lambda2:.4f} gap={summ.gap:.4f}"
    if args.conductance:
        phi = conductance_exact(g)
        lo, hi = cheeger_bounds(phi)
        lam = summ.lambda2_signed if summ.lambda2_signed is not None else summ.lambda2
        ok = lo - 1e-9 <= lam <= hi + 1e-9
        body["conductance"] = {"phi": phi, "lower": lo, "upper": hi, "bound_holds": ok}
        line += f" phi={phi:.4f} bound_holds={ok}"
    out = _out_path(args.out, "spectral.json")
    outputs = [_write(out, _dump(body))]
    _manifest(out, "spectral", {"graph": str(args.graph), "lazy": args.lazy,
                                "method": args.method, "conductance": args.conductance},
              args.seed, outputs, started)
    print(line)
    return 0


# ---------------------------------------------------------------------------
# parser

def _model_flags(p):
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--nodes", type=int)
    p.add_argument("--config", help="flat key=value generator config file")
    p.add_argument("--p", type=float, help="ER edge probability")
    p.add_argument("--m", type=int, help="BA links per new node")
    p.add_argument("--beta", type=float, help="SFR power-law exponent")
    p.add_argument("--alpha", type=float, help="SFR log-scale parameter")
    p.add_argument("--mean-degree", type=float, help="SFR target mean degree")
    p.add_argument("--side", type=int, help="KWS lattice side")
    p.add_argument("--radius", type=int, help="KWS local radius")
    p.add_argument("--q", type=int, help="KWS long-range links per node")
    p.add_argument("--r-exp", type=float, help="KWS long-range exponent")
    p.add_argument("--degree", type=int, help="regular graph degree")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mixtopo", description="Mix networks on unstructured topologies.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a topology as an edge list")
    _model_flags(g)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="edge-list path (default $%s/<model>.edges)" % OUT_ENV)
    g.set_defaults(func=cmd_generate, parser=g)

    a = sub.add_parser("analyze", help="entropy and distance trace of the route walk")
    a.add_argument("--graph", required=True)
    a.add_argument("--t-max", type=int, default=100)
    a.add_argument("--criterion", choices=CRITERIA, default="entropy-gap")
    a.add_argument("--threshold", type=float,
                   help=f"default {DEFAULT_THRESHOLD['entropy-gap']} bits or "
                        f"{DEFAULT_THRESHOLD['rpd']} for rpd")
    a.add_argument("--lazy", action="store_true")
    a.add_argument("--giant-component", action="store_true")
    a.add_argument("--start", choices=("random", "uniform", "node"), default="random",
                   help="first-mix distribution: random point masses (mean entropy), "
                        "uniform, or one --node")
    a.add_argument("--starts", type=int, default=50)
    a.add_argument("--node", type=int, default=0)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze, parser=a)

    at = sub.add_parser("attack", help="compromised routes and batch sizes")
    asub = at.add_subparsers(dest="attack", required=True, parser_class=_Parser)
    c = asub.add_parser("compromise")
    c.add_argument("--graph", required=True)
    sel = c.add_mutually_exclusive_group()
    sel.add_argument("--top-k", type=int)
    sel.add_argument("--random-k", type=int)
    sel.add_argument("--nodes-file")
    c.add_argument("--length", default="3", help="route length or comma list, e.g. 3,4,5,6")
    c.add_argument("--walks", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--giant-component", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compromise, parser=c)
    b = asub.add_parser("batch-size")
    b.add_argument("--graph", required=True)
    b.add_argument("--f", type=float, default=5.0, help="percent deviation, 5 means 5%%")
    b.add_argument("--out")
    b.set_defaults(func=cmd_batch_size, parser=b, giant_component=False)

    s = sub.add_parser("spectral", help="second eigenvalue, conductance, size sweep")
    s.add_argument("--graph")
    _model_flags(s)
    s.add_argument("--size-sweep", help="comma list of sizes for a --model template")
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--conductance", action="store_true")
    s.add_argument("--lazy", action="store_true")
    s.add_argument("--method", choices=("auto", "lanczos", "power"), default="auto")
    s.add_argument("--giant-component", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectral, parser=s)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        args.parser.print_usage(sys.stderr)
        return _fail(EXIT_USAGE, "usage", exc)
    except (EdgeListError, OSError) as exc:
        return _fail(EXIT_USAGE, "input", exc)
    except GenerationError as exc:
        return _fail(EXIT_GENERATION, "generation", exc)
    except (GraphConditionError, StationaryError) as exc:
        return _fail(EXIT_CONDITION, "graph-condition", exc)
    except ValueError as exc:
        return _fail(EXIT_USAGE, "usage", exc)


if __name__ == "__main__":
    sys.exit(main())
