"""Command-line front end.

Subcommands
-----------
solve       run one plain or extrapolated solve, write trace CSV + JSON summary
compare     plain vs extrapolated legs from the same start, maps/time to target
continuity  sweep p = d + eps on a problem with a known reference vector
build       write a problem tensor in the text format
stats       node / adjacency / tensor nonzero counts of a graph

Settings resolve as: command-line flags, then ``--config`` (key=value lines),
then built-in defaults.  The effective values end up in the JSON summary.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .extrapolation import RestartConfig, restarted_solve
from .ingestion import (
    GENERATORS,
    dataset_stats,
    erdos_renyi_graph,
    example_h_eigenvector,
    load_edge_list,
    three_cycle_tensor,
)
from .spectral import (
    STOP_RULES,
    VARIANTS,
    EmptyConeError,
    SolveConfig,
    hilbert_distance,
    initial_vector,
    solve,
)
from .tensor import p_norm, read_tensor, write_tensor

log = logging.getLogger("tenspect")

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_EMPTY_CONE = 4

TRACE_COLUMNS = ["k", "lambda_k", "residual_inf", "step_diff_p", "restart_flag",
                 "cumulative_map_applications", "wall_ns"]

GENERATOR_NAMES = sorted(GENERATORS) + ["erdos-renyi"]
Y_POLICIES = ("first_x0_then_last_extrapolate", "fixed-x0")
DEFAULT_EPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


class ConfigError(ValueError):
    pass


class InputError(OSError):
    """Unreadable or malformed tensor / graph file."""


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _float_list(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).replace(",", " ").split()]


# name -> (default, converter).  ``None`` defaults are filled in per problem.
SETTINGS = {
    "generator": (None, str),
    "n": (10, int),
    "tensor_file": (None, str),
    "graph": (None, str),
    "directed": (False, _bool),
    "degree": (6.0, float),
    "graph_seed": (0, int),
    "p": (None, float),
    "sigma": (0.0, float),
    "variant": ("alg1", str),
    "tol": (1e-10, float),
    "max_iter": (None, int),
    "seed": (0, int),
    "extrapolate": (False, _bool),
    "two_h": (12, int),
    "cycles": (None, int),
    "y_policy": ("first_x0_then_last_extrapolate", str),
    "cone_policy": ("repair", str),
    "stop_on": ("stepdiff", str),
    "figure": (False, _bool),
    "target": (1e-9, float),
    "eps": (list(DEFAULT_EPS), _float_list),
    "trace_out": (None, str),
    "summary_out": (None, str),
    "iterates_out": (None, str),
    "tensor_out": (None, str),
    "deterministic": (False, _bool),
}


def read_config(path) -> dict:
    """Parse a ``key = value`` file.  ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in SETTINGS:
                raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
            try:
                out[key] = SETTINGS[key][1](val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {key}: {exc}") from exc
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults."""
    eff = {k: d for k, (d, _) in SETTINGS.items()}
    if args.config:
        eff.update(read_config(args.config))
    for k in SETTINGS:
        v = getattr(args, k, None)
        if v is not None:
            eff[k] = v
    sources = [k for k in ("generator", "tensor_file", "graph") if eff[k] is not None]
    if len(sources) != 1:
        raise ConfigError("give exactly one of --generator, --tensor-file, --graph")
    if eff["generator"] is not None and eff["generator"] not in GENERATOR_NAMES:
        raise ConfigError(f"unknown generator {eff['generator']!r}")
    if eff["variant"] not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}")
    if eff["stop_on"] not in STOP_RULES:
        raise ConfigError(f"stop-on must be one of {STOP_RULES}")
    if eff["y_policy"] not in Y_POLICIES:
        raise ConfigError(f"y-policy must be one of {Y_POLICIES}")
    if eff["two_h"] < 2 or eff["two_h"] % 2:
        raise ConfigError("two-h must be an even integer >= 2")
    if eff["max_iter"] is None:
        eff["max_iter"] = 30 if eff["figure"] else 10000
    if eff["figure"]:
        eff["stop_on"] = "none"
    return eff


# -- problem loading ------------------------------------------------------------


def _read(fn, path, **kw):
    try:
        return fn(path, **kw)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_problem(eff):
    """Return ``(tensor, description)``; also fills ``eff['p']`` if unset."""
    if eff["generator"] == "erdos-renyi":
        g = erdos_renyi_graph(eff["n"], eff["degree"], seed=eff["graph_seed"])
        t = three_cycle_tensor(g)
        desc = {"generator": "erdos-renyi", "n": eff["n"], "degree": eff["degree"],
                "graph_seed": eff["graph_seed"]}
    elif eff["generator"] is not None:
        t = GENERATORS[eff["generator"]](eff["n"])
        desc = {"generator": eff["generator"], "n": t.dim}
    elif eff["tensor_file"] is not None:
        t = _read(read_tensor, eff["tensor_file"])
        desc = {"tensor_file": eff["tensor_file"]}
    else:
        g = _read(load_edge_list, eff["graph"], directed=eff["directed"])
        t = three_cycle_tensor(g)
        st = dataset_stats(g, t)
        desc = {"graph": eff["graph"], "directed": g.directed, "n": st.n,
                "nnz_adjacency": st.nnz_adjacency}
    desc.update(order=t.order, dim=t.dim, nnz=t.nnz)
    if eff["p"] is None:
        eff["p"] = t.order + 1e-5
    return t, desc


def solve_config(eff, **over) -> SolveConfig:
    kw = dict(p=eff["p"], sigma=eff["sigma"], variant=eff["variant"], tol=eff["tol"],
              max_iter=eff["max_iter"], seed=eff["seed"], stop_on=eff["stop_on"],
              keep_iterates=eff["iterates_out"] is not None)
    kw.update(over)
    return SolveConfig(**kw)


def restart_config(eff, t, cfg, cycles=None) -> RestartConfig:
    kw = dict(h=eff["two_h"] // 2, cycles=cycles or eff["cycles"] or 6,
              cone_policy=eff["cone_policy"])
    if eff["y_policy"] == "fixed-x0":
        kw.update(y_policy="fixed", y=initial_vector(t, cfg))
    return RestartConfig(**kw)


# -- output -----------------------------------------------------------------------


def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return repr(v)


def write_trace(trace, path, deterministic=False):
    """Trace CSV.  ``k`` counts map applications, so a restart row shares its
    ``k`` with the iterate it replaces."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i in range(len(trace)):
            m = trace.map_applications[i]
            w.writerow([m, _num(trace.lambdas[i]), _num(trace.residuals[i]),
                        _num(trace.step_diffs[i]), int(trace.restart_flags[i]), m,
                        0 if deterministic else trace.wall_ns[i]])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def emit_summary(summary, path):
    text = json.dumps(summary, indent=2, default=_json_default, allow_nan=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _leg_summary(lam, x, trace, target, deterministic):
    t_target = trace.time_to_residual(target)
    return {
        "lambda": lam,
        "residual": trace.residuals[-1],
        "iterations": trace.iterations,
        "map_applications": trace.total_map_applications,
        "converged": trace.converged,
        "maps_to_target": trace.maps_to_residual(target),
        "time_to_target_s": None if deterministic else t_target,
        "wall_time_s": None if deterministic else trace.wall_time,
        "restarts": int(sum(trace.restart_flags)),
        "events": trace.events,
        "x": x,
    }


def _ratio(a, b):
    if a is None or b is None or b == 0:
        return None
    return a / b


# -- commands -------------------------------------------------------------------


def cmd_solve(eff) -> int:
    t, desc = load_problem(eff)
    cfg = solve_config(eff)
    if eff["extrapolate"]:
        lam, x, trace = restarted_solve(t, cfg, restart_config(eff, t, cfg))
    else:
        lam, x, trace = solve(t, cfg)
    if eff["trace_out"]:
        write_trace(trace, eff["trace_out"], eff["deterministic"])
    if eff["iterates_out"]:
        np.save(eff["iterates_out"], np.array(trace.iterates))
    if not trace.converged and eff["stop_on"] != "none":
        log.warning("did not converge in %d iterations", eff["max_iter"])
    summary = {"command": "solve", "version": __version__, "problem": desc, "config": eff,
               "seed": trace.seed}
    summary.update(_leg_summary(lam, x, trace, eff["target"], eff["deterministic"]))
    emit_summary(summary, eff["summary_out"])
    return 0


def cmd_compare(eff) -> int:
    t, desc = load_problem(eff)
    # both legs stop on the target residual
    cfg = solve_config(eff, stop_on="residual", tol=eff["target"])
    cycles = eff["cycles"] or math.ceil(eff["max_iter"] / eff["two_h"])
    lam_p, x_p, tr_p = solve(t, cfg)
    lam_e, x_e, tr_e = restarted_solve(t, cfg, restart_config(eff, t, cfg, cycles))
    if eff["trace_out"]:
        stem = Path(eff["trace_out"])
        write_trace(tr_p, stem.with_name(stem.stem + "_plain.csv"), eff["deterministic"])
        write_trace(tr_e, stem.with_name(stem.stem + "_extrapolated.csv"), eff["deterministic"])
    plain = _leg_summary(lam_p, x_p, tr_p, eff["target"], eff["deterministic"])
    extra = _leg_summary(lam_e, x_e, tr_e, eff["target"], eff["deterministic"])
    summary = {
        "command": "compare", "version": __version__, "problem": desc,
        "config": dict(eff, cycles=cycles), "seed": tr_p.seed,
        "plain": plain, "extrapolated": extra,
        "speedup_maps": _ratio(plain["maps_to_target"], extra["maps_to_target"]),
        "speedup_time": _ratio(plain["time_to_target_s"], extra["time_to_target_s"]),
    }
    emit_summary(summary, eff["summary_out"])
    return 0


def cmd_continuity(eff) -> int:
    if eff["generator"] != "example310":
        raise ConfigError("continuity needs a built-in reference vector (--generator example310)")
    t, desc = load_problem(eff)
    ref = example_h_eigenvector()
    rows = []
    for eps in eff["eps"]:
        if not eps > 0:
            raise ConfigError(f"eps values must be positive, got {eps}")
        p = t.order + eps
        lam, x, trace = solve(t, solve_config(eff, p=p, keep_iterates=False))
        rows.append((eps, p, hilbert_distance(x, ref), x, trace))

    eps_arr = np.array([r[0] for r in rows])
    dist = np.array([r[2] for r in rows])
    ok = dist > 0
    slope = intercept = None
    if ok.sum() >= 2:
        slope, intercept = (float(v) for v in np.polyfit(np.log(eps_arr[ok]), np.log(dist[ok]), 1))

    if eff["trace_out"]:
        with open(eff["trace_out"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "p", "hilbert_distance"]
                       + [f"x{i + 1}" for i in range(t.dim)]
                       + ["iterations", "residual_inf", "converged"])
            for eps, p, d, x, trace in rows:
                w.writerow([_num(eps), _num(p), _num(d)] + [_num(float(v)) for v in x]
                           + [trace.iterations, _num(trace.residuals[-1]), int(trace.converged)])
    summary = {
        "command": "continuity", "version": __version__, "problem": desc, "config": eff,
        "reference": ref / p_norm(ref, t.order),
        "eps": eps_arr, "hilbert_distance": dist,
        "slope": slope, "intercept": intercept,
        "converged": all(r[4].converged for r in rows),
    }
    emit_summary(summary, eff["summary_out"])
    return 0


def cmd_build(eff) -> int:
    t, desc = load_problem(eff)
    if not eff["tensor_out"]:
        raise ConfigError("build needs --tensor-out")
    write_tensor(t, eff["tensor_out"])
    emit_summary({"command": "build", "problem": desc}, eff["summary_out"])
    return 0


def cmd_stats(eff) -> int:
    if eff["graph"] is None:
        raise ConfigError("stats needs --graph")
    g = _read(load_edge_list, eff["graph"], directed=eff["directed"])
    st = dataset_stats(g)
    emit_summary({"command": "stats", "graph": eff["graph"], "n": st.n,
                  "nnz_adjacency": st.nnz_adjacency, "nnz_tensor": st.nnz_tensor},
                 eff["summary_out"])
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "compare": cmd_compare,
    "continuity": cmd_continuity,
    "build": cmd_build,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("problem")
    src.add_argument("--generator", help=f"one of {', '.join(GENERATOR_NAMES)}")
    src.add_argument("--n", type=int, help="size for tensorA/B/C and erdos-renyi (default 10)")
    src.add_argument("--tensor-file", help="tensor in the 'd n nnz sym' text format")
    src.add_argument("--graph", help="Matrix Market or plain edge list")
    dirg = src.add_mutually_exclusive_group()
    dirg.add_argument("--directed", dest="directed", action="store_true", default=None)
    dirg.add_argument("--undirected", dest="directed", action="store_false")
    src.add_argument("--degree", type=float, help="expected degree for erdos-renyi (6)")
    src.add_argument("--graph-seed", type=int, help="seed for erdos-renyi (0)")

    it = common.add_argument_group("iteration")
    it.add_argument("--p", type=float, help="l^p exponent (default d + 1e-5)")
    it.add_argument("--sigma", type=float, help="shift (0)")
    it.add_argument("--variant", choices=VARIANTS)
    it.add_argument("--tol", type=float, help="stopping tolerance (1e-10)")
    it.add_argument("--max-iter", type=int, help="iteration cap (10000, 30 with --figure)")
    it.add_argument("--seed", type=int, help="seed of the random positive start (0)")
    it.add_argument("--stop-on", choices=STOP_RULES)
    it.add_argument("--figure", action="store_true", default=None,
                    help="fixed-length run: cap 30 unless --max-iter, no early stop")
    it.add_argument("--target", type=float, help="residual target for compare/summary (1e-9)")

    ex = common.add_argument_group("extrapolation")
    ex.add_argument("--extrapolate", action="store_true", default=None)
    ex.add_argument("--two-h", type=int, help="steps per cycle, even (12)")
    ex.add_argument("--cycles", type=int, help="restart cycles (solve: 6, compare: up to --max-iter)")
    ex.add_argument("--y-policy", choices=Y_POLICIES)
    ex.add_argument("--cone-policy", choices=("repair", "fallback"))

    out = common.add_argument_group("output")
    out.add_argument("--trace-out", help="CSV trace (compare: stem for two files)")
    out.add_argument("--summary-out", help="JSON summary (default: stdout)")
    out.add_argument("--iterates-out", help=".npy dump of every iterate")
    out.add_argument("--tensor-out", help="output path for build")
    out.add_argument("--deterministic", action="store_true", default=None,
                     help="single-threaded, zero the wall_ns column")
    common.add_argument("--eps", type=_float_list, help="continuity grid, e.g. '1e-1,1e-3'")
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="tenspect", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "run a shifted power method",
        "compare": "plain vs extrapolated to a target residual",
        "continuity": "distance to the p = d eigenvector as p -> d",
        "build": "write the problem tensor to a file",
        "stats": "graph and three-cycle tensor sizes",
    }
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        eff = resolve(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    if eff["deterministic"]:
        os.environ["TENSPECT_THREADS"] = "1"
    try:
        with warnings.catch_warnings():
            # solver warnings are already logged
            warnings.simplefilter("ignore", RuntimeWarning)
            return COMMANDS[args.command](eff)
    except EmptyConeError as exc:
        log.error("%s", exc)
        return EXIT_EMPTY_CONE
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
