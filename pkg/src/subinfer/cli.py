"""Command-line front end: run, enumerate, check, extract, graph."""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (OracleError, ReversibilityError, build_kernel_matrix,
                       check_aperiodic, check_connectivity, check_irreducible,
                       check_premises, check_reversible, check_stationary,
                       enumerate_traces, posterior, tv_distance)
from .depgraph import to_dot
from .distributions import DistributionError
from .executor import ExecutionError, execute
from .inference import (ByLabels, InferenceCache, InitializationError,
                        KernelContractError, MetaprogramError, infer_step, initial_trace,
                        metaprogram_to_json, parse_metaprogram, run_chain,
                        select, strategies_of)
from .lang import ParseError, parse, print_program
from .serialize import rational_str, show_value, trace_label, trace_to_json
from .transform import extract_trace

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class InputError(Exception):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(message)


# --------------------------------------------------------------------------
# Helpers

def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError("cannot read %s: %s" % (path, exc.strerror)) from None


def _load_program(path: str):
    return parse(_read(path))


def _load_metaprogram(path: str):
    try:
        obj = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise InputError("invalid JSON in %s: %s" % (path, exc.msg)) from None
    return parse_metaprogram(obj)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _header(cmd: str, config: dict) -> dict:
    return {"tool": "subinfer", "version": __version__, "command": cmd, "config": config}


def _num(x):
    """Exact values as rational strings, floats as floats."""
    return x if isinstance(x, float) else rational_str(x)


# --------------------------------------------------------------------------
# Commands

def _chain_histograms(mp, program, args):
    seeds = np.random.SeedSequence(args.seed).spawn(args.chains)
    samples = []
    for ss in seeds:
        samples.extend(run_chain(mp, program, args.iters, args.burnin, args.thin,
                                 np.random.default_rng(ss)))
    return samples


def _marginals(samples) -> dict:
    out: dict = {}
    for t in samples:
        for s in t.stmts:
            if hasattr(s, "name"):
                out.setdefault(s.name, Counter())[show_value(s.expr.value)] += 1
    n = len(samples)
    return {name: {v: c / n for v, c in sorted(cnt.items())} for name, cnt in sorted(out.items())}


def cmd_run(args) -> dict:
    if args.iters < args.burnin:
        raise InputError("--iters must be at least --burnin")
    program = _load_program(args.program)
    mp = _load_metaprogram(args.metaprogram)
    config = {"program": args.program, "program_source": print_program(program),
              "metaprogram": metaprogram_to_json(mp), "seed": args.seed, "iters": args.iters,
              "burnin": args.burnin, "thin": args.thin, "chains": args.chains, "cap": args.cap}
    samples = _chain_histograms(mp, program, args)
    by_label = Counter(trace_label(t) for t in samples)
    n = len(samples)
    report = _header("run", config)
    report["samples"] = {
        "count": n,
        "traces": [{"trace": k, "count": c, "frequency": c / n} for k, c in sorted(by_label.items())],
    }
    report["marginals"] = _marginals(samples)
    try:
        space = enumerate_traces(program, args.cap)
        post = posterior(space)
    except (OverflowError, ValueError) as exc:
        report["exact"] = {"available": False, "reason": str(exc)}
        return report
    hist = Counter(t.key for t in samples)
    report["exact"] = {
        "available": True,
        "posterior": {trace_label(t): rational_str(p) for t, p in zip(space.traces, post.probs)},
        "tv": tv_distance(hist, space, post) if n else None,
    }
    return report


def cmd_enumerate(args) -> dict:
    program = _load_program(args.program)
    space = enumerate_traces(program, args.cap)
    post = posterior(space)
    report = _header("enumerate", {"program": args.program, "cap": args.cap})
    report["total_density"] = rational_str(sum(space.densities))
    report["traces"] = [{"index": i, "trace": trace_label(t), "density": rational_str(d),
                         "prob": rational_str(p)}
                        for i, (t, d, p) in enumerate(zip(space.traces, space.densities, post.probs))]
    return report


def _tv_table(mp, program, space, post, args) -> list:
    rng = np.random.default_rng(args.seed)
    t = initial_trace(program, rng)
    cache = InferenceCache()
    hist = Counter()
    marks = sorted({m for m in (100, 1000, 10000, 100000) if m < args.iters} | {args.iters})
    out, done = [], 0
    for m in marks:
        while done < m:
            t = infer_step(mp, t, rng, cache)
            hist[t.key] += 1
            done += 1
        out.append({"iters": m, "tv": tv_distance(hist, space, post)})
    return out


def cmd_check(args) -> dict:
    program = _load_program(args.program)
    mp = _load_metaprogram(args.metaprogram)
    space = enumerate_traces(program, args.cap)
    post = posterior(space)
    config = {"program": args.program, "metaprogram": metaprogram_to_json(mp),
              "seed": args.seed, "iters": args.iters, "cap": args.cap}
    report = _header("check", config)
    strategies = strategies_of(mp)
    report["reversible"] = []
    for st in strategies:
        r = check_reversible(st, space)
        report["reversible"].append({"strategy": st.describe(), "reversible": r.reversible,
                                     "witness": [trace_label(space.traces[i]) for i in r.witness]})
    if strategies:
        con = check_connectivity(strategies, space, post)
        report["connectivity"] = con.connected
        report["connectivity_mode"] = con.mode
        report["connectivity_witness"] = (None if con.witness is None else
                                          [trace_label(space.traces[i]) for i in con.witness])
        report["witness_class_aligned"] = con.class_aligned
        report["connectivity_literal_pairwise"] = con.literal_pairwise
    else:
        report["connectivity"] = True
        report["connectivity_mode"] = "black-box"
    report["premises"] = list(check_premises(mp, space, args.cap).problems)
    try:
        K = build_kernel_matrix(mp, space, args.cap)
    except ReversibilityError as exc:
        report["matrix_error"] = str(exc)
        report["stationarity_residual"] = None
        report["irreducible"] = None
        report["aperiodic"] = None
        return report
    report["matrix_exact"] = K.exact
    report["stationarity_residual"] = _num(check_stationary(K, post))
    report["irreducible"] = check_irreducible(K, post)
    report["aperiodic"] = check_aperiodic(K, post)
    report["tv_table"] = _tv_table(mp, program, space, post, args) if args.iters else []
    return report


def cmd_extract(args) -> dict:
    program = _load_program(args.program)
    t = execute(program, args.seed)
    labels = [x for x in args.labels.split(",") if x]
    sub = select(ByLabels(labels), t)
    ext = extract_trace(t, sub)
    report = _header("extract", {"program": args.program, "seed": args.seed, "labels": labels})
    report["subproblem"] = {"selected": sorted(sub.selected), "absorbing": sorted(sub.absorbing),
                            "boundary": sorted(sub.boundary)}
    report["subprogram"] = print_program(ext.program)
    report["origins"] = [list(o) for o in ext.origins]
    report["provenance"] = {str(k): v for k, v in sorted(ext.provenance.items())}
    report["subtrace"] = trace_to_json(ext.trace)
    return report


def cmd_graph(args) -> str:
    program = _load_program(args.program)
    return to_dot(execute(program, args.seed).graph)


# --------------------------------------------------------------------------
# Entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subinfer", description=__doc__)
    ap.add_argument("--version", action="version", version="subinfer " + __version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="write output here instead of stdout")
        p.add_argument("--cap", type=int, default=4096, help="enumeration cap")

    p = sub.add_parser("run", help="run an inference chain")
    p.add_argument("program")
    p.add_argument("metaprogram")
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    common(p)

    p = sub.add_parser("enumerate", help="exact trace space and posterior")
    p.add_argument("program")
    common(p, seed=False)

    p = sub.add_parser("check", help="convergence diagnostics for a metaprogram")
    p.add_argument("program")
    p.add_argument("metaprogram")
    p.add_argument("--iters", type=int, default=10000, help="length of the TV table chain")
    common(p)

    p = sub.add_parser("extract", help="extract a subtrace from a sampled trace")
    p.add_argument("program")
    p.add_argument("--labels", default="", help="comma-separated labels or assume names")
    common(p)

    p = sub.add_parser("graph", help="dependence graph of a sampled trace as DOT")
    p.add_argument("program")
    common(p)
    return ap


_COMMANDS = {"run": cmd_run, "enumerate": cmd_enumerate, "check": cmd_check,
             "extract": cmd_extract, "graph": cmd_graph}


def _error(kind: str, message: str, path=None) -> str:
    err = {"type": kind, "message": message}
    if path is not None:
        err["path"] = path
    return _dump({"tool": "subinfer", "version": __version__, "error": err})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "thin", 1) < 1 or getattr(args, "chains", 1) < 1:
        sys.stdout.write(_error("InputError", "--thin and --chains must be at least 1"))
        return EXIT_INPUT
    try:
        result = _COMMANDS[args.command](args)
    except MetaprogramError as exc:
        sys.stdout.write(_error("MetaprogramError", str(exc), exc.path))
        return EXIT_INPUT
    except (KernelContractError, OracleError) as exc:
        sys.stdout.write(_error(type(exc).__name__, str(exc)))
        return EXIT_INTERNAL
    except (InputError, ParseError, ExecutionError, DistributionError, InitializationError,
            OverflowError, ValueError) as exc:
        sys.stdout.write(_error(type(exc).__name__, str(exc)))
        return EXIT_INPUT
    _emit(result if isinstance(result, str) else _dump(result), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
