"""Command-line entry point: ``onebit-isac run | validate | solve-ilp``.

Exit codes: 0 success, 2 when every result row is infeasible, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from .experiments import ConfigError, emit_results, load_config, output_paths, preflight, run_experiment, with_overrides
from .optim.bnb import DEFAULT_NODE_LIMIT, solve_bnb
from .optim.ilp import load as load_ilp

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onebit-isac", description="1-bit ISAC transceiver design experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV plus JSON sidecar")
    run.add_argument("--spec", required=True, help="JSON experiment spec")
    run.add_argument("--seed", type=int, help="override the spec seed")
    run.add_argument("--out", help="output directory (default: the spec's 'output' field)")
    run.add_argument("--paper-scale", action="store_true", help="128-antenna arrays and 1e6 trials for unset fields")
    run.add_argument("--workers", type=int, default=1, help="processes for running configurations in parallel")

    val = sub.add_parser("validate", help="check a spec and print the resolved document")
    val.add_argument("--spec", required=True)
    val.add_argument("--paper-scale", action="store_true")

    ilp = sub.add_parser("solve-ilp", help="solve a dumped ILP instance with branch-and-bound")
    ilp.add_argument("path")
    ilp.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT)
    return p


def _cmd_run(args) -> int:
    spec = load_config(args.spec, desk=not args.paper_scale)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = args.out
    if overrides:
        spec = with_overrides(spec, **overrides)
    preflight(output_paths(spec)[0].parent)
    table = run_experiment(spec, workers=max(1, args.workers))
    csv_path, json_path = emit_results(table)
    print(f"wrote {csv_path} ({len(table.rows)} rows) and {json_path}")
    return EXIT_INFEASIBLE if table.all_infeasible else EXIT_OK


def _cmd_validate(args) -> int:
    spec = load_config(args.spec, desk=not args.paper_scale)
    print(json.dumps(spec.document, indent=2))
    return EXIT_OK


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


def _cmd_solve_ilp(args) -> int:
    inst = load_ilp(args.path)
    res = solve_bnb(inst, node_limit=args.node_limit)
    out = {
        "status": res.status.value,
        "value": _finite_or_none(res.value),
        "bound": _finite_or_none(res.bound),
        "lambda": _finite_or_none(res.lam),
        "nodes": res.nodes,
        "z": None if res.z is None else np.asarray(res.z).tolist(),
    }
    print(json.dumps(out))
    return EXIT_OK if res.found else EXIT_INFEASIBLE


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    handlers = {"run": _cmd_run, "validate": _cmd_validate, "solve-ilp": _cmd_solve_ilp}
    try:
        return handlers[args.command](args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
