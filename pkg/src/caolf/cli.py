"""Command-line entry points: solve, sweep, verify, oracle."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import ExperimentConfig, emit_csv, run_sweep
from .geometry import Norm, Sense, clip, norm_value
from .model import ConcaveLinear, ConvexQuadratic, FeasibleSet, LipschitzNorm, MetricRef
from .solver import SolveConfig, grid_oracle_caolf, solve_approx, solve_caolf


def _parse_region(payload, dim_hint=None) -> FeasibleSet:
    lower = payload.get("lower")
    if lower is None:
        if dim_hint is None:
            raise ValueError("region needs a 'lower' vector")
        lower = [-np.inf] * dim_hint
    lower = [(-np.inf if v is None else float(v)) for v in lower]
    halfspaces = [(np.asarray(h["a"], dtype=float), float(h["b"]))
                  for h in payload.get("halfspaces", [])]
    return FeasibleSet(lower=np.asarray(lower), halfspaces=tuple(halfspaces))


def _parse_model(payload):
    kind = payload.get("kind", "lipschitz")
    if kind == "lipschitz":
        return LipschitzNorm(bound=float(payload["bound"]),
                             norm=Norm(payload.get("norm", "l2")),
                             mono=payload["mono"])
    if kind == "linear":
        return ConcaveLinear(grad=np.asarray(payload["grad"], dtype=float))
    if kind == "quadratic":
        return ConvexQuadratic(grad=np.asarray(payload["grad"], dtype=float),
                               curvature=float(payload["curvature"]))
    raise ValueError(f"unknown model kind {kind!r}")


_SENSES = {"min": Sense.MINIMIZE, "minimize": Sense.MINIMIZE,
           "max": Sense.MAXIMIZE, "maximize": Sense.MAXIMIZE}


def _parse_metric(payload) -> MetricRef:
    return MetricRef(
        id=str(payload.get("id", "metric")),
        x_ref=np.asarray(payload["x_ref"], dtype=float),
        value=float(payload["value"]),
        sense=_SENSES[str(payload.get("sense", "min")).lower()],
        models=tuple(_parse_model(m) for m in payload["models"]))


def load_instance(path):
    with open(path) as fh:
        payload = json.load(fh)
    metrics = [_parse_metric(m) for m in payload["metrics"]]
    if not metrics:
        raise ValueError("instance has no metrics")
    region = _parse_region(payload.get("region", {}), dim_hint=metrics[0].dim)
    return payload, metrics, region


def _emit(payload, out_path) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args) -> int:
    _, metrics, region = load_instance(args.instance)
    config = SolveConfig(norm=Norm(args.norm), gamma_tolerance=args.tol)
    pure_lipschitz = all(isinstance(m, LipschitzNorm)
                         for ref in metrics for m in ref.models)
    if pure_lipschitz:
        sol = solve_caolf(metrics, region, config)
    else:
        sol = solve_approx(metrics, region, config)
    _emit({
        "gamma": sol.gamma,
        "x": [float(v) for v in sol.x],
        "iterations": sol.diagnostics.iterations,
        "residual": sol.diagnostics.residual,
        "method": sol.diagnostics.method,
    }, args.out)
    return 0


def _cmd_sweep(args) -> int:
    norms = (Norm(args.norm),) if args.norm else (Norm.L1, Norm.L2, Norm.LINF)
    pairs = args.demand_pairs
    if pairs is None:
        default_pairs = ExperimentConfig.__dataclass_fields__["demand_pairs"].default
        pairs = min(default_pairs, args.nodes * (args.nodes - 1))
    cfg = ExperimentConfig(seed=args.seed, norms=norms,
                           node_count=args.nodes, edge_count=args.edges,
                           scenario_count=args.scenarios,
                           demand_pairs=pairs,
                           gamma_tolerance=args.tol)
    rows = run_sweep(cfg)
    if args.out:
        emit_csv(rows, args.out, include_timing=not args.no_timing)
    else:
        from .bench import CSV_HEADER, format_row
        print(CSV_HEADER)
        for r in rows:
            print(format_row(r, include_timing=not args.no_timing))
    return 0


def _cmd_verify(args) -> int:
    payload, metrics, region = load_instance(args.instance)
    if "point" not in payload:
        raise ValueError("verify needs a 'point' entry in the instance file")
    x = np.asarray(payload["point"], dtype=float)
    gamma = float(payload["gamma"]) if "gamma" in payload else None
    if gamma is None:
        raise ValueError("verify needs a 'gamma' entry in the instance file")
    norm = Norm(args.norm)
    report = []
    ok = region.violation(x) <= args.tol
    region_ok = ok
    for ref in metrics:
        model = ref.lipschitz_model(norm)
        needed = model.bound * norm_value(clip(x, ref.geometry(model)), norm) / ref.value
        passed = needed <= gamma + args.tol
        ok = ok and passed
        report.append({"id": ref.id, "needed_gamma": needed, "ok": passed})
    _emit({"ok": bool(ok), "region_ok": bool(region_ok),
           "gamma": gamma, "metrics": report}, args.out)
    return 0 if ok else 1


def _cmd_oracle(args) -> int:
    payload, metrics, region = load_instance(args.instance)
    box = payload.get("box")
    if box is None:
        raise ValueError("oracle needs a 'box' entry ([lo, hi] per dimension)")
    gamma, point = grid_oracle_caolf(metrics, region, resolution=args.resolution,
                                     box=box, norm=Norm(args.norm))
    _emit({"gamma": gamma, "x": [float(v) for v in point],
           "resolution": args.resolution}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caolf",
        description="Tolerance-minimizing scalarization against historical metric references.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_norm_default=True):
        p.add_argument("--norm", choices=[n.value for n in Norm],
                       default="l2" if with_norm_default else None,
                       help="norm the Lipschitz models are stated in")
        p.add_argument("--tol", type=float, default=1e-6, help="tolerance parameter")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p_solve = sub.add_parser("solve", help="solve one instance file")
    p_solve.add_argument("instance", help="instance JSON path")
    common(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run the synthetic budget sweep")
    common(p_sweep, with_norm_default=False)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--nodes", type=int, default=12)
    p_sweep.add_argument("--edges", type=int, default=30)
    p_sweep.add_argument("--scenarios", type=int, default=5)
    p_sweep.add_argument("--demand-pairs", type=int, default=None,
                         help="demand pair count (default: scales with the node count)")
    p_sweep.add_argument("--no-timing", action="store_true",
                         help="write zero wall times for reproducible output")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_verify = sub.add_parser("verify", help="check a point against an instance")
    p_verify.add_argument("instance", help="instance JSON with 'point' and 'gamma'")
    common(p_verify)
    p_verify.set_defaults(func=_cmd_verify)

    p_oracle = sub.add_parser("oracle", help="brute-force small instances on a grid")
    p_oracle.add_argument("instance", help="instance JSON with a 'box' entry")
    p_oracle.add_argument("--resolution", type=int, default=101)
    common(p_oracle)
    p_oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
