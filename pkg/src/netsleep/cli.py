"""Command-line interface for the benchmark harness."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import robust as robust_eval
from .experiment import (ExperimentConfig, METRIC_COLUMNS, _coerce,
                         format_metric, prepare, run_experiment, run_sweep,
                         solution_from_json)
from .scaling import ScalingSpec, compute_scaling_factor
from .sndlib import ProblemInstance, parse_sndlib
from .testbed import catalog as make_catalog

__all__ = ["main"]


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        out[key.strip()] = _coerce(ExperimentConfig, key.strip(), raw)
    return out


def _load_config(args) -> ExperimentConfig:
    overrides = _parse_overrides(getattr(args, "set", None))
    if args.config is not None:
        return ExperimentConfig.from_ini(args.config, overrides)
    return ExperimentConfig(**overrides).validated()


def _cmd_ingest(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    raw = parse_sndlib(text, name=args.name or Path(args.input).stem)
    raw.validate()
    instance = ProblemInstance.from_raw(raw, args.catalog, args.demands,
                                        args.seed)
    instance.save(args.out)
    print(json.dumps({"instance": instance.name, "nodes": len(instance.nodes),
                      "links": len(instance.links),
                      "demands": len(instance.demands), "file": args.out}))
    return 0


def _cmd_scale(args) -> int:
    instance = ProblemInstance.load(args.instance)
    cat = make_catalog(instance.catalog_name, mu_a=args.mu_a, mu_b=args.mu_b)
    spec = ScalingSpec(mu_a=args.mu_a, mu_b=args.mu_b,
                       protection=args.protection,
                       robust_budget=args.gamma, r_hat=args.r_hat)
    factor = compute_scaling_factor(instance.topology(cat), cat,
                                    instance.demands, spec)
    if args.write:
        instance.with_scale(factor).save(args.instance)
    print(json.dumps({"scale": factor, "protection": args.protection,
                      "mu_a": args.mu_a, "mu_b": args.mu_b}))
    return 0


def _cmd_run(args, method: str | None = None) -> int:
    config = _load_config(args)
    if method is not None:
        config = replace(config, method=method).validated()
    result = run_experiment(config)
    payload = {k: result.metrics.get(k) for k in METRIC_COLUMNS}
    payload["solution"] = str(result.solution_path)
    payload["metrics"] = str(result.metrics_path)
    print(json.dumps(payload))
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    schemes = args.schemes.split(",") if args.schemes else None
    rows = run_sweep(config, schemes)
    print(",".join(METRIC_COLUMNS))
    for row in rows:
        print(",".join(format_metric(row.get(c, "")) for c in METRIC_COLUMNS))
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args)
    prep = prepare(config)
    solution = solution_from_json(Path(args.solution).read_text(encoding="utf-8"),
                                  prep.topology)
    report = robust_eval.evaluate(solution, prep.demands, prep.scenarios,
                                  prep.catalog, samples=args.samples,
                                  seed=args.seed)
    pct = ""
    if solution.total_energy is not None:
        pct = 100.0 * solution.total_energy / prep.full_active
    print(robust_eval.CSV_HEADER)
    print(robust_eval.csv_row(config.scheme, config.gamma, config.r_hat,
                              pct if pct != "" else float("nan"), report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netsleep",
        description="Energy-aware network management benchmark harness")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("ingest", help="convert an SNDlib file to an instance file")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--catalog", default="eta")
    p.add_argument("--demands", type=int, required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("scale", help="compute the traffic scaling factor")
    p.add_argument("instance")
    p.add_argument("--mu-a", type=float, default=0.5, dest="mu_a")
    p.add_argument("--mu-b", type=float, default=0.85, dest="mu_b")
    p.add_argument("--protection", default="dedicated",
                   choices=("none", "dedicated", "shared"))
    p.add_argument("--gamma", type=int, default=0)
    p.add_argument("--r-hat", type=float, default=0.0, dest="r_hat")
    p.add_argument("--write", action="store_true",
                   help="store the factor back into the instance file")
    p.set_defaults(handler=_cmd_scale)

    for verb, method in (("solve", None), ("stph", "stph"),
                         ("stph-rp", "stph-rp")):
        p = sub.add_parser(verb, help=f"run one experiment ({verb})")
        p.add_argument("config", nargs="?", default=None)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field")
        p.set_defaults(handler=lambda a, m=method: _cmd_run(a, m))

    p = sub.add_parser("sweep", help="run several schemes on one instance")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--schemes", default=None,
                   help="comma-separated subset (default: all)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("evaluate", help="Monte-Carlo robustness of a solution")
    p.add_argument("solution")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(handler=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:   # noqa: BLE001 - single reporting point
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
