"""Command line entry point: ``l1forms <experiment> [options]``.

Exit codes: 0 when every check passes, 1 when a check misses its tolerance,
2 for configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import _jit, harness
from .harness import ConfigError, ExperimentConfig

EXPERIMENTS = ("poincare", "scale", "topdegree", "obstruction", "kernels", "algebra")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    common.add_argument("--n", type=int, help="ambient dimension")
    common.add_argument("--h", type=int, help="form degree")
    common.add_argument("--grid", type=int, dest="N", help="points per axis (even)")
    common.add_argument("--box", type=float, dest="L", help="box side length")
    common.add_argument("--mode", choices=("periodic", "freespace"))
    common.add_argument("--construction", choices=("global", "interior"))
    common.add_argument("--family", choices=harness.FAMILIES)
    common.add_argument("--scales", type=_floats, help="comma separated bump widths")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", default="l1forms_out", help="output directory")
    common.add_argument("--dump-forms", action="store_true", help="write alpha and phi as .gform files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="l1forms", description="Numerical experiments on L1 Poincare inequalities")
    sub = parser.add_subparsers(dest="experiment", required=True)
    p = sub.add_parser("poincare", parents=[common], help="primitive norm ratios over a closed family")
    p.add_argument("--grids", type=_ints, help="grid sizes for the stability sweep")
    p = sub.add_parser("scale", parents=[common], help="dilation invariance of the ratio")
    p.add_argument("--dilations", type=_floats)
    p = sub.add_parser("topdegree", parents=[common], help="log divergence for top-degree forms")
    p.add_argument("--radii", type=_floats)
    sub.add_parser("obstruction", parents=[common], help="vanishing moments, Hoelder chain, parabolic energy")
    p = sub.add_parser("kernels", parents=[common], help="homogeneous kernel lemmas")
    p.add_argument("--radii", type=_floats)
    p.add_argument("--grids", type=_ints)
    p = sub.add_parser("algebra", parents=[common], help="exterior calculus identities")
    p.add_argument("--samples", type=int, default=100)
    return parser


_FIELDS = ("n", "h", "N", "L", "mode", "construction", "family", "scales", "seed", "workers",
           "grids", "dilations", "radii")


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for name in _FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if args.dump_forms:
        data["dump_forms"] = True
    n = data.get("n", 3)
    if "centers" not in data and n != 3:
        data["centers"] = [[0.0] * n]
    if args.experiment == "topdegree":
        data.setdefault("h", n)
        data.setdefault("family", "top-degree-bump")
    return ExperimentConfig.from_dict(data)


def run(args: argparse.Namespace) -> harness.NormReport:
    cfg = make_config(args)
    if args.experiment == "poincare":
        return harness.run_poincare_sweep(cfg, cfg.grids if args.grids else None, out_dir=args.out)
    if args.experiment == "scale":
        return harness.run_scale_invariance(cfg)
    if args.experiment == "topdegree":
        return harness.run_top_degree_divergence(cfg)
    if args.experiment == "obstruction":
        return harness.run_obstruction_check(cfg)
    if args.experiment == "kernels":
        return harness.run_kernel_suite(cfg)
    return harness.run_algebra_suite(cfg, dims=(cfg.n,), samples=args.samples)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.getLogger(__name__).info("backend: %s", _jit.backend())
    try:
        report = run(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report.write(args.out)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.4g} (tolerance {c.tolerance:.4g})")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"report written to {args.out}/report.json")
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
