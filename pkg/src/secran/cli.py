"""Command line entry point: ``secran {simulate,sweep,plot,selftest}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import (
    ExperimentSpec,
    cell_seed,
    emit_csv,
    emit_plot,
    init_seed,
    parse_config,
    read_csv,
    run_sweep,
)
from .strategies import parse_strategies, run_strategy
from .system import ConfigError, SystemConfig, draw_realization


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _load_spec(args) -> ExperimentSpec:
    if args.config:
        spec = parse_config(args.config)
    else:
        spec = ExperimentSpec(
            SystemConfig(num_rus=2, num_ues=3, fronthaul_capacity=2.0),
            sweep_values=(0, 5, 10, 15, 20, 25, 30),
        )
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "draws", None) is not None:
        changes["num_draws"] = args.draws
    if args.strategies is not None:
        changes["strategies"] = tuple(parse_strategies(args.strategies))
    return spec.replace(**changes) if changes else spec


def cmd_simulate(args) -> int:
    spec = _load_spec(args)
    value = spec.sweep_values[0]
    config = spec.config_at(value)
    channels = draw_realization(config, cell_seed(spec.master_seed, 0, 0))
    print(f"{spec.sweep_variable} = {value:g}, realization {channels.digest()}")
    lines = []
    for flags in spec.strategies:
        res = run_strategy(flags, config, channels, init_seed=init_seed(spec.master_seed, 0, 0))
        rep = res.report
        print(f"\n[{flags.label}]  iterations={rep.extras['cccp_iterations']} "
              f"converged={rep.extras['converged']}  rank_gap={res.rank_gap:.3e}")
        for k in range(config.num_ues):
            print(f"  UE {k}: secrecy {rep.secrecy_rate[k]:.6f}  f_k {rep.f[k]:.6f}  "
                  f"non-secrecy {rep.nonsecrecy_rate[k]:.6f}")
        print(f"  secrecy sum-rate {rep.secrecy_sum_rate:.6f}, non-secrecy sum-rate {rep.nonsecrecy_sum_rate:.6f}")
        for S, g in rep.fronthaul_usage.items():
            cap = sum(config.fronthaul_capacity[i] for i in S)
            print(f"  fronthaul {S}: {g:.6f} / {cap:.6f}")
        for i, p in enumerate(rep.per_ru_power):
            print(f"  power RU {i}: {p:.6f} / {config.power_limit[i]:.6f}")
        lines.append(f"{flags.label},{rep.secrecy_sum_rate:.6f},{rep.nonsecrecy_sum_rate:.6f}")
    if args.out:
        Path(args.out).write_text("strategy,secrecy_sum_rate,nonsecrecy_sum_rate\n" + "\n".join(lines) + "\n",
                                  encoding="utf-8")
    return 0


def cmd_sweep(args) -> int:
    spec = _load_spec(args)
    out = args.out or spec.output_path or "sweep.csv"
    result = run_sweep(spec, workers=args.workers)
    emit_csv(result.rows, out, result.summary)
    for c in result.summary:
        print(f"{spec.sweep_variable}={c.sweep_value:g}  {c.strategy:24s} "
              f"mean secrecy {c.mean_secrecy:.4f} (+/- {c.stderr_secrecy:.4f}, n={c.n})")
    print(f"wrote {out}")
    return 0


def cmd_plot(args) -> int:
    src = Path(args.csv)
    out = args.out or str(src.with_suffix(".svg"))
    emit_plot(read_csv(src), out, xlabel=args.xlabel)
    print(f"wrote {out}")
    return 0


def cmd_selftest(args) -> int:
    import pytest

    tests = Path(__file__).resolve().parents[2] / "tests"
    target = [str(tests)] if tests.is_dir() else ["--pyargs", "secran"]
    return int(pytest.main(["-q", *target, "-k", args.k or "not acceptance"]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secran", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment file")
    common.add_argument("--seed", type=_seed, help="master seed (overrides the config)")
    common.add_argument("--out", help="output path")
    common.add_argument("--strategies", help="'all' or comma list, e.g. secure-multivariate,secure-p2p")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="one draw at the first sweep value, verbose report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="full Monte Carlo sweep to CSV")
    p.add_argument("--draws", type=_positive, help="draws per sweep value")
    p.add_argument("--workers", type=_positive, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="CSV to SVG line chart")
    p.add_argument("csv")
    p.add_argument("--out")
    p.add_argument("--xlabel", default="sweep value")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("selftest", help="run the property test suites")
    p.add_argument("-k", help="pytest -k expression (default: everything but the acceptance run)")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
