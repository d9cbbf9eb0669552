"""Command-line harness: ``run``, ``compare`` and ``sweep`` subcommands.

Every :class:`~qstack.harness.SimConfig` field can be set from a config file
of ``key = value`` lines ('#' starts a comment) and overridden by a CLI flag
of the same name. Precedence: defaults < config file < flags.

Exit codes: 0 success, 1 config error, 2 run divergence (``run`` only),
3 I/O error.
"""

from __future__ import annotations

import argparse
import ast
import dataclasses
import sys

from .harness import (
    CONTROLLERS,
    ConfigError,
    SimConfig,
    compare_schemes,
    cumulative_cost,
    run_closed_loop,
    sweep_param,
    time_to_threshold,
    validate_config,
    write_report,
    write_sweep,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


def _parse_scalar(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _parse_value(name: str, text: str):
    """Coerce a config-file or CLI string into the field's natural type."""
    text = text.strip()
    if text.lower() == "none":
        return None
    if "," in text:
        return tuple(_parse_scalar(part.strip()) for part in text.split(",") if part.strip())
    value = _parse_scalar(text)
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return value


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines into a dict of coerced field values."""
    fields = {f.name for f in dataclasses.fields(SimConfig)}
    out = {}
    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, text = (part.strip() for part in line.split("=", 1))
            if key not in fields:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _parse_value(key, text)
    return out


def _add_config_flags(parser: argparse.ArgumentParser, skip=()) -> None:
    parser.add_argument("--config", default=None, help="key = value config file")
    for f in dataclasses.fields(SimConfig):
        if f.name in skip:
            continue
        parser.add_argument(f"--{f.name}", default=None, metavar="V",
                            help=f"override SimConfig.{f.name}")


def _build_config(args: argparse.Namespace) -> SimConfig:
    overrides = {}
    if args.config is not None:
        overrides.update(parse_config_file(args.config))
    for f in dataclasses.fields(SimConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            overrides[f.name] = _parse_value(f.name, raw) if isinstance(raw, str) else raw
    try:
        cfg = SimConfig(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    validate_config(cfg)
    return cfg


def _require_int(name: str, text: str) -> int:
    value = _parse_value(name, text)
    if not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {text!r}")
    return value


def _cmd_run(args) -> int:
    seed = _require_int("seed", args.seed)
    cfg = _build_config(args)
    trace = run_closed_loop(cfg, seed=seed)
    write_trace(trace, args.out)
    ttt = time_to_threshold(trace)
    print(f"run: controller={cfg.controller} seed={trace.seed} "
          f"steps={trace.steps} status={trace.status}")
    print(f"run: config_hash={trace.config_hash}")
    print(f"run: time_to_threshold_s={ttt} cumulative_cost={cumulative_cost(trace)}")
    print(f"run: trace written to {args.out}")
    if trace.status != "ok":
        print(f"run: diverged at step {trace.failed_step}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _build_config(args)
    controllers = [c.strip() for c in args.controllers.split(",") if c.strip()]
    report = compare_schemes(cfg, controllers)
    write_report(report, args.out)
    for ctrl in controllers:
        mt, mc = report.medians[ctrl]
        print(f"compare: {ctrl}: median_time_to_threshold_s={mt} "
              f"median_cumulative_cost={mc}")
    print(f"compare: report written to {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    values = _parse_value(args.param, args.values)
    if not isinstance(values, tuple):
        values = (values,)
    result = sweep_param(cfg, args.param, values)
    write_sweep(result, args.out)
    for value, mt, mc in result.medians:
        print(f"sweep: {args.param}={value!r}: median_time_to_threshold_s={mt} "
              f"median_cumulative_cost={mc}")
    print(f"sweep: results written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qstack",
        description="Closed-loop benchmarking of stacked Q-learning controllers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single closed-loop run, writes a trace CSV")
    _add_config_flags(p_run, skip=("seed", "controller"))
    p_run.add_argument("--seed", required=True, help="RNG seed for this run")
    p_run.add_argument("--controller", required=True,
                       help=f"one of {CONTROLLERS}")
    p_run.add_argument("--out", required=True, help="trace CSV output path")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare controllers across seeds")
    _add_config_flags(p_cmp)
    p_cmp.add_argument("--controllers", required=True,
                       help=f"comma list from {CONTROLLERS}")
    p_cmp.add_argument("--out", required=True, help="report CSV output path")
    p_cmp.set_defaults(func=_cmd_compare)

    p_swp = sub.add_parser("sweep", help="grid over one SimConfig field")
    _add_config_flags(p_swp)
    p_swp.add_argument("--param", required=True, help="SimConfig field to sweep")
    p_swp.add_argument("--values", required=True, help="comma list of values")
    p_swp.add_argument("--out", required=True, help="sweep CSV output path")
    p_swp.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
