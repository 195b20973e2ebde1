"""Command line entry point: ``dlmemory <scenario> [--config PATH] [--out DIR] [--seed N] [--override k=v]``.

``dlmemory sweep --config PATH --param protocol.phi_e --grid 0,pi/8,pi/4`` runs a grid.
Log level comes from ``DLMEMORY_LOG_LEVEL`` (default WARNING).
Exit status: 0 all metrics pass, 1 a metric misses its tolerance, 2 bad config or engine abort.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import yaml

from .config import SCENARIOS, ConfigError, apply_overrides, validate
from .scenarios import ScenarioError, preset, run, sweep

LOG_ENV = "DLMEMORY_LOG_LEVEL"


def _raw_config(path, scenario, seed, overrides) -> dict:
    if path:
        with open(path) as fh:
            try:
                raw = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError([f"YAML syntax error: {exc}"]) from exc
        if not isinstance(raw, dict):
            raise ConfigError(["config must be a mapping"])
        if scenario is not None:
            if raw.get("scenario", scenario) != scenario:
                raise ConfigError([f"config scenario {raw['scenario']!r} does not match subcommand {scenario!r}"])
            raw["scenario"] = scenario
    else:
        raw = preset(scenario)
    if seed is not None:
        raw["seed"] = seed
    return apply_overrides(raw, overrides)


def _grid_values(text: str) -> list:
    vals = []
    for item in text.split(","):
        item = item.strip()
        try:
            vals.append(float(item))
        except ValueError:
            vals.append(item)
    return vals


def _common(p):
    p.add_argument("--config", metavar="PATH", help="YAML scenario config (default: preset)")
    p.add_argument("--out", metavar="DIR", help="output directory for summary.json and CSV files")
    p.add_argument("--seed", type=int, help="random seed for randomized checks")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config entry, e.g. protocol.phi_e=0.5 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlmemory", description="Double-lambda quantum memory simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        _common(sub.add_parser(name, help=f"run the {name} scenario"))
    sp = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    _common(sp)
    sp.add_argument("--scenario", choices=SCENARIOS, help="scenario preset when no --config is given")
    sp.add_argument("--param", required=True, help="dotted config path, e.g. protocol.phi_e")
    sp.add_argument("--grid", required=True, help="comma-separated values (numbers or unit strings)")
    sp.add_argument("--workers", type=int, default=1)
    return parser


def _print_summary(summary) -> None:
    for m in summary.metrics:
        verdict = "PASS" if m.passed else "FAIL"
        print(f"{summary.scenario:16s} {m.name:26s} {m.value:12.6g} {m.comparator} {m.tolerance:<10.3g} {verdict}")


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            if not args.config and not args.scenario:
                raise ConfigError(["sweep needs --config or --scenario"])
            raw = _raw_config(args.config, args.scenario, args.seed, args.override)
            results = sweep(validate(raw), args.param, _grid_values(args.grid), args.out, args.workers)
            for r in results:
                _print_summary(r)
            return 0 if all(r.passed for r in results) else 1
        raw = _raw_config(args.config, args.command, args.seed, args.override)
        summary = run(validate(raw), args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_summary(summary)
    return 0 if summary.passed else 1


if __name__ == "__main__":
    sys.exit(main())
