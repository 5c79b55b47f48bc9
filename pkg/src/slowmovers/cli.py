"""Command-line front end: ``estimate``, ``simulate``, ``table``, ``version``.

Exit codes: 0 success, 2 invalid input or flags, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .errors import NumericalError, PanelError, ValidationError
from .estimators import PLUGIN, EstimatorConfig, estimate_all, prepare
from .inference import influence_contributions, inference_report
from .io import (
    RunReport,
    atomic_write,
    dumps_json,
    parse_simulation_configs,
    read_panel_csv,
    write_report,
)
from .panel import Mode
from .simulation import SimulationSummary, run_study
from .tables import emit_table
from .tall import estimate_tall

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors raise instead of exiting."""

    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _bandwidth(text: str):
    if text == PLUGIN:
        return PLUGIN
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'plugin' or a positive number, got {text!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"bandwidth must be positive, got {text!r}")
    return value


def _levels(text: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad CI level list {text!r}") from None
    if not levels or any(not 0 < lv < 1 for lv in levels):
        raise argparse.ArgumentTypeError("CI levels must lie in (0, 1)")
    return levels


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slowmovers", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="fit a long-format CSV panel")
    est.add_argument("input", help="CSV with columns id, period, y, x1..xp")
    est.add_argument("--poly-order", type=_positive_int, default=2)
    est.add_argument("--bandwidth", type=_bandwidth, default=PLUGIN)
    est.add_argument("--period", type=_positive_int, default=1)
    est.add_argument("--ci", type=_levels, default=(0.90, 0.95))
    est.add_argument("--mode", choices=("auto", "square", "tall"), default="auto")
    est.add_argument("--p", type=_positive_int, default=None, help="number of regressors (default: x columns)")
    est.add_argument("--format", choices=("json",), default="json")
    est.add_argument("--out", default=None)

    sim = sub.add_parser("simulate", help="run Monte Carlo studies from a config file")
    sim.add_argument("config", help="key = value config file; one study per [section]")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--reps", type=_positive_int, default=None)
    sim.add_argument("--threads", type=_positive_int, default=1)
    sim.add_argument("--format", choices=("json", "csv", "markdown"), default="json")
    sim.add_argument("--out", default=None)

    tab = sub.add_parser("table", help="render a simulate JSON document as a table")
    tab.add_argument("input", help="JSON written by 'simulate'")
    tab.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    tab.add_argument("--out", default=None)

    sub.add_parser("version", help="print the package version")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as err:
        raise ValidationError(f"cannot read {path}: {err.strerror}") from None


def _array_dict(arr, labels) -> dict:
    return {lab: float(v) for lab, v in zip(labels, np.asarray(arr).ravel())}


def run_estimate(args) -> str:
    config = EstimatorConfig(
        poly_order=args.poly_order, bandwidth=args.bandwidth, target_period=args.period, ci_levels=args.ci
    )
    text = _read_text(args.input)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dataset = read_panel_csv(io.StringIO(text), args.p)
        if args.mode != "auto" and Mode(args.mode) is not dataset.mode:
            raise ValidationError(
                f"--mode {args.mode} does not match the panel shape T={dataset.t_periods}, p={dataset.p_regressors}"
            )
        design, stacks = prepare(dataset, config)
        if dataset.mode is Mode.SQUARE:
            est = estimate_all(dataset, config, prepared=(design, stacks))
            zeta = influence_contributions(dataset, design, stacks, est).zeta
        else:
            est = estimate_tall(dataset, config, prepared=(design, stacks))
            zeta = est.zeta
        inf = inference_report(est.theta_hat, zeta, config.ci_levels)

    p = dataset.p_regressors
    coords = [f"x{k}" for k in range(1, p + 1)]
    delta_labels = [f"t{t}_x{k}" for t in range(2, dataset.t_periods + 1) for k in range(1, p + 1)]
    estimates = {
        "theta": _array_dict(est.theta_hat, coords),
        "beta_unified": _array_dict(est.beta_unified, coords),
        "beta_mover": None if est.beta_mover is None else _array_dict(est.beta_mover, coords),
        "delta": _array_dict(est.delta_hat, delta_labels),
        "gamma": [[float(v) for v in row] for row in np.asarray(est.gamma_hat)],
        "bandwidth": float(est.bandwidth_used),
    }
    inference = {
        "std_errors": _array_dict(inf.std_errors, coords),
        "covariance": [[float(v) for v in row] for row in inf.covariance],
        "intervals": {
            f"{lv:g}": {c: [float(lo), float(hi)] for c, (lo, hi) in zip(coords, ci)}
            for lv, ci in inf.intervals.items()
        },
    }
    report = RunReport(
        config={
            "input": args.input,
            "poly_order": config.poly_order,
            "bandwidth": args.bandwidth,
            "target_period": config.target_period,
            "ci_levels": list(config.ci_levels),
            "n": dataset.n,
            "t_periods": dataset.t_periods,
            "p_regressors": p,
        },
        mode=dataset.mode.value,
        estimates=estimates,
        inference=inference,
        counts=dict(est.counts),
        warnings=list(est.warnings) + [str(w.message) for w in caught if str(w.message) not in est.warnings],
    )
    return write_report(report)


def simulation_document(summaries: list[SimulationSummary]) -> dict:
    return {"version": __version__, "studies": [s.to_dict() for s in summaries]}


def run_simulate(args) -> str:
    configs = parse_simulation_configs(_read_text(args.config))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.reps is not None:
        overrides["reps"] = args.reps
    if overrides:
        configs = [replace(c, **overrides) for c in configs]
    summaries = [run_study(c, threads=args.threads) for c in configs]
    if args.format == "json":
        return dumps_json(simulation_document(summaries))
    return emit_table(summaries, args.format)


def load_simulation_document(text: str) -> list[SimulationSummary]:
    try:
        doc = json.loads(text)
        return [SimulationSummary.from_dict(s) for s in doc["studies"]]
    except (ValueError, KeyError, TypeError) as err:
        raise ValidationError(f"not a simulate document: {err}") from None


def run_table(args) -> str:
    return emit_table(load_simulation_document(_read_text(args.input)), args.format)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "version":
            sys.stdout.write(f"slowmovers {__version__}\n")
            return EXIT_OK
        runner = {"estimate": run_estimate, "simulate": run_simulate, "table": run_table}[args.command]
        _emit(runner(args), args.out)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as err:
        print(f"numerical failure ({type(err).__name__}): {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PanelError as err:  # pragma: no cover - every subclass is handled above
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
