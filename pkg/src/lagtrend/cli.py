"""``lagtrend`` command line: ingest, synth, experiment, report.

Diagnostics go to stderr. Results are written to files only. Exit status is
0 on success, 2 for invalid configuration or arguments and 1 for any other
fatal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .experiments import run_cross_sectional, run_walk_forward
from .features import build_gradient_matrix
from .panel import IngestError, PricePanel, build_panel
from .report import emit_report, format_table1, load_report, read_table1
from .sessions import load_calendar
from .synth import generate_from_config, generate_panel, label_agreement, oracle_accuracy, write_synthetic

logger = logging.getLogger("lagtrend")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def _resolve_config(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        return cfg
    if args.seed is None:
        raise ConfigError(["seed: required (pass --seed or a --config file)"])
    return parse_config({"seed": args.seed}, "command line")


def cmd_ingest(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config)
        calendar_spec, coverage = cfg.calendar, cfg.min_coverage
    else:
        calendar_spec, coverage = None, 0.9
    if args.calendar is not None:
        calendar_spec = args.calendar
    if args.min_coverage is not None:
        coverage = args.min_coverage
    calendar = load_calendar(calendar_spec)
    panel, summary = build_panel(args.input, calendar, coverage)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    panel.save(out)
    PricePanel.load(out)  # validate what was written
    info = summary.to_dict()
    logger.info("records read: %d, rejected rows: %d", info["records"], info["rejected_rows"])
    logger.info("removed by cleaning: %s", info["removed_by_cleaning"])
    logger.info("instruments kept: %d, discarded: %s", info["instruments_kept"], info["instruments_discarded"] or "none")
    logger.info("filled cells: %d, panel shape: %s", info["filled_cells"], info["panel_shape"])
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s and %s", out, summary_path)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    synth_cfg = cfg.synth_config()
    if cfg.structure is not None:
        synthetic = generate_panel(
            synth_cfg.n_instruments,
            synth_cfg.n_intervals,
            synth_cfg.hours_per_interval,
            cfg.structure,
            start=dt.date.fromisoformat(synth_cfg.start_date),
        )
    else:
        synthetic = generate_from_config(synth_cfg)
    paths = write_synthetic(synthetic, args.out)
    config_path = Path(args.out) / "config.json"
    config_path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    gradients = build_gradient_matrix(synthetic.panel)
    agreement = label_agreement(gradients, synthetic.directions)
    oracle = oracle_accuracy(gradients, synthetic.structure)
    logger.info("noise level %.6g", synthetic.structure.noise_level)
    logger.info("planted-vs-slope label agreement: min %.4f", min(agreement.values(), default=float("nan")))
    logger.info("oracle predictor accuracy: mean %.4f", sum(oracle.values()) / max(len(oracle), 1))
    logger.info("wrote %s", ", ".join(str(p) for p in [*paths.values(), config_path]))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _resolve_config(args)
    exp = cfg.experiment_config(workers=args.workers)
    if args.include_target:
        exp = dataclasses.replace(exp, include_target=True)
    if args.omit_prefix is not None:
        exp = dataclasses.replace(exp, walk_forward=dataclasses.replace(exp.walk_forward, omit_prefix=args.omit_prefix))
    panel = PricePanel.load(args.panel)
    gradients = build_gradient_matrix(panel)
    logger.info("gradient matrix %d x %d, mode %s, %d workers", *gradients.shape, args.mode, exp.workers)
    started = time.perf_counter()
    if args.mode == "cross_sectional":
        result = run_cross_sectional(gradients, exp)
        if not result.records:
            raise RuntimeError(f"every run failed: {result.failures}")
    else:
        result = run_walk_forward(gradients, exp)
    for failure in result.failures:
        logger.warning("failed unit: %s", failure)
    logger.info("finished in %.1f s", time.perf_counter() - started)
    emit_report(result, args.out)
    _validate_report(args.out, result)
    logger.info("wrote report to %s", args.out)
    return EXIT_OK


def _validate_report(path, result) -> None:
    reloaded = load_report(path)
    if type(reloaded) is not type(result):
        raise RuntimeError(f"{path}: report kind changed on reload")
    if hasattr(result, "records") and len(reloaded.records) != len(result.records):
        raise RuntimeError(f"{path}: runs.csv lost rows")
    if hasattr(result, "accuracy") and reloaded.accuracy.shape != result.accuracy.shape:
        raise RuntimeError(f"{path}: walk-forward heatmap has the wrong shape")


def cmd_report(args) -> int:
    result = load_report(args.report)
    if hasattr(result, "records"):
        table = result.table1()
        if _nan_safe(table) != _nan_safe(read_table1(args.report)):
            raise RuntimeError(f"{args.report}: table1.csv does not match runs.csv")
        print(format_table1(table))
    else:
        print(f"targets: {len(result.targets)}, steps: {result.train_sizes.size}, "
              f"tail window {result.tail_window}: mean accuracy {result.tail_mean:.4f}")
    if args.out is not None:
        emit_report(result, args.out)
        logger.info("re-emitted report to %s", args.out)
    return EXIT_OK


def _nan_safe(table: dict) -> dict:
    return {k: {c: repr(v) for c, v in row.items()} for k, row in table.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagtrend", description="Lagged cross-instrument trend prediction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build an aligned price panel from a tick CSV")
    p.add_argument("input", help="tick CSV with header instrument_id,timestamp,price")
    p.add_argument("--calendar", help="calendar profile file (YAML/JSON); default: built-in NYSE")
    p.add_argument("--config", help="run configuration (calendar and min_coverage are used)")
    p.add_argument("--min-coverage", type=float, help="override the coverage cutoff")
    p.add_argument("--out", required=True, help="output panel file (.npz)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic tick CSV with planted lag structure")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="run the cross-sectional or walk-forward protocol")
    p.add_argument("panel", help="panel file written by 'ingest'")
    p.add_argument("--config")
    p.add_argument("--mode", choices=("cross_sectional", "walk_forward"), default="cross_sectional")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="parallel target/fold units (default: all cores)")
    p.add_argument("--include-target", action="store_true", help="feed the target's own history too")
    p.add_argument("--omit-prefix", type=int, help="walk-forward rows dropped from the start")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="validate and summarise an emitted report directory")
    p.add_argument("report")
    p.add_argument("--out", help="re-emit the report into this directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    if getattr(args, "omit_prefix", None) is not None and args.omit_prefix < 0:
        parser.error("--omit-prefix must be >= 0")
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            logger.error("config: %s", err)
        return EXIT_CONFIG
    except (IngestError, OSError, ValueError, RuntimeError, KeyError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
