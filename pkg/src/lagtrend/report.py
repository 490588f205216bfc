"""Write and re-read experiment results as CSV metric files plus a manifest.

File names and column orders are fixed:

cross-sectional run
    ``runs.csv``          one row per (target, fold), columns of :class:`RunRecord`
    ``targets.csv``       per-target mean accuracy for every table column
    ``table1.csv``        rows accuracy / variance / p_value / min_diff
    ``significance.csv``  full one-sided Welch result per baseline
    ``boxstats.csv``      notched-box statistics per column
walk-forward run
    ``wf_trace.csv``      step, train_size, mean_accuracy
    ``wf_heatmap.csv``    target x step accuracy matrix
    ``wf_summary.csv``    tail-window mean per target and overall (``ALL``)
both
    ``manifest.json``     config echo, seeds, package version, timestamp
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import COLUMNS, RECORD_FIELDS, RunRecord, RunReport, WalkForwardTrace

MANIFEST = "manifest.json"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _manifest(kind: str, config: dict, files: list[Path], extra: dict) -> dict:
    return {
        "kind": kind,
        "version": __version__,
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": config.get("seed"),
        "config": config,
        "files": sorted(p.name for p in files),
        **extra,
    }


def emit_report(result: RunReport | WalkForwardTrace, destination: str | Path) -> list[Path]:
    out = Path(destination)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    if isinstance(result, RunReport):
        return _emit_cross_sectional(result, out)
    if isinstance(result, WalkForwardTrace):
        return _emit_walk_forward(result, out)
    raise TypeError(f"cannot emit {type(result).__name__}")


def _emit_cross_sectional(report: RunReport, out: Path) -> list[Path]:
    files = [
        _write_csv(out / "runs.csv", RECORD_FIELDS, ([getattr(r, f) for f in RECORD_FIELDS] for r in report.records))
    ]
    targets = report.targets
    means = {name: report.target_means(name) for name in COLUMNS}
    files.append(
        _write_csv(
            out / "targets.csv",
            ("target",) + COLUMNS,
            ([t] + [means[c][i] for c in COLUMNS] for i, t in enumerate(targets)),
        )
    )
    table = report.table1()
    files.append(
        _write_csv(
            out / "table1.csv",
            ("metric",) + COLUMNS,
            ([metric] + [table[metric].get(c, "") for c in COLUMNS] for metric in table),
        )
    )
    sig = report.significance()
    sig_fields = ("p_value", "mean_difference", "ci_lower_bound", "test_statistic", "degrees_of_freedom", "degenerate")
    files.append(
        _write_csv(
            out / "significance.csv",
            ("baseline",) + sig_fields,
            ([name] + [getattr(res, f) for f in sig_fields] for name, res in sig.items()),
        )
    )
    boxes = report.box_stats()
    files.append(
        _write_csv(
            out / "boxstats.csv",
            ("series", "n", "median", "q1", "q3", "notch", "notch_low", "notch_high", "whisker_low", "whisker_high", "outliers"),
            (
                [name, b.n, b.median, b.q1, b.q3, b.notch, b.notch_low, b.notch_high, b.whisker_low, b.whisker_high,
                 ";".join(repr(v) for v in b.outliers)]
                for name, b in boxes.items()
            ),
        )
    )
    extra = {
        "failures": report.failures,
        "targets": targets,
        "pooling": "significance tests and variances use per-target mean accuracies across folds",
        "column_classes": {"class 1": "all DOWN (class index 0)", "class 2": "all UP (class index 1)"},
    }
    manifest = _manifest("cross_sectional", report.config, files, extra)
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return files + [path]


def _emit_walk_forward(trace: WalkForwardTrace, out: Path) -> list[Path]:
    mean = trace.mean_trace
    files = [
        _write_csv(
            out / "wf_trace.csv",
            ("step", "train_size", "mean_accuracy"),
            ([i + 1, int(n), mean[i]] for i, n in enumerate(trace.train_sizes)),
        ),
        _write_csv(
            out / "wf_heatmap.csv",
            ("target",) + tuple(f"s{int(n)}" for n in trace.train_sizes),
            ([t] + list(trace.accuracy[i]) for i, t in enumerate(trace.targets)),
        ),
        _write_csv(
            out / "wf_summary.csv",
            ("target", "tail_mean"),
            [[t, v] for t, v in zip(trace.targets, trace.tail_means)] + [["ALL", trace.tail_mean]],
        ),
    ]
    extra = {
        "failures": trace.failures,
        "targets": trace.targets,
        "tail_window": trace.tail_window,
        "omit_prefix": trace.omit_prefix,
        "steps": int(trace.train_sizes.size),
    }
    manifest = _manifest("walk_forward", trace.config, files, extra)
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return files + [path]


def _parse(field_type, text: str):
    if field_type is int:
        return int(text)
    if field_type is float:
        return float(text)
    return text


_RECORD_TYPES = {name: (int if name in ("fold", "n_train", "n_validation", "n_test", "best_epoch", "epochs")
                        else str if name in ("target", "stop_reason") else float)
                 for name in RECORD_FIELDS}


def load_report(source: str | Path) -> RunReport | WalkForwardTrace:
    """Rebuild a result object from an emitted report directory."""
    src = Path(source)
    manifest = json.loads((src / MANIFEST).read_text(encoding="utf-8"))
    if manifest["kind"] == "cross_sectional":
        header, rows = _read_csv(src / "runs.csv")
        if tuple(header) != RECORD_FIELDS:
            raise ValueError(f"{src / 'runs.csv'}: unexpected columns {header}")
        records = [RunRecord(**{f: _parse(_RECORD_TYPES[f], v) for f, v in zip(header, row)}) for row in rows]
        return RunReport(manifest["config"], records, manifest.get("failures", []))
    if manifest["kind"] == "walk_forward":
        header, rows = _read_csv(src / "wf_heatmap.csv")
        sizes = np.array([int(h[1:]) for h in header[1:]], dtype=np.int64)
        matrix = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), sizes.size)
        return WalkForwardTrace(
            config=manifest["config"],
            targets=[r[0] for r in rows],
            train_sizes=sizes,
            accuracy=matrix,
            tail_window=int(manifest["tail_window"]),
            omit_prefix=int(manifest["omit_prefix"]),
            failures=manifest.get("failures", []),
        )
    raise ValueError(f"unknown report kind {manifest['kind']!r}")


def read_table1(source: str | Path) -> dict[str, dict[str, float]]:
    header, rows = _read_csv(Path(source) / "table1.csv")
    return {
        row[0]: {c: float(v) for c, v in zip(header[1:], row[1:]) if v != ""}
        for row in rows
    }


def format_table1(table: dict[str, dict[str, float]]) -> str:
    """Fixed-width text rendering for terminals."""
    lines = ["metric".ljust(10) + "".join(c.rjust(11) for c in COLUMNS)]
    for metric, row in table.items():
        cells = []
        for c in COLUMNS:
            v = row.get(c)
            cells.append("".rjust(11) if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:11.4g}")
        lines.append(metric.ljust(10) + "".join(cells))
    return "\n".join(lines)
