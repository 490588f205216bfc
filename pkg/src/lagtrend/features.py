"""Trend-slope features, exponential smoothing, scaling and labels.

Every instrument's hourly prices within one trading session are reduced
to the slope of an ordinary least-squares line; the resulting
instruments x intervals slope matrix is the raw feature source for the
classifier. Labels say whether the target's slope rises at the next
interval.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .panel import PricePanel

DOWN, UP = 0, 1
SPLITS = ("train", "validation", "test")


def interval_slope(window: Sequence[float]) -> float:
    """Least-squares slope of ``window`` against abscissae ``0..m-1``.

    The fitted intercept carries the price level and is not used.
    """
    y = np.asarray(window, dtype=np.float64)
    if y.ndim != 1 or y.size < 2:
        raise ValueError(f"slope needs a 1-D window of length >= 2, got shape {y.shape}")
    x = np.arange(y.size, dtype=np.float64)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _slopes_last_axis(cube: np.ndarray) -> np.ndarray:
    m = cube.shape[-1]
    if m < 2:
        raise ValueError("intervals need at least two observations")
    xc = np.arange(m, dtype=np.float64) - (m - 1) / 2.0
    centered = cube - cube.mean(axis=-1, keepdims=True)
    return centered @ xc / np.dot(xc, xc)


@dataclass(frozen=True, eq=False)
class GradientMatrix:
    """Instruments x intervals matrix of per-session regression slopes."""

    instrument_ids: tuple[str, ...]
    slopes: np.ndarray
    intervals: tuple[str, ...]

    def __post_init__(self):
        slopes = np.array(self.slopes, dtype=np.float64)
        if slopes.shape != (len(self.instrument_ids), len(self.intervals)):
            raise ValueError(
                f"slopes shape {slopes.shape} does not match "
                f"{len(self.instrument_ids)} instruments x {len(self.intervals)} intervals"
            )
        if not np.all(np.isfinite(slopes)):
            raise ValueError("slopes must be finite")
        slopes.setflags(write=False)
        object.__setattr__(self, "instrument_ids", tuple(self.instrument_ids))
        object.__setattr__(self, "intervals", tuple(self.intervals))
        object.__setattr__(self, "slopes", slopes)

    @property
    def shape(self) -> tuple[int, int]:
        return self.slopes.shape

    def index(self, instrument_id: str) -> int:
        try:
            return self.instrument_ids.index(instrument_id)
        except ValueError:
            raise KeyError(f"unknown instrument {instrument_id!r}") from None

    def save(self, stem: str | Path) -> None:
        """Write ``<stem>.csv`` (one column per instrument) and ``<stem>.json``."""
        stem = Path(stem)
        with open(stem.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("interval",) + self.instrument_ids)
            for j, label in enumerate(self.intervals):
                w.writerow([label] + [repr(float(v)) for v in self.slopes[:, j]])
        header = {
            "kind": "gradient_matrix",
            "instruments": len(self.instrument_ids),
            "intervals": len(self.intervals),
            "instrument_ids": list(self.instrument_ids),
            "slope_units": "price per hour",
        }
        stem.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, stem: str | Path) -> GradientMatrix:
        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
        with open(stem.with_suffix(".csv"), encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        ids = tuple(rows[0][1:])
        if list(ids) != header["instrument_ids"]:
            raise ValueError("gradient CSV columns disagree with its header document")
        labels = tuple(r[0] for r in rows[1:])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
        return cls(ids, values.T.reshape(len(ids), len(labels)), labels)


def build_gradient_matrix(panel: PricePanel) -> GradientMatrix:
    """Slope of every (instrument, trading session) window."""
    slopes = _slopes_last_axis(panel.sessions())
    labels = tuple(str(d) for d in panel.grid.days)
    return GradientMatrix(panel.instrument_ids, slopes, labels)


@dataclass(frozen=True)
class SmoothingConfig:
    alpha: float = 0.2
    init_mode: str = "first_value"  # or "mean_of_first_k"
    k: int = 10

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.init_mode not in ("first_value", "mean_of_first_k"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def exponential_smooth(series, config: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    """Recursive exponential smoothing along axis 0.

    ``s[0]`` is the first value (or the mean of the first ``k`` values),
    then ``s[t] = alpha * x[t] + (1 - alpha) * s[t-1]``. Two-dimensional
    input smooths each column independently.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cannot smooth an empty series")
    a = config.alpha
    out = np.empty_like(x)
    if config.init_mode == "first_value":
        out[0] = x[0]
    else:
        out[0] = x[: config.k].mean(axis=0)
    for t in range(1, x.shape[0]):
        out[t] = a * x[t] + (1.0 - a) * out[t - 1]
    return out


@dataclass(frozen=True, eq=False)
class Scaler:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        if np.any(self.maximum < self.minimum):
            raise ValueError("scaler maximum below minimum")


def fit_scaler(rows) -> Scaler:
    """Per-feature min and max of the (training) rows."""
    x = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero rows")
    return Scaler(x.min(axis=0), x.max(axis=0))


def apply_scaler(scaler: Scaler, rows) -> np.ndarray:
    """Min-max map with the fitted range; constant features go to 0."""
    x = np.asarray(rows, dtype=np.float64)
    span = scaler.maximum - scaler.minimum
    safe = np.where(span > 0, span, 1.0)
    out = (x - scaler.minimum) / safe
    return np.where(span > 0, out, 0.0)


def make_labels(target_slopes) -> np.ndarray:
    """One-hot rows: UP (column 1) where the slope strictly rises, else DOWN."""
    s = np.asarray(target_slopes, dtype=np.float64)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("need at least two slopes to form a label")
    up = s[1:] > s[:-1]
    labels = np.zeros((up.size, 2), dtype=np.float64)
    labels[np.arange(up.size), up.astype(int)] = 1.0
    return labels


def label_indices(labels: np.ndarray) -> np.ndarray:
    return np.asarray(labels)[:, 1].astype(np.int64)


@dataclass(frozen=True, eq=False)
class RawRows:
    """Unscaled lag-1 design: inputs from interval j, label from j -> j+1."""

    target: str
    input_ids: tuple[str, ...]
    inputs: np.ndarray
    labels: np.ndarray
    include_target: bool


def lagged_rows(gradients: GradientMatrix, target: str, include_target: bool = False) -> RawRows:
    k = gradients.index(target)
    cols = [i for i in range(gradients.shape[0]) if include_target or i != k]
    inputs = gradients.slopes[cols, :-1].T.copy()
    labels = make_labels(gradients.slopes[k])
    return RawRows(
        target=target,
        input_ids=tuple(gradients.instrument_ids[i] for i in cols),
        inputs=inputs,
        labels=labels,
        include_target=include_target,
    )


@dataclass(frozen=True, eq=False)
class SupervisedDataset:
    target: str
    input_ids: tuple[str, ...]
    inputs: np.ndarray
    labels: np.ndarray
    split: np.ndarray  # per-row "train" / "validation" / "test"
    fold: int
    include_target: bool
    scaler: Scaler = field(repr=False, default=None)

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0] or self.split.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs, labels and split tags must have the same row count")
        if not np.all(self.labels.sum(axis=1) == 1) or not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be one-hot")
        if not self.include_target and self.target in self.input_ids:
            raise ValueError("target column present in an exclude-target dataset")

    @property
    def n_rows(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def rows(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        mask = self.split == split
        return self.inputs[mask], self.labels[mask]

    def save(self, stem: str | Path, smoothing: SmoothingConfig | None = None) -> None:
        stem = Path(stem)
        with open(stem.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("row", "split") + self.input_ids + ("label_down", "label_up"))
            for j in range(self.n_rows):
                w.writerow(
                    [j, self.split[j]]
                    + [repr(float(v)) for v in self.inputs[j]]
                    + [int(self.labels[j, 0]), int(self.labels[j, 1])]
                )
        header = {
            "kind": "supervised_dataset",
            "target": self.target,
            "fold": self.fold,
            "include_target": self.include_target,
            "rows": self.n_rows,
            "input_dim": self.input_dim,
            "input_ids": list(self.input_ids),
            "smoothing": asdict(smoothing) if smoothing else None,
        }
        stem.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, stem: str | Path) -> SupervisedDataset:
        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
        with open(stem.with_suffix(".csv"), encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        d = header["input_dim"]
        inputs = np.array([[float(v) for v in r[2 : 2 + d]] for r in rows], dtype=np.float64).reshape(len(rows), d)
        labels = np.array([[float(r[2 + d]), float(r[3 + d])] for r in rows], dtype=np.float64).reshape(len(rows), 2)
        return cls(
            target=header["target"],
            input_ids=tuple(header["input_ids"]),
            inputs=inputs,
            labels=labels,
            split=np.array([r[1] for r in rows], dtype=object),
            fold=header["fold"],
            include_target=header["include_target"],
        )


def contiguous_runs(index: np.ndarray) -> list[np.ndarray]:
    """Split sorted row indices into maximal runs of consecutive values."""
    index = np.asarray(index)
    if index.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(index) != 1) + 1
    return np.split(index, breaks)


def make_dataset(
    gradients: GradientMatrix,
    target: str,
    include_target: bool = False,
    smoothing: SmoothingConfig = SmoothingConfig(),
    fold=None,
) -> SupervisedDataset:
    """Scaled, smoothed supervised rows for one target.

    ``fold`` is any object with ``train``, ``validation`` and ``test`` row
    index arrays plus an ``index`` attribute. The scaler is fitted on the
    training rows only, then each contiguous block of each split is
    smoothed along time on its own. Without a fold every row is a
    training row and the whole sequence is smoothed at once.
    """
    raw = lagged_rows(gradients, target, include_target)
    n = raw.inputs.shape[0]
    split = np.empty(n, dtype=object)
    if fold is None:
        split[:] = "train"
        fold_id = -1
        blocks = {"train": np.arange(n)}
    else:
        blocks = {name: np.sort(np.asarray(getattr(fold, name))) for name in SPLITS}
        for name, idx in blocks.items():
            split[idx] = name
        if any(v is None for v in split):
            raise ValueError("fold does not cover every row")
        fold_id = int(fold.index)

    scaler = fit_scaler(raw.inputs[blocks["train"]])
    scaled = apply_scaler(scaler, raw.inputs)
    inputs = np.empty_like(scaled)
    for idx in blocks.values():
        for run in contiguous_runs(idx):
            inputs[run] = exponential_smooth(scaled[run], smoothing)
    return SupervisedDataset(
        target=target,
        input_ids=raw.input_ids,
        inputs=inputs,
        labels=raw.labels,
        split=split,
        fold=fold_id,
        include_target=include_target,
        scaler=scaler,
    )
