"""Cross-sectional k-fold and walk-forward experiment protocols."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from .baselines import SVCConfig, compute_baselines, predict_linear, train_linear_svc
from .features import (
    GradientMatrix,
    Scaler,
    SmoothingConfig,
    apply_scaler,
    exponential_smooth,
    lagged_rows,
    make_dataset,
)
from .mlp import NetworkConfig, TrainConfig, init_network, predict, predict_proba, train, with_input_dim
from .stats import BoxStats, SignificanceResult, accuracy, auc, box_stats, mean_and_variance, upper_tail_test

logger = logging.getLogger(__name__)

# Seed-stream tags; every random draw is keyed by (root seed, protocol, target, fold, purpose).
CROSS_SECTIONAL, WALK_FORWARD, SAMPLING = 1, 2, 3
INIT, BATCHES, MOCK, SVC = 0, 1, 2, 3


def derive_seed(root: int, *keys: int) -> int:
    return int(np.random.SeedSequence([root, *keys]).generate_state(1)[0])


# -- fold plans ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fold:
    index: int
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


@dataclass(frozen=True, eq=False)
class FoldPlan:
    n_rows: int
    folds: tuple[Fold, ...]
    contiguous: bool = True

    @property
    def fold_count(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def make_fold_plan(n_rows: int, fold_count: int = 5) -> FoldPlan:
    """Contiguous time blocks: fold ``f`` tests on block ``f``, validates on
    block ``f + 1`` (wrapping) and trains on the remaining blocks."""
    if fold_count < 3:
        raise ValueError("need at least 3 folds: one each for test, validation and training")
    if n_rows < 2 * fold_count:
        raise ValueError(f"need at least {2 * fold_count} rows for {fold_count} folds, got {n_rows}")
    # evenly spaced cut points keep every block, and every adjacent pair of
    # blocks, within one row of its nominal share
    cuts = (np.arange(fold_count + 1) * n_rows) // fold_count
    blocks = [np.arange(cuts[i], cuts[i + 1]) for i in range(fold_count)]
    folds = []
    for f in range(fold_count):
        val = (f + 1) % fold_count
        train_idx = np.concatenate([blocks[i] for i in range(fold_count) if i not in (f, val)])
        folds.append(Fold(f, train_idx, blocks[val], blocks[f]))
    return FoldPlan(n_rows, tuple(folds))


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class WalkForwardConfig:
    update_epochs: int = 3
    stop_train_fraction: float = 0.9
    tail_window: int = 100
    omit_prefix: int = 0
    early_stopping_min_rows: int = 10
    validation_fraction: float = 0.2

    def __post_init__(self):
        if not 0 < self.stop_train_fraction < 1:
            raise ValueError("stop_train_fraction must lie in (0, 1)")
        if self.update_epochs < 1 or self.tail_window < 1 or self.omit_prefix < 0:
            raise ValueError("update_epochs, tail_window >= 1 and omit_prefix >= 0 required")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    targets: tuple[str, ...] | None = None
    target_count: int | None = None
    include_target: bool = False
    smoothing: SmoothingConfig = SmoothingConfig()
    network: NetworkConfig = NetworkConfig()
    training: TrainConfig = TrainConfig()
    svc: SVCConfig = SVCConfig()
    walk_forward: WalkForwardConfig = WalkForwardConfig()
    fold_count: int = 5
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["targets"] = list(self.targets) if self.targets is not None else None
        return out


def sample_targets(instruments: Sequence[str], count: int, seed: int) -> list[str]:
    """Uniform sample without replacement, reproducible per seed."""
    if count > len(instruments):
        raise ValueError(f"cannot sample {count} targets from {len(instruments)} instruments")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return [instruments[i] for i in rng.choice(len(instruments), size=count, replace=False)]


def resolve_targets(gradients: GradientMatrix, config: ExperimentConfig) -> list[str]:
    if config.targets is not None:
        for t in config.targets:
            gradients.index(t)
        return list(config.targets)
    if config.target_count is not None:
        return sample_targets(gradients.instrument_ids, config.target_count, derive_seed(config.seed, SAMPLING))
    return list(gradients.instrument_ids)


def _run_units(fn: Callable, units: list[tuple], workers: int) -> list[tuple[bool, object]]:
    """Evaluate ``fn(*unit)`` for each unit; failures come back as messages."""
    if workers <= 1 or len(units) <= 1:
        return [_guarded(fn, unit) for unit in units]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_guarded, fn, unit) for unit in units]
        return [f.result() for f in futures]


def _guarded(fn: Callable, unit: tuple) -> tuple[bool, object]:
    try:
        return True, fn(*unit)
    except Exception as exc:  # one bad target must not sink a sweep
        return False, f"{type(exc).__name__}: {exc}"


def default_workers() -> int:
    return os.cpu_count() or 1


# -- cross-sectional protocol ----------------------------------------------

COLUMNS = ("model", "rand.", "class 1", "class 2", "best-of", "SVC")
# "class 1" is the all-DOWN mock (class index 0), "class 2" the all-UP mock.
COLUMN_FIELDS = {
    "model": "model",
    "rand.": "shuffled",
    "class 1": "all_down",
    "class 2": "all_up",
    "best-of": "best_of",
    "SVC": "svc",
}


@dataclass(frozen=True)
class RunRecord:
    target: str
    fold: int
    n_train: int
    n_validation: int
    n_test: int
    up_fraction: float
    model: float
    auc: float
    auc_thresholded: float
    shuffled: float
    all_down: float
    all_up: float
    best_of: float
    svc: float
    best_epoch: int
    epochs: int
    stop_reason: str


RECORD_FIELDS = tuple(f.name for f in fields(RunRecord))


@dataclass
class RunReport:
    config: dict
    records: list[RunRecord]
    failures: list[dict] = field(default_factory=list)

    @property
    def targets(self) -> list[str]:
        seen = {}
        for r in self.records:
            seen.setdefault(r.target, None)
        return list(seen)

    def column(self, name: str) -> np.ndarray:
        attr = COLUMN_FIELDS.get(name, name)
        return np.array([getattr(r, attr) for r in self.records], dtype=np.float64)

    def target_means(self, name: str) -> np.ndarray:
        attr = COLUMN_FIELDS.get(name, name)
        out = []
        for t in self.targets:
            out.append(float(np.mean([getattr(r, attr) for r in self.records if r.target == t])))
        return np.array(out)

    def mean(self, name: str) -> float:
        return float(np.mean(self.column(name)))

    def significance(self) -> dict[str, SignificanceResult]:
        """Model vs each baseline over per-target mean accuracies."""
        model = self.target_means("model")
        if model.size < 2:
            return {}
        return {name: upper_tail_test(model, self.target_means(name)) for name in COLUMNS[1:]}

    def table1(self) -> dict[str, dict[str, float]]:
        """Rows ``accuracy``, ``variance``, ``p_value``, ``min_diff`` keyed by column."""
        table = {"accuracy": {}, "variance": {}, "p_value": {}, "min_diff": {}}
        for name in COLUMNS:
            table["accuracy"][name] = self.mean(name)
            means = self.target_means(name)
            table["variance"][name] = mean_and_variance(means)[1] if means.size >= 2 else math.nan
        for name, result in self.significance().items():
            table["p_value"][name] = result.p_value
            table["min_diff"][name] = result.ci_lower_bound
        return table

    def box_stats(self) -> dict[str, BoxStats]:
        return {name: box_stats(self.target_means(name)) for name in COLUMNS if len(self.targets) >= 2}


def _cross_sectional_unit(gradients: GradientMatrix, target: str, fold: Fold, config: ExperimentConfig) -> RunRecord:
    t_index = gradients.index(target)
    keys = (CROSS_SECTIONAL, t_index, fold.index)
    ds = make_dataset(gradients, target, config.include_target, config.smoothing, fold)
    net = init_network(with_input_dim(config.network, ds.input_dim), derive_seed(config.seed, *keys, INIT))
    train_cfg = replace(config.training, seed=derive_seed(config.seed, *keys, BATCHES))
    net, report = train(net, ds.rows("train"), ds.rows("validation"), train_cfg)

    x_test, y_test = ds.rows("test")
    truth = y_test[:, 1].astype(np.int64)
    proba = predict_proba(net, x_test)
    pred = (proba[:, 1] > proba[:, 0]).astype(np.int64)
    both = 0 < truth.sum() < truth.size
    mocks = compute_baselines(pred, truth, derive_seed(config.seed, *keys, MOCK))
    svc = train_linear_svc(*ds.rows("train"), replace(config.svc, seed=derive_seed(config.seed, *keys, SVC)))
    return RunRecord(
        target=target,
        fold=fold.index,
        n_train=int(np.sum(ds.split == "train")),
        n_validation=int(np.sum(ds.split == "validation")),
        n_test=int(truth.size),
        up_fraction=float(truth.mean()),
        model=accuracy(pred, truth),
        auc=auc(proba[:, 1], truth) if both else math.nan,
        auc_thresholded=auc(pred, truth) if both else math.nan,
        shuffled=mocks.shuffled_accuracy,
        all_down=mocks.all_down_accuracy,
        all_up=mocks.all_up_accuracy,
        best_of=mocks.best_of,
        svc=accuracy(predict_linear(svc, x_test), truth),
        best_epoch=report.best_epoch,
        epochs=report.epochs,
        stop_reason=report.stop_reason,
    )


def run_cross_sectional(gradients: GradientMatrix, config: ExperimentConfig = ExperimentConfig()) -> RunReport:
    """k-fold runs for every target; one model per (target, fold)."""
    targets = resolve_targets(gradients, config)
    plan = make_fold_plan(gradients.shape[1] - 1, config.fold_count)
    units = [(gradients, t, fold, config) for t in targets for fold in plan]
    records, failures = [], []
    for unit, (ok, value) in zip(units, _run_units(_cross_sectional_unit, units, config.workers)):
        if ok:
            records.append(value)
        else:
            logger.warning("target %s fold %d failed: %s", unit[1], unit[2].index, value)
            failures.append({"target": unit[1], "fold": unit[2].index, "error": value})
    return RunReport({**config.to_dict(), "resolved_targets": targets}, records, failures)


# -- walk-forward protocol --------------------------------------------------


@dataclass
class WalkForwardTrace:
    config: dict
    targets: list[str]
    train_sizes: np.ndarray
    accuracy: np.ndarray  # targets x steps; the heatmap
    tail_window: int
    omit_prefix: int
    failures: list[dict] = field(default_factory=list)

    @property
    def mean_trace(self) -> np.ndarray:
        return self.accuracy.mean(axis=0)

    @property
    def tail_means(self) -> np.ndarray:
        return self.accuracy[:, -self.tail_window :].mean(axis=1)

    @property
    def tail_mean(self) -> float:
        return float(self.mean_trace[-self.tail_window :].mean())


def walk_forward_steps(n_rows: int, config: WalkForwardConfig) -> int:
    """Number of expanding-window steps after dropping ``omit_prefix`` rows."""
    usable = n_rows - config.omit_prefix
    if usable < 2:
        raise ValueError("too few rows remain after omit_prefix")
    return int(math.floor(config.stop_train_fraction * usable))


def _walk_forward_unit(gradients: GradientMatrix, target: str, config: ExperimentConfig) -> np.ndarray:
    wf = config.walk_forward
    raw = lagged_rows(gradients, target, config.include_target)
    x = raw.inputs[wf.omit_prefix :]
    y = raw.labels[wf.omit_prefix :]
    steps = walk_forward_steps(raw.inputs.shape[0], wf)
    if wf.tail_window > steps:
        raise ValueError(f"tail window {wf.tail_window} exceeds the {steps} usable steps")

    # Smoothing is causal, so it runs once over the whole sequence. Min-max
    # scaling is affine and commutes with it, so each step rescales the
    # smoothed rows with the range of its own past rows only.
    smoothed = exponential_smooth(x, config.smoothing)
    running_min = np.minimum.accumulate(x, axis=0)
    running_max = np.maximum.accumulate(x, axis=0)

    t_index = gradients.index(target)
    keys = (WALK_FORWARD, t_index)
    net = init_network(with_input_dim(config.network, x.shape[1]), derive_seed(config.seed, *keys, INIT))
    rng = np.random.default_rng(derive_seed(config.seed, *keys, BATCHES))
    cfg = config.training
    out = np.empty(steps)
    for l in range(1, steps + 1):
        xs = apply_scaler(Scaler(running_min[l - 1], running_max[l - 1]), smoothed)
        if l == 1:
            net, _ = train(net, (xs[:1], y[:1]), None, cfg, epochs=cfg.max_epochs, rng=rng)
        elif l < wf.early_stopping_min_rows:
            net, _ = train(net, (xs[:l], y[:l]), None, cfg, epochs=wf.update_epochs, rng=rng)
        else:
            n_val = max(1, int(round(wf.validation_fraction * l)))
            net, _ = train(
                net,
                (xs[: l - n_val], y[: l - n_val]),
                (xs[l - n_val : l], y[l - n_val : l]),
                cfg,
                epochs=wf.update_epochs,
                rng=rng,
                keep_initial=True,
            )
        out[l - 1] = accuracy(predict(net, xs[l:]), y[l:, 1].astype(np.int64))
    return out


def run_walk_forward(gradients: GradientMatrix, config: ExperimentConfig = ExperimentConfig()) -> WalkForwardTrace:
    """Expanding-window retraining; step ``l`` trains on rows ``1..l`` and
    tests on every later row, until the stop fraction is reached."""
    targets = resolve_targets(gradients, config)
    steps = walk_forward_steps(gradients.shape[1] - 1, config.walk_forward)
    if config.walk_forward.tail_window > steps:
        raise ValueError(f"tail window {config.walk_forward.tail_window} exceeds the {steps} usable steps")
    units = [(gradients, t, config) for t in targets]
    rows, kept, failures = [], [], []
    for t, (ok, value) in zip(targets, _run_units(_walk_forward_unit, units, config.workers)):
        if ok:
            rows.append(value)
            kept.append(t)
        else:
            logger.warning("walk-forward target %s failed: %s", t, value)
            failures.append({"target": t, "error": value})
    if not rows:
        raise RuntimeError(f"every walk-forward target failed: {failures}")
    return WalkForwardTrace(
        config={**config.to_dict(), "resolved_targets": targets},
        targets=kept,
        train_sizes=np.arange(1, steps + 1),
        accuracy=np.vstack(rows),
        tail_window=config.walk_forward.tail_window,
        omit_prefix=config.walk_forward.omit_prefix,
        failures=failures,
    )
