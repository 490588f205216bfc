"""Synthetic price panels with planted lag-1 cross-dependencies.

Driver instruments drift within each session with a sign redrawn every
session. Each dependent instrument's trend level moves up or down at
session ``j`` according to the sign of a weighted sum of its drivers'
trend signs at session ``j - 1`` plus Gaussian noise, so the direction
of its slope change is predictable from the drivers' previous slopes
with a known best-case accuracy.
"""

from __future__ import annotations

import datetime as dt
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .features import GradientMatrix, make_labels
from .panel import PricePanel, TickRecord, write_ticks
from .sessions import SessionCalendar, TimeGrid, nyse_calendar

# Dependent trend levels step by at least this much, which keeps the
# planted direction visible through the price-level drift of a session.
MIN_LEVEL_STEP = 0.25
LEVEL_REVERSION = 0.5


@dataclass(frozen=True)
class Dependency:
    target: str
    sources: tuple[str, ...]
    weights: tuple[float, ...]
    lag: int = 1


@dataclass(frozen=True)
class LagStructure:
    dependencies: tuple[Dependency, ...]
    noise_level: float = 0.0
    volatility: float = 5e-5  # hourly log-price noise
    drift: float = 1e-3  # hourly log-drift per unit of trend
    seed: int = 0

    def validate(self, instrument_ids) -> None:
        ids = set(instrument_ids)
        targets = [d.target for d in self.dependencies]
        if len(set(targets)) != len(targets):
            raise ValueError("an instrument may be the target of only one dependency")
        if self.noise_level < 0 or not self.volatility > 0 or not self.drift > 0:
            raise ValueError("need noise_level >= 0, volatility > 0, drift > 0")
        for dep in self.dependencies:
            if dep.lag != 1:
                raise ValueError(f"{dep.target}: only lag 1 is supported")
            if not dep.sources or len(dep.sources) != len(dep.weights):
                raise ValueError(f"{dep.target}: sources and weights must be nonempty and equally long")
            if not all(math.isfinite(w) for w in dep.weights):
                raise ValueError(f"{dep.target}: weights must be finite")
            missing = ({dep.target} | set(dep.sources)) - ids
            if missing:
                raise ValueError(f"unknown instruments in structure: {sorted(missing)}")
            if dep.target in dep.sources:
                raise ValueError(f"{dep.target} cannot depend on itself")
            chained = set(dep.sources) & set(targets)
            if chained:
                raise ValueError(f"{dep.target}: sources {sorted(chained)} are dependents themselves")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> LagStructure:
        deps = tuple(
            Dependency(d["target"], tuple(d["sources"]), tuple(float(w) for w in d["weights"]), int(d.get("lag", 1)))
            for d in data["dependencies"]
        )
        return cls(deps, float(data["noise_level"]), float(data["volatility"]), float(data["drift"]), int(data["seed"]))


@dataclass(frozen=True, eq=False)
class SyntheticPanel:
    panel: PricePanel
    structure: LagStructure
    trends: np.ndarray  # instruments x intervals latent trend level
    directions: dict[str, np.ndarray] = field(default_factory=dict)  # per dependent, intervals 1..t-1, 1 = UP

    def manifest(self) -> dict:
        return {
            "kind": "synthetic_truth",
            "instrument_ids": list(self.panel.instrument_ids),
            "intervals": [str(d) for d in self.panel.grid.days],
            "structure": self.structure.to_dict(),
            "bayes_accuracy": bayes_accuracy_exact(self.structure),
            "directions": {k: v.astype(int).tolist() for k, v in self.directions.items()},
            "calendar": self.panel.grid.calendar.to_dict(),
        }


def instrument_names(n: int) -> list[str]:
    return [f"SYN{k:03d}" for k in range(n)]


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def bayes_accuracy_exact(structure: LagStructure) -> float:
    """Best direction accuracy, averaged over dependents, by enumerating
    the driver sign patterns (each equally likely)."""
    if not structure.dependencies:
        return math.nan
    sigma = structure.noise_level
    per_dep = []
    for dep in structure.dependencies:
        w = np.asarray(dep.weights)
        total = 0.0
        patterns = list(itertools.product((-1.0, 1.0), repeat=len(w)))
        for signs in patterns:
            signal = float(np.dot(w, signs))
            if signal == 0.0:
                total += 0.5
            elif sigma == 0.0:
                total += 1.0
            else:
                total += _phi(abs(signal) / sigma)
        per_dep.append(total / len(patterns))
    return float(np.mean(per_dep))


def bayes_accuracy(structure: LagStructure, realizations: int = 100_000, seed: int = 0) -> float:
    """Monte-Carlo estimate of the probability that the noiseless signal's
    sign survives the noise, averaged over dependents."""
    if not structure.dependencies:
        return math.nan
    rng = np.random.default_rng(seed)
    per_dep = []
    for dep in structure.dependencies:
        w = np.asarray(dep.weights)
        signs = rng.choice((-1.0, 1.0), size=(realizations, w.size))
        signal = signs @ w
        noisy = signal + structure.noise_level * rng.standard_normal(realizations)
        hit = np.where(signal == 0.0, 0.5, (noisy > 0) == (signal > 0))
        per_dep.append(float(np.mean(hit)))
    return float(np.mean(per_dep))


def calibrate_noise(structure: LagStructure, target_accuracy: float) -> float:
    """Noise level at which the exact Bayes accuracy hits ``target_accuracy``."""
    best = bayes_accuracy_exact(replace(structure, noise_level=0.0))
    floor = bayes_accuracy_exact(replace(structure, noise_level=1e9))
    if not floor < target_accuracy < best:
        raise ValueError(f"target accuracy {target_accuracy} outside the attainable range ({floor}, {best})")
    lo, hi = 0.0, 1.0
    while bayes_accuracy_exact(replace(structure, noise_level=hi)) > target_accuracy:
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if bayes_accuracy_exact(replace(structure, noise_level=mid)) > target_accuracy:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_panel(
    n_instruments: int,
    n_intervals: int,
    hours_per_interval: int,
    structure: LagStructure,
    start: dt.date = dt.date(2011, 4, 4),
    calendar: SessionCalendar | None = None,
) -> SyntheticPanel:
    if n_instruments < 2 or n_intervals < 20 or hours_per_interval < 2:
        raise ValueError("need >= 2 instruments, >= 20 intervals and >= 2 hours per interval")
    ids = instrument_names(n_instruments)
    structure.validate(ids)
    calendar = calendar or nyse_calendar()
    if calendar.hours_per_session != hours_per_interval:
        end = calendar.session_start + hours_per_interval
        if end > 24:
            raise ValueError("hours_per_interval does not fit in one calendar day")
        calendar = replace(calendar, session_end=end)
    days = calendar.trading_days_from(start, n_intervals)
    grid = TimeGrid.from_days(calendar, days)

    rng = np.random.default_rng(structure.seed)
    s, t, m = n_instruments, n_intervals, hours_per_interval
    trends = rng.choice((-1.0, 1.0), size=(s, t))
    index = {ric: k for k, ric in enumerate(ids)}
    directions = {}
    for dep in structure.dependencies:
        src = [index[r] for r in dep.sources]
        signal = np.asarray(dep.weights) @ np.sign(trends[src, :-1])
        noise = structure.noise_level * rng.standard_normal(t - 1)
        up = (signal + noise) > 0
        level = np.empty(t)
        level[0] = rng.normal(0.0, 0.5)
        for j in range(1, t):
            sign = 1.0 if up[j - 1] else -1.0
            step = max(MIN_LEVEL_STEP, 1.0 - LEVEL_REVERSION * sign * level[j - 1])
            level[j] = level[j - 1] + sign * step
        trends[index[dep.target]] = level
        directions[dep.target] = up.astype(np.int64)

    returns = structure.drift * trends[:, :, None] + structure.volatility * rng.standard_normal((s, t, m))
    # the overnight step undoes the previous session's drift, so session opens
    # follow a driftless walk and price-level growth does not bias the labels
    returns[:, :, 0] -= structure.drift * trends
    returns[:, 1:, 0] -= structure.drift * (m - 1) * trends[:, :-1]
    log_start = np.log(rng.uniform(20.0, 200.0, size=s))
    log_prices = log_start[:, None] + np.cumsum(returns.reshape(s, t * m), axis=1)
    panel = PricePanel(tuple(ids), grid, np.exp(log_prices), np.zeros((s, t * m), dtype=bool))
    return SyntheticPanel(panel, structure, trends, directions)


def panel_records(panel: PricePanel) -> list[TickRecord]:
    stamps = [ts.astype(dt.datetime) for ts in panel.grid.timestamps]
    return [
        TickRecord(ric, stamps[i], float(panel.prices[k, i]))
        for k, ric in enumerate(panel.instrument_ids)
        for i in range(len(stamps))
    ]


def write_synthetic(synthetic: SyntheticPanel, out_dir: str | Path) -> dict[str, Path]:
    """Emit ``ticks.csv``, ``truth.json`` and the ``calendar.json`` profile."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"ticks": out / "ticks.csv", "truth": out / "truth.json", "calendar": out / "calendar.json"}
    write_ticks(panel_records(synthetic.panel), paths["ticks"])
    paths["truth"].write_text(json.dumps(synthetic.manifest(), indent=1) + "\n", encoding="utf-8")
    synthetic.panel.grid.calendar.save(paths["calendar"])
    return paths


def label_agreement(gradients: GradientMatrix, directions: dict[str, np.ndarray]) -> dict[str, float]:
    """Fraction of slope-derived labels equal to the planted directions."""
    return {
        ric: float(np.mean(make_labels(gradients.slopes[gradients.index(ric)])[:, 1] == truth))
        for ric, truth in directions.items()
    }


def oracle_accuracy(gradients: GradientMatrix, structure: LagStructure) -> dict[str, float]:
    """Accuracy of the structure-aware predictor sign(sum w * sign(driver slope))
    against slope-derived labels, per dependent."""
    out = {}
    for dep in structure.dependencies:
        src = [gradients.index(r) for r in dep.sources]
        signal = np.asarray(dep.weights) @ np.sign(gradients.slopes[src, :-1])
        labels = make_labels(gradients.slopes[gradients.index(dep.target)])[:, 1]
        out[dep.target] = float(np.mean((signal > 0).astype(int) == labels))
    return out


@dataclass(frozen=True)
class SynthConfig:
    n_instruments: int = 50
    n_intervals: int = 1200
    hours_per_interval: int = 7
    n_dependents: int = 10
    drivers_per_dependent: int = 3
    target_bayes_accuracy: float = 0.65
    noise_level: float | None = None  # None: calibrate to target_bayes_accuracy
    volatility: float = 5e-5
    drift: float = 1e-3
    start_date: str = "2011-04-04"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.n_dependents < self.n_instruments:
            raise ValueError("need 0 < n_dependents < n_instruments")
        if self.drivers_per_dependent > self.n_instruments - self.n_dependents:
            raise ValueError("not enough independent instruments to serve as drivers")


def default_structure(config: SynthConfig = SynthConfig()) -> LagStructure:
    """Dependents are the last ``n_dependents`` instruments; each draws its
    drivers from the independent ones with random unit-magnitude weights."""
    ids = instrument_names(config.n_instruments)
    rng = np.random.default_rng([config.seed, 7])
    independent = ids[: config.n_instruments - config.n_dependents]
    deps = []
    for target in ids[config.n_instruments - config.n_dependents :]:
        sources = rng.choice(len(independent), size=config.drivers_per_dependent, replace=False)
        weights = rng.choice((-1.0, 1.0), size=config.drivers_per_dependent)
        deps.append(Dependency(target, tuple(independent[i] for i in sorted(sources)), tuple(float(w) for w in weights)))
    structure = LagStructure(tuple(deps), 0.0, config.volatility, config.drift, config.seed)
    noise = config.noise_level
    if noise is None:
        noise = calibrate_noise(structure, config.target_bayes_accuracy)
    return replace(structure, noise_level=float(noise))


def generate_from_config(config: SynthConfig = SynthConfig()) -> SyntheticPanel:
    return generate_panel(
        config.n_instruments,
        config.n_intervals,
        config.hours_per_interval,
        default_structure(config),
        start=dt.date.fromisoformat(config.start_date),
    )
