"""Tick ingestion and reconstruction of an aligned hourly price panel."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

from .sessions import SessionCalendar, TimeGrid

logger = logging.getLogger(__name__)

CSV_HEADER = ("instrument_id", "timestamp", "price")
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M"


class IngestError(RuntimeError):
    """The tick source could not be read at all."""


@dataclass(frozen=True, slots=True)
class TickRecord:
    instrument_id: str
    timestamp: dt.datetime
    price: float

    def __post_init__(self):
        if not (self.price > 0 and math.isfinite(self.price)):
            raise ValueError(f"price must be positive and finite, got {self.price}")


@dataclass
class IngestResult:
    records: list[TickRecord]
    rejects: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejects)


def ingest_ticks(source: str | Path | TextIO) -> IngestResult:
    """Parse ``instrument_id,timestamp,price`` rows.

    Malformed rows are rejected individually with their 1-based line
    number; a missing file or header is fatal.
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8", newline="") as fh:
                return _ingest_stream(fh)
        except OSError as exc:
            raise IngestError(f"cannot read tick source {source}: {exc}") from exc
    return _ingest_stream(source)


def _ingest_stream(stream: TextIO) -> IngestResult:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("tick source is empty; header row required") from None
    except (UnicodeDecodeError, csv.Error) as exc:
        raise IngestError(f"unreadable header: {exc}") from exc
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise IngestError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}")

    records: list[TickRecord] = []
    rejects: list[tuple[int, str]] = []
    parse_ts = dt.datetime.strptime
    line = 1
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except (UnicodeDecodeError, csv.Error) as exc:
            line += 1
            rejects.append((line, f"unparseable line: {exc}"))
            continue
        line = reader.line_num
        if not row:
            continue
        if len(row) != 3:
            rejects.append((line, f"expected 3 fields, got {len(row)}"))
            continue
        ric, stamp, price = (x.strip() for x in row)
        if not ric:
            rejects.append((line, "empty instrument_id"))
            continue
        try:
            ts = parse_ts(stamp, TIMESTAMP_FORMAT)
        except ValueError:
            rejects.append((line, f"bad timestamp {stamp!r}"))
            continue
        try:
            value = float(price)
        except ValueError:
            rejects.append((line, f"non-numeric price {price!r}"))
            continue
        if not (value > 0 and math.isfinite(value)):
            rejects.append((line, f"non-positive price {price!r}"))
            continue
        records.append(TickRecord(ric, ts, value))
    if rejects:
        logger.info("ingest: %d records, %d rejected rows", len(records), len(rejects))
    return IngestResult(records, rejects)


def write_ticks(records: Iterable[TickRecord], dest: str | Path | TextIO) -> None:
    """Write records in the ingestible CSV format."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_ticks(records, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow((r.instrument_id, r.timestamp.strftime(TIMESTAMP_FORMAT), repr(r.price)))


def clean_records(
    records: Iterable[TickRecord], calendar: SessionCalendar
) -> tuple[list[TickRecord], Counter]:
    """Drop records that cannot sit on the ideal grid.

    Returns the kept records and a counter of removal reasons
    (``holiday``, ``early_close``, ``non_trading_weekday``, ``off_session``).
    """
    kept = []
    removed: Counter = Counter()
    for rec in records:
        day = rec.timestamp.date()
        if day in calendar.holidays:
            removed["holiday"] += 1
        elif day in calendar.early_closes:
            removed["early_close"] += 1
        elif day.weekday() not in calendar.weekdays:
            removed["non_trading_weekday"] += 1
        elif not calendar.in_session(rec.timestamp):
            removed["off_session"] += 1
        else:
            kept.append(rec)
    return kept, removed


def grid_for_records(records: list[TickRecord], calendar: SessionCalendar) -> TimeGrid:
    """Uninterrupted grid spanning the first to the last record date."""
    if not records:
        raise ValueError("cannot build a grid from an empty record set")
    first = min(r.timestamp for r in records).date()
    last = max(r.timestamp for r in records).date()
    return calendar.build_grid(first, last)


def filter_instruments(
    records: list[TickRecord], grid: TimeGrid, min_coverage: float = 0.9
) -> tuple[list[str], list[str]]:
    """Split instruments by the fraction of grid stamps they actually observe."""
    if not records:
        raise ValueError("empty record set")
    if not 0 < min_coverage <= 1:
        raise ValueError(f"min_coverage must lie in (0, 1], got {min_coverage}")
    on_grid = set(grid.minutes().tolist())
    stamps: dict[str, set[int]] = defaultdict(set)
    for r in records:
        m = _to_minutes(r.timestamp)
        if m in on_grid:
            stamps[r.instrument_id].add(m)
        else:
            stamps.setdefault(r.instrument_id, set())
    kept, dropped = [], []
    for ric in sorted(stamps):
        (kept if len(stamps[ric]) / len(grid) >= min_coverage else dropped).append(ric)
    return kept, dropped


def _to_minutes(ts: dt.datetime) -> int:
    return int(np.datetime64(ts, "m").astype(np.int64))


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Instruments x grid matrix of positive prices with fill provenance.

    ``filled[k, i]`` is True where the cell was reconstructed from an
    adjacent observation rather than observed. Arrays are read-only.
    """

    instrument_ids: tuple[str, ...]
    grid: TimeGrid
    prices: np.ndarray
    filled: np.ndarray

    def __post_init__(self):
        prices = np.array(self.prices, dtype=np.float64)
        filled = np.array(self.filled, dtype=bool)
        s, t = len(self.instrument_ids), len(self.grid)
        if prices.shape != (s, t) or filled.shape != (s, t):
            raise ValueError(f"panel arrays must be {s}x{t}, got {prices.shape} / {filled.shape}")
        if len(set(self.instrument_ids)) != s:
            raise ValueError("instrument ids must be unique")
        if not np.all(prices > 0) or not np.all(np.isfinite(prices)):
            raise ValueError("all panel prices must be positive and finite")
        prices.setflags(write=False)
        filled.setflags(write=False)
        object.__setattr__(self, "instrument_ids", tuple(self.instrument_ids))
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "filled", filled)

    @property
    def shape(self) -> tuple[int, int]:
        return self.prices.shape

    @property
    def n_filled(self) -> int:
        return int(self.filled.sum())

    def row(self, instrument_id: str) -> np.ndarray:
        return self.prices[self.instrument_ids.index(instrument_id)]

    def sessions(self) -> np.ndarray:
        """Prices reshaped to (instrument, interval, hour)."""
        m = self.grid.hours_per_session
        s, t = self.shape
        if t % m:
            raise ValueError("panel does not cover whole sessions; truncate it first")
        return self.prices.reshape(s, t // m, m)

    def save(self, path: str | Path) -> None:
        np.savez_compressed(
            path,
            instrument_ids=np.array(self.instrument_ids, dtype=str),
            timestamps=self.grid.timestamps.astype(np.int64),
            prices=self.prices,
            filled=self.filled,
            calendar=np.array(json.dumps(self.grid.calendar.to_dict())),
        )

    @classmethod
    def load(cls, path: str | Path) -> PricePanel:
        with np.load(path, allow_pickle=False) as data:
            calendar = SessionCalendar.from_dict(json.loads(str(data["calendar"])))
            grid = TimeGrid(data["timestamps"].astype("datetime64[m]"), calendar)
            return cls(
                tuple(str(x) for x in data["instrument_ids"]),
                grid,
                data["prices"],
                data["filled"],
            )


def align_panel(records: list[TickRecord], grid: TimeGrid, instruments: Iterable[str] | None = None) -> PricePanel:
    """Place every instrument on the ideal grid, filling gaps.

    Each row is preallocated at full grid length. A missing stamp takes
    the preceding observation of the same instrument; stamps before the
    first observation take the first observed value. Duplicate
    observations of one stamp are averaged.
    """
    per_ric: dict[str, list[TickRecord]] = defaultdict(list)
    for r in records:
        per_ric[r.instrument_id].append(r)
    rics = sorted(per_ric) if instruments is None else list(instruments)

    grid_minutes = grid.minutes()
    n = len(grid)
    prices = np.empty((len(rics), n), dtype=np.float64)
    filled = np.empty((len(rics), n), dtype=bool)
    for k, ric in enumerate(rics):
        rows = per_ric.get(ric)
        if not rows:
            raise ValueError(f"instrument {ric} has no observations; filter it out first")
        rows = sorted(rows, key=lambda r: (r.timestamp, r.price))
        minutes = np.fromiter((_to_minutes(r.timestamp) for r in rows), dtype=np.int64, count=len(rows))
        pos = np.searchsorted(grid_minutes, minutes)
        pos_clipped = np.minimum(pos, n - 1)
        if np.any(grid_minutes[pos_clipped] != minutes):
            bad = rows[int(np.flatnonzero(grid_minutes[pos_clipped] != minutes)[0])]
            raise ValueError(f"record {bad} is not on the grid; clean records first")
        sums = np.zeros(n)
        counts = np.zeros(n, dtype=np.int64)
        np.add.at(sums, pos, [r.price for r in rows])
        np.add.at(counts, pos, 1)
        observed = counts > 0
        values = np.divide(sums, counts, out=np.zeros(n), where=observed)

        source = np.where(observed, np.arange(n), -1)
        np.maximum.accumulate(source, out=source)
        source[source < 0] = int(np.flatnonzero(observed)[0])
        prices[k] = values[source]
        filled[k] = ~observed
    return PricePanel(tuple(rics), grid, prices, filled)


def truncate_panel(panel: PricePanel) -> PricePanel:
    """Cut all rows at the earliest final observation across instruments.

    The cut is moved back to a session boundary so every remaining
    interval is a complete trading day.
    """
    observed = ~panel.filled
    if not observed.any(axis=1).all():
        raise ValueError("panel contains an instrument without observations")
    n = panel.shape[1]
    last_seen = n - 1 - np.argmax(observed[:, ::-1], axis=1)
    end = int(last_seen.min()) + 1
    m = panel.grid.hours_per_session
    end -= end % m
    if end == n:
        return panel
    if end == 0:
        raise ValueError("no complete common session remains after truncation")
    return PricePanel(
        panel.instrument_ids,
        panel.grid.truncated(end),
        panel.prices[:, :end],
        panel.filled[:, :end],
    )


def interval_windows(panel: PricePanel) -> Iterator[tuple[str, int, np.ndarray]]:
    """Yield ``(instrument, interval index, hourly prices)`` in row-major order."""
    cube = panel.sessions()
    for k, ric in enumerate(panel.instrument_ids):
        for j in range(cube.shape[1]):
            yield ric, j, cube[k, j]


@dataclass
class BuildSummary:
    n_records: int
    n_rejected: int
    removed: dict
    kept: list[str]
    discarded: list[str]
    n_filled: int
    shape: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "records": self.n_records,
            "rejected_rows": self.n_rejected,
            "removed_by_cleaning": dict(self.removed),
            "instruments_kept": len(self.kept),
            "instruments_discarded": self.discarded,
            "filled_cells": self.n_filled,
            "panel_shape": list(self.shape),
        }


def build_panel(
    source: str | Path | TextIO,
    calendar: SessionCalendar,
    min_coverage: float = 0.9,
) -> tuple[PricePanel, BuildSummary]:
    """Full ingest path: parse, clean, filter, align and truncate."""
    result = ingest_ticks(source)
    records, removed = clean_records(result.records, calendar)
    grid = grid_for_records(records, calendar)
    kept, discarded = filter_instruments(records, grid, min_coverage)
    if not kept:
        raise ValueError("no instrument meets the coverage cutoff")
    keep = set(kept)
    records = [r for r in records if r.instrument_id in keep]
    panel = truncate_panel(align_panel(records, grid, kept))
    summary = BuildSummary(
        n_records=len(result.records),
        n_rejected=result.n_rejected,
        removed=removed,
        kept=kept,
        discarded=discarded,
        n_filled=panel.n_filled,
        shape=panel.shape,
    )
    return panel, summary

