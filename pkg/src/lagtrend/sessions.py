"""Trading-session calendars and the ideal hourly time grid."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from pandas.tseries.holiday import (
    AbstractHolidayCalendar,
    GoodFriday,
    Holiday,
    USLaborDay,
    USMartinLutherKingJr,
    USMemorialDay,
    USPresidentsDay,
    USThanksgivingDay,
    nearest_workday,
    sunday_to_monday,
)

WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")

# Unscheduled full-day closures of the NYSE.
_NYSE_SPECIAL_CLOSURES = (
    "2012-10-29",
    "2012-10-30",
    "2018-12-05",
    "2025-01-09",
)


class _NYSEHolidayRules(AbstractHolidayCalendar):
    rules = [
        Holiday("NewYearsDay", month=1, day=1, observance=sunday_to_monday),
        USMartinLutherKingJr,
        USPresidentsDay,
        GoodFriday,
        USMemorialDay,
        Holiday("Juneteenth", month=6, day=19, start_date="2022-01-01", observance=nearest_workday),
        Holiday("IndependenceDay", month=7, day=4, observance=nearest_workday),
        USLaborDay,
        USThanksgivingDay,
        Holiday("Christmas", month=12, day=25, observance=nearest_workday),
    ]


@dataclass(frozen=True)
class SessionCalendar:
    """Which days trade and which hours of a trading day carry a grid point.

    Hours are session-local; ``session_end`` is exclusive, so the default
    9..16 profile yields seven hourly stamps per day (09:00 .. 15:00).
    Early-close dates are treated as nonstandard sessions and dropped.
    """

    weekdays: tuple[int, ...] = (0, 1, 2, 3, 4)
    session_start: int = 9
    session_end: int = 16
    holidays: frozenset[dt.date] = field(default_factory=frozenset)
    early_closes: frozenset[dt.date] = field(default_factory=frozenset)
    name: str = "custom"

    def __post_init__(self):
        if not self.weekdays or any(not 0 <= d <= 6 for d in self.weekdays):
            raise ValueError(f"weekdays must be a nonempty subset of 0..6, got {self.weekdays}")
        if not 0 <= self.session_start < self.session_end <= 24:
            raise ValueError(
                f"need 0 <= session_start < session_end <= 24, got {self.session_start}, {self.session_end}"
            )

    @property
    def hours_per_session(self) -> int:
        return self.session_end - self.session_start

    def is_trading_day(self, day: dt.date) -> bool:
        return (
            day.weekday() in self.weekdays
            and day not in self.holidays
            and day not in self.early_closes
        )

    def in_session(self, ts: dt.datetime) -> bool:
        return ts.minute == 0 and self.session_start <= ts.hour < self.session_end

    def trading_days(self, start: dt.date, end: dt.date) -> list[dt.date]:
        """All trading days in the closed range ``[start, end]``."""
        out = []
        day = start
        one = dt.timedelta(days=1)
        while day <= end:
            if self.is_trading_day(day):
                out.append(day)
            day += one
        return out

    def trading_days_from(self, start: dt.date, count: int) -> list[dt.date]:
        """The first ``count`` trading days on or after ``start``."""
        out = []
        day = start
        one = dt.timedelta(days=1)
        while len(out) < count:
            if self.is_trading_day(day):
                out.append(day)
            day += one
        return out

    def build_grid(self, start: dt.date, end: dt.date) -> TimeGrid:
        return TimeGrid.from_days(self, self.trading_days(start, end))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "weekdays": [WEEKDAY_NAMES[d] for d in self.weekdays],
            "session_start": self.session_start,
            "session_end": self.session_end,
            "holidays": sorted(d.isoformat() for d in self.holidays),
            "early_closes": sorted(d.isoformat() for d in self.early_closes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SessionCalendar:
        unknown = set(data) - {"name", "weekdays", "session_start", "session_end", "holidays", "early_closes"}
        if unknown:
            raise ValueError(f"unknown calendar keys: {sorted(unknown)}")
        weekdays = tuple(_parse_weekday(d) for d in data.get("weekdays", WEEKDAY_NAMES[:5]))
        return cls(
            weekdays=tuple(sorted(set(weekdays))),
            session_start=int(data.get("session_start", 9)),
            session_end=int(data.get("session_end", 16)),
            holidays=frozenset(_parse_date(d) for d in data.get("holidays", ())),
            early_closes=frozenset(_parse_date(d) for d in data.get("early_closes", ())),
            name=str(data.get("name", "custom")),
        )

    @classmethod
    def load(cls, path: str | Path) -> SessionCalendar:
        """Read a calendar profile (YAML or JSON key-value document)."""
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: calendar profile must be a mapping")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _parse_weekday(value) -> int:
    if isinstance(value, int):
        return value
    key = str(value).strip().lower()[:3]
    if key not in WEEKDAY_NAMES:
        raise ValueError(f"unrecognised weekday {value!r}")
    return WEEKDAY_NAMES.index(key)


def _parse_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value))


def nyse_calendar(first_year: int = 2000, last_year: int = 2035) -> SessionCalendar:
    """NYSE-like default profile: weekdays, 09:00-16:00 hourly stamps.

    Full-day holidays follow the exchange's standing rules plus the known
    unscheduled closures. The day after Thanksgiving, Christmas Eve and
    3 July close early; those sessions are listed as early closes.
    """
    rules = _NYSEHolidayRules()
    start = dt.date(first_year, 1, 1)
    end = dt.date(last_year, 12, 31)
    holidays = {ts.date() for ts in rules.holidays(start, end)}
    holidays.update(dt.date.fromisoformat(d) for d in _NYSE_SPECIAL_CLOSURES)

    early = set()
    for year in range(first_year, last_year + 1):
        thanksgiving = USThanksgivingDay.dates(dt.date(year, 1, 1), dt.date(year, 12, 31))[0].date()
        early.add(thanksgiving + dt.timedelta(days=1))
        for candidate in (dt.date(year, 12, 24), dt.date(year, 7, 3)):
            if candidate.weekday() < 5 and candidate not in holidays:
                early.add(candidate)
    return SessionCalendar(
        holidays=frozenset(holidays),
        early_closes=frozenset(early - holidays),
        name="nyse",
    )


def load_calendar(spec: str | Path | None) -> SessionCalendar:
    """Resolve a calendar argument: ``None``/``"nyse"`` or a profile path."""
    if spec is None or str(spec).lower() == "nyse":
        return nyse_calendar()
    return SessionCalendar.load(spec)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing hourly stamps covering every session of a day list."""

    timestamps: np.ndarray  # datetime64[m]
    calendar: SessionCalendar

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        if ts.ndim != 1:
            raise ValueError("grid timestamps must be one-dimensional")
        if ts.size > 1 and not np.all(np.diff(ts.astype(np.int64)) > 0):
            raise ValueError("grid timestamps must be strictly increasing")
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def from_days(cls, calendar: SessionCalendar, days) -> TimeGrid:
        hours = np.arange(calendar.session_start, calendar.session_end, dtype=np.int64)
        base = np.array([np.datetime64(d, "D") for d in days], dtype="datetime64[D]")
        stamps = base.astype("datetime64[m]")[:, None] + (hours * 60).astype("timedelta64[m]")[None, :]
        return cls(stamps.ravel(), calendar)

    def __len__(self) -> int:
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.calendar == other.calendar and np.array_equal(self.timestamps, other.timestamps)

    @property
    def hours_per_session(self) -> int:
        return self.calendar.hours_per_session

    @property
    def n_sessions(self) -> int:
        return len(self) // self.hours_per_session

    @property
    def days(self) -> np.ndarray:
        """Session dates, one per interval."""
        return self.timestamps[:: self.hours_per_session].astype("datetime64[D]")

    def session_of(self) -> np.ndarray:
        """Interval index of every grid position."""
        return np.arange(len(self)) // self.hours_per_session

    def minutes(self) -> np.ndarray:
        return self.timestamps.astype(np.int64)

    def truncated(self, n_positions: int) -> TimeGrid:
        return TimeGrid(self.timestamps[:n_positions], self.calendar)
