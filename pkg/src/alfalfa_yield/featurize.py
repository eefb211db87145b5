"""Turn joined harvest + weather records into model-ready samples.

Five features per sample, always in this order: Julian day of the harvest,
days since sowing, cumulative solar radiation and cumulative rainfall over
the weather window, and the window mean of the daily average temperature.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CoverageHoleError, MissingColumnError, NonPositiveIntervalError
from .ingest import Granularity, HarvestRecord, JoinedRecord, WeatherDay

FEATURE_NAMES = ("julian_day", "days_since_sown", "cum_solar", "cum_rain", "temp")
SAMPLE_COLUMNS = FEATURE_NAMES + ("yield", "state", "source_id")

# "temperature" has several plausible readings; the one used is echoed in every report
TEMPERATURE_DEFINITION = "window mean of daily average temperature (F)"


def julian_day(date: dt.date) -> int:
    return date.timetuple().tm_yday


def days_since_sown(sown: dt.date, harvest: dt.date) -> int:
    days = (harvest - sown).days
    if days <= 0:
        raise NonPositiveIntervalError(f"harvest {harvest} is not after sowing {sown}")
    return days


def window_aggregates(
    weather: Sequence[WeatherDay], window: tuple[dt.date, dt.date]
) -> tuple[float, float, float]:
    """Return (cum_solar, cum_rain, mean temp) over the days in (start, end].

    Every day of the window must be present exactly once, in order, with
    complete values.
    """
    start, end = window
    n_days = (end - start).days
    if n_days <= 0:
        raise CoverageHoleError(f"empty window ({start}, {end}]")
    days = [d for d in weather if start < d.date <= end]
    if len(days) != n_days:
        raise CoverageHoleError(f"window ({start}, {end}] has {len(days)} of {n_days} days")
    expected = start
    solar = rain = temp = 0.0
    for d in days:
        expected += dt.timedelta(days=1)
        if d.date != expected or not d.complete:
            raise CoverageHoleError(f"window ({start}, {end}] missing or incomplete at {expected}")
        solar += d.solar
        rain += d.precip
        temp += d.temp_avg
    return solar, rain, temp / n_days


def _season_key(r: HarvestRecord):
    return (r.state, r.location, r.variety, r.harvest_date.year)


def link_previous_cuts(records: Sequence[HarvestRecord]) -> list[HarvestRecord]:
    """Fill absent previous-cut dates from the preceding cut of the same plot-season.

    Plot-season = (state, location, variety, calendar year).  The first cut
    of a season keeps whatever the file said (usually nothing).
    """
    groups: dict[tuple, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        if r.granularity is Granularity.PER_CUT:
            groups[_season_key(r)].append(i)
    out = list(records)
    for idx in groups.values():
        idx.sort(key=lambda i: records[i].harvest_date)
        for before, i in zip(idx, idx[1:]):
            r = records[i]
            if r.prev_harvest_date is None and records[before].harvest_date < r.harvest_date:
                out[i] = replace(r, prev_harvest_date=records[before].harvest_date)
    return out


@dataclass(frozen=True)
class FilterCounts:
    same_year_as_sown: int = 0
    first_cut_of_season: int = 0

    def as_dict(self) -> dict[str, int]:
        return {"same_year_as_sown": self.same_year_as_sown, "first_cut_of_season": self.first_cut_of_season}


def filter_records(records: Sequence[HarvestRecord]) -> tuple[list[HarvestRecord], FilterCounts]:
    """Drop rows harvested in their sowing year and the first cut of every season.

    A per-cut row is a season's first cut when it is the earliest cut of its
    (state, location, variety, year) group and has no previous cut in that
    same year.  Annual rows are only subject to the sowing-year rule.
    Idempotent.
    """
    linked = link_previous_cuts(records)
    earliest: dict[tuple, dt.date] = {}
    for r in linked:
        if r.granularity is Granularity.PER_CUT:
            k = _season_key(r)
            if k not in earliest or r.harvest_date < earliest[k]:
                earliest[k] = r.harvest_date
    kept: list[HarvestRecord] = []
    n_same = n_first = 0
    for r in linked:
        if r.harvest_date.year == r.sown_date.year:
            n_same += 1
            continue
        if (
            r.granularity is Granularity.PER_CUT
            and r.harvest_date == earliest[_season_key(r)]
            and (r.prev_harvest_date is None or r.prev_harvest_date.year < r.harvest_date.year)
        ):
            n_first += 1
            continue
        kept.append(r)
    return kept, FilterCounts(n_same, n_first)


def annualize(records: Sequence[HarvestRecord]) -> list[HarvestRecord]:
    """Collapse per-cut rows into one annual total per (state, location, variety, year).

    The annual row is dated at the year's last cut.  Rows that are already
    annual pass through unchanged.
    """
    groups: dict[tuple, list[HarvestRecord]] = defaultdict(list)
    passthrough = []
    for r in records:
        if r.granularity is Granularity.ANNUAL:
            passthrough.append(r)
        else:
            groups[_season_key(r)].append(r)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        cuts = sorted(groups[key], key=lambda r: r.harvest_date)
        state, location, variety, year = key
        out.append(
            HarvestRecord(
                state=state,
                location=location,
                variety=variety,
                sown_date=min(c.sown_date for c in cuts),
                harvest_date=cuts[-1].harvest_date,
                prev_harvest_date=None,
                yield_tpa=math.fsum(c.yield_tpa for c in cuts),
                granularity=Granularity.ANNUAL,
                source_id=f"{state}/{location}/{variety}/{year}",
            )
        )
    return passthrough + out


def prepare_records(
    records: Sequence[HarvestRecord], mode: Granularity
) -> tuple[list[HarvestRecord], dict[str, int]]:
    """Apply the filtering rules (and annualization in annual mode)."""
    counts: Counter = Counter()
    if mode is Granularity.ANNUAL:
        rows = annualize(records)
    else:
        rows = [r for r in records if r.granularity is Granularity.PER_CUT]
        counts["annual_rows_in_percut_mode"] = len(records) - len(rows)
    kept, fc = filter_records(rows)
    counts.update(fc.as_dict())
    return kept, dict(counts)


@dataclass(frozen=True)
class Sample:
    julian_day: int
    days_since_sown: int
    cum_solar: float
    cum_rain: float
    temp: float
    target_yield: float
    state: str
    source_id: str

    def features(self) -> tuple[float, ...]:
        return (float(self.julian_day), float(self.days_since_sown), self.cum_solar, self.cum_rain, self.temp)


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.feature_names) != FEATURE_NAMES:
            raise ValueError(f"feature order must be {FEATURE_NAMES}")
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self):
        return len(self.samples)

    @property
    def X(self) -> np.ndarray:
        if not self.samples:
            return np.empty((0, len(FEATURE_NAMES)))
        return np.array([s.features() for s in self.samples], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([s.target_yield for s in self.samples], dtype=float)

    @property
    def states(self) -> np.ndarray:
        return np.array([s.state for s in self.samples], dtype=object)

    @property
    def source_ids(self) -> np.ndarray:
        return np.array([s.source_id for s in self.samples], dtype=object)

    def state_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(s.state for s in self.samples).items()))

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.samples[i] for i in indices), self.feature_names, self.provenance)

    def select_states(self, states: Iterable[str]) -> "Dataset":
        keep = {s.upper() for s in states}
        return Dataset(tuple(s for s in self.samples if s.state in keep), self.feature_names, self.provenance)


def build_samples(joined: Sequence[JoinedRecord], mode: Granularity) -> Dataset:
    """Compute the five features for every joined record.

    Assumes :func:`prepare_records` already ran.  The weather window of each
    record is the one reported by :meth:`HarvestRecord.window`.
    """
    samples = []
    for j in joined:
        r = j.record
        if r.granularity is not mode:
            raise ValueError(f"{r.source_id}: {r.granularity.value} row in {mode.value} mode")
        solar, rain, temp = window_aggregates(j.days, r.window())
        samples.append(
            Sample(
                julian_day=julian_day(r.harvest_date),
                days_since_sown=days_since_sown(r.sown_date, r.harvest_date),
                cum_solar=solar,
                cum_rain=rain,
                temp=temp,
                target_yield=r.yield_tpa,
                state=r.state,
                source_id=r.source_id,
            )
        )
    return Dataset(tuple(samples), provenance={"mode": mode.value, "temperature": TEMPERATURE_DEFINITION})


def write_samples(data: Dataset, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for s in data.samples:
            w.writerow(
                [s.julian_day, s.days_since_sown, repr(s.cum_solar), repr(s.cum_rain), repr(s.temp),
                 repr(s.target_yield), s.state, s.source_id]
            )


def read_samples(path: str | Path) -> Dataset:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SAMPLE_COLUMNS:
            raise MissingColumnError(f"{path}: header must be {','.join(SAMPLE_COLUMNS)}")
        samples = [
            Sample(
                julian_day=int(row["julian_day"]),
                days_since_sown=int(row["days_since_sown"]),
                cum_solar=float(row["cum_solar"]),
                cum_rain=float(row["cum_rain"]),
                temp=float(row["temp"]),
                target_yield=float(row["yield"]),
                state=row["state"],
                source_id=row["source_id"],
            )
            for row in reader
        ]
    return Dataset(tuple(samples), provenance={"source": str(path)})
