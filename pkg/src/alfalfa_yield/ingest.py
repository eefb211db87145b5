"""Parsing of variety-trial yield files and daily weather files.

Every source gets a column map (canonical field -> header in the file) and
unit declarations, so the differently laid out trial reports and NOAA/AEMN
downloads all normalize to tons/acre, inches, MJ/m^2 and degrees F at parse
time.  Rows that fail validation become :class:`Diagnostic` entries instead
of disappearing.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
import math
import sys
from collections import defaultdict
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    BadDateError,
    CoverageHoleError,
    DuplicateDayError,
    GapTooLargeError,
    MissingColumnError,
    UnmappedLocationError,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_GAP = 5


class Granularity(str, enum.Enum):
    PER_CUT = "percut"
    ANNUAL = "annual"

    @classmethod
    def parse(cls, text: str) -> "Granularity":
        key = text.strip().lower().replace("_", "").replace("-", "").replace(" ", "")
        if key in ("percut", "cut"):
            return cls.PER_CUT
        if key in ("annual", "year", "yearly"):
            return cls.ANNUAL
        raise ValueError(f"unknown granularity {text!r}")


class Quality(str, enum.Enum):
    OBSERVED = "observed"
    IMPUTED = "imputed"
    # parsed day with at least one blank field; never survives impute_gaps
    MISSING = "missing"


@dataclass(frozen=True)
class HarvestRecord:
    state: str
    location: str
    variety: str
    sown_date: dt.date
    harvest_date: dt.date
    prev_harvest_date: dt.date | None
    yield_tpa: float
    granularity: Granularity = Granularity.PER_CUT
    source_id: str = ""

    def window(self) -> tuple[dt.date, dt.date]:
        """Weather window as (exclusive start, inclusive end).

        Per-cut rows accumulate since the previous cut.  Rows without a
        previous cut (annual totals, or an unfiltered first cut) accumulate
        from January 1 of the harvest year.
        """
        if self.prev_harvest_date is not None:
            return self.prev_harvest_date, self.harvest_date
        return dt.date(self.harvest_date.year - 1, 12, 31), self.harvest_date


@dataclass(frozen=True)
class WeatherDay:
    station: str
    date: dt.date
    precip: float | None
    solar: float | None
    temp_avg: float | None
    quality: Quality = Quality.OBSERVED
    temp_min: float | None = None
    temp_max: float | None = None

    @property
    def complete(self) -> bool:
        return None not in (self.precip, self.solar, self.temp_avg)


@dataclass(frozen=True)
class Diagnostic:
    source: str
    line: int
    code: str
    message: str

    def as_line(self) -> str:
        return f"diagnostic source={self.source} line={self.line} code={self.code} msg={self.message}"


# unit converters to the canonical units

YIELD_UNITS = {
    "tons/acre": 1.0,
    "lb/acre": 1.0 / 2000.0,
    "kg/ha": 1.0 / 2241.70231,
    "t/ha": 1000.0 / 2241.70231,
}
PRECIP_UNITS = {"in": 1.0, "mm": 1.0 / 25.4, "cm": 1.0 / 2.54}
SOLAR_UNITS = {
    "MJ/m2": 1.0,
    "langley": 0.041868,
    "kWh/m2": 3.6,
    # daily mean irradiance
    "W/m2": 0.0864,
}
TEMP_UNITS = ("F", "C", "K")


def _to_fahrenheit(value: float, unit: str) -> float:
    if unit == "F":
        return value
    if unit == "C":
        return value * 9.0 / 5.0 + 32.0
    if unit == "K":
        return (value - 273.15) * 9.0 / 5.0 + 32.0
    raise ValueError(f"unknown temperature unit {unit!r}")


HARVEST_FIELDS = (
    "state",
    "location",
    "variety",
    "sown_date",
    "harvest_date",
    "prev_harvest_date",
    "yield",
    "granularity",
)
_HARVEST_OPTIONAL = {"prev_harvest_date"}

WEATHER_FIELDS = ("station", "date", "precip", "solar", "temp_avg", "temp_min", "temp_max")
_WEATHER_OPTIONAL = {"temp_min", "temp_max"}


@dataclass(frozen=True)
class HarvestSchema:
    """How one family of yield files maps onto :class:`HarvestRecord`.

    ``columns`` maps canonical field names to file headers; ``constants``
    supplies fields a file does not carry (e.g. a per-state file without a
    state column).
    """

    columns: Mapping[str, str] = field(default_factory=lambda: {f: f for f in HARVEST_FIELDS})
    constants: Mapping[str, str] = field(default_factory=dict)
    date_format: str = "%Y-%m-%d"
    yield_unit: str = "tons/acre"
    delimiter: str = ","

    @classmethod
    def from_mapping(cls, spec: Mapping | None) -> "HarvestSchema":
        if not spec:
            return cls()
        cols = {f: f for f in HARVEST_FIELDS}
        cols.update(spec.get("columns", {}))
        return cls(
            columns=cols,
            constants=dict(spec.get("constants", {})),
            date_format=spec.get("date_format", "%Y-%m-%d"),
            yield_unit=spec.get("yield_unit", "tons/acre"),
            delimiter=spec.get("delimiter", ","),
        )


@dataclass(frozen=True)
class WeatherSchema:
    columns: Mapping[str, str] = field(default_factory=lambda: {f: f for f in WEATHER_FIELDS})
    constants: Mapping[str, str] = field(default_factory=dict)
    date_format: str = "%Y-%m-%d"
    precip_unit: str = "in"
    solar_unit: str = "MJ/m2"
    temp_unit: str = "F"
    missing_values: tuple[str, ...] = ("", "NA", "NaN", "M", "-9999", "-99999", "-9999.0")
    delimiter: str = ","

    @classmethod
    def from_mapping(cls, spec: Mapping | None) -> "WeatherSchema":
        if not spec:
            return cls()
        cols = {f: f for f in WEATHER_FIELDS}
        cols.update(spec.get("columns", {}))
        kwargs = {
            k: spec[k]
            for k in ("date_format", "precip_unit", "solar_unit", "temp_unit", "delimiter")
            if k in spec
        }
        if "missing_values" in spec:
            kwargs["missing_values"] = tuple(spec["missing_values"])
        return cls(columns=cols, constants=dict(spec.get("constants", {})), **kwargs)


def _resolve_columns(header, schema_columns, constants, required, optional, source):
    """Return canonical-field -> header mapping for fields present in the file."""
    present = {}
    header = [h.strip() for h in header]
    for name in required:
        if name in constants:
            continue
        col = schema_columns.get(name, name)
        if col in header:
            present[name] = col
        elif name not in optional:
            raise MissingColumnError(f"{source}: column {col!r} for field {name!r} not in header {header}")
    return present


def _parse_date(text: str, fmt: str) -> dt.date:
    try:
        return dt.datetime.strptime(text.strip(), fmt).date()
    except ValueError as exc:
        raise BadDateError(f"unparseable date {text!r} (format {fmt})") from exc


def parse_harvest_file(
    path: str | Path, schema: HarvestSchema | None = None
) -> tuple[list[HarvestRecord], list[Diagnostic]]:
    """Parse a yield-trial file into records plus per-row diagnostics.

    Raises :class:`MissingColumnError` when the header does not carry the
    declared columns.  Bad rows (unparseable dates or numbers, negative
    yields, harvest not after sowing) are reported and excluded.
    """
    schema = schema or HarvestSchema()
    if schema.yield_unit not in YIELD_UNITS:
        raise ValueError(f"unknown yield unit {schema.yield_unit!r}")
    factor = YIELD_UNITS[schema.yield_unit]
    path = Path(path)
    records: list[HarvestRecord] = []
    diags: list[Diagnostic] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(f"{path}: empty file, no header") from None
        cols = _resolve_columns(
            header, schema.columns, schema.constants, HARVEST_FIELDS, _HARVEST_OPTIONAL, path
        )
        index = {h.strip(): i for i, h in enumerate(header)}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue

            def get(name):
                if name in schema.constants:
                    return schema.constants[name]
                if name not in cols:
                    return ""
                i = index[cols[name]]
                return row[i].strip() if i < len(row) else ""

            def bad(code, msg):
                diags.append(Diagnostic(str(path), lineno, code, msg))

            try:
                sown = _parse_date(get("sown_date"), schema.date_format)
                harvest = _parse_date(get("harvest_date"), schema.date_format)
                prev_text = get("prev_harvest_date")
                prev = _parse_date(prev_text, schema.date_format) if prev_text else None
            except BadDateError as exc:
                bad("BadDate", str(exc))
                continue
            try:
                value = float(get("yield"))
            except ValueError:
                bad("BadNumeric", f"yield {get('yield')!r} is not a number")
                continue
            if not math.isfinite(value):
                bad("BadNumeric", f"yield {value!r} is not finite")
                continue
            if value < 0:
                bad("NegativeYield", f"yield {value} < 0")
                continue
            try:
                gran = Granularity.parse(get("granularity"))
            except ValueError as exc:
                bad("BadGranularity", str(exc))
                continue
            if harvest <= sown:
                bad("BadInterval", f"harvest {harvest} not after sown {sown}")
                continue
            if prev is not None and prev >= harvest:
                bad("BadInterval", f"previous harvest {prev} not before harvest {harvest}")
                continue
            records.append(
                HarvestRecord(
                    state=get("state").upper(),
                    location=get("location"),
                    variety=get("variety"),
                    sown_date=sown,
                    harvest_date=harvest,
                    prev_harvest_date=prev,
                    yield_tpa=value * factor,
                    granularity=gran,
                    source_id=f"{path.name}:{lineno}",
                )
            )
    return records, diags


def write_harvest_file(records: Iterable[HarvestRecord], path: str | Path) -> None:
    """Write records in the default harvest schema (canonical units)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HARVEST_FIELDS)
        for r in records:
            w.writerow(
                [
                    r.state,
                    r.location,
                    r.variety,
                    r.sown_date.isoformat(),
                    r.harvest_date.isoformat(),
                    r.prev_harvest_date.isoformat() if r.prev_harvest_date else "",
                    repr(r.yield_tpa),
                    r.granularity.value,
                ]
            )


def parse_weather_file(
    path: str | Path, schema: WeatherSchema | None = None
) -> tuple[list[WeatherDay], list[Diagnostic]]:
    """Parse a daily weather file; result is sorted by (station, date).

    Blank or sentinel cells become ``None`` and the day is marked
    ``Quality.MISSING`` until :func:`impute_gaps` runs.  Non-numeric or
    negative precipitation/solar values are reported and treated as missing.
    A second row for an already-seen (station, date) raises
    :class:`DuplicateDayError`.
    """
    schema = schema or WeatherSchema()
    for unit, table in ((schema.precip_unit, PRECIP_UNITS), (schema.solar_unit, SOLAR_UNITS)):
        if unit not in table:
            raise ValueError(f"unknown unit {unit!r}")
    if schema.temp_unit not in TEMP_UNITS:
        raise ValueError(f"unknown temperature unit {schema.temp_unit!r}")
    missing = set(schema.missing_values)
    path = Path(path)
    days: dict[tuple[str, dt.date], WeatherDay] = {}
    diags: list[Diagnostic] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(f"{path}: empty file, no header") from None
        cols = _resolve_columns(
            header, schema.columns, schema.constants, WEATHER_FIELDS, _WEATHER_OPTIONAL | {"temp_avg"}, path
        )
        has = set(cols) | set(schema.constants)
        if "temp_avg" not in has and not {"temp_min", "temp_max"} <= has:
            raise MissingColumnError(f"{path}: need a temp_avg column or both temp_min and temp_max")
        index = {h.strip(): i for i, h in enumerate(header)}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue

            def get(name):
                if name in schema.constants:
                    return schema.constants[name]
                if name not in cols:
                    return ""
                i = index[cols[name]]
                return row[i].strip() if i < len(row) else ""

            try:
                day = _parse_date(get("date"), schema.date_format)
            except BadDateError as exc:
                diags.append(Diagnostic(str(path), lineno, "BadDate", str(exc)))
                continue
            station = get("station")

            def number(name, nonneg):
                text = get(name)
                if text in missing:
                    return None
                try:
                    v = float(text)
                except ValueError:
                    diags.append(Diagnostic(str(path), lineno, "BadNumeric", f"{name} {text!r}"))
                    return None
                if not math.isfinite(v) or (nonneg and v < 0):
                    diags.append(Diagnostic(str(path), lineno, "BadNumeric", f"{name} {text!r}"))
                    return None
                return v

            precip = number("precip", True)
            solar = number("solar", True)
            temps = {k: number(k, False) for k in ("temp_avg", "temp_min", "temp_max")}
            temps = {k: None if v is None else _to_fahrenheit(v, schema.temp_unit) for k, v in temps.items()}
            t_avg = temps["temp_avg"]
            if t_avg is None and temps["temp_min"] is not None and temps["temp_max"] is not None:
                t_avg = (temps["temp_min"] + temps["temp_max"]) / 2.0
            wd = WeatherDay(
                station=station,
                date=day,
                precip=None if precip is None else precip * PRECIP_UNITS[schema.precip_unit],
                solar=None if solar is None else solar * SOLAR_UNITS[schema.solar_unit],
                temp_avg=t_avg,
                temp_min=temps["temp_min"],
                temp_max=temps["temp_max"],
            )
            if not wd.complete:
                wd = replace(wd, quality=Quality.MISSING)
            key = (station, day)
            if key in days:
                raise DuplicateDayError(f"{path}:{lineno}: second record for station {station!r} on {day}")
            days[key] = wd
    return [days[k] for k in sorted(days)], diags


def write_weather_file(days: Iterable[WeatherDay], path: str | Path) -> None:
    """Write days in the default weather schema (canonical units)."""

    def cell(v):
        return "" if v is None else repr(v)

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WEATHER_FIELDS)
        for d in days:
            w.writerow(
                [d.station, d.date.isoformat(), cell(d.precip), cell(d.solar), cell(d.temp_avg),
                 cell(d.temp_min), cell(d.temp_max)]
            )


def _fill_field(values: list, dates: list[dt.date], name: str, station: str, max_gap: int, zero_fill: bool):
    n = len(values)
    out = list(values)
    i = 0
    while i < n:
        if values[i] is not None:
            i += 1
            continue
        j = i
        while j < n and values[j] is None:
            j += 1
        # values[i:j] missing
        if j - i > max_gap:
            raise GapTooLargeError(station, dates[i], dates[j - 1], name)
        left = values[i - 1] if i > 0 else None
        right = values[j] if j < n else None
        for k in range(i, j):
            if zero_fill:
                out[k] = 0.0
            elif left is not None and right is not None:
                frac = (k - i + 1) / (j - i + 1)
                out[k] = left + (right - left) * frac
            elif left is not None:
                out[k] = left
            elif right is not None:
                out[k] = right
            else:
                raise GapTooLargeError(station, dates[i], dates[j - 1], name)
        i = j
    return out


def impute_gaps(days: Sequence[WeatherDay], max_gap: int = DEFAULT_MAX_GAP) -> list[WeatherDay]:
    """Fill short gaps in each station's daily series.

    Missing calendar days inside a station's date range are materialized.
    Precipitation gaps become 0; temperature and solar radiation are linearly
    interpolated between the neighbouring observed days (copied from the one
    neighbour at a series edge).  Any run of more than ``max_gap`` missing
    days raises :class:`GapTooLargeError`.  Complete days are returned
    untouched.
    """
    by_station: dict[str, list[WeatherDay]] = defaultdict(list)
    for d in days:
        by_station[d.station].append(d)
    result: list[WeatherDay] = []
    for station in sorted(by_station):
        series = sorted(by_station[station], key=lambda d: d.date)
        first, last = series[0].date, series[-1].date
        span = (last - first).days + 1
        slots: list[WeatherDay | None] = [None] * span
        for d in series:
            slots[(d.date - first).days] = d
        dates = [first + dt.timedelta(days=k) for k in range(span)]
        filled = {}
        for name, zero in (("precip", True), ("solar", False), ("temp_avg", False)):
            vals = [getattr(s, name) if s is not None else None for s in slots]
            filled[name] = _fill_field(vals, dates, name, station, max_gap, zero)
        for k, s in enumerate(slots):
            if s is not None and s.complete:
                result.append(s)
                continue
            result.append(
                WeatherDay(
                    station=station,
                    date=dates[k],
                    precip=filled["precip"][k],
                    solar=filled["solar"][k],
                    temp_avg=filled["temp_avg"][k],
                    quality=Quality.IMPUTED,
                    temp_min=s.temp_min if s is not None else None,
                    temp_max=s.temp_max if s is not None else None,
                )
            )
    return result


@dataclass(frozen=True)
class StationBinding:
    state: str
    location: str
    station: str
    note: str = ""


@dataclass(frozen=True)
class StationMap:
    bindings: tuple[StationBinding, ...]

    def resolve(self, state: str, location: str) -> str:
        hits = {
            b.station
            for b in self.bindings
            if b.state.upper() == state.upper() and b.location.strip().lower() == location.strip().lower()
        }
        if len(hits) != 1:
            why = "no station" if not hits else f"ambiguous stations {sorted(hits)}"
            raise UnmappedLocationError(f"{state}/{location}: {why}")
        return hits.pop()

    @classmethod
    def from_csv(cls, path: str | Path) -> "StationMap":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            need = {"state", "location", "station"}
            if reader.fieldnames is None or not need <= set(reader.fieldnames):
                raise MissingColumnError(f"{path}: station map needs columns {sorted(need)}")
            return cls(
                tuple(
                    StationBinding(r["state"].strip().upper(), r["location"].strip(), r["station"].strip(),
                                   (r.get("note") or "").strip())
                    for r in reader
                )
            )

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state", "location", "station", "note"])
            for b in self.bindings:
                w.writerow([b.state, b.location, b.station, b.note])


class WeatherStore:
    """Imputed, gap-free daily series per station with O(1) window slicing."""

    def __init__(self, days: Iterable[WeatherDay]):
        grouped: dict[str, list[WeatherDay]] = defaultdict(list)
        for d in days:
            grouped[d.station].append(d)
        self._series: dict[str, list[WeatherDay]] = {}
        for station, series in grouped.items():
            series.sort(key=lambda d: d.date)
            self._series[station] = series

    @classmethod
    def from_raw(cls, days: Iterable[WeatherDay], max_gap: int = DEFAULT_MAX_GAP) -> "WeatherStore":
        return cls(impute_gaps(list(days), max_gap))

    def stations(self) -> list[str]:
        return sorted(self._series)

    def window(self, station: str, start_exclusive: dt.date, end_inclusive: dt.date) -> list[WeatherDay]:
        """Days in (start, end]; raises CoverageHoleError unless every day is present and complete."""
        if end_inclusive <= start_exclusive:
            raise CoverageHoleError(f"{station}: empty window ({start_exclusive}, {end_inclusive}]")
        series = self._series.get(station)
        if not series:
            raise CoverageHoleError(f"no weather for station {station!r}")
        first = series[0].date
        lo = (start_exclusive - first).days + 1
        hi = (end_inclusive - first).days + 1
        need = (end_inclusive - start_exclusive).days
        if lo < 0 or hi > len(series):
            raise CoverageHoleError(
                f"{station}: window ({start_exclusive}, {end_inclusive}] outside "
                f"{first}..{series[-1].date}"
            )
        out = series[lo:hi]
        if len(out) != need or out[0].date != start_exclusive + dt.timedelta(days=1) or out[-1].date != end_inclusive:
            raise CoverageHoleError(f"{station}: non-contiguous series in ({start_exclusive}, {end_inclusive}]")
        holes = [d.date for d in out if not d.complete]
        if holes:
            raise CoverageHoleError(f"{station}: incomplete days {holes[0]}..{holes[-1]}")
        return out


@dataclass(frozen=True)
class JoinedRecord:
    record: HarvestRecord
    station: str
    days: tuple[WeatherDay, ...]


def join_weather(
    records: Sequence[HarvestRecord],
    weather: WeatherStore,
    station_map: StationMap,
    on_hole: str = "raise",
) -> tuple[list[JoinedRecord], list[Diagnostic]]:
    """Pair each record with the daily weather of its feature window.

    An unmapped location always raises.  A record whose window is not fully
    covered raises :class:`CoverageHoleError`, or with ``on_hole="drop"`` is
    left out and reported.
    """
    if on_hole not in ("raise", "drop"):
        raise ValueError("on_hole must be 'raise' or 'drop'")
    joined: list[JoinedRecord] = []
    diags: list[Diagnostic] = []
    for rec in records:
        station = station_map.resolve(rec.state, rec.location)
        start, end = rec.window()
        try:
            days = weather.window(station, start, end)
        except CoverageHoleError as exc:
            if on_hole == "raise":
                raise CoverageHoleError(f"{rec.source_id or rec.location}: {exc}") from None
            diags.append(Diagnostic(rec.source_id, 0, "CoverageHole", str(exc)))
            continue
        joined.append(JoinedRecord(rec, station, tuple(days)))
    return joined, diags


def emit_diagnostics(diags: Sequence[Diagnostic], sidecar: str | Path | None = None, stream=None) -> None:
    """Write diagnostics as structured lines to stderr and optionally a CSV sidecar."""
    stream = stream if stream is not None else sys.stderr
    for d in diags:
        print(d.as_line(), file=stream)
    if sidecar is not None:
        with Path(sidecar).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f.name for f in fields(Diagnostic)])
            for d in diags:
                w.writerow([d.source, d.line, d.code, d.message])
