"""Run configuration (YAML) and the raw-files -> samples pipeline.

Example::

    seed: 42
    granularity: percut          # or annual
    station_map: stations.csv
    harvest:
      - path: harvest/GA.csv
        schema: {yield_unit: lb/acre, date_format: "%m/%d/%Y"}
    weather:
      - path: weather/ga_tifton.csv
    samples: null                # a featurized samples file skips ingest
    output_dir: results
    states: {include: [], exclude: [PA]}
    families: [dt, rf, knn, svm, brr, lr]
    scaling: fold                # global = one scaler over all rows
    outer_k: 10
    inner_k: 5
    max_gap: 5
    on_coverage_hole: drop
    tda: {sources: [KY, MS, WI], target: GA}
    synth: {seed: 42, n_states: 2, samples_per_state: 250}

Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .featurize import Dataset, build_samples, prepare_records, read_samples
from .ingest import (
    DEFAULT_MAX_GAP,
    Diagnostic,
    Granularity,
    HarvestSchema,
    StationMap,
    WeatherSchema,
    WeatherStore,
    join_weather,
    parse_harvest_file,
    parse_weather_file,
)
from .models import DEFAULT_FAMILIES, FAMILIES
from .selection import SCALING_MODES

OUTPUT_ENV = "ALFALFA_YIELD_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FileSpec:
    path: Path
    schema: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    seed: int | None = None
    granularity: str = "percut"
    harvest: tuple[FileSpec, ...] = ()
    weather: tuple[FileSpec, ...] = ()
    station_map: Path | None = None
    samples: Path | None = None
    output_dir: Path = Path("results")
    include_states: tuple[str, ...] = ()
    exclude_states: tuple[str, ...] = ()
    families: tuple[str, ...] = DEFAULT_FAMILIES
    scaling: str = "fold"
    outer_k: int = 10
    inner_k: int = 5
    max_gap: int = DEFAULT_MAX_GAP
    on_coverage_hole: str = "drop"
    tda_sources: tuple[str, ...] = ()
    tda_target: str | None = None
    synth: Mapping[str, Any] = field(default_factory=dict)

    def validate(self, need_inputs: bool = True) -> "RunConfig":
        if self.seed is None:
            raise ConfigError("a seed is required (--seed or 'seed:' in the config)")
        Granularity.parse(self.granularity)
        bad = [f for f in self.families if f not in FAMILIES]
        if bad:
            raise ConfigError(f"unknown model families {bad}; choose from {sorted(FAMILIES)}")
        if self.scaling not in SCALING_MODES:
            raise ConfigError(f"scaling must be one of {SCALING_MODES}")
        if self.on_coverage_hole not in ("raise", "drop"):
            raise ConfigError("on_coverage_hole must be 'raise' or 'drop'")
        if need_inputs:
            if self.samples is None and not self.harvest:
                raise ConfigError("no input: give 'samples' or 'harvest' + 'weather' + 'station_map'")
            for p in self.input_paths():
                if not p.exists():
                    raise ConfigError(f"input file not found: {p}")
        return self

    def input_paths(self) -> list[Path]:
        if self.samples is not None:
            return [self.samples]
        paths = [f.path for f in self.harvest] + [f.path for f in self.weather]
        if self.station_map is None:
            raise ConfigError("'station_map' is required when reading raw files")
        return paths + [self.station_map]

    def to_jsonable(self) -> dict:
        def conv(v):
            if isinstance(v, Path):
                return str(v)
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, Mapping):
                return {k: conv(x) for k, x in v.items()}
            return v

        return conv(asdict(self))

    def digest(self) -> str:
        text = json.dumps(self.to_jsonable(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def _paths(items, base: Path) -> tuple[FileSpec, ...]:
    out = []
    for item in items or ():
        if isinstance(item, str):
            item = {"path": item}
        out.append(FileSpec(base / item["path"], dict(item.get("schema") or {})))
    return tuple(out)


def _upper(items) -> tuple[str, ...]:
    if isinstance(items, str):
        items = [s for s in items.split(",") if s.strip()]
    return tuple(s.strip().upper() for s in items or ())


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML run configuration; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    base = path.parent
    known = {"seed", "granularity", "harvest", "weather", "station_map", "samples", "output_dir", "states",
             "families", "scaling", "outer_k", "inner_k", "max_gap", "on_coverage_hole", "tda", "synth"}
    extra = sorted(set(doc) - known)
    if extra:
        raise ConfigError(f"{path}: unknown keys {extra}")
    states = doc.get("states") or {}
    tda = doc.get("tda") or {}
    seed = doc.get("seed")
    return RunConfig(
        seed=None if seed is None else int(seed),
        granularity=str(doc.get("granularity", "percut")),
        harvest=_paths(doc.get("harvest"), base),
        weather=_paths(doc.get("weather"), base),
        station_map=base / doc["station_map"] if doc.get("station_map") else None,
        samples=base / doc["samples"] if doc.get("samples") else None,
        output_dir=base / doc.get("output_dir", "results"),
        include_states=_upper(states.get("include")),
        exclude_states=_upper(states.get("exclude")),
        families=tuple(doc.get("families") or DEFAULT_FAMILIES),
        scaling=str(doc.get("scaling", "fold")),
        outer_k=int(doc.get("outer_k", 10)),
        inner_k=int(doc.get("inner_k", 5)),
        max_gap=int(doc.get("max_gap", DEFAULT_MAX_GAP)),
        on_coverage_hole=str(doc.get("on_coverage_hole", "drop")),
        tda_sources=_upper(tda.get("sources")),
        tda_target=str(tda["target"]).upper() if tda.get("target") else None,
        synth=dict(doc.get("synth") or {}),
    )


def override(cfg: RunConfig, **changes) -> RunConfig:
    """Apply flag values that were actually given (``None`` means not given)."""
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})


@dataclass
class Ingested:
    joined: list
    records_kept: int
    filter_counts: dict[str, int]
    diagnostics: list[Diagnostic]


def ingest(cfg: RunConfig) -> Ingested:
    """Parse every raw file, filter the records and join them to weather."""
    mode = Granularity.parse(cfg.granularity)
    diags: list[Diagnostic] = []
    records = []
    for spec in cfg.harvest:
        recs, d = parse_harvest_file(spec.path, HarvestSchema.from_mapping(spec.schema))
        records.extend(recs)
        diags.extend(d)
    days = []
    for spec in cfg.weather:
        ds, d = parse_weather_file(spec.path, WeatherSchema.from_mapping(spec.schema))
        days.extend(ds)
        diags.extend(d)
    store = WeatherStore.from_raw(days, cfg.max_gap)
    station_map = StationMap.from_csv(cfg.station_map)
    kept, counts = prepare_records(records, mode)
    joined, d = join_weather(kept, store, station_map, cfg.on_coverage_hole)
    diags.extend(d)
    return Ingested(joined, len(kept), counts, diags)


def select_states(data: Dataset, cfg: RunConfig) -> Dataset:
    states = list(data.state_counts())
    if cfg.include_states:
        states = [s for s in states if s in cfg.include_states]
    states = [s for s in states if s not in cfg.exclude_states]
    return data.select_states(states)


def load_dataset(cfg: RunConfig) -> tuple[Dataset, list[Diagnostic]]:
    """Samples for a run: from a featurized file if given, else from raw files."""
    if cfg.samples is not None:
        data, diags = read_samples(cfg.samples), []
    else:
        ing = ingest(cfg)
        data, diags = build_samples(ing.joined, Granularity.parse(cfg.granularity)), ing.diagnostics
    return select_states(data, cfg), diags
