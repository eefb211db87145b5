"""Seeded synthetic corpus with a known yield response.

Each synthetic state gets one trial location bound to one weather station.
Daily weather is a seasonal cycle plus noise (shifted per state to mimic
climate differences).  Each variety is sown in its own year and cut four
times a year for the following three years.  Features are computed forward from
the generated weather with the same window rules the pipeline uses, and
the written yield is ``response(features)`` plus optional Gaussian noise.

Ground-truth response (tons/acre), see :func:`oracle_eval`::

    0.3 + 1.2 * (1 - exp(-cum_rain / 3))                    saturating in rain
        + 1.0 * max(1 - ((temp - 73) / 5)^2, -1)            optimum temperature
        + 0.001 * days_since_sown                          stand age
        + 0.0002 * cum_solar
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .featurize import Dataset, Sample, write_samples
from .ingest import Granularity, StationBinding, StationMap

ANNUAL_SHARES = (0.3, 0.3, 0.25, 0.15)


def oracle_eval(features: Sequence[float]) -> float:
    """True (noise-free) yield for a feature vector in the fixed feature order."""
    _jd, days, solar, rain, temp = (float(v) for v in features)
    return (
        0.3
        + 1.2 * (1.0 - math.exp(-rain / 3.0))
        + 1.0 * max(1.0 - ((temp - 73.0) / 5.0) ** 2, -1.0)
        + 0.001 * days
        + 0.0002 * solar
    )


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_states: int = 2
    samples_per_state: int = 250
    noise_sd: float = 0.0
    temp_shift: Sequence[float] = ()
    rain_scale: Sequence[float] = ()
    state_codes: Sequence[str] = ()
    first_year: int = 2008
    granularity: str = "percut"
    response: str = "default"

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.samples_per_state < 1 or self.n_states < 1:
            raise ValueError("need at least one state and one sample per state")
        if self.response != "default":
            raise ValueError(f"unknown response function {self.response!r}")
        Granularity.parse(self.granularity)

    @classmethod
    def from_mapping(cls, spec: Mapping | None) -> "SynthConfig":
        spec = dict(spec or {})
        for key in ("temp_shift", "rain_scale", "state_codes"):
            if key in spec:
                spec[key] = tuple(spec[key])
        return cls(**spec)

    def codes(self) -> list[str]:
        if self.state_codes:
            if len(self.state_codes) != self.n_states:
                raise ValueError("state_codes must have n_states entries")
            return [c.upper() for c in self.state_codes]
        return [f"S{chr(ord('A') + i)}" for i in range(self.n_states)]

    def shift(self, i: int) -> float:
        return float(self.temp_shift[i]) if self.temp_shift else 0.0

    def rain(self, i: int) -> float:
        return float(self.rain_scale[i]) if self.rain_scale else 1.0


@dataclass
class SynthCorpus:
    root: Path
    weather_files: list[Path]
    harvest_files: list[Path]
    station_map: Path
    config_file: Path
    expected: Dataset
    truth: dict[str, float] = field(default_factory=dict)


def _weather(rng, start: dt.date, n_days: int, temp_shift: float, rain_scale: float):
    doy = np.array([(start + dt.timedelta(days=k)).timetuple().tm_yday for k in range(n_days)], dtype=float)
    season = np.sin(2 * np.pi * (doy - 105.0) / 365.0)
    # mild day-to-day noise keeps window features close to functions of season and window length
    temp = 58.0 + temp_shift + 22.0 * season + rng.normal(0.0, 1.0, n_days)
    wet = rng.random(n_days) < 0.7
    precip = np.where(wet, rng.gamma(4.0, 0.108 / (0.7 * 4.0), n_days) * rain_scale, 0.0)
    solar = np.clip(17.0 + 8.0 * season + rng.normal(0.0, 1.0, n_days), 0.5, None)
    return precip, solar, temp


def _cut_dates(rng, year: int) -> list[dt.date]:
    out = []
    for month, day in ((4, 25), (6, 10), (7, 25), (9, 10)):
        base = dt.date(year, month, day)
        out.append(base + dt.timedelta(days=int(rng.integers(-10, 11))))
    return out


def generate(config: SynthConfig, out_dir: str | Path) -> SynthCorpus:
    """Write weather files, harvest files, a station map and a run config.

    Also returns the feature rows the pipeline is expected to recover
    (``expected``), keyed by the same source ids the parser assigns.
    """
    root = Path(out_dir)
    (root / "weather").mkdir(parents=True, exist_ok=True)
    (root / "harvest").mkdir(parents=True, exist_ok=True)
    mode = Granularity.parse(config.granularity)
    codes = config.codes()
    seeds = np.random.SeedSequence(config.seed).spawn(len(codes))
    bindings, weather_files, harvest_files, samples = [], [], [], []
    truth: dict[str, float] = {}

    for si, code in enumerate(codes):
        rng = np.random.default_rng(seeds[si])
        station = f"WS-{code}"
        location = f"Site{code}"
        bindings.append(StationBinding(code, location, station, "synthetic"))
        # enough seasons for the requested sample count (3 kept cuts or 1 annual row per plot-year)
        per_year = 1 if mode is Granularity.ANNUAL else 3
        plot_years_needed = math.ceil(config.samples_per_state / per_year)
        years_per_variety = 3
        n_varieties = math.ceil(plot_years_needed / years_per_variety)
        # each variety is sown in its own year so a state spans many seasons of weather
        first = config.first_year
        last = first + n_varieties - 1 + years_per_variety
        start = dt.date(first, 1, 1)
        n_days = (dt.date(last, 12, 31) - start).days + 1
        precip, solar, temp = _weather(rng, start, n_days, config.shift(si), config.rain(si))

        wpath = root / "weather" / f"{station}.csv"
        with wpath.open("w", encoding="utf-8") as fh:
            fh.write("station,date,precip,solar,temp_avg\n")
            for k in range(n_days):
                d = start + dt.timedelta(days=k)
                fh.write(f"{station},{d.isoformat()},{float(precip[k])!r},{float(solar[k])!r},{float(temp[k])!r}\n")
        weather_files.append(wpath)

        def window_features(lo_excl: dt.date, hi_incl: dt.date):
            a = (lo_excl - start).days + 1
            b = (hi_incl - start).days + 1
            return float(np.sum(solar[a:b])), float(np.sum(precip[a:b])), float(np.mean(temp[a:b]))

        rows = []
        kept = 0
        for v in range(n_varieties):
            if kept >= config.samples_per_state:
                break
            variety = f"V{v + 1:03d}"
            sow_year = first + v
            sown = dt.date(sow_year, 4, 1) + dt.timedelta(days=int(rng.integers(0, 30)))
            # one cut in the sowing year; always filtered out
            sown_cut = dt.date(sow_year, 9, 1) + dt.timedelta(days=int(rng.integers(0, 20)))
            rows.append([variety, sown, sown_cut, 1.0, None])
            for year in range(sow_year + 1, sow_year + 1 + years_per_variety):
                if kept >= config.samples_per_state:
                    break
                cuts = _cut_dates(rng, year)
                if mode is Granularity.ANNUAL:
                    last_cut = cuts[-1]
                    solar_w, rain_w, temp_w = window_features(dt.date(year - 1, 12, 31), last_cut)
                    feats = (last_cut.timetuple().tm_yday, (last_cut - sown).days, solar_w, rain_w, temp_w)
                    total = oracle_eval(feats) + (rng.normal(0.0, config.noise_sd) if config.noise_sd else 0.0)
                    total = float(max(total, 0.0))
                    sid = f"{code}/{location}/{variety}/{year}"
                    truth[sid] = oracle_eval(feats)
                    samples.append(Sample(feats[0], feats[1], solar_w, rain_w, temp_w, total, code, sid))
                    for share, c in zip(ANNUAL_SHARES, cuts):
                        rows.append([variety, sown, c, total * share, None])
                    kept += 1
                    continue
                prev = None
                for ci, c in enumerate(cuts):
                    if ci == 0:
                        rows.append([variety, sown, c, 1.0, None])
                        prev = c
                        continue
                    if kept >= config.samples_per_state:
                        break
                    solar_w, rain_w, temp_w = window_features(prev, c)
                    feats = (c.timetuple().tm_yday, (c - sown).days, solar_w, rain_w, temp_w)
                    value = oracle_eval(feats) + (rng.normal(0.0, config.noise_sd) if config.noise_sd else 0.0)
                    value = float(max(value, 0.0))
                    row = [variety, sown, c, value, feats]
                    rows.append(row)
                    prev = c
                    kept += 1

        hpath = root / "harvest" / f"{code}.csv"
        with hpath.open("w", encoding="utf-8") as fh:
            fh.write("state,location,variety,sown_date,harvest_date,prev_harvest_date,yield,granularity\n")
            for lineno, (variety, sown, cut, value, feats) in enumerate(rows, start=2):
                fh.write(f"{code},{location},{variety},{sown.isoformat()},{cut.isoformat()},,{value!r},percut\n")
                if feats is not None:
                    sid = f"{hpath.name}:{lineno}"
                    truth[sid] = oracle_eval(feats)
                    samples.append(Sample(feats[0], feats[1], feats[2], feats[3], feats[4], value, code, sid))
        harvest_files.append(hpath)

    smap = root / "stations.csv"
    StationMap(tuple(bindings)).to_csv(smap)
    expected = Dataset(tuple(samples), provenance={"synthetic": True})
    write_samples(expected, root / "expected_samples.csv")
    cfg = {
        "seed": int(config.seed),
        "granularity": mode.value,
        "station_map": "stations.csv",
        "harvest": [{"path": f"harvest/{p.name}"} for p in harvest_files],
        "weather": [{"path": f"weather/{p.name}"} for p in weather_files],
        "output_dir": "results",
        "synth": {
            "seed": int(config.seed),
            "n_states": config.n_states,
            "samples_per_state": config.samples_per_state,
            "noise_sd": float(config.noise_sd),
            "temp_shift": [float(v) for v in config.temp_shift],
            "rain_scale": [float(v) for v in config.rain_scale],
            "state_codes": codes,
            "first_year": config.first_year,
            "granularity": mode.value,
        },
    }
    cfg_path = root / "run.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg, sort_keys=False), encoding="utf-8")
    return SynthCorpus(root, weather_files, harvest_files, smap, cfg_path, expected, truth)
