"""Pooled nested-CV and trivial domain adaptation runs, plus report files.

Report files (all UTF-8, ``\\n`` line endings, floats as ``repr``):

``pooled_report.csv``
    family, label, fold, hyperparameters, n_train, n_test, mae,
    percent_error, r, r2, seed, ref_fold.  One row per outer fold, then
    ``mean``, ``std`` and ``best`` rows per family.  ``best`` repeats the
    fold with the highest R^2; its index is in ``ref_fold``.
``ttest_matrix.csv``
    family_a, family_b, t, df, p.  Welch test on per-fold R^2, one row per
    unordered pair.
``tda_report.csv``
    sources, target, family, label, hyperparameters, n_train, n_test, mae,
    percent_error, r, r2, seed.  ``sources`` joins state codes with ``+``.
``summary.txt``
    Human-readable tables rebuilt from the CSV files plus the run flags.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptySourceError, PlanError, TooFewSamplesError, UnknownStateError
from .featurize import Dataset
from .models import DEFAULT_FAMILIES, FAMILIES, LABELS
from .selection import (
    CvReport,
    FitAudit,
    _fit_predict,
    derive_seed,
    grid_search,
    nested_cv,
    scaler_fit,
)
from .stats import MetricSet, TTestResult, compute_metrics, ttest_unpaired

POOLED_COLUMNS = ("family", "label", "fold", "hyperparameters", "n_train", "n_test", "mae", "percent_error",
                  "r", "r2", "seed", "ref_fold")
TTEST_COLUMNS = ("family_a", "family_b", "t", "df", "p")
TDA_COLUMNS = ("sources", "target", "family", "label", "hyperparameters", "n_train", "n_test", "mae",
               "percent_error", "r", "r2", "seed")
METRICS = ("mae", "percent_error", "r", "r2")


class Mode(str, enum.Enum):
    POOLED = "pooled"
    TDA = "tda"


@dataclass(frozen=True)
class ExperimentPlan:
    mode: Mode
    states: tuple[str, ...]
    families: tuple[str, ...] = DEFAULT_FAMILIES
    seed: int = 0
    granularity: str = "percut"
    target: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(s.upper() for s in self.states))
        if self.target is not None:
            object.__setattr__(self, "target", self.target.upper())
        unknown = [f for f in self.families if f not in FAMILIES]
        if unknown:
            raise PlanError(f"unknown model families {unknown}")
        if self.mode is Mode.TDA:
            if self.target is None:
                raise PlanError("a TDA plan needs a target state")
            if self.target in self.states:
                raise PlanError(f"target {self.target} is also a source state")
            if not self.states:
                raise EmptySourceError("a TDA plan needs at least one source state")

    @property
    def sources(self) -> tuple[str, ...]:
        return self.states

    def check(self, data: Dataset) -> None:
        present = set(data.state_counts())
        named = set(self.states) | ({self.target} if self.target else set())
        missing = sorted(named - present)
        if missing:
            raise UnknownStateError(f"states not in dataset: {missing}")


def _families(families) -> tuple[str, ...]:
    fams = tuple(families or DEFAULT_FAMILIES)
    unknown = [f for f in fams if f not in FAMILIES]
    if unknown:
        raise PlanError(f"unknown model families {unknown}")
    return fams


# pooled runs


@dataclass
class PooledResult:
    seed: int
    scaling: str
    reports: dict[str, CvReport]
    ttests: dict[tuple[str, str], TTestResult]
    state_counts: dict[str, int]


def run_pooled(data: Dataset, families=None, seed: int = 0, outer_k: int = 10, inner_k: int = 5,
               scaling: str = "fold", grids: Mapping | None = None, jobs: int = 1,
               audit: FitAudit | None = None) -> PooledResult:
    """Nested CV for each family on the pooled rows, then pairwise t-tests on fold R^2.

    Every family sees the same outer fold plan (it depends on ``seed`` only).
    """
    if len(data) == 0:
        raise EmptySourceError("pooled run on an empty dataset")
    fams = _families(families)
    X, y = data.X, data.y
    reports = {}
    for fam in fams:
        grid = None if grids is None else grids.get(fam)
        reports[fam] = nested_cv(X, y, fam, grid, outer_k, inner_k, seed, scaling, audit=audit, jobs=jobs)
    ttests = {}
    for i, a in enumerate(fams):
        for b in fams[i + 1:]:
            ra = reports[a].values("r2")
            rb = reports[b].values("r2")
            try:
                ttests[(a, b)] = ttest_unpaired(ra[~np.isnan(ra)], rb[~np.isnan(rb)])
            except TooFewSamplesError:
                ttests[(a, b)] = TTestResult(math.nan, math.nan, math.nan)
    return PooledResult(seed, scaling, reports, ttests, data.state_counts())


# trivial domain adaptation


@dataclass
class TdaFamilyResult:
    family: str
    params: dict
    metrics: MetricSet
    seed: int
    notes: list[str] = field(default_factory=list)


@dataclass
class TdaReport:
    sources: tuple[str, ...]
    target: str
    n_train: int
    n_test: int
    state_counts: dict[str, int]
    results: dict[str, TdaFamilyResult]


def run_tda(data: Dataset, sources: Iterable[str], target: str, families=None, seed: int = 0,
            inner_k: int = 5, grids: Mapping | None = None, audit: FitAudit | None = None) -> TdaReport:
    """Train on the source states as-is, evaluate once on every target row.

    Hyperparameters come from an ``inner_k``-fold grid search over source
    rows only, and the scaler is fit on source rows only.
    """
    plan = ExperimentPlan(Mode.TDA, tuple(sources), _families(families), seed, target=target)
    plan.check(data)
    fams = plan.families
    states = data.states
    train = np.flatnonzero(np.isin(states, plan.sources))
    test = np.flatnonzero(states == plan.target)
    if len(train) < inner_k:
        raise EmptySourceError(f"{len(train)} source rows; need at least {inner_k}")
    if len(test) < 1:
        raise UnknownStateError(f"no rows for target {plan.target}")
    X, y = data.X, data.y
    counts = data.state_counts()
    tag = f"tda:{'+'.join(plan.sources)}->{plan.target}"
    sc = scaler_fit(X[train])
    if audit is not None:
        audit.record("scaler_fit", train, stage="outer", outer=tag)
    Xtr, Xte = sc.transform(X[train]), sc.transform(X[test])
    results = {}
    for fam in fams:
        fam_seed = derive_seed(seed, "tda", plan.target, fam)
        grid = None if grids is None else grids.get(fam)
        gr = grid_search(X[train], y[train], fam, grid, inner_k, fam_seed, ids=train, audit=audit, tag=tag)
        if audit is not None:
            audit.record("model_fit", train, stage="outer", outer=tag, family=fam)
            audit.record("evaluate", test, stage="outer", outer=tag, family=fam)
        refit_seed = derive_seed(fam_seed, "refit")
        _, pred, notes = _fit_predict(fam, gr.best_params, refit_seed, Xtr, y[train], Xte)
        metrics = compute_metrics(y[test], pred, notes)
        results[fam] = TdaFamilyResult(fam, gr.best_params, metrics, refit_seed, notes)
    return TdaReport(plan.sources, plan.target, len(train), len(test),
                     {s: counts[s] for s in plan.sources + (plan.target,)}, results)


def run_loso(data: Dataset, families=None, seed: int = 0, inner_k: int = 5, grids: Mapping | None = None,
             audit: FitAudit | None = None) -> list[TdaReport]:
    """One TDA run per state, with every other state as a source."""
    states = list(data.state_counts())
    if len(states) < 2:
        raise PlanError(f"leave-one-state-out needs >= 2 states, got {states}")
    return [
        run_tda(data, [s for s in states if s != target], target, families, seed, inner_k, grids, audit)
        for target in states
    ]


# report files


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _params(p: Mapping) -> str:
    return json.dumps({k: list(v) if isinstance(v, tuple) else v for k, v in p.items()}, sort_keys=True)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def pooled_rows(result: PooledResult) -> list[list[str]]:
    rows = []
    for fam, rep in result.reports.items():
        label = LABELS[fam]
        for f in rep.folds:
            m = f.metrics
            rows.append([fam, label, str(f.fold), _params(f.params), f.n_train, f.n_test,
                         *(_num(getattr(m, k)) for k in METRICS), f.seed, ""])
        rows.append([fam, label, "mean", "", "", "", *(_num(rep.mean(k)) for k in METRICS), rep.seed, ""])
        rows.append([fam, label, "std", "", "", "", *(_num(rep.std(k)) for k in METRICS), rep.seed, ""])
        best = rep.best_fold
        if best is not None:
            m = best.metrics
            rows.append([fam, label, "best", _params(best.params), best.n_train, best.n_test,
                         *(_num(getattr(m, k)) for k in METRICS), best.seed, str(best.fold)])
    return rows


def ttest_rows(result: PooledResult) -> list[list[str]]:
    return [[a, b, _num(t.t), _num(t.df), _num(t.p)] for (a, b), t in result.ttests.items()]


def tda_rows(reports: Sequence[TdaReport]) -> list[list[str]]:
    rows = []
    for rep in reports:
        for fam, r in rep.results.items():
            m = r.metrics
            rows.append(["+".join(rep.sources), rep.target, fam, LABELS[fam], _params(r.params),
                         rep.n_train, rep.n_test, *(_num(getattr(m, k)) for k in METRICS), r.seed])
    return rows


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fmt(text: str, digits: int = 3) -> str:
    try:
        v = float(text)
    except (TypeError, ValueError):
        return "-"
    return "nan" if math.isnan(v) else f"{v:.{digits}f}"


def render_summary(out_dir: str | Path, flags: Mapping | None = None) -> str:
    """Summary text rebuilt from the report CSVs in ``out_dir``."""
    out_dir = Path(out_dir)
    buf = io.StringIO()
    pooled = _read_csv(out_dir / "pooled_report.csv")
    ttests = _read_csv(out_dir / "ttest_matrix.csv")
    tda = _read_csv(out_dir / "tda_report.csv")
    if flags:
        print("Run settings", file=buf)
        for k in sorted(flags):
            v = flags[k]
            print(f"  {k}: {json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v}", file=buf)
        print(file=buf)
    if pooled:
        print("Pooled nested cross-validation (best outer fold by R2, then mean +- std over folds)", file=buf)
        print(f"  {'Model':<6} {'R2':>7} {'MAE':>7}   {'mean R2':>8} {'sd':>6}   {'mean MAE':>8} {'sd':>6}",
              file=buf)
        by = {}
        for row in pooled:
            by.setdefault(row["label"], {})[row["fold"]] = row
        order = sorted(by, key=lambda lab: -float(by[lab].get("best", {}).get("r2", "-inf") or "-inf"))
        for lab in order:
            b, mn, sd = by[lab].get("best", {}), by[lab].get("mean", {}), by[lab].get("std", {})
            print(f"  {lab:<6} {_fmt(b.get('r2')):>7} {_fmt(b.get('mae')):>7}   {_fmt(mn.get('r2')):>8} "
                  f"{_fmt(sd.get('r2')):>6}   {_fmt(mn.get('mae')):>8} {_fmt(sd.get('mae')):>6}", file=buf)
        print(file=buf)
    if ttests:
        print("Pairwise Welch t-test on per-fold R2 (two-tailed p)", file=buf)
        for row in ttests:
            print(f"  {LABELS.get(row['family_a'], row['family_a']):<4} vs "
                  f"{LABELS.get(row['family_b'], row['family_b']):<4} t={_fmt(row['t'])} "
                  f"df={_fmt(row['df'], 1)} p={_fmt(row['p'], 4)}", file=buf)
        print(file=buf)
    if tda:
        print("Trivial domain adaptation: R2 on the target (rows: sources -> target)", file=buf)
        labels = list(dict.fromkeys(r["label"] for r in tda))
        print(f"  {'sources -> target':<28}" + "".join(f"{lab:>8}" for lab in labels) + "   train/test", file=buf)
        pairs = list(dict.fromkeys((r["sources"], r["target"]) for r in tda))
        for src, tgt in pairs:
            cells = {r["label"]: r for r in tda if r["sources"] == src and r["target"] == tgt}
            any_row = next(iter(cells.values()))
            line = f"  {src + ' -> ' + tgt:<28}" + "".join(f"{_fmt(cells[lab]['r2']) if lab in cells else '-':>8}"
                                                        for lab in labels)
            print(line + f"   {any_row['n_train']}/{any_row['n_test']}", file=buf)
        print(file=buf)
    return buf.getvalue()


def emit_report(out_dir: str | Path, pooled: PooledResult | None = None,
                tda: Sequence[TdaReport] | None = None, flags: Mapping | None = None) -> dict[str, Path]:
    """Write the report CSVs and ``summary.txt``; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if pooled is not None:
        written["pooled"] = out_dir / "pooled_report.csv"
        _write_csv(written["pooled"], POOLED_COLUMNS, pooled_rows(pooled))
        written["ttest"] = out_dir / "ttest_matrix.csv"
        _write_csv(written["ttest"], TTEST_COLUMNS, ttest_rows(pooled))
    if tda is not None:
        written["tda"] = out_dir / "tda_report.csv"
        _write_csv(written["tda"], TDA_COLUMNS, tda_rows(tda))
    written["summary"] = out_dir / "summary.txt"
    written["summary"].write_text(render_summary(out_dir, flags), encoding="utf-8")
    return written
