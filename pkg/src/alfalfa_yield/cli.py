"""Command-line entry point: ``alfalfa-yield <command> [options]``.

Commands: ingest, featurize, cv, tda, loso, synth, report.  Options given
on the command line win over the YAML config; the output directory can
also come from ``$ALFALFA_YIELD_OUTPUT_DIR``.  Every command writes
``manifest.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import os
import platform
import sys
from pathlib import Path

from . import __version__
from .config import OUTPUT_ENV, ConfigError, RunConfig, ingest, load_config, load_dataset, override
from .errors import AlfalfaError
from .experiments import emit_report, render_summary, run_loso, run_pooled, run_tda
from .featurize import TEMPERATURE_DEFINITION, write_samples
from .ingest import emit_diagnostics
from .synth import SynthConfig, generate

log = logging.getLogger("alfalfa_yield")

MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="master seed (required here or in the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for outer folds")
    common.add_argument("--families", type=_csv_list, help="comma list of dt,rf,knn,svm,nn,brr,lr")
    common.add_argument("--states", type=_csv_list, help="comma list of states to include")
    common.add_argument("--exclude-states", type=_csv_list, help="comma list of states to drop")
    common.add_argument("--granularity", choices=["percut", "annual"])
    common.add_argument("--samples-file", help="featurized samples file (skips raw ingest)")
    common.add_argument("--paper-literal-scaling", action="store_true",
                        help="fit one scaler on all rows before splitting (leaks; for comparison only)")
    common.add_argument("--outer-k", type=int)
    common.add_argument("--inner-k", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="alfalfa-yield", description="Alfalfa yield modelling pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("ingest", parents=[common], help="parse and join raw files")
    sub.add_parser("featurize", parents=[common], help="write the samples file")
    sub.add_parser("cv", parents=[common], help="pooled nested cross-validation")
    p = sub.add_parser("tda", parents=[common], help="train on source states, test on a target state")
    p.add_argument("--sources", type=_csv_list)
    p.add_argument("--target")
    sub.add_parser("loso", parents=[common], help="leave-one-state-out matrix")
    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n-states", type=int)
    p.add_argument("--samples-per-state", type=int)
    p.add_argument("--noise-sd", type=float)
    p = sub.add_parser("report", help="rebuild summary.txt from stored report files")
    p.add_argument("--dir", required=True, help="directory holding the report CSVs and manifest")
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    out = args.out or os.environ.get(OUTPUT_ENV) or None
    cfg = override(
        cfg,
        seed=args.seed,
        output_dir=Path(out) if out else None,
        families=tuple(args.families) if args.families else None,
        include_states=tuple(s.upper() for s in args.states) if args.states else None,
        exclude_states=tuple(s.upper() for s in args.exclude_states) if args.exclude_states else None,
        granularity=args.granularity,
        samples=Path(args.samples_file) if args.samples_file else None,
        scaling="global" if args.paper_literal_scaling else None,
        outer_k=args.outer_k,
        inner_k=args.inner_k,
        tda_sources=tuple(s.upper() for s in args.sources) if getattr(args, "sources", None) else None,
        tda_target=args.target.upper() if getattr(args, "target", None) else None,
    )
    return cfg


def design_flags(cfg: RunConfig, command: str) -> dict:
    """Every modelling choice in force, echoed into summaries for auditing."""
    flags = {
        "command": command,
        "seed": cfg.seed,
        "granularity": cfg.granularity,
        "families": list(cfg.families),
        "scaling": cfg.scaling,
        "outer_k": cfg.outer_k,
        "inner_k": cfg.inner_k,
        "inner_selection": "lowest mean MAE, ties to the earliest grid candidate",
        "svr_epsilon": 0.1,
        "tree_criterion": "mae",
        "mlp_activation": "relu",
        "temperature": TEMPERATURE_DEFINITION,
        "filters": "drop harvests in the sowing year; drop the first cut of each season",
        "ttest": "Welch, two-tailed, on per-fold R2",
        "states_included": list(cfg.include_states),
        "states_excluded": list(cfg.exclude_states),
        "max_gap": cfg.max_gap,
        "on_coverage_hole": cfg.on_coverage_hole,
    }
    if command == "tda":
        flags["tda_sources"] = list(cfg.tda_sources)
        flags["tda_target"] = cfg.tda_target
    return flags


def _versions() -> dict:
    import joblib
    import numba
    import numpy
    import scipy
    import yaml

    return {
        "alfalfa_yield": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "joblib": joblib.__version__,
        "pyyaml": yaml.__version__,
    }


def write_manifest(out_dir: Path, cfg: RunConfig, argv: list[str], command: str, extra: dict | None = None):
    doc = {
        "command": command,
        "argv": argv,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": cfg.to_jsonable(),
        "flags": design_flags(cfg, command),
        "versions": _versions(),
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        doc.update(extra)
    (out_dir / MANIFEST).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _cmd_ingest(cfg, out_dir, args):
    ing = ingest(cfg)
    emit_diagnostics(ing.diagnostics, out_dir / "ingest.diagnostics.csv")
    with (out_dir / "joined.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state", "location", "variety", "sown_date", "harvest_date", "window_start",
                    "window_end", "yield", "granularity", "station", "source_id"])
        for j in ing.joined:
            r = j.record
            start, end = r.window()
            w.writerow([r.state, r.location, r.variety, r.sown_date, r.harvest_date, start, end,
                        repr(r.yield_tpa), r.granularity.value, j.station, r.source_id])
    return {"filter_counts": ing.filter_counts, "records_kept": ing.records_kept, "joined": len(ing.joined),
            "diagnostics": len(ing.diagnostics)}


def _cmd_featurize(cfg, out_dir, args):
    data, diags = load_dataset(cfg)
    emit_diagnostics(diags, out_dir / "featurize.diagnostics.csv")
    write_samples(data, out_dir / "samples.csv")
    return {"state_counts": data.state_counts(), "diagnostics": len(diags)}


def _cmd_cv(cfg, out_dir, args):
    data, diags = load_dataset(cfg)
    emit_diagnostics(diags)
    res = run_pooled(data, cfg.families, cfg.seed, cfg.outer_k, cfg.inner_k, cfg.scaling, jobs=args.jobs)
    emit_report(out_dir, pooled=res, flags=design_flags(cfg, "cv"))
    return {"state_counts": res.state_counts}


def _cmd_tda(cfg, out_dir, args):
    if not cfg.tda_sources or not cfg.tda_target:
        raise UsageError("tda needs --sources and --target (or a 'tda' block in the config)")
    if cfg.tda_target in cfg.tda_sources:
        raise UsageError(f"target {cfg.tda_target} must not be one of the sources")
    data, diags = load_dataset(cfg)
    emit_diagnostics(diags)
    rep = run_tda(data, cfg.tda_sources, cfg.tda_target, cfg.families, cfg.seed, cfg.inner_k)
    emit_report(out_dir, tda=[rep], flags=design_flags(cfg, "tda"))
    return {"state_counts": rep.state_counts, "n_train": rep.n_train, "n_test": rep.n_test}


def _cmd_loso(cfg, out_dir, args):
    data, diags = load_dataset(cfg)
    emit_diagnostics(diags)
    reps = run_loso(data, cfg.families, cfg.seed, cfg.inner_k)
    emit_report(out_dir, tda=reps, flags=design_flags(cfg, "loso"))
    return {"state_counts": data.state_counts()}


def _cmd_synth(cfg, out_dir, args):
    spec = dict(cfg.synth)
    spec["seed"] = cfg.seed
    for key, val in (("n_states", args.n_states), ("samples_per_state", args.samples_per_state),
                     ("noise_sd", args.noise_sd), ("granularity", args.granularity)):
        if val is not None:
            spec[key] = val
    corpus = generate(SynthConfig.from_mapping(spec), out_dir)
    return {"state_counts": corpus.expected.state_counts()}


COMMANDS = {
    "ingest": _cmd_ingest,
    "featurize": _cmd_featurize,
    "cv": _cmd_cv,
    "tda": _cmd_tda,
    "loso": _cmd_loso,
    "synth": _cmd_synth,
}


def _cmd_report(args) -> None:
    d = Path(args.dir)
    if not d.is_dir():
        raise UsageError(f"no such directory: {d}")
    flags = None
    if (d / MANIFEST).exists():
        flags = json.loads((d / MANIFEST).read_text(encoding="utf-8")).get("flags")
    (d / "summary.txt").write_text(render_summary(d, flags), encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "report":
            _cmd_report(args)
            return 0
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = _resolve(args)
        cfg.validate(need_inputs=args.command != "synth")
        out_dir = Path(cfg.output_dir)
        if args.command == "tda" and cfg.tda_target and cfg.tda_target in cfg.tda_sources:
            raise UsageError(f"target {cfg.tda_target} must not be one of the sources")
        out_dir.mkdir(parents=True, exist_ok=True)
        extra = COMMANDS[args.command](cfg, out_dir, args)
        write_manifest(out_dir, cfg, argv, args.command, extra)
        return 0
    except (UsageError, ConfigError) as exc:
        print(f"alfalfa-yield: usage error: {exc}", file=sys.stderr)
        return 2
    except (AlfalfaError, OSError, ValueError) as exc:
        print(f"alfalfa-yield: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
