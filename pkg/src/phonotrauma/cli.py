"""Command-line entry point (``phonotrauma <subcommand>``).

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_CONFIG, Config, load_config
from .enums import Condition, Group
from .errors import DPIError, ParseError
from .evaluation import repeat_cross_validation, roc_curve
from .experiments import (
    run_experiment1,
    run_experiment2_daycount,
    run_experiment2_fixed_duration,
    run_null_baseline,
    null_report,
    valid_day_features,
)
from .features import aggregate_days, summarize_day
from .fileio import (
    Manifest,
    RecordingEntry,
    SubjectEntry,
    TaggedRow,
    emit_plot_data,
    load_cohort,
    load_manifest,
    read_wav,
    write_frame_csv,
    write_manifest,
    write_results,
    write_subject_csv,
)
from .signal import extract_frame_features, fit_calibration
from .stats import fit_power_law, marginal_gain, threshold_day
from .errors import NotReached
from .synth import CohortSpec, DriftParams, gen_cohort

logger = logging.getLogger("phonotrauma")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    env = os.environ.get("DPI_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"DPI_SEED={env!r} is not an integer")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config overriding the defaults")
    p.add_argument("--seed", type=int, default=None, help="base seed (default: $DPI_SEED or 0)")
    p.add_argument("--reps", type=int, help="number of repetitions")
    p.add_argument("--folds", type=int, help="number of CV folds")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phonotrauma", description="Daily Phonotrauma Index toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    common = [_common()]

    p = sub.add_parser("extract", parents=common, help="WAV recordings -> frame-feature CSV")
    p.add_argument("--manifest", type=Path, required=True)

    p = sub.add_parser("features", parents=common, help="frame CSV/WAV -> subject feature table")
    p.add_argument("--manifest", type=Path, required=True)

    p = sub.add_parser("calibrate", parents=common, help="fit the NSAM -> SPL line")
    p.add_argument("--pairs", type=Path, required=True, help="CSV with columns nsam_db,spl_db")

    p = sub.add_parser("crossval", parents=common, help="repeated CV on a subject feature table")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--condition", default=Condition.FIELD.value, choices=[c.value for c in Condition])

    p = sub.add_parser("exp1", parents=common, help="in-lab vs in-field DPI")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--lab-condition", default=Condition.LAB_RAINBOW.value,
                   choices=[Condition.LAB_RAINBOW.value, Condition.LAB_SPONTANEOUS.value])

    for name, helptext in (("exp2a", "accuracy vs number of days"),
                           ("exp2b", "accuracy vs days at fixed total duration")):
        p = sub.add_parser(name, parents=common, help=helptext)
        p.add_argument("--manifest", type=Path, required=True)
        p.add_argument("--max-days", type=int)
        if name == "exp2b":
            p.add_argument("--total-hours", type=float)

    p = sub.add_parser("null", parents=common, help="random-feature null baseline")
    p.add_argument("--pairs", type=int, required=True, help="subjects per class")
    p.add_argument("--distribution", choices=["normal", "uniform"])

    p = sub.add_parser("synth", parents=common, help="write a synthetic cohort (manifest + frame CSVs)")
    p.add_argument("--spec", type=Path, help="JSON CohortSpec overriding the defaults below")
    p.add_argument("--n-pvh", type=int, default=20)
    p.add_argument("--n-control", type=int, default=20)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--day-hours", type=float, default=0.05)
    p.add_argument("--voicing-rate", type=float, default=0.3)
    p.add_argument("--no-drift", action="store_true", help="disable between-day drift")

    p = sub.add_parser("fit-curve", parents=common, help="power-law fit of accuracy vs days")
    p.add_argument("--points", type=Path, required=True, help="CSV with columns x,y (y in percent)")
    return parser


# -- helpers -----------------------------------------------------------------

def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else DEFAULT_CONFIG
    if args.folds is not None:
        cfg = replace(cfg, folds=args.folds)
    return cfg


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _finish(args, doc: dict) -> None:
    args.out.mkdir(parents=True, exist_ok=True)
    write_results(doc, args.out / "results.json")
    emit_plot_data(doc, args.out)
    _say(args, f"wrote {args.out / 'results.json'}")


def _read_two_columns(path: Path, names: tuple) -> np.ndarray:
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(names) <= set(reader.fieldnames):
                raise ParseError(f"{path}: expected columns {names}")
            return np.array([[float(r[n]) for n in names] for r in reader])
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


# -- subcommands -------------------------------------------------------------

def cmd_extract(args, cfg):
    manifest = load_manifest(args.manifest)
    out = args.out
    frames_dir = out / "frames"
    entries = []
    for s in manifest.subjects:
        tagged, recs = [], []
        for rec in s.recordings:
            if rec.path.suffix.lower() != ".wav":
                recs.append(rec)
                continue
            audio = read_wav(rec.path, s.id, rec.condition, rec.day)
            rows = extract_frame_features(audio, cfg.voicing, cfg.harmonics, cfg.frame_ms)
            tagged.extend(TaggedRow(s.id, rec.condition, rec.day, r) for r in rows)
            recs.append(RecordingEntry(frames_dir / f"{s.id}.csv", rec.condition, rec.day))
        if tagged:
            write_frame_csv(tagged, frames_dir / f"{s.id}.csv")
        entries.append(SubjectEntry(s.id, s.group, recs, s.pair_id))
    write_manifest(Manifest(entries, out.resolve()), out / "manifest.json")
    _say(args, f"wrote {out / 'manifest.json'}")


def cmd_features(args, cfg):
    cohort = load_cohort(load_manifest(args.manifest), cfg)
    lines = ["subject_id,group,pair_id,condition,h1h2_std,nsam_skewness,days_used"]
    for s in cohort.subjects:
        rows = []
        for cond, day in sorted(s.lab.items(), key=lambda kv: kv[0].value):
            try:
                f = summarize_day(day)
            except DPIError as exc:
                logger.warning("%s %s skipped: %s", s.subject_id, cond.value, exc)
                continue
            rows.append((cond.value, f.h1h2_std, f.nsam_skewness, 1))
        days = valid_day_features(s, cfg.min_hours)
        if days:
            agg = aggregate_days(days, len(days), s.group)
            rows.append((Condition.FIELD.value, *agg.feature_vector, agg.days_used))
        for cond, h, k, n in rows:
            lines.append(f"{s.subject_id},{s.group.value},{s.pair_id or ''},{cond},{h:.9g},{k:.9g},{n}")
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "subject_features.csv").write_text("\n".join(lines) + "\n")
    _say(args, f"wrote {args.out / 'subject_features.csv'} ({len(lines) - 1} rows)")


def cmd_calibrate(args, cfg):
    model = fit_calibration(_read_two_columns(args.pairs, ("nsam_db", "spl_db")))
    doc = {"slope": model.slope, "intercept": model.intercept, "residual_rms": model.residual_rms}
    args.out.mkdir(parents=True, exist_ok=True)
    write_results({"experiment": "calibration", "calibration": doc}, args.out / "calibration.json")
    _say(args, f"slope={model.slope:.6g} intercept={model.intercept:.6g} residual_rms={model.residual_rms:.6g}")


def cmd_crossval(args, cfg):
    try:
        with args.features.open(newline="") as fh:
            table = [r for r in csv.DictReader(fh) if r["condition"] == args.condition]
        X = np.array([[float(r["h1h2_std"]), float(r["nsam_skewness"])] for r in table])
        y = np.array([Group(r["group"]).label for r in table])
    except (OSError, KeyError, ValueError) as exc:
        raise ParseError(f"cannot read {args.features}: {exc}") from exc
    reps = args.reps or cfg.exp1_reps
    report = repeat_cross_validation(X, y, cfg.folds, reps, args.seed, ids=[r["subject_id"] for r in table],
                                     workers=args.workers, **cfg.model_kw)
    scores, labels = report.pooled_scores
    fpr, tpr, _ = roc_curve(scores, labels)
    doc = {
        "experiment": "crossval",
        "config": cfg.to_dict(),
        "seeds": {"base_seed": args.seed, "n_reps": reps},
        "conditions": {args.condition: {**report.to_dict(), "roc": [[a, b] for a, b in zip(fpr, tpr)]}},
    }
    s = report.summary()
    _say(args, f"accuracy {100 * s['accuracy']['mean']:.1f} +/- {100 * s['accuracy']['std']:.1f} %, "
               f"AUC {s['auc']:.3f}")
    _finish(args, doc)


def cmd_exp1(args, cfg):
    cohort = load_cohort(load_manifest(args.manifest), cfg)
    rep = run_experiment1(cohort, args.lab_condition, args.reps or cfg.exp1_reps, args.seed, cfg, args.workers)
    for name, c in rep.conditions.items():
        a = c["summary"]["accuracy"]
        _say(args, f"{name}: accuracy {100 * a['mean']:.1f} +/- {100 * a['std']:.1f} %")
    cmp_ = rep.comparisons["field_vs_lab"]
    _say(args, f"field vs lab: t={cmp_['t']:.3f} p={cmp_['p']:.3g} D={cmp_['cohens_d']:.2f}")
    _finish(args, rep.to_dict())


def _print_curve(args, rep):
    c = rep.curves
    for k, m in zip(c["days"], c["accuracy_mean"]):
        _say(args, f"days={k}: accuracy {100 * m:.2f} %")
    if rep.power_fit and "a" in rep.power_fit:
        f = rep.power_fit
        _say(args, f"power fit: a={f['a']:.4g} b={f['b']:.4g} c={f['c']:.4g}; thresholds {f['threshold_days']}")


def cmd_exp2a(args, cfg):
    cohort = load_cohort(load_manifest(args.manifest), cfg)
    rep = run_experiment2_daycount(cohort, args.max_days or cfg.max_days, args.reps or cfg.exp2_reps,
                                   args.seed, cfg, args.workers)
    _print_curve(args, rep)
    _finish(args, rep.to_dict())


def cmd_exp2b(args, cfg):
    cohort = load_cohort(load_manifest(args.manifest), cfg)
    rep = run_experiment2_fixed_duration(cohort, args.max_days or cfg.max_days, args.total_hours,
                                         args.reps or cfg.exp2_reps, args.seed, cfg, args.workers)
    _print_curve(args, rep)
    _finish(args, rep.to_dict())


def cmd_null(args, cfg):
    dist = args.distribution or cfg.null_distribution
    null = run_null_baseline(args.pairs, args.reps or cfg.null_reps, cfg.folds, args.seed, dist,
                             args.workers, cfg)
    _say(args, f"null mean accuracy {100 * null.mean:.2f} %, one-sided 95% bound {100 * null.upper_bound:.2f} %")
    _finish(args, null_report(null, args.seed, cfg).to_dict())


def cmd_synth(args, cfg):
    if args.spec:
        try:
            spec = CohortSpec.from_dict(json.loads(args.spec.read_text()))
        except (OSError, ValueError, TypeError) as exc:
            raise ParseError(f"cannot read spec {args.spec}: {exc}") from exc
    else:
        drift = DriftParams() if args.no_drift else DriftParams(h1h2_std_logsd=0.25, nsam_shape_sd=2.0)
        spec = CohortSpec(n_pvh=args.n_pvh, n_control=args.n_control, days_per_subject=args.days,
                          day_hours=args.day_hours, voicing_rate=args.voicing_rate, drift=drift,
                          lab_conditions=(Condition.LAB_RAINBOW, Condition.LAB_SPONTANEOUS),
                          seed=args.seed)
    cohort = gen_cohort(spec)
    out = args.out
    entries = []
    for s in cohort.subjects:
        path = out / "frames" / f"{s.subject_id}.csv"
        write_subject_csv(s, path)
        recs = [RecordingEntry(path, c, None) for c in s.lab]
        recs += [RecordingEntry(path, Condition.FIELD, d.day_index) for d in s.field_days]
        entries.append(SubjectEntry(s.subject_id, s.group, recs, s.pair_id))
    write_manifest(Manifest(entries, out.resolve()), out / "manifest.json")
    # thresholds scaled to the synthetic day length so the experiments accept these days
    scale = spec.day_hours / cfg.min_hours
    run_cfg = replace(cfg, min_hours=spec.day_hours, total_hours=spec.day_hours,
                      min_voiced_frames=max(3, int(cfg.min_voiced_frames * scale)))
    (out / "config.json").write_text(json.dumps(run_cfg.to_dict(), indent=1, sort_keys=True) + "\n")
    (out / "cohort_spec.json").write_text(json.dumps(spec.to_dict(), indent=1, sort_keys=True) + "\n")
    _say(args, f"wrote {len(entries)} subjects to {out / 'manifest.json'} (run config: {out / 'config.json'})")


def cmd_fit_curve(args, cfg):
    pts = _read_two_columns(args.points, ("x", "y"))
    fit = fit_power_law(pts[:, 0], pts[:, 1], bracket=cfg.power_bracket)
    thresholds = {}
    for thr in cfg.gain_thresholds:
        try:
            thresholds[str(thr)] = threshold_day(fit, thr)
        except NotReached:
            thresholds[str(thr)] = None
    gains = [marginal_gain(fit, int(x)) for x in sorted(set(pts[:, 0].astype(int)))]
    doc = {"experiment": "fit-curve", "power_fit": {**fit.to_dict(), "threshold_days": thresholds},
           "gains": gains}
    _say(args, f"y = {fit.a:.6g} * x^{fit.b:.6g} + {fit.c:.6g} (sse {fit.sse:.3g}); thresholds {thresholds}")
    args.out.mkdir(parents=True, exist_ok=True)
    write_results(doc, args.out / "fit.json")


COMMANDS = {
    "extract": cmd_extract,
    "features": cmd_features,
    "calibrate": cmd_calibrate,
    "crossval": cmd_crossval,
    "exp1": cmd_exp1,
    "exp2a": cmd_exp2a,
    "exp2b": cmd_exp2b,
    "null": cmd_null,
    "synth": cmd_synth,
    "fit-curve": cmd_fit_curve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.workers < 1 or (args.reps is not None and args.reps < 1):
            raise UsageError("--workers and --reps must be positive")
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except (UsageError, ValueError) as exc:
        print(f"phonotrauma: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DPIError, OSError) as exc:
        print(f"phonotrauma: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
