"""The analyses: in-lab vs in-field DPI, day-count and fixed-duration curves,
and the random-feature null baseline.

Every repetition ``r`` draws from seed ``base_seed ^ r``. Within a repetition,
the CV split uses that seed directly, while undersampling, window sampling and
random features use independent streams keyed on ``(seed_r, stream, ...)``.
Results are collected in repetition order, so worker count never changes the
output.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .enums import Condition
from .errors import DPIError, InsufficientVoicing, NotReached, WindowSearchExhausted
from .evaluation import (
    EvalReport,
    cross_validate_folds,
    repeat_cross_validation,
    repetition_seed,
    roc_curve,
    undersample_balance,
)
from .features import (
    Cohort,
    DayFeatures,
    SubjectData,
    aggregate_days,
    filter_valid_days,
    sample_fixed_duration_windows,
    summarize_day,
    summarize_window,
)
from .parallel import map_ordered
from .stats import cohens_d, fit_power_law, spearman_rho, threshold_day, welch_t_test

logger = logging.getLogger(__name__)

_UNDERSAMPLE_STREAM = 1
_FEATURE_STREAM = 2
_WINDOW_STREAM = 3

FEATURE_NAMES = ("h1h2_std", "nsam_skewness")


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seeds: dict
    conditions: dict = field(default_factory=dict)
    comparisons: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    power_fit: Optional[dict] = None
    exclusions: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    eval_reports: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "seeds": self.seeds,
            "conditions": self.conditions,
            "comparisons": self.comparisons,
            "curves": self.curves,
            "power_fit": self.power_fit,
            "exclusions": self.exclusions,
            "extra": self.extra,
        }


# -- feature assembly --------------------------------------------------------

def valid_day_features(subject: SubjectData, min_hours: float) -> list[DayFeatures]:
    """Summaries of the subject's valid field days, in monitoring order.

    Days shorter than ``min_hours`` or with fewer than three voiced frames are
    skipped.
    """
    days = sorted(filter_valid_days(subject.field_days, min_hours), key=lambda d: d.day_index)
    out = []
    for d in days:
        try:
            out.append(summarize_day(d))
        except InsufficientVoicing:
            logger.info("%s day %s skipped: too little voicing", subject.subject_id, d.day_index)
    return out


def _labels(subjects: Sequence[SubjectData]) -> np.ndarray:
    return np.array([s.group.label for s in subjects], dtype=int)


def feature_effect_sizes(X: np.ndarray, y: np.ndarray) -> dict:
    """Cohen's D (PVH minus control) for each DPI component."""
    out = {}
    for j, name in enumerate(FEATURE_NAMES):
        try:
            out[name] = cohens_d(X[y == 1, j], X[y == 0, j])
        except DPIError:
            out[name] = float("nan")
    return out


def _roc_points(report: EvalReport) -> list:
    scores, labels = report.pooled_scores
    try:
        fpr, tpr, _ = roc_curve(scores, labels)
    except DPIError:
        return []
    return [[float(a), float(b)] for a, b in zip(fpr, tpr)]


# -- Experiment 1 ------------------------------------------------------------

def run_experiment1(cohort: Cohort, lab_condition=Condition.LAB_RAINBOW, n_reps: int = 10,
                    seed: int = 0, config: Config = DEFAULT_CONFIG, workers: int = 1) -> ExperimentReport:
    """In-lab versus in-field DPI over the same subjects and the same CV seeds."""
    lab_condition = Condition(lab_condition)
    included, excluded = [], {}
    lab_rows, field_rows = [], []
    for s in cohort.subjects:
        lab = s.lab.get(lab_condition)
        if lab is None:
            excluded[s.subject_id] = f"MissingCondition: no {lab_condition.value} recording"
            continue
        days = valid_day_features(s, config.min_hours)
        if not days:
            excluded[s.subject_id] = "MissingCondition: no valid field day"
            continue
        try:
            lab_feat = summarize_day(lab)
        except DPIError as exc:
            excluded[s.subject_id] = f"{type(exc).__name__}: {exc}"
            continue
        included.append(s)
        lab_rows.append((lab_feat.h1h2_std, lab_feat.nsam_skewness))
        field_rows.append(aggregate_days(days, len(days), s.group).feature_vector)
    for sid, why in excluded.items():
        logger.warning("experiment 1 excludes %s (%s)", sid, why)

    y = _labels(included)
    X = {lab_condition.value: np.array(lab_rows), "field": np.array(field_rows)}
    ids = [s.subject_id for s in included]
    reports = {
        name: repeat_cross_validation(Xc, y, config.folds, n_reps, seed, ids=ids, workers=workers,
                                      **config.model_kw)
        for name, Xc in X.items()
    }
    report = ExperimentReport(
        "exp1",
        config.to_dict(),
        {"base_seed": int(seed), "n_reps": int(n_reps)},
        exclusions={"included": len(included), "excluded": excluded},
        eval_reports=reports,
    )
    for name, rep in reports.items():
        report.conditions[name] = {
            "summary": rep.summary(),
            "fold_accuracies": [float(a) for a in rep.fold_accuracies],
            "feature_effect_sizes": feature_effect_sizes(X[name], y),
            "roc": _roc_points(rep),
        }
    field_acc = reports["field"].fold_accuracies
    lab_acc = reports[lab_condition.value].fold_accuracies
    t, p = welch_t_test(field_acc, lab_acc)
    report.comparisons = {"field_vs_lab": {"t": t, "p": p, "cohens_d": cohens_d(field_acc, lab_acc)}}
    return report


# -- Experiment 2, shared pieces ---------------------------------------------

def _eligible(cohort: Cohort, max_days: int, min_hours: float):
    kept, per_subject_days, excluded = [], [], {}
    for s in cohort.subjects:
        days = valid_day_features(s, min_hours)
        if len(days) < max_days:
            excluded[s.subject_id] = f"NotEnoughDays: {len(days)} valid of {max_days}"
            continue
        kept.append(s)
        per_subject_days.append(days)
    return kept, per_subject_days, excluded


def _rep_metrics(X, y, k, rep_seed, r, model_kw):
    """Undersample, cross-validate; return (mean fold accuracy, effect sizes)."""
    keep = undersample_balance(y, seed=[rep_seed, _UNDERSAMPLE_STREAM])
    Xb, yb = X[keep], y[keep]
    folds = cross_validate_folds(Xb, yb, k, rep_seed, r, None, model_kw)
    accs = [f.metrics.accuracy for f in folds if not f.failed]
    eff = feature_effect_sizes(Xb, yb)
    return float(np.mean(accs)) if accs else float("nan"), eff


def _curve_summary(day_counts, acc, d_h, d_s, config: Config) -> tuple[dict, Optional[dict], dict]:
    """Accuracy and effect-size curves, Spearman and power-law fit."""
    n_reps = acc.shape[0]
    curves = {
        "days": [int(k) for k in day_counts],
        "accuracy_mean": [float(v) for v in acc.mean(axis=0)],
        "accuracy_std": [float(v) for v in (acc.std(axis=0, ddof=1) if n_reps > 1 else np.zeros(len(day_counts)))],
        "d_h1h2std": [float(v) for v in np.nanmean(d_h, axis=0)],
        "d_nsamskew": [float(v) for v in np.nanmean(d_s, axis=0)],
    }
    stats = {}
    xs = np.repeat(np.asarray(day_counts, dtype=float)[None, :], n_reps, axis=0).ravel()
    try:
        rho, p = spearman_rho(xs, acc.ravel())
        stats["spearman"] = {"rho": rho, "p": p, "pairing": "day count vs per-repetition mean accuracy"}
    except DPIError as exc:
        stats["spearman"] = {"error": str(exc)}
    fit = None
    if len(day_counts) >= 3:
        try:
            pf = fit_power_law(day_counts, 100.0 * acc.mean(axis=0), bracket=config.power_bracket)
            fit = pf.to_dict()
            fit["threshold_days"] = {}
            for thr in config.gain_thresholds:
                try:
                    fit["threshold_days"][str(thr)] = threshold_day(pf, thr)
                except NotReached:
                    fit["threshold_days"][str(thr)] = None
        except DPIError as exc:
            fit = {"error": str(exc)}
    return curves, fit, stats


# -- Experiment 2, analysis 1 ------------------------------------------------

def _daycount_rep(r, ctx):
    feats, y, base_seed, k, model_kw = ctx
    rs = repetition_seed(base_seed, r)
    out = [_rep_metrics(X, y, k, rs, r, model_kw) for X in feats]
    return [o[0] for o in out], [o[1]["h1h2_std"] for o in out], [o[1]["nsam_skewness"] for o in out]


def daycount_features(per_subject_days, n_days: int) -> np.ndarray:
    return np.array([aggregate_days(days, n_days).feature_vector for days in per_subject_days])


def run_experiment2_daycount(cohort: Cohort, max_days: int = 7, n_reps: int = 1000, seed: int = 0,
                             config: Config = DEFAULT_CONFIG, workers: int = 1,
                             day_counts: Optional[Sequence[int]] = None) -> ExperimentReport:
    """Accuracy as the first 1..max_days valid days are averaged into the features."""
    day_counts = list(day_counts or range(1, max_days + 1))
    kept, per_subject_days, excluded = _eligible(cohort, max_days, config.min_hours)
    y = _labels(kept)
    feats = [daycount_features(per_subject_days, k) for k in day_counts]
    ctx = (feats, y, seed, config.folds, config.model_kw)
    per_rep = map_ordered(_daycount_rep, range(n_reps), workers, ctx)
    acc = np.array([p[0] for p in per_rep])
    d_h = np.array([p[1] for p in per_rep])
    d_s = np.array([p[2] for p in per_rep])

    curves, fit, stats = _curve_summary(day_counts, acc, d_h, d_s, config)
    return ExperimentReport(
        "exp2a",
        config.to_dict(),
        {"base_seed": int(seed), "n_reps": int(n_reps)},
        comparisons=stats,
        curves=curves,
        power_fit=fit,
        exclusions={"included": len(kept), "excluded": excluded,
                    "groups": {"pvh": int(y.sum()), "control": int(len(y) - y.sum())}},
        extra={"repetition_accuracies": acc.tolist()},
    )


# -- Experiment 2, analysis 2 ------------------------------------------------

def _window_features(days, k, cfg: Config, seed_key, audit):
    """Average of per-window features for one subject, redrawing exhausted searches."""
    for attempt in range(cfg.window_redraws):
        try:
            windows = sample_fixed_duration_windows(
                days, k, cfg.total_hours, [*seed_key, attempt], cfg.min_voiced_frames, cfg.max_retries
            )
            break
        except WindowSearchExhausted:
            audit["redraws"] += 1
    else:
        raise WindowSearchExhausted(f"window search failed {cfg.window_redraws} times for key {seed_key}")
    by_day = {d.day_index: d for d in days}
    summaries = [summarize_window(by_day[w.day_index], w) for w in windows]
    audit["windows"] += len(windows)
    audit["min_voiced"] = min(audit["min_voiced"], min(w.voiced_frame_count for w in windows))
    return aggregate_days(summaries, len(summaries)).feature_vector


def _fixed_rep(r, ctx):
    subject_days, y, base_seed, day_counts, cfg = ctx
    rs = repetition_seed(base_seed, r)
    audit = {"windows": 0, "redraws": 0, "min_voiced": np.iinfo(np.int64).max}
    accs, dh, ds = [], [], []
    for k in day_counts:
        X = np.array([
            _window_features(days, k, cfg, (rs, _WINDOW_STREAM, k, i), audit)
            for i, days in enumerate(subject_days)
        ])
        acc, eff = _rep_metrics(X, y, cfg.folds, rs, r, cfg.model_kw)
        accs.append(acc)
        dh.append(eff["h1h2_std"])
        ds.append(eff["nsam_skewness"])
    return accs, dh, ds, audit


def run_experiment2_fixed_duration(cohort: Cohort, max_days: int = 7, total_hours: float = None,
                                   n_reps: int = 1000, seed: int = 0, config: Config = DEFAULT_CONFIG,
                                   workers: int = 1, day_counts: Optional[Sequence[int]] = None) -> ExperimentReport:
    """Accuracy with a fixed total duration spread over 1..max_days distinct days."""
    if total_hours is not None:
        config = replace(config, total_hours=total_hours)
    day_counts = list(day_counts or range(1, max_days + 1))
    kept, _, excluded = _eligible(cohort, max_days, config.min_hours)
    subject_days = [filter_valid_days(s.field_days, config.min_hours) for s in kept]
    y = _labels(kept)
    ctx = (subject_days, y, seed, day_counts, config)
    per_rep = map_ordered(_fixed_rep, range(n_reps), workers, ctx)
    acc = np.array([p[0] for p in per_rep])
    d_h = np.array([p[1] for p in per_rep])
    d_s = np.array([p[2] for p in per_rep])
    audits = [p[3] for p in per_rep]

    curves, fit, stats = _curve_summary(day_counts, acc, d_h, d_s, config)
    audit = {
        "windows": int(sum(a["windows"] for a in audits)),
        "redraws": int(sum(a["redraws"] for a in audits)),
        "min_voiced_frames_seen": int(min(a["min_voiced"] for a in audits)),
        "min_voiced_frames_required": int(config.min_voiced_frames),
    }
    return ExperimentReport(
        "exp2b",
        config.to_dict(),
        {"base_seed": int(seed), "n_reps": int(n_reps)},
        comparisons=stats,
        curves=curves,
        power_fit=fit,
        exclusions={"included": len(kept), "excluded": excluded},
        extra={"repetition_accuracies": acc.tolist(), "window_audit": audit},
    )


# -- null baseline -----------------------------------------------------------

@dataclass
class NullBaseline:
    n_pairs: int
    accuracies: np.ndarray  # mean k-fold accuracy of each repetition

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def upper_bound(self) -> float:
        """One-sided 95% bound: the 95th percentile of the null accuracies."""
        return float(np.percentile(self.accuracies, 95))

    def histogram(self, width_pp: float = 0.5) -> list[tuple[float, int]]:
        pct = 100.0 * self.accuracies
        lo = np.floor(pct.min() / width_pp) * width_pp
        hi = np.ceil(pct.max() / width_pp) * width_pp + width_pp
        edges = np.arange(lo, hi + 1e-9, width_pp)
        counts, edges = np.histogram(pct, bins=edges)
        return [(float(e), int(c)) for e, c in zip(edges[:-1], counts)]


def _random_features(rng, n, distribution):
    if distribution == "normal":
        return rng.standard_normal((n, 2))
    if distribution == "uniform":
        return rng.random((n, 2))
    raise ValueError(f"unknown null distribution {distribution!r}")


def _null_rep(r, ctx):
    n_pairs, base_seed, k, distribution, model_kw = ctx
    rs = repetition_seed(base_seed, r)
    X = _random_features(np.random.default_rng([rs, _FEATURE_STREAM]), 2 * n_pairs, distribution)
    y = np.r_[np.ones(n_pairs, dtype=int), np.zeros(n_pairs, dtype=int)]
    folds = cross_validate_folds(X, y, k, rs, r, None, model_kw)
    return float(np.mean([f.metrics.accuracy for f in folds if not f.failed]))


def run_null_baseline(n_pairs: int, n_feature_reps: int = 5000, k: int = 10, seed: int = 0,
                      distribution: str = "normal", workers: int = 1,
                      config: Config = DEFAULT_CONFIG) -> NullBaseline:
    """Cross-validated accuracy of the DPI pipeline fed two uninformative features.

    Each repetition draws fresh features for ``n_pairs`` PVH and ``n_pairs``
    control subjects and re-splits the folds.
    """
    if n_pairs < k:
        raise ValueError(f"n_pairs={n_pairs} is smaller than k={k}")
    ctx = (n_pairs, seed, k, distribution, config.model_kw)
    accs = map_ordered(_null_rep, range(n_feature_reps), workers, ctx)
    return NullBaseline(n_pairs, np.array(accs))


def null_report(null: NullBaseline, seed: int, config: Config = DEFAULT_CONFIG) -> ExperimentReport:
    return ExperimentReport(
        "null",
        config.to_dict(),
        {"base_seed": int(seed), "n_reps": int(len(null.accuracies))},
        conditions={"null": {"n_pairs": null.n_pairs, "mean": null.mean, "upper_bound_95": null.upper_bound}},
        curves={"null_hist": [[e, c] for e, c in null.histogram()]},
    )
