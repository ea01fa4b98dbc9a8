from dataclasses import replace

import numpy as np
import pytest

from phonotrauma.config import DEFAULT_CONFIG
from phonotrauma.enums import Condition
from phonotrauma.evaluation import repetition_seed, run_cross_validation, undersample_balance
from phonotrauma.experiments import (
    daycount_features,
    run_experiment1,
    run_experiment2_daycount,
    run_experiment2_fixed_duration,
    run_null_baseline,
    null_report,
    valid_day_features,
)
from phonotrauma.features import Cohort, DayFrames, SubjectData
from phonotrauma.synth import CohortSpec, DriftParams, GroupParams, gen_cohort

CFG = replace(DEFAULT_CONFIG, min_hours=0.05, total_hours=0.05, min_voiced_frames=50)
SMALL = dict(day_hours=0.05, voicing_rate=0.3, days_per_subject=7)
DRIFT = DriftParams(h1h2_std_logsd=0.25, nsam_shape_sd=2.0)


@pytest.fixture(scope="module")
def cohort():
    return gen_cohort(CohortSpec(n_pvh=20, n_control=24, seed=1, drift=DRIFT, **SMALL))


def test_exp1_field_beats_noise_lab():
    noise = GroupParams(h1h2_std=3.0, nsam_shape=-2.0)
    spec = CohortSpec(
        n_pvh=30, n_control=30, seed=2, pvh=GroupParams(h1h2_std=2.0, nsam_shape=-4.0),
        control=GroupParams(h1h2_std=3.2, nsam_shape=0.0), pvh_lab=noise, control_lab=noise, **SMALL,
    )
    rep = run_experiment1(gen_cohort(spec), Condition.LAB_RAINBOW, n_reps=10, seed=0, config=CFG)
    field = rep.conditions["field"]["summary"]["accuracy"]["mean"]
    lab = rep.conditions["lab_rainbow"]["summary"]["accuracy"]["mean"]
    assert field > lab
    assert rep.comparisons["field_vs_lab"]["cohens_d"] > 0.8
    assert len(rep.conditions["field"]["fold_accuracies"]) == 100
    assert len(rep.conditions["lab_rainbow"]["fold_accuracies"]) == 100
    roc = rep.conditions["field"]["roc"]
    assert roc[0] == [0.0, 0.0] and roc[-1] == [1.0, 1.0]


def test_exp1_identical_conditions():
    # lab recording identical to the single field day: both conditions see the same features
    base = gen_cohort(CohortSpec(n_pvh=15, n_control=15, seed=3, **{**SMALL, "days_per_subject": 1}))
    subjects = []
    for s in base.subjects:
        d = s.field_days[0]
        lab = DayFrames(s.subject_id, None, d.n_frames, d.voiced_idx, d.h1h2, d.nsam, Condition.LAB_RAINBOW)
        subjects.append(SubjectData(s.subject_id, s.group, [d], {Condition.LAB_RAINBOW: lab}))
    rep = run_experiment1(Cohort(subjects), n_reps=3, seed=4, config=CFG)
    assert rep.comparisons["field_vs_lab"]["t"] == 0.0
    assert rep.comparisons["field_vs_lab"]["p"] == 1.0


def test_exp1_excludes_missing_conditions(cohort):
    subjects = list(cohort.subjects)
    stripped = SubjectData("X001", subjects[0].group, subjects[0].field_days, {})
    rep = run_experiment1(Cohort(subjects + [stripped]), n_reps=1, seed=0, config=CFG)
    assert rep.exclusions["included"] == len(subjects)
    assert "X001" in rep.exclusions["excluded"]


def test_exp2a_structure_and_determinism(cohort):
    a = run_experiment2_daycount(cohort, 7, n_reps=3, seed=11, config=CFG)
    b = run_experiment2_daycount(cohort, 7, n_reps=3, seed=11, config=CFG)
    assert a.to_dict() == b.to_dict()
    assert a.curves["days"] == list(range(1, 8))
    assert len(a.curves["accuracy_mean"]) == 7
    assert a.exclusions["groups"] == {"pvh": 20, "control": 24}
    assert set(a.power_fit) >= {"a", "b", "c", "sse", "threshold_days"}
    assert a.comparisons["spearman"]["pairing"].startswith("day count")
    par = run_experiment2_daycount(cohort, 7, n_reps=3, seed=11, config=CFG, workers=2)
    assert par.to_dict() == a.to_dict()


def test_exp2a_exclusion_accounting(cohort):
    short = gen_cohort(CohortSpec(n_pvh=2, n_control=0, seed=9, **{**SMALL, "days_per_subject": 4}))
    mixed = Cohort(cohort.subjects + [replace_id(s, f"Q{i}") for i, s in enumerate(short.subjects)])
    rep = run_experiment2_daycount(mixed, 7, n_reps=1, seed=0, config=CFG)
    assert rep.exclusions["included"] + len(rep.exclusions["excluded"]) == len(mixed)
    assert set(rep.exclusions["excluded"]) == {"Q0", "Q1"}


def replace_id(s, sid):
    return SubjectData(sid, s.group, s.field_days, s.lab, None)


def test_exp2a_k7_matches_direct_run(cohort):
    seed = 5
    rep = run_experiment2_daycount(cohort, 7, n_reps=2, seed=seed, config=CFG)
    per_subject = [valid_day_features(s, CFG.min_hours) for s in cohort.subjects]
    X = daycount_features(per_subject, 7)
    y = np.array([s.group.label for s in cohort.subjects])
    for r in range(2):
        rs = repetition_seed(seed, r)
        keep = undersample_balance(y, [rs, 1])
        direct = run_cross_validation(X[keep], y[keep], 10, seed=rs, repetition=r)
        assert rep.extra["repetition_accuracies"][r][6] == pytest.approx(direct.fold_accuracies.mean(), abs=0)


def test_exp2a_flat_without_variation():
    # every day of a subject is the same day: more days carry no new information
    base = gen_cohort(CohortSpec(n_pvh=15, n_control=15, seed=6, **SMALL))
    subjects = []
    for s in base.subjects:
        d0 = s.field_days[0]
        days = [DayFrames(s.subject_id, i, d0.n_frames, d0.voiced_idx, d0.h1h2, d0.nsam) for i in range(7)]
        subjects.append(SubjectData(s.subject_id, s.group, days))
    rep = run_experiment2_daycount(Cohort(subjects), 7, n_reps=3, seed=0, config=CFG)
    acc = rep.curves["accuracy_mean"]
    assert max(acc) == min(acc)
    assert rep.power_fit["a"] == 0.0


def test_exp2b_windows_and_audit(cohort):
    rep = run_experiment2_fixed_duration(cohort, 7, n_reps=2, seed=3, config=CFG, day_counts=[1, 2, 4, 7])
    audit = rep.extra["window_audit"]
    assert audit["windows"] == 2 * 44 * (1 + 2 + 4 + 7)
    assert audit["min_voiced_frames_seen"] >= CFG.min_voiced_frames
    assert rep.curves["days"] == [1, 2, 4, 7]
    again = run_experiment2_fixed_duration(cohort, 7, n_reps=2, seed=3, config=CFG, day_counts=[1, 2, 4, 7])
    assert again.to_dict() == rep.to_dict()


def test_null_baseline_small():
    null = run_null_baseline(30, n_feature_reps=200, k=10, seed=2)
    assert null.mean == pytest.approx(0.5, abs=0.02)
    assert null.upper_bound > null.mean
    assert sum(c for _, c in null.histogram()) == 200
    uni = run_null_baseline(30, n_feature_reps=200, k=10, seed=2, distribution="uniform")
    assert uni.upper_bound == pytest.approx(null.upper_bound, abs=0.03)
    doc = null_report(null, 2).to_dict()
    assert doc["conditions"]["null"]["n_pairs"] == 30
    with pytest.raises(ValueError):
        run_null_baseline(5, 10, k=10)
