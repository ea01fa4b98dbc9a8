import numpy as np
import pytest

from phonotrauma.enums import Condition, Group
from phonotrauma.errors import AliasedHarmonic
from phonotrauma.evaluation import repeat_cross_validation
from phonotrauma.experiments import valid_day_features
from phonotrauma.features import aggregate_days, summarize_day
from phonotrauma.signal import fit_calibration
from phonotrauma.stats import cohens_d
from phonotrauma.synth import (
    CohortSpec,
    DriftParams,
    GroupParams,
    gen_calibration_pairs,
    gen_cohort,
    gen_harmonic_signal,
    skewnorm_sample,
    skewnorm_skewness,
)

SMALL = dict(day_hours=0.05, voicing_rate=0.3, days_per_subject=7)


def day_features(cohort):
    X, y = [], []
    for s in cohort.subjects:
        days = valid_day_features(s, 0.05)
        X.append(aggregate_days(days, len(days)).feature_vector)
        y.append(s.group.label)
    return np.array(X), np.array(y)


# -- signals ---------------------------------------------------------------------

def test_harmonic_signal_spectrum():
    rec = gen_harmonic_signal(200, [1.0, 0.5], 11025, 1.0)
    assert len(rec.samples) == 11025
    assert np.max(np.abs(rec.samples)) == pytest.approx(0.9)
    mag = np.abs(np.fft.rfft(rec.samples))
    freqs = np.fft.rfftfreq(11025, 1 / 11025)
    top2 = sorted(freqs[np.argsort(mag)[-2:]])
    assert top2 == [200.0, 400.0]


def test_harmonic_signal_aliasing():
    with pytest.raises(AliasedHarmonic):
        gen_harmonic_signal(3000, [1, 1], 11025, 0.1)


def test_skewnorm_analytic_skewness():
    assert skewnorm_skewness(0.0) == 0.0
    assert skewnorm_skewness(-5.0) == pytest.approx(-skewnorm_skewness(5.0))
    # large shape approaches the half-normal skewness
    half_normal = np.sqrt(2) * (4 - np.pi) / (np.pi - 2) ** 1.5
    assert skewnorm_skewness(1e6) == pytest.approx(half_normal, rel=1e-6)
    x = skewnorm_sample(np.random.default_rng(0), 3.0, 200_000)
    delta = 3 / np.sqrt(10)
    assert x.mean() == pytest.approx(delta * np.sqrt(2 / np.pi), abs=0.01)


# -- calibration pairs ------------------------------------------------------------

def test_calibration_pairs_noiseless():
    m = fit_calibration(gen_calibration_pairs(1.3, 95.0, 0.0, 25, seed=1))
    assert m.slope == pytest.approx(1.3, abs=1e-9)
    assert m.intercept == pytest.approx(95.0, abs=1e-9)


def test_calibration_pairs_need_two():
    with pytest.raises(ValueError):
        gen_calibration_pairs(1.0, 0.0, 1.0, 1, seed=0)


def test_calibration_pairs_sampling_error():
    m = fit_calibration(gen_calibration_pairs(0.9, 110.0, 1.0, 1000, seed=2))
    assert m.slope == pytest.approx(0.9, abs=0.05)


# -- cohorts -----------------------------------------------------------------------

def test_cohort_shape_and_ids():
    c = gen_cohort(CohortSpec(n_pvh=3, n_control=2, lab_conditions=(Condition.LAB_RAINBOW, Condition.LAB_SPONTANEOUS), **SMALL))
    assert [s.subject_id for s in c.subjects] == ["P001", "P002", "P003", "C001", "C002"]
    assert [s.pair_id for s in c.subjects] == ["pair001", "pair002", None, "pair001", "pair002"]
    s = c.subjects[0]
    assert len(s.field_days) == 7 and [d.day_index for d in s.field_days] == list(range(7))
    assert s.field_days[0].n_frames == 3600
    assert set(s.lab) == {Condition.LAB_RAINBOW, Condition.LAB_SPONTANEOUS}
    assert s.lab[Condition.LAB_RAINBOW].n_frames == 800
    rate = np.mean([d.voiced_count / d.n_frames for d in s.field_days])
    assert rate == pytest.approx(0.3, abs=0.02)


def test_cohort_deterministic():
    spec = CohortSpec(n_pvh=2, n_control=2, seed=17, drift=DriftParams(0.5, 0.5, 0.2, 1.0), **SMALL)
    a, b = gen_cohort(spec), gen_cohort(spec)
    for sa, sb in zip(a.subjects, b.subjects):
        for da, db in zip(sa.field_days, sb.field_days):
            np.testing.assert_array_equal(da.voiced_idx, db.voiced_idx)
            np.testing.assert_array_equal(da.h1h2, db.h1h2)
            np.testing.assert_array_equal(da.nsam, db.nsam)
    c = gen_cohort(CohortSpec(n_pvh=2, n_control=2, seed=18, **SMALL))
    assert not np.array_equal(a.subjects[0].field_days[0].h1h2[:10], c.subjects[0].field_days[0].h1h2[:10])


def test_spec_round_trip_and_validation():
    spec = CohortSpec(n_pvh=4, drift=DriftParams(h1h2_std_logsd=0.3), lab_conditions=(Condition.LAB_SPONTANEOUS,))
    assert CohortSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        CohortSpec(voicing_rate=1.0)
    with pytest.raises(ValueError):
        CohortSpec(drift=DriftParams(h1h2_offset_sd=-1))


def test_planted_h1h2_std_recovered():
    spec = CohortSpec(
        n_pvh=50, n_control=50, seed=3,
        pvh=GroupParams(h1h2_std=2.0), control=GroupParams(h1h2_std=3.0), **SMALL,
    )
    X, y = day_features(gen_cohort(spec))
    d = cohens_d(X[y == 1, 0], X[y == 0, 0])
    assert d <= -1.0  # PVH std is lower, by at least one pooled std


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_planted_signs(seed):
    # default spec plants lower H1-H2 std and more negative NSAM skew for PVH
    X, y = day_features(gen_cohort(CohortSpec(n_pvh=30, n_control=30, seed=seed, **SMALL)))
    assert X[y == 1, 0].mean() < X[y == 0, 0].mean()
    assert X[y == 1, 1].mean() < X[y == 0, 1].mean()


def test_lab_features_follow_the_lab_block():
    lab = GroupParams(h1h2_std=3.0, nsam_shape=-1.5)
    spec = CohortSpec(n_pvh=20, n_control=20, seed=4, pvh_lab=lab, control_lab=lab, **SMALL)
    c = gen_cohort(spec)
    lab_std = [summarize_day(s.lab[Condition.LAB_RAINBOW]).h1h2_std for s in c.subjects]
    assert abs(np.mean(lab_std[:20]) - np.mean(lab_std[20:])) < 0.4


def test_no_planted_signal_gives_chance():
    same = GroupParams()
    spec = CohortSpec(n_pvh=40, n_control=40, seed=5, pvh=same, control=same, **SMALL)
    X, y = day_features(gen_cohort(spec))
    rep = repeat_cross_validation(X, y, 10, n_reps=20, base_seed=0)
    assert rep.summary()["accuracy"]["mean"] == pytest.approx(0.5, abs=0.08)
    assert Group.PVH.label == 1 and Group.CONTROL.label == 0
