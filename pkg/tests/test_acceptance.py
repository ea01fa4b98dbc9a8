"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary lists a
PASS/FAIL line per criterion.
"""
import itertools
import time

import numpy as np
import pytest

from phonotrauma.cli import main
from phonotrauma.errors import HarmonicNotFound
from phonotrauma.evaluation import auc, evaluate_fold, stratified_kfold_split, undersample_balance
from phonotrauma.experiments import run_experiment2_daycount, run_experiment2_fixed_duration, run_null_baseline
from phonotrauma.features import DayFrames, aggregate_days, skewness, summarize_day
from phonotrauma.signal import CalibrationModel, Frame, apply_calibration, compute_h1h2
from phonotrauma.stats import cohens_d, fit_power_law, marginal_gain, spearman_rho, t_sf, welch_t_test
from phonotrauma.synth import CohortSpec, DriftParams, gen_cohort, gen_harmonic_signal, skewnorm_sample

from test_stats import average_ranks, pearson, t_tail_quad

DRIFT = DriftParams(h1h2_std_logsd=0.25, nsam_shape_sd=2.0)
REPS = 200


# -- 1, 2: null baseline -----------------------------------------------------------

@pytest.fixture(scope="module")
def null_134():
    t0 = time.perf_counter()
    null = run_null_baseline(134, 5000, seed=2024)
    return null, time.perf_counter() - t0


def test_null_baseline_134_pairs(verdict, null_134):
    null, seconds = null_134
    verdict(1, f"null 134 pairs: bound {100 * null.upper_bound:.2f}% in [54.5, 57.5], "
               f"mean {100 * null.mean:.2f}% (50 +/- 1), {seconds:.0f} s")
    assert 0.545 <= null.upper_bound <= 0.575
    assert abs(null.mean - 0.5) <= 0.01
    assert seconds <= 600


def test_null_baseline_64_pairs(verdict, null_134):
    null = run_null_baseline(64, 5000, seed=2024)
    verdict(2, f"null 64 pairs: bound {100 * null.upper_bound:.2f}% in [57.0, 60.5], "
               f"above 134-pair bound {100 * null_134[0].upper_bound:.2f}%")
    assert 0.570 <= null.upper_bound <= 0.605
    assert null.upper_bound > null_134[0].upper_bound


# -- 3: H1-H2 -------------------------------------------------------------------------

def test_h1h2_grid(verdict):
    errors = []
    for f0, ratio in itertools.product([120, 160, 200, 300, 400], [0.25, 0.5, 1, 2, 4]):
        sig = gen_harmonic_signal(f0, [ratio, 1.0], duration_s=551 / 11025)
        errors.append(abs(compute_h1h2(Frame(0, sig.samples), f0) - 20 * np.log10(ratio)))
    verdict(3, f"H1-H2 grid: max error {max(errors):.4f} dB <= 0.1 over {len(errors)} points; pure tone raises")
    assert len(errors) == 25 and max(errors) <= 0.1
    tone = gen_harmonic_signal(200, [1.0], duration_s=551 / 11025)
    with pytest.raises(HarmonicNotFound):
        compute_h1h2(Frame(0, tone.samples), 200.0)


# -- 4: skewness invariance ---------------------------------------------------------

def test_skewness_invariance(verdict):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        x = rng.gamma(rng.uniform(0.5, 5), size=int(rng.integers(20, 500)))
        s = skewness(x)
        for a, b in zip(rng.uniform(1e-2, 1e2, 100), rng.uniform(-1e3, 1e3, 100)):
            worst = max(worst, abs(skewness(a * x + b) - s))
    model = CalibrationModel(0.93, 104.0)
    feat_worst = 0.0
    for subject in range(10):
        nsam_days, spl_days = [], []
        for i in range(5):
            n = 3000
            nsam = skewnorm_sample(rng, rng.uniform(-5, 5), n) * 5 - 25
            h = rng.normal(8, 3, n)
            idx = np.arange(n)
            nsam_days.append(summarize_day(DayFrames("s", i, n, idx, h, nsam)))
            spl_days.append(summarize_day(DayFrames("s", i, n, idx, h, apply_calibration(model, nsam))))
        a = aggregate_days(nsam_days, 5).feature_vector
        b = aggregate_days(spl_days, 5).feature_vector
        feat_worst = max(feat_worst, float(np.max(np.abs(np.subtract(a, b)))))
    verdict(4, f"skewness invariance: max |diff| {worst:.1e} over 10000 transforms, "
               f"NSAM vs SPL features {feat_worst:.1e} (<= 1e-9)")
    assert worst <= 1e-9 and feat_worst <= 1e-9


# -- 5: leakage guard -----------------------------------------------------------------

def test_leakage_guard(verdict):
    verdict(5, "leakage guard: 50 cohorts, held-out +1000 leaves normalizers and weights bit-identical")
    rng = np.random.default_rng(5)
    for c in range(50):
        n_pos, n_neg = int(rng.integers(10, 60)), int(rng.integers(10, 60))
        y = np.r_[np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)]
        X = rng.normal(size=(len(y), 2)) + 0.5 * y[:, None]
        split = stratified_kfold_split(y, 10, c)
        for f in range(10):
            train, test = split.train_rows(f), split.test_rows(f)
            X_bad = X.copy()
            X_bad[test] += 1000.0
            clean = evaluate_fold(X, y, train, test)
            dirty = evaluate_fold(X_bad, y, train, test)
            np.testing.assert_array_equal(clean.normalizer.means, dirty.normalizer.means)
            np.testing.assert_array_equal(clean.normalizer.stds, dirty.normalizer.stds)
            np.testing.assert_array_equal(clean.model.weights, dirty.model.weights)
            assert clean.model.bias == dirty.model.bias


# -- 6: AUC oracle --------------------------------------------------------------------

def test_auc_matches_pair_counting(verdict):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        scores = rng.integers(0, int(rng.integers(2, 30)), n) / 7.0  # coarse grid forces ties
        pos, neg = scores[y == 1], scores[y == 0]
        wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
        worst = max(worst, abs(auc(scores, y) - wins / (len(pos) * len(neg))))
    verdict(6, f"AUC vs pair counting: max |diff| {worst:.1e} over 200 instances (<= 1e-12)")
    assert worst <= 1e-12


# -- 7: power fit ---------------------------------------------------------------------

def test_power_fit_exactness(verdict):
    x = np.array([1.0, 2.0, 4.0])
    exact = fit_power_law(x, -10 * x**-1.0 + 80)
    rng = np.random.default_rng(7)
    beaten = 0
    for _ in range(50):
        a, b, c = -rng.uniform(2, 20), -rng.uniform(0.2, 3), rng.uniform(60, 90)
        xs = np.arange(1, 8, dtype=float)
        ys = a * xs**b + c + rng.normal(0, 0.5, 7)
        beaten += fit_power_law(xs, ys).sse <= float(np.sum((ys - (a * xs**b + c)) ** 2))
    verdict(7, f"power fit: exact sse {exact.sse:.1e} (<= 1e-10), "
               f"fit <= generator sse on {beaten}/50 noisy curves")
    assert exact.sse <= 1e-10
    assert (exact.a, exact.b, exact.c) == pytest.approx((-10, -1, 80), abs=1e-5)
    assert beaten == 50


# -- 8, 9: synthetic Experiment 2 ------------------------------------------------------

@pytest.fixture(scope="module")
def drift_cohort():
    return gen_cohort(CohortSpec(drift=DRIFT, voicing_rate=0.12, seed=11))


def test_daycount_curve_shape(verdict, drift_cohort):
    rep = run_experiment2_daycount(drift_cohort, 7, REPS, seed=5)
    acc = np.array(rep.extra["repetition_accuracies"])
    mean = acc.mean(axis=0)
    fit = fit_power_law(np.arange(1, 8), 100 * mean)
    gains = [marginal_gain(fit, d) for d in range(1, 7)]
    days = np.repeat(np.arange(1, 8)[None, :], len(acc), axis=0).ravel()
    rho, p = spearman_rho(days, acc.ravel())
    verdict(8, f"day-count curve: gain {100 * (mean[6] - mean[0]):.2f} pp (>= 2), b={fit.b:.3g} (< 0), "
               f"gains decreasing, rho={rho:.3f} p={p:.1e}")
    assert mean[6] - mean[0] >= 0.02
    assert fit.b < 0
    assert all(g1 > g2 for g1, g2 in zip(gains, gains[1:]))
    assert rho > 0 and p < 0.05


def test_fixed_duration_property(verdict, drift_cohort):
    rep = run_experiment2_fixed_duration(drift_cohort, 7, 6.0, REPS, seed=5, day_counts=[1, 4])
    acc = np.array(rep.extra["repetition_accuracies"])
    _, p = welch_t_test(acc[:, 1], acc[:, 0], "greater")
    audit = rep.extra["window_audit"]
    flat = gen_cohort(CohortSpec(voicing_rate=0.12, seed=11))
    flat_acc = np.array(run_experiment2_fixed_duration(flat, 7, 6.0, REPS, seed=5, day_counts=[1, 4])
                        .extra["repetition_accuracies"]).mean(axis=0)
    diff_pp = 100 * abs(flat_acc[1] - flat_acc[0])
    verdict(9, f"fixed duration: drift k=4 {100 * acc[:, 1].mean():.2f}% > k=1 {100 * acc[:, 0].mean():.2f}% "
               f"(p={p:.1e}); no drift |diff| {diff_pp:.2f} pp (<= 1.5); "
               f"min voiced {audit['min_voiced_frames_seen']} >= 6000")
    assert p < 0.05
    assert diff_pp <= 1.5
    assert audit["min_voiced_frames_required"] == 6000
    assert audit["min_voiced_frames_seen"] >= 6000


# -- 10: stratification and undersampling ------------------------------------------

def test_stratification_and_undersampling(verdict):
    verdict(10, "stratification: class fold sizes differ by <= 1 over 1000 seeds; undersample 92+92 every time")
    rng = np.random.default_rng(10)
    y_us = np.r_[np.ones(92, dtype=int), np.zeros(112, dtype=int)]
    for seed in range(1000):
        n_pos, n_neg = int(rng.integers(10, 150)), int(rng.integers(10, 150))
        y = np.r_[np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)]
        split = stratified_kfold_split(y, 10, seed)
        for cls in (0, 1):
            sizes = [int(np.sum(y[split.test_rows(f)] == cls)) for f in range(10)]
            assert max(sizes) - min(sizes) <= 1
        keep = undersample_balance(y_us, seed)
        assert np.sum(y_us[keep] == 1) == 92 and np.sum(y_us[keep] == 0) == 92


# -- 11: statistical layer -----------------------------------------------------------

def test_statistical_oracles(verdict):
    assert cohens_d([1, 2, 3], [2, 3, 4]) == -1.0
    assert cohens_d([0.0, 2.0, 1.0], [-1.0, 1.0, 0.0]) == 1.0
    rng = np.random.default_rng(11)
    welch_worst = 0.0
    for _ in range(20):
        x = rng.normal(0, rng.uniform(0.5, 2), int(rng.integers(3, 40)))
        y = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 2), int(rng.integers(3, 40)))
        t, p = welch_t_test(x, y)
        vx, vy = x.var(ddof=1) / len(x), y.var(ddof=1) / len(y)
        df = (vx + vy) ** 2 / (vx**2 / (len(x) - 1) + vy**2 / (len(y) - 1))
        welch_worst = max(welch_worst, abs(p - 2 * t_tail_quad(t, df)), abs(2 * t_sf(abs(t), df) - p))
    rho_worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 40))
        a, b = rng.integers(0, 5, n).tolist(), rng.integers(0, 5, n).tolist()
        if len(set(a)) < 2 or len(set(b)) < 2:
            continue
        rho_worst = max(rho_worst, abs(spearman_rho(a, b)[0] - pearson(average_ranks(a), average_ranks(b))))
    verdict(11, f"stats: Cohen's D exact, Welch p max |diff| {welch_worst:.1e} (<= 1e-6), "
                f"Spearman ties {rho_worst:.1e} (<= 1e-12)")
    assert welch_worst <= 1e-6 and rho_worst <= 1e-12


# -- 12: end-to-end determinism -------------------------------------------------------

def test_end_to_end_determinism(verdict, tmp_path):
    verdict(12, "synth -> exp2a: results JSON byte-identical across runs and worker counts")
    outputs = []
    for run, workers in [("a", 1), ("b", 1), ("c", 2)]:
        d = tmp_path / run
        assert main(["synth", "--seed", "9", "-q", "--out", str(d)]) == 0
        assert main(["exp2a", "--manifest", str(d / "manifest.json"), "--config", str(d / "config.json"),
                     "--reps", "20", "--seed", "9", "--workers", str(workers), "-q", "--out", str(d)]) == 0
        outputs.append((d / "results.json").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
