"""Analytic test signals and planted-effect synthetic cohorts.

Cohorts are generated at the frame-feature level. Each subject draws its own
distribution parameters around its group's values. Each day then perturbs
those parameters (between-day drift) before frames are drawn, so averaging
more days gives a less noisy estimate of the subject's features.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .enums import Condition, Group
from .errors import AliasedHarmonic
from .features import Cohort, DayFrames, SubjectData
from .signal import FRAME_MS, AccelRecording


# -- skew-normal -------------------------------------------------------------

def skewnorm_delta(shape: float) -> float:
    return shape / np.sqrt(1.0 + shape * shape)


def skewnorm_skewness(shape: float) -> float:
    """Population skewness of a skew-normal with the given shape."""
    m = skewnorm_delta(shape) * np.sqrt(2.0 / np.pi)
    return (4.0 - np.pi) / 2.0 * m**3 / (1.0 - m * m) ** 1.5


def skewnorm_sample(rng: np.random.Generator, shape: float, size: int) -> np.ndarray:
    """Standard skew-normal draws via ``delta*|U0| + sqrt(1-delta^2)*U1``."""
    delta = skewnorm_delta(shape)
    u0 = np.abs(rng.standard_normal(size))
    u1 = rng.standard_normal(size)
    return delta * u0 + np.sqrt(1.0 - delta * delta) * u1


# -- signals -----------------------------------------------------------------

def gen_harmonic_signal(
    f0: float,
    amplitudes: Sequence[float],
    fs: int = 11025,
    duration_s: float = 1.0,
    phases: Optional[Sequence[float]] = None,
    peak: float = 0.9,
    subject_id: str = "synthetic",
    condition: Condition = Condition.LAB_RAINBOW,
    day_index: Optional[int] = None,
) -> AccelRecording:
    """Sum of harmonics ``A_h * sin(2*pi*h*f0*t + phi_h)`` scaled to the given peak."""
    amplitudes = np.asarray(amplitudes, dtype=float)
    top = len(amplitudes) * f0
    if top >= fs / 2.0:
        raise AliasedHarmonic(f"harmonic {len(amplitudes)} at {top} Hz exceeds Nyquist {fs / 2}")
    if phases is None:
        phases = np.zeros(len(amplitudes))
    t = np.arange(int(round(duration_s * fs))) / fs
    x = np.zeros_like(t)
    for h, (a, ph) in enumerate(zip(amplitudes, phases), start=1):
        x += a * np.sin(2.0 * np.pi * h * f0 * t + ph)
    top_abs = np.max(np.abs(x)) if len(x) else 0.0
    if top_abs > 0:
        x *= peak / top_abs
    return AccelRecording(x, fs, subject_id, condition, day_index)


def gen_calibration_pairs(true_slope: float, true_intercept: float, noise_std: float, n: int,
                          seed=0, nsam_range=(-45.0, -5.0)) -> np.ndarray:
    """``(nsam_db, spl_db)`` rows from a loud-to-soft sweep plus Gaussian noise."""
    if n < 2:
        raise ValueError("calibration needs at least two pairs")
    rng = np.random.default_rng(seed)
    nsam = np.linspace(nsam_range[1], nsam_range[0], n)
    spl = true_slope * nsam + true_intercept + noise_std * rng.standard_normal(n)
    return np.column_stack([nsam, spl])


# -- cohorts -----------------------------------------------------------------

@dataclass(frozen=True)
class GroupParams:
    """Per-group frame distributions.

    ``h1h2_std`` is the median within-day H1-H2 std; subjects scatter around
    it by ``h1h2_std_subject_logsd`` on the log scale. NSAM is
    ``nsam_level + nsam_scale * SkewNormal(shape)`` with the subject's shape
    drawn from ``Normal(nsam_shape, nsam_shape_subject_sd)``.
    """

    h1h2_mean: float = 8.0
    h1h2_std: float = 3.0
    h1h2_std_subject_logsd: float = 0.15
    nsam_level: float = -25.0
    nsam_scale: float = 6.0
    nsam_shape: float = -2.0
    nsam_shape_subject_sd: float = 1.0


@dataclass(frozen=True)
class DriftParams:
    """Day-to-day variation within a subject.

    Location offsets shift a day's H1-H2 / NSAM values. ``h1h2_std_logsd``
    and ``nsam_shape_sd`` perturb the day's distribution shape, which is what
    moves the day-level std and skewness features.
    """

    h1h2_offset_sd: float = 0.0
    nsam_offset_sd: float = 0.0
    h1h2_std_logsd: float = 0.0
    nsam_shape_sd: float = 0.0


NO_DRIFT = DriftParams()


@dataclass(frozen=True)
class CohortSpec:
    n_pvh: int = 50
    n_control: int = 50
    days_per_subject: int = 7
    day_hours: float = 6.0
    voicing_rate: float = 0.15
    pvh: GroupParams = field(default_factory=lambda: GroupParams(h1h2_std=2.6, nsam_shape=-2.5))
    control: GroupParams = field(default_factory=lambda: GroupParams(h1h2_std=3.0, nsam_shape=-1.5))
    drift: DriftParams = NO_DRIFT
    lab_conditions: tuple = (Condition.LAB_RAINBOW,)
    lab_seconds: float = 40.0
    lab_voicing_rate: float = 0.5
    pvh_lab: Optional[GroupParams] = None
    control_lab: Optional[GroupParams] = None
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.voicing_rate < 1.0 and 0.0 < self.lab_voicing_rate < 1.0):
            raise ValueError("voicing_rate must lie in (0, 1)")
        if min(self.n_pvh, self.n_control) < 0 or self.days_per_subject < 0:
            raise ValueError("counts must be non-negative")
        if self.day_hours <= 0 or self.lab_seconds < 0:
            raise ValueError("durations must be positive")
        for p in (self.pvh, self.control, self.pvh_lab, self.control_lab):
            if p is not None and (p.h1h2_std < 0 or p.nsam_scale < 0 or p.h1h2_std_subject_logsd < 0
                                  or p.nsam_shape_subject_sd < 0):
                raise ValueError("spreads must be non-negative")
        d = self.drift
        if min(d.h1h2_offset_sd, d.nsam_offset_sd, d.h1h2_std_logsd, d.nsam_shape_sd) < 0:
            raise ValueError("drift spreads must be non-negative")

    def with_drift(self, drift: DriftParams) -> "CohortSpec":
        return replace(self, drift=drift)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lab_conditions"] = [Condition(c).value for c in self.lab_conditions]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CohortSpec":
        d = dict(d)
        for key in ("pvh", "control", "pvh_lab", "control_lab"):
            if d.get(key) is not None:
                d[key] = GroupParams(**d[key])
        if "drift" in d:
            d["drift"] = DriftParams(**d["drift"])
        if "lab_conditions" in d:
            d["lab_conditions"] = tuple(Condition(c) for c in d["lab_conditions"])
        return cls(**d)


@dataclass(frozen=True)
class _SubjectParams:
    h1h2_mean: float
    h1h2_std: float
    nsam_level: float
    nsam_scale: float
    nsam_shape: float


def _draw_subject(rng, g: GroupParams) -> _SubjectParams:
    return _SubjectParams(
        g.h1h2_mean,
        g.h1h2_std * np.exp(g.h1h2_std_subject_logsd * rng.standard_normal()),
        g.nsam_level,
        g.nsam_scale,
        g.nsam_shape + g.nsam_shape_subject_sd * rng.standard_normal(),
    )


def _draw_frames(rng, p: _SubjectParams, drift: DriftParams, n_frames: int, voicing_rate: float):
    h_off = drift.h1h2_offset_sd * rng.standard_normal()
    n_off = drift.nsam_offset_sd * rng.standard_normal()
    h_std = p.h1h2_std * np.exp(drift.h1h2_std_logsd * rng.standard_normal())
    shape = p.nsam_shape + drift.nsam_shape_sd * rng.standard_normal()
    voiced_idx = np.flatnonzero(rng.random(n_frames) < voicing_rate)
    n = len(voiced_idx)
    h1h2 = p.h1h2_mean + h_off + h_std * rng.standard_normal(n)
    nsam = p.nsam_level + n_off + p.nsam_scale * skewnorm_sample(rng, shape, n)
    return voiced_idx, h1h2, nsam


def gen_cohort(spec: CohortSpec) -> Cohort:
    """Deterministic synthetic cohort; PVH subjects first, then controls."""
    groups = [Group.PVH] * spec.n_pvh + [Group.CONTROL] * spec.n_control
    streams = np.random.SeedSequence(spec.seed).spawn(len(groups))
    day_frames = int(round(spec.day_hours * 3600.0 * 1000.0 / FRAME_MS))
    lab_frames = int(round(spec.lab_seconds * 1000.0 / FRAME_MS))
    subjects = []
    counters = {Group.PVH: 0, Group.CONTROL: 0}
    for group, ss in zip(groups, streams):
        rng = np.random.default_rng(ss)
        idx = counters[group]
        counters[group] += 1
        sid = f"{'P' if group is Group.PVH else 'C'}{idx + 1:03d}"
        pair = f"pair{idx + 1:03d}" if idx < min(spec.n_pvh, spec.n_control) else None
        field_params = spec.pvh if group is Group.PVH else spec.control
        lab_params = spec.pvh_lab if group is Group.PVH else spec.control_lab
        person = _draw_subject(rng, field_params)
        days = []
        for d in range(spec.days_per_subject):
            vi, h, n = _draw_frames(rng, person, spec.drift, day_frames, spec.voicing_rate)
            days.append(DayFrames(sid, d, day_frames, vi, h, n, Condition.FIELD))
        lab = {}
        lab_person = person if lab_params is None else _draw_subject(rng, lab_params)
        for cond in spec.lab_conditions:
            vi, h, n = _draw_frames(rng, lab_person, NO_DRIFT, lab_frames, spec.lab_voicing_rate)
            lab[Condition(cond)] = DayFrames(sid, None, lab_frames, vi, h, n, Condition(cond))
        subjects.append(SubjectData(sid, group, days, lab, pair))
    return Cohort(subjects)
