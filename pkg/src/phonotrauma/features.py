"""Day-level distributional features and fixed-duration window sampling.

Frame rows for one day are held in :class:`DayFrames`, a compact
structure-of-arrays that keeps only voiced frames (their positions, H1-H2 and
NSAM) plus the total frame count. Day features are the sample std of H1-H2 and
the sample skewness of NSAM over voiced frames.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .enums import Condition, Group
from .errors import (
    InsufficientVoicing,
    NotEnoughDays,
    TooFewSamples,
    WindowSearchExhausted,
    ZeroVariance,
)
from .signal import FRAME_MS, FrameFeatureRow

MIN_VOICED_FRAMES = 6000
MIN_DAY_HOURS = 6.0
WINDOW_RETRIES_PER_DAY = 10


# -- estimators --------------------------------------------------------------

def sample_std(xs) -> float:
    """Bias-corrected (n-1) standard deviation."""
    x = np.asarray(xs, dtype=float)
    if x.size < 2:
        raise TooFewSamples(f"std needs >= 2 values, got {x.size}")
    return float(np.std(x, ddof=1))


def skewness(xs) -> float:
    """Adjusted Fisher-Pearson sample skewness G1.

    ``G1 = sqrt(n(n-1))/(n-2) * m3 / m2**1.5`` with central moments m2, m3.
    """
    x = np.asarray(xs, dtype=float)
    n = x.size
    if n < 3:
        raise TooFewSamples(f"skewness needs >= 3 values, got {n}")
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        raise ZeroVariance("skewness of a constant sample is undefined")
    m3 = float(np.mean(d * d * d))
    return np.sqrt(n * (n - 1.0)) / (n - 2.0) * m3 / m2**1.5


# -- containers --------------------------------------------------------------

@dataclass
class DayFrames:
    """Voiced-frame content of one recording (one field day or one lab task).

    ``voiced_idx`` holds sorted frame indices of voiced frames; ``h1h2`` and
    ``nsam`` are aligned with it. ``n_frames`` counts all frames, voiced or not.
    """

    subject_id: str
    day_index: Optional[int]
    n_frames: int
    voiced_idx: np.ndarray
    h1h2: np.ndarray
    nsam: np.ndarray
    condition: Condition = Condition.FIELD

    def __post_init__(self):
        self.voiced_idx = np.asarray(self.voiced_idx, dtype=np.int64)
        self.h1h2 = np.asarray(self.h1h2, dtype=float)
        self.nsam = np.asarray(self.nsam, dtype=float)
        if not (len(self.voiced_idx) == len(self.h1h2) == len(self.nsam)):
            raise ValueError("voiced arrays must be aligned")
        if len(self.voiced_idx) and (self.voiced_idx[-1] >= self.n_frames or self.voiced_idx[0] < 0):
            raise ValueError("voiced frame index outside the recording")
        self.condition = Condition(self.condition)

    @classmethod
    def from_rows(cls, rows: Sequence[FrameFeatureRow], subject_id: str = "",
                  day_index: Optional[int] = None, condition=Condition.FIELD) -> "DayFrames":
        voiced = [r for r in rows if r.voiced]
        voiced.sort(key=lambda r: r.frame_index)
        n_frames = max((r.frame_index for r in rows), default=-1) + 1
        return cls(
            subject_id,
            day_index,
            max(n_frames, len(rows)),
            [r.frame_index for r in voiced],
            [r.h1h2_db for r in voiced],
            [r.nsam_db for r in voiced],
            condition,
        )

    @property
    def voiced_count(self) -> int:
        return len(self.voiced_idx)

    @property
    def duration_hours(self) -> float:
        return self.n_frames * FRAME_MS / 1000.0 / 3600.0

    def voiced_in(self, start: int, length: int) -> slice:
        lo, hi = np.searchsorted(self.voiced_idx, [start, start + length])
        return slice(int(lo), int(hi))


@dataclass(frozen=True)
class DayFeatures:
    subject_id: str
    day_index: Optional[int]
    h1h2_std: float
    nsam_skewness: float
    voiced_frame_count: int
    total_frame_count: int

    @property
    def duration_seconds(self) -> float:
        return self.total_frame_count * FRAME_MS / 1000.0


@dataclass(frozen=True)
class SubjectFeatures:
    subject_id: str
    group: Group
    feature_vector: tuple[float, float]
    days_used: int = 1
    pair_id: Optional[str] = None


@dataclass(frozen=True)
class WindowSpec:
    day_index: int
    start_frame: int
    length_frames: int
    voiced_frame_count: int


@dataclass
class SubjectData:
    """Everything recorded for one participant."""

    subject_id: str
    group: Group
    field_days: list[DayFrames] = field(default_factory=list)
    lab: dict[Condition, DayFrames] = field(default_factory=dict)
    pair_id: Optional[str] = None


@dataclass
class Cohort:
    subjects: list[SubjectData]

    def __len__(self):
        return len(self.subjects)

    def by_group(self, group: Group) -> list[SubjectData]:
        return [s for s in self.subjects if s.group is group]


# -- day summaries -----------------------------------------------------------

def _summarize(h1h2, nsam, subject_id, day_index, total_frames) -> DayFeatures:
    if len(h1h2) < 3:
        raise InsufficientVoicing(f"{subject_id} day {day_index}: {len(h1h2)} voiced frames")
    return DayFeatures(
        subject_id, day_index, sample_std(h1h2), skewness(nsam), len(h1h2), total_frames
    )


def summarize_day(rows: Union[Sequence[FrameFeatureRow], DayFrames], subject_id: str = "",
                  day_index: Optional[int] = None) -> DayFeatures:
    """H1-H2 std and NSAM skewness over the voiced frames of one day."""
    if isinstance(rows, DayFrames):
        return _summarize(rows.h1h2, rows.nsam, rows.subject_id, rows.day_index, rows.n_frames)
    voiced = [r for r in rows if r.voiced]
    return _summarize(
        [r.h1h2_db for r in voiced], [r.nsam_db for r in voiced], subject_id, day_index, len(rows)
    )


def summarize_window(day: DayFrames, window: WindowSpec) -> DayFeatures:
    sl = day.voiced_in(window.start_frame, window.length_frames)
    return _summarize(day.h1h2[sl], day.nsam[sl], day.subject_id, day.day_index, window.length_frames)


def filter_valid_days(days: Sequence, min_hours: float = MIN_DAY_HOURS) -> list:
    """Keep days recorded for at least ``min_hours`` (boundary inclusive).

    Accepts :class:`DayFeatures` or :class:`DayFrames`.
    """
    min_frames = _hours_to_frames(min_hours)
    out = []
    for d in days:
        n = d.total_frame_count if isinstance(d, DayFeatures) else d.n_frames
        if n >= min_frames:
            out.append(d)
    return out


def _mean_exact(values) -> float:
    # offset from the first value, so k identical values average to that value exactly
    first = values[0]
    return float(first + math.fsum(v - first for v in values) / len(values))


def aggregate_days(days: Sequence[DayFeatures], k: int, group: Group = Group.CONTROL,
                   pair_id: Optional[str] = None) -> SubjectFeatures:
    """Average the features of the first ``k`` days in monitoring order."""
    if k < 1:
        raise ValueError("k must be positive")
    if len(days) < k:
        raise NotEnoughDays(f"need {k} valid days, have {len(days)}")
    used = days[:k]
    h = _mean_exact([d.h1h2_std for d in used])
    s = _mean_exact([d.nsam_skewness for d in used])
    return SubjectFeatures(used[0].subject_id, Group(group), (h, s), k, pair_id)


# -- fixed-duration windows ----------------------------------------------------

def _hours_to_frames(hours: float) -> int:
    return int(round(hours * 3600.0 * 1000.0 / FRAME_MS))


def window_length_frames(k: int, total_hours: float = MIN_DAY_HOURS) -> int:
    return _hours_to_frames(total_hours) // k


def sample_fixed_duration_windows(
    days: Sequence[DayFrames],
    k: int,
    total_hours: float = MIN_DAY_HOURS,
    rng_seed=None,
    min_voiced_frames: int = MIN_VOICED_FRAMES,
    max_retries: int = 100,
) -> list[WindowSpec]:
    """Pick ``k`` distinct days and one contiguous window in each.

    Windows split ``total_hours`` evenly. A window with fewer than
    ``min_voiced_frames`` voiced frames is redrawn within the same day up to
    ``WINDOW_RETRIES_PER_DAY`` times, after which that day is swapped for an
    unused one. ``max_retries`` bounds the total number of redraws.
    """
    length = window_length_frames(k, total_hours)
    hosts = [d for d in days if d.n_frames >= length]
    if len(hosts) < k:
        raise NotEnoughDays(f"{len(hosts)} days can host a {length}-frame window, need {k}")
    rng = np.random.default_rng(rng_seed)
    order = list(rng.permutation(len(hosts)))
    chosen, pending = order[:k], order[k:]
    windows = []
    retries = 0
    for slot in range(k):
        day = hosts[chosen[slot]]
        tries_here = 0
        while True:
            start = int(rng.integers(0, day.n_frames - length + 1))
            sl = day.voiced_in(start, length)
            count = sl.stop - sl.start
            if count >= min_voiced_frames:
                windows.append(WindowSpec(day.day_index, start, length, count))
                break
            retries += 1
            tries_here += 1
            if retries >= max_retries:
                raise WindowSearchExhausted(
                    f"no window with >= {min_voiced_frames} voiced frames after {retries} draws"
                )
            if tries_here >= WINDOW_RETRIES_PER_DAY and pending:
                chosen[slot] = pending.pop(0)
                day = hosts[chosen[slot]]
                tries_here = 0
    return windows
