"""Frame-level analysis of neck-surface accelerometer signals.

A recording is cut into consecutive 50 ms frames. Each frame gets a voicing
decision (energy floor plus autocorrelation periodicity), and voiced frames get
an f0 estimate and an H1-H2 value read off a zero-padded, tapered magnitude
spectrum. Every frame gets an NSAM value (frame RMS in dB re full scale).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.signal import get_window

from .enums import Condition
from .errors import (
    DegenerateCalibration,
    EmptySignal,
    HarmonicNotFound,
    NoPeriodicity,
    SilentFrame,
)

logger = logging.getLogger(__name__)

FRAME_MS = 50.0
EXPECTED_SAMPLE_RATE = 11025

# Harmonic peaks must clear both of these to count as present.
NOISE_FLOOR_MARGIN_DB = 10.0
DYNAMIC_RANGE_DB = 60.0


@dataclass(frozen=True)
class AccelRecording:
    samples: np.ndarray
    sample_rate_hz: int = EXPECTED_SAMPLE_RATE
    subject_id: str = ""
    condition: Condition = Condition.FIELD
    day_index: Optional[int] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "condition", Condition(self.condition))
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)) or np.any(np.abs(samples) > 1.0):
            raise ValueError("samples must be finite and within [-1, 1]")
        if self.condition is Condition.FIELD and self.day_index is None:
            raise ValueError("field recordings need a day_index")
        if self.day_index is not None and self.day_index < 0:
            raise ValueError("day_index must be non-negative")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class Frame:
    index: int
    samples: np.ndarray
    sample_rate_hz: int = EXPECTED_SAMPLE_RATE


@dataclass(frozen=True)
class FrameFeatureRow:
    frame_index: int
    voiced: bool
    f0_hz: Optional[float]
    h1h2_db: Optional[float]
    nsam_db: float

    def __post_init__(self):
        if not self.voiced and (self.f0_hz is not None or self.h1h2_db is not None):
            raise ValueError("unvoiced rows carry no f0 or H1-H2")
        if self.voiced and (self.h1h2_db is None or not np.isfinite(self.h1h2_db)):
            raise ValueError("voiced rows need a finite H1-H2")


@dataclass(frozen=True)
class VoicingConfig:
    """Voice activity and pitch search settings.

    ``octave_tolerance`` guards against picking a multiple of the true period:
    among autocorrelation peaks within this distance of the best one, the
    shortest lag wins.
    """

    energy_floor_db: float = -50.0
    periodicity_threshold: float = 0.5
    f0_min_hz: float = 70.0
    f0_max_hz: float = 600.0
    octave_tolerance: float = 0.05

    def lag_range(self, sample_rate_hz: int, n: int) -> tuple[int, int]:
        lo = max(int(np.floor(sample_rate_hz / self.f0_max_hz)), 2)
        hi = min(int(np.ceil(sample_rate_hz / self.f0_min_hz)), n - 2)
        return lo, hi


@dataclass(frozen=True)
class CalibrationModel:
    slope: float
    intercept: float
    residual_rms: float = 0.0


@dataclass(frozen=True)
class HarmonicConfig:
    window: str = "blackmanharris"
    pad_factor: int = 8
    band: float = 0.2


DEFAULT_VOICING = VoicingConfig()
DEFAULT_HARMONICS = HarmonicConfig()


# -- framing -----------------------------------------------------------------

def frame_length(sample_rate_hz: int, frame_ms: float = FRAME_MS) -> int:
    return int(round(frame_ms / 1000.0 * sample_rate_hz))


def frame_matrix(samples: np.ndarray, length: int) -> np.ndarray:
    """Non-overlapping frames as a ``(n_frames, length)`` view; remainder dropped."""
    n_frames = len(samples) // length
    return samples[: n_frames * length].reshape(n_frames, length)


def frame_signal(rec: AccelRecording, frame_ms: float = FRAME_MS) -> list[Frame]:
    if len(rec.samples) == 0:
        raise EmptySignal("recording has no samples")
    length = frame_length(rec.sample_rate_hz, frame_ms)
    mat = frame_matrix(rec.samples, length)
    return [Frame(i, mat[i], rec.sample_rate_hz) for i in range(mat.shape[0])]


# -- per-frame measures ------------------------------------------------------

def _rms_db(x: np.ndarray) -> float:
    rms = float(np.sqrt(np.mean(np.square(x))))
    return 20.0 * np.log10(rms) if rms > 0 else -np.inf


def compute_nsam(frame: Frame) -> float:
    """Frame RMS in dB re full scale, ``20*log10(rms)``."""
    value = _rms_db(np.asarray(frame.samples, dtype=float))
    if not np.isfinite(value):
        raise SilentFrame(f"frame {frame.index} is all zeros")
    return value


def normalized_autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """``r[tau] = sum x[n]x[n+tau] / sqrt(sum x[n]^2 * sum x[n+tau]^2)`` for tau in 0..max_lag.

    Each lag is normalized by the energy of the two overlapping segments, so a
    periodic signal reaches ~1 at its period regardless of taper.
    """
    n = len(x)
    acf = np.correlate(x, x, mode="full")[n - 1 : n + max_lag]
    sq = np.concatenate(([0.0], np.cumsum(x * x)))
    lags = np.arange(max_lag + 1)
    head = sq[n - lags]  # energy of x[0 : n-tau]
    tail = sq[n] - sq[lags]  # energy of x[tau : n]
    denom = np.sqrt(head * tail)
    out = np.zeros(max_lag + 1)
    ok = denom > 0
    out[ok] = acf[ok] / denom[ok]
    return out


def _periodicity(frame: Frame, cfg: VoicingConfig) -> tuple[np.ndarray, int, int]:
    x = np.asarray(frame.samples, dtype=float)
    x = x - x.mean()
    lo, hi = cfg.lag_range(frame.sample_rate_hz, len(x))
    r = normalized_autocorrelation(x, hi + 1)
    return r, lo, hi


def detect_voicing(frame: Frame, cfg: VoicingConfig = DEFAULT_VOICING) -> bool:
    x = np.asarray(frame.samples, dtype=float)
    if len(x) < 4 or _rms_db(x) < cfg.energy_floor_db:
        return False
    r, lo, hi = _periodicity(frame, cfg)
    if hi < lo:
        return False
    return bool(np.max(r[lo : hi + 1]) >= cfg.periodicity_threshold)


def estimate_f0(frame: Frame, cfg: VoicingConfig = DEFAULT_VOICING) -> float:
    """Autocorrelation pitch estimate with parabolic lag refinement."""
    r, lo, hi = _periodicity(frame, cfg)
    lags = np.arange(max(lo, 1), hi + 1)
    if len(lags) == 0:
        raise NoPeriodicity("frame too short for the configured f0 range")
    peaks = lags[(r[lags] >= r[lags - 1]) & (r[lags] > r[lags + 1])]
    peaks = peaks[r[peaks] >= cfg.periodicity_threshold]
    if len(peaks) == 0:
        raise NoPeriodicity(f"no autocorrelation peak above {cfg.periodicity_threshold}")
    best = r[peaks].max()
    lag = int(peaks[r[peaks] >= best - cfg.octave_tolerance][0])

    a, b, c = r[lag - 1], r[lag], r[lag + 1]
    curv = a - 2.0 * b + c
    shift = 0.5 * (a - c) / curv if curv < 0 else 0.0
    f0 = frame.sample_rate_hz / (lag + shift)
    return float(np.clip(f0, cfg.f0_min_hz, cfg.f0_max_hz))


def _interpolated_peak_db(mag_db: np.ndarray, lo: int, hi: int, floor_db: float) -> Optional[float]:
    lo = max(lo, 1)
    hi = min(hi, len(mag_db) - 2)
    if hi < lo:
        return None
    i = lo + int(np.argmax(mag_db[lo : hi + 1]))
    a, b, c = mag_db[i - 1], mag_db[i], mag_db[i + 1]
    if b < a or b < c or b <= floor_db:
        return None
    curv = a - 2.0 * b + c
    if curv >= 0:
        return float(b)
    p = 0.5 * (a - c) / curv
    return float(b - 0.25 * (a - c) * p)


def compute_h1h2(frame: Frame, f0_hz: float, cfg: HarmonicConfig = DEFAULT_HARMONICS) -> float:
    """Level difference (dB) between the first and second harmonic peaks."""
    fs = frame.sample_rate_hz
    if not 0 < 2.0 * f0_hz < fs / 2.0:
        raise ValueError(f"f0={f0_hz} Hz puts the second harmonic above Nyquist")
    x = np.asarray(frame.samples, dtype=float)
    x = x - x.mean()
    n = len(x)
    nfft = 1 << int(np.ceil(np.log2(cfg.pad_factor * n)))
    mag = np.abs(np.fft.rfft(x * get_window(cfg.window, n), nfft))
    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(mag)
    finite = mag_db[np.isfinite(mag_db)]
    if len(finite) == 0:
        raise HarmonicNotFound("empty spectrum")
    floor_db = max(np.median(finite) + NOISE_FLOOR_MARGIN_DB, finite.max() - DYNAMIC_RANGE_DB)
    mag_db = np.where(np.isfinite(mag_db), mag_db, -np.inf)

    hz_per_bin = fs / nfft
    levels = []
    for h in (1, 2):
        lo = int(np.ceil((h - cfg.band) * f0_hz / hz_per_bin))
        hi = int(np.floor((h + cfg.band) * f0_hz / hz_per_bin))
        level = _interpolated_peak_db(mag_db, lo, hi, floor_db)
        if level is None:
            raise HarmonicNotFound(f"no peak near harmonic {h} of {f0_hz:.1f} Hz")
        levels.append(level)
    return levels[0] - levels[1]


def extract_frame_features(
    rec: AccelRecording,
    voicing: VoicingConfig = DEFAULT_VOICING,
    harmonics: HarmonicConfig = DEFAULT_HARMONICS,
    frame_ms: float = FRAME_MS,
) -> list[FrameFeatureRow]:
    """One feature row per frame.

    Frames whose second harmonic cannot be resolved are reported as unvoiced
    rather than given an imputed H1-H2.
    """
    rows = []
    demoted = 0
    for frame in frame_signal(rec, frame_ms):
        nsam = _rms_db(frame.samples)
        if detect_voicing(frame, voicing):
            try:
                f0 = estimate_f0(frame, voicing)
                h1h2 = compute_h1h2(frame, f0, harmonics)
            except (HarmonicNotFound, NoPeriodicity):
                demoted += 1
            else:
                rows.append(FrameFeatureRow(frame.index, True, f0, h1h2, nsam))
                continue
        rows.append(FrameFeatureRow(frame.index, False, None, None, nsam))
    if demoted:
        logger.info("%s: %d voiced frames demoted (no resolvable H2)", rec.subject_id or "recording", demoted)
    return rows


# -- calibration -------------------------------------------------------------

def fit_calibration(pairs: Iterable[Sequence[float]]) -> CalibrationModel:
    """Ordinary least-squares line from NSAM (dB) to SPL (dB)."""
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    if len(arr) < 2:
        raise DegenerateCalibration("need at least two (nsam, spl) pairs")
    x, y = arr[:, 0], arr[:, 1]
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateCalibration("all NSAM values are identical")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    return CalibrationModel(slope, intercept, float(np.sqrt(np.mean(resid**2))))


def apply_calibration(model: CalibrationModel, nsam_db):
    return model.slope * nsam_db + model.intercept
