"""File formats: manifests, WAV input, the frame-feature CSV cache, results
JSON, and plot-data CSV/SVG output.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .enums import Condition, Group
from .errors import (
    CorruptHeader,
    DuplicateSubject,
    MissingDayIndex,
    ParseError,
    SchemaMismatch,
    SchemaVersionMismatch,
    UnresolvablePath,
    UnsupportedFormat,
)
from .features import Cohort, DayFrames, SubjectData
from .signal import EXPECTED_SAMPLE_RATE, AccelRecording, FrameFeatureRow, extract_frame_features

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FRAME_CSV_HEADER = ["subject_id", "condition", "day", "frame_index", "voiced", "f0_hz", "h1h2_db", "nsam_db"]


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- manifest ----------------------------------------------------------------

@dataclass(frozen=True)
class RecordingEntry:
    path: Path
    condition: Condition
    day: Optional[int] = None


@dataclass
class SubjectEntry:
    id: str
    group: Group
    recordings: list[RecordingEntry] = field(default_factory=list)
    pair_id: Optional[str] = None


@dataclass
class Manifest:
    subjects: list[SubjectEntry]
    root: Path = Path(".")

    def to_dict(self) -> dict:
        def rel(p: Path) -> str:
            try:
                return str(Path(p).resolve().relative_to(Path(self.root).resolve()))
            except ValueError:
                return str(p)

        return {
            "subjects": [
                {
                    "id": s.id,
                    "group": s.group.value,
                    "pair_id": s.pair_id,
                    "recordings": [
                        {"path": rel(r.path), "condition": r.condition.value, "day": r.day}
                        for r in s.recordings
                    ],
                }
                for s in self.subjects
            ]
        }


def load_manifest(path) -> Manifest:
    """Read and validate a JSON manifest. Recording paths resolve against the manifest's folder."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    root = path.parent.resolve()
    try:
        raw_subjects = data["subjects"]
        subjects, seen = [], set()
        for raw in raw_subjects:
            sid = str(raw["id"])
            if sid in seen:
                raise DuplicateSubject(f"subject {sid!r} listed twice")
            seen.add(sid)
            recs = []
            for r in raw.get("recordings", []):
                cond = Condition(r["condition"])
                day = r.get("day")
                if cond is Condition.FIELD and day is None:
                    raise MissingDayIndex(f"{sid}: field recording {r['path']} has no day")
                p = Path(r["path"])
                p = p if p.is_absolute() else root / p
                if not p.exists():
                    raise UnresolvablePath(f"{sid}: {p} does not exist")
                recs.append(RecordingEntry(p, cond, None if day is None else int(day)))
            pair = raw.get("pair_id")
            subjects.append(SubjectEntry(sid, Group(raw["group"]), recs, None if pair is None else str(pair)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed manifest {path}: {exc!r}") from exc
    return Manifest(subjects, root)


def write_manifest(manifest: Manifest, path) -> None:
    _atomic_write(Path(path), json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")


# -- WAV ---------------------------------------------------------------------

def read_wav(path, subject_id: str = "", condition=Condition.FIELD, day_index: Optional[int] = None) -> AccelRecording:
    """Mono 16-bit PCM WAV scaled to [-1, 1) by dividing by 32768."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate, n = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            if channels != 1:
                raise UnsupportedFormat(f"{path}: {channels} channels, expected mono")
            if width != 2:
                raise UnsupportedFormat(f"{path}: {8 * width}-bit samples, expected 16-bit")
            raw = w.readframes(n)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormat(f"{path}: {msg}") from exc
        raise CorruptHeader(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise CorruptHeader(f"{path}: truncated header") from exc
    if rate != EXPECTED_SAMPLE_RATE:
        logger.warning("%s: sample rate %d Hz (expected %d)", path, rate, EXPECTED_SAMPLE_RATE)
    samples = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    return AccelRecording(samples, rate, subject_id, condition, day_index)


def write_wav(path, samples, sample_rate_hz: int = EXPECTED_SAMPLE_RATE) -> None:
    ints = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate_hz)
        w.writeframes(ints.tobytes())


# -- frame CSV ---------------------------------------------------------------

@dataclass(frozen=True)
class TaggedRow:
    subject_id: str
    condition: Condition
    day: Optional[int]
    row: FrameFeatureRow


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.9g}"


def _quantize(row: FrameFeatureRow) -> FrameFeatureRow:
    # snap to the cache precision so WAV and CSV inputs yield identical features
    def q(x):
        return None if x is None else float(f"{x:.9g}")

    return FrameFeatureRow(row.frame_index, row.voiced, q(row.f0_hz), q(row.h1h2_db), q(row.nsam_db))


def _csv_lines(rows: Iterable[TaggedRow]) -> Iterable[str]:
    yield ",".join(FRAME_CSV_HEADER)
    for t in rows:
        r = t.row
        yield ",".join((
            t.subject_id, t.condition.value, "" if t.day is None else str(t.day), str(r.frame_index),
            "1" if r.voiced else "0", _fmt(r.f0_hz), _fmt(r.h1h2_db), _fmt(r.nsam_db),
        ))


def write_frame_csv(rows: Iterable[TaggedRow], path) -> None:
    """Frame cache with 9 significant digits; unvoiced rows leave f0/H1-H2 empty."""
    _atomic_write(Path(path), "\n".join(_csv_lines(rows)) + "\n")


def _opt(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def read_frame_csv(path) -> list[TaggedRow]:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FRAME_CSV_HEADER:
            raise SchemaMismatch(f"{path}: header {header} != {FRAME_CSV_HEADER}")
        out = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                sid, cond, day, idx, voiced, f0, h1h2, nsam = rec
                out.append(TaggedRow(
                    sid, Condition(cond), None if day == "" else int(day),
                    FrameFeatureRow(int(idx), voiced == "1", _opt(f0), _opt(h1h2), float(nsam)),
                ))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_day_frames(path) -> dict:
    """Columnar reader: frame CSV straight to :class:`DayFrames`, keyed like :func:`rows_to_day_frames`.

    Avoids building one row object per frame, which dominates load time for
    long recordings.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from exc
    cond_cache: dict = {}
    acc: dict = {}  # key -> [n_frames, idx, h1h2, nsam]
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FRAME_CSV_HEADER:
            raise SchemaMismatch(f"{path}: header {header} != {FRAME_CSV_HEADER}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                sid, cond, day, idx, voiced, _f0, h1h2, nsam = rec
                key = (sid, cond, day)
                a = acc.get(key)
                if a is None:
                    a = acc[key] = [0, [], [], []]
                i = int(idx)
                if i < 0:
                    raise ValueError("negative frame index")
                a[0] = max(a[0], i + 1)
                if voiced == "1":
                    if h1h2 == "":
                        raise ValueError("voiced frame without H1-H2")
                    a[1].append(i)
                    a[2].append(float(h1h2))
                    a[3].append(float(nsam))
                elif voiced != "0":
                    raise ValueError(f"voiced flag {voiced!r}")
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    out = {}
    for (sid, cond, day), (n, idx, h, s) in acc.items():
        try:
            c = cond_cache.setdefault(cond, Condition(cond))
            d = None if day == "" else int(day)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        order = np.argsort(idx, kind="stable")
        out[(sid, c, d)] = DayFrames(sid, d, n, np.asarray(idx)[order], np.asarray(h)[order],
                                     np.asarray(s)[order], c)
    return out


def day_frames_to_rows(day: DayFrames, unvoiced_nsam_db: float = -60.0) -> Iterable[TaggedRow]:
    """Expand a compact day into per-frame rows; unvoiced frames get a fixed NSAM floor."""
    voiced_at = dict(zip(day.voiced_idx.tolist(), range(len(day.voiced_idx))))
    for i in range(day.n_frames):
        j = voiced_at.get(i)
        if j is None:
            row = FrameFeatureRow(i, False, None, None, unvoiced_nsam_db)
        else:
            row = FrameFeatureRow(i, True, None, float(day.h1h2[j]), float(day.nsam[j]))
        yield TaggedRow(day.subject_id, day.condition, day.day_index, row)


def _day_csv_lines(day: DayFrames, unvoiced_nsam_db: float) -> Iterable[str]:
    # fast path of day_frames_to_rows + _csv_lines for large synthetic days
    prefix = f"{day.subject_id},{day.condition.value},{'' if day.day_index is None else day.day_index},"
    floor = _fmt(unvoiced_nsam_db)
    voiced_at = dict(zip(day.voiced_idx.tolist(), zip(day.h1h2.tolist(), day.nsam.tolist())))
    for i in range(day.n_frames):
        v = voiced_at.get(i)
        if v is None:
            yield f"{prefix}{i},0,,,{floor}"
        else:
            yield f"{prefix}{i},1,,{v[0]:.9g},{v[1]:.9g}"


def write_subject_csv(subject: SubjectData, path, unvoiced_nsam_db: float = -60.0) -> None:
    lines = [",".join(FRAME_CSV_HEADER)]
    for day in [*subject.lab.values(), *subject.field_days]:
        lines.extend(_day_csv_lines(day, unvoiced_nsam_db))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def rows_to_day_frames(rows: Iterable[TaggedRow]) -> dict:
    """Group tagged rows into :class:`DayFrames` keyed by ``(subject_id, condition, day)``."""
    grouped: dict = {}
    for t in rows:
        grouped.setdefault((t.subject_id, t.condition, t.day), []).append(t.row)
    return {
        key: DayFrames.from_rows(rs, key[0], key[2], key[1]) for key, rs in grouped.items()
    }


# -- cohort loading ----------------------------------------------------------

def load_cohort(manifest: Manifest, config: Config = DEFAULT_CONFIG) -> Cohort:
    """Build a cohort from a manifest whose recordings are WAV files or frame CSVs."""
    csv_cache: dict = {}
    subjects = []
    for s in manifest.subjects:
        data = SubjectData(s.id, s.group, pair_id=s.pair_id)
        for rec in s.recordings:
            if rec.path.suffix.lower() == ".wav":
                audio = read_wav(rec.path, s.id, rec.condition, rec.day)
                rows = extract_frame_features(audio, config.voicing, config.harmonics, config.frame_ms)
                rows = [_quantize(r) for r in rows]
                day = DayFrames.from_rows(rows, s.id, rec.day, rec.condition)
            else:
                if rec.path not in csv_cache:
                    csv_cache[rec.path] = read_day_frames(rec.path)
                day = csv_cache[rec.path].get((s.id, rec.condition, rec.day))
                if day is None:
                    raise ParseError(f"{rec.path} has no rows for {s.id}/{rec.condition.value}/{rec.day}")
            if rec.condition is Condition.FIELD:
                data.field_days.append(day)
            else:
                data.lab[rec.condition] = day
        data.field_days.sort(key=lambda d: d.day_index)
        subjects.append(data)
    return Cohort(subjects)


# -- results -----------------------------------------------------------------

def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps_results(doc: dict) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, non-finite as null."""
    body = dict(doc)
    body.setdefault("schema_version", SCHEMA_VERSION)
    return json.dumps(_canonical(body), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_results(doc: dict, path) -> None:
    _atomic_write(Path(path), dumps_results(doc))


def read_results(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read results {path}: {exc}") from exc
    found = doc.get("schema_version") if isinstance(doc, dict) else None
    if found != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"{path}: schema_version {found}, this toolkit reads {SCHEMA_VERSION}")
    return doc


# -- plot data ---------------------------------------------------------------

def _write_csv(path: Path, header: list[str], rows: Iterable) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("" if v is None else (f"{v:.9g}" if isinstance(v, float) else str(v)) for v in r))
    _atomic_write(path, "\n".join(lines) + "\n")


def _svg_lines(path: Path, title: str, series: dict, xlabel: str, ylabel: str) -> None:
    """Minimal line chart; ``series`` maps a name to ``(xs, ys)``."""
    w, h, m = 480, 320, 48
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if y is not None]
    if not pts:
        return
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(x):
        return m + (x - x0) / (x1 - x0) * (w - 2 * m)

    def sy(y):
        return h - m - (y - y0) / (y1 - y0) * (h - 2 * m)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">',
        f'<text x="{w / 2}" y="16" text-anchor="middle">{title}</text>',
        f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
        f'<text x="{w / 2}" y="{h - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="12" y="{h / 2}" transform="rotate(-90 12 {h / 2})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{m}" y="{h - m + 14}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{w - m}" y="{h - m + 14}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{m - 4}" y="{h - m}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{m - 4}" y="{m + 4}" text-anchor="end">{y1:.3g}</text>',
    ]
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = colors[i % len(colors)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys) if y is not None)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        parts.append(f'<text x="{w - m}" y="{m + 14 * i}" text-anchor="end" fill="{color}">{name}</text>')
    parts.append("</svg>")
    _atomic_write(path, "\n".join(parts) + "\n")


def emit_plot_data(report: dict, out_dir, svg: bool = True) -> list[Path]:
    """Write the CSV series (and simple SVG charts) present in a results document.

    Files: ``roc.csv``, ``accuracy_vs_days.csv``, ``effectsize_vs_days.csv``,
    ``null_hist.csv``. Series absent from the report are skipped.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    curves = report.get("curves") or {}

    roc_series = {name: c["roc"] for name, c in (report.get("conditions") or {}).items() if c.get("roc")}
    if roc_series:
        rows = []
        for name, pts in sorted(roc_series.items()):
            rows.extend((name, float(f), float(t)) for f, t in pts)
        p = out / "roc.csv"
        _write_csv(p, ["condition", "fpr", "tpr"], rows)
        written.append(p)
        if svg:
            _svg_lines(out / "roc.svg", "ROC",
                       {n: ([q[0] for q in v], [q[1] for q in v]) for n, v in sorted(roc_series.items())},
                       "false positive rate", "true positive rate")

    if "days" in curves:
        days = curves["days"]
        p = out / "accuracy_vs_days.csv"
        _write_csv(p, ["days", "mean", "std"], zip(days, curves["accuracy_mean"], curves["accuracy_std"]))
        written.append(p)
        p = out / "effectsize_vs_days.csv"
        _write_csv(p, ["days", "d_h1h2std", "d_nsamskew"], zip(days, curves["d_h1h2std"], curves["d_nsamskew"]))
        written.append(p)
        if svg:
            _svg_lines(out / "accuracy_vs_days.svg", "accuracy vs days",
                       {"accuracy": (days, curves["accuracy_mean"])}, "days", "accuracy")
            _svg_lines(out / "effectsize_vs_days.svg", "effect size vs days",
                       {"H1-H2 std": (days, curves["d_h1h2std"]), "NSAM skewness": (days, curves["d_nsamskew"])},
                       "days", "Cohen's D")

    if "null_hist" in curves:
        p = out / "null_hist.csv"
        _write_csv(p, ["bin", "count"], [(float(b), int(c)) for b, c in curves["null_hist"]])
        written.append(p)
        if svg:
            hist = curves["null_hist"]
            _svg_lines(out / "null_hist.svg", "null accuracy",
                       {"count": ([b for b, _ in hist], [c for _, c in hist])}, "accuracy (%)", "count")
    return written
