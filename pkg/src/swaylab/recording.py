"""Data model and file I/O for bilateral insole recordings.

A recording holds, per frame, the left/right local CoP coordinates (mm,
origin at the insole center, +ML lateral-right, +AP anterior) and the
total force under each foot (arbitrary units; downstream fusion uses only
force ratios, so no calibration is required).

File formats
------------
Recording CSV: two ``#``-prefixed header lines carrying ``sample_rate_hz``
and ``insole_width_mm``, then a header row
``time_s,l_ml_mm,l_ap_mm,l_force,r_ml_mm,r_ap_mm,r_force`` and one row per
frame.

Manifest: a JSON file with a ``subjects`` list; each entry maps a subject
id to its metadata and a recording path (relative paths resolve against
the manifest's directory).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ParseError, TooShortError, ValidationError

#: Minimum number of frames: one analysis window (3 s at 50 Hz).
MIN_FRAMES = 150

RECORDING_COLUMNS = ("time_s", "l_ml_mm", "l_ap_mm", "l_force",
                     "r_ml_mm", "r_ap_mm", "r_force")

#: Canonical keys of the neuropsychological score block.
NEUROPSYCH_KEYS = ("MMSE", "CDT", "LM_IA", "LM_IIA", "TMT_A", "TMT_B")


class Group(Enum):
    MCI_LB = "MCI_LB"
    MCI_AD = "MCI_AD"
    CN = "CN"
    UNKNOWN = "UNKNOWN"


class Sex(Enum):
    F = "F"
    M = "M"


@dataclass(frozen=True)
class SubjectMeta:
    """Per-subject metadata: diagnostic group, demographics and optional
    neuropsychological scores (keys from :data:`NEUROPSYCH_KEYS`)."""

    id: str
    group: Group = Group.UNKNOWN
    sex: Sex = Sex.F
    age: float = 70.0
    education: float = 12.0
    height: float = 160.0
    weight: float = 60.0
    neuropsych: dict | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("subject id must be a non-empty string")
        if not 0.0 < self.age <= 120.0:
            raise ValidationError(f"subject {self.id}: age {self.age} outside (0, 120]")
        if not 50.0 < self.height <= 250.0:
            raise ValidationError(f"subject {self.id}: height {self.height} outside (50, 250]")
        if not 20.0 < self.weight <= 200.0:
            raise ValidationError(f"subject {self.id}: weight {self.weight} outside (20, 200]")
        if self.neuropsych is not None:
            for key, value in self.neuropsych.items():
                if key not in NEUROPSYCH_KEYS:
                    raise ValidationError(f"subject {self.id}: unknown neuropsych key {key!r}")
                if not math.isfinite(float(value)):
                    raise ValidationError(f"subject {self.id}: non-finite neuropsych score {key}")


@dataclass(frozen=True)
class RawRecording:
    """Bilateral insole time series for one subject.

    Channel arrays all have equal length (>= :data:`MIN_FRAMES`). Structural
    invariants are checked at construction; finiteness of file-loaded data
    is enforced by :func:`load_recording`, while programmatically built
    recordings may carry NaNs, which :func:`validate_recording` reports.
    """

    subject: SubjectMeta
    sample_rate: float
    insole_width: float
    l_ml: np.ndarray
    l_ap: np.ndarray
    l_force: np.ndarray
    r_ml: np.ndarray
    r_ap: np.ndarray
    r_force: np.ndarray

    def __post_init__(self):
        channels = self.channels()
        n = len(self.l_ml)
        if any(len(c) != n for c in channels.values()):
            raise ValidationError(f"subject {self.subject.id}: unequal channel lengths")
        if n < MIN_FRAMES:
            raise TooShortError(
                f"subject {self.subject.id}: {n} frames, need at least {MIN_FRAMES}")
        if self.sample_rate <= 0:
            raise ValidationError(f"subject {self.subject.id}: sample_rate must be positive")
        if self.insole_width <= 0:
            raise ValidationError(f"subject {self.subject.id}: insole_width must be positive")
        for name in ("l_force", "r_force"):
            force = channels[name]
            bad = np.where(force < 0)[0]
            if bad.size:
                raise ValidationError(
                    f"subject {self.subject.id}: negative {name} at frame {bad[0]}")

    def channels(self) -> dict:
        return {"l_ml": self.l_ml, "l_ap": self.l_ap, "l_force": self.l_force,
                "r_ml": self.r_ml, "r_ap": self.r_ap, "r_force": self.r_force}

    @property
    def n_frames(self) -> int:
        return len(self.l_ml)

    @property
    def duration(self) -> float:
        return self.n_frames / self.sample_rate


@dataclass(frozen=True)
class Cohort:
    """An ordered collection of recordings with unique subject ids."""

    recordings: tuple
    provenance: str = ""

    def __post_init__(self):
        ids = [rec.subject.id for rec in self.recordings]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate subject ids in cohort: {dupes}")

    def subject_ids(self) -> list:
        return [rec.subject.id for rec in self.recordings]

    def meta_by_subject(self) -> dict:
        return {rec.subject.id: rec.subject for rec in self.recordings}


@dataclass(frozen=True)
class RecordingReport:
    """Result of :func:`validate_recording` (reporting only, never raises)."""

    subject_id: str
    zero_force_frames: tuple = ()
    nonfinite_runs: tuple = ()   # (start_frame, run_length) pairs

    @property
    def ok(self) -> bool:
        return not self.zero_force_frames and not self.nonfinite_runs

    def issues(self) -> list:
        out = []
        if self.zero_force_frames:
            out.append(f"{len(self.zero_force_frames)} frames with zero total force "
                       f"(first at {self.zero_force_frames[0]})")
        for start, length in self.nonfinite_runs:
            out.append(f"non-finite run of {length} frames starting at {start}")
        return out


def validate_recording(rec: RawRecording) -> RecordingReport:
    """Report frames whose fused CoP is undefined (zero total force) and
    any runs of non-finite values in the six channels."""
    total = rec.l_force + rec.r_force
    zero = tuple(int(i) for i in np.where(total == 0.0)[0])

    finite = np.ones(rec.n_frames, dtype=bool)
    for channel in rec.channels().values():
        finite &= np.isfinite(channel)
    runs = []
    i = 0
    while i < rec.n_frames:
        if not finite[i]:
            j = i
            while j < rec.n_frames and not finite[j]:
                j += 1
            runs.append((i, j - i))
            i = j
        else:
            i += 1
    return RecordingReport(rec.subject.id, zero, tuple(runs))


def _parse_header_comments(lines):
    """Extract key=value pairs from leading '#' lines."""
    meta = {}
    n_comment = 0
    for raw in lines:
        stripped = raw.strip()
        if not stripped.startswith("#"):
            break
        n_comment += 1
        body = stripped.lstrip("#").strip()
        if "=" in body:
            key, _, value = body.partition("=")
            meta[key.strip()] = value.strip()
    return meta, n_comment


def load_recording(path, meta: SubjectMeta) -> RawRecording:
    """Load one recording CSV, validating every value.

    Raises :class:`ParseError` for malformed rows (with line number),
    :class:`ValidationError` for non-finite or negative-force values
    (naming column and line), and :class:`TooShortError` below
    :data:`MIN_FRAMES` frames.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    header_meta, n_comment = _parse_header_comments(lines)
    if "sample_rate_hz" not in header_meta:
        raise ParseError(f"{path}: missing 'sample_rate_hz' header comment")
    if "insole_width_mm" not in header_meta:
        raise ParseError(f"{path}: missing 'insole_width_mm' header comment")
    try:
        sample_rate = float(header_meta["sample_rate_hz"])
        insole_width = float(header_meta["insole_width_mm"])
    except ValueError as exc:
        raise ParseError(f"{path}: bad header value: {exc}") from None

    if n_comment >= len(lines):
        raise ParseError(f"{path}: no column header row")
    header_line = n_comment  # 0-based index of the column header
    columns = tuple(c.strip() for c in lines[header_line].split(","))
    if columns != RECORDING_COLUMNS:
        raise ParseError(f"{path}: expected columns {','.join(RECORDING_COLUMNS)}, "
                         f"got {','.join(columns)}", line=header_line + 1)

    rows = []
    for offset, raw in enumerate(lines[header_line + 1:]):
        lineno = header_line + 2 + offset
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != len(RECORDING_COLUMNS):
            raise ParseError(f"{path}: expected {len(RECORDING_COLUMNS)} fields, "
                             f"got {len(parts)}", line=lineno)
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"{path}: non-numeric field", line=lineno) from None
        for col, value in zip(RECORDING_COLUMNS, values):
            if not math.isfinite(value):
                raise ValidationError(
                    f"{path}: non-finite value in column {col} at line {lineno}")
            if col in ("l_force", "r_force") and value < 0:
                raise ValidationError(
                    f"{path}: negative force in column {col} at line {lineno}")
        rows.append(values)

    if len(rows) < MIN_FRAMES:
        raise TooShortError(f"{path}: {len(rows)} frames, need at least {MIN_FRAMES}")

    data = np.asarray(rows, dtype=float)
    return RawRecording(
        subject=meta, sample_rate=sample_rate, insole_width=insole_width,
        l_ml=data[:, 1], l_ap=data[:, 2], l_force=data[:, 3],
        r_ml=data[:, 4], r_ap=data[:, 5], r_force=data[:, 6])


def write_recording(rec: RawRecording, path) -> None:
    """Write a recording CSV (values at 8 significant digits; the round
    trip preserves at least 6)."""
    path = Path(path)
    lines = [f"# sample_rate_hz={rec.sample_rate:.8g}",
             f"# insole_width_mm={rec.insole_width:.8g}",
             ",".join(RECORDING_COLUMNS)]
    t = np.arange(rec.n_frames) / rec.sample_rate
    cols = (t, rec.l_ml, rec.l_ap, rec.l_force, rec.r_ml, rec.r_ap, rec.r_force)
    for i in range(rec.n_frames):
        lines.append(",".join(f"{c[i]:.8g}" for c in cols))
    path.write_text("\n".join(lines) + "\n")


def _meta_from_manifest_entry(entry) -> SubjectMeta:
    neuro = entry.get("neuropsych")
    return SubjectMeta(
        id=str(entry["id"]),
        group=Group(entry.get("group", "UNKNOWN")),
        sex=Sex(entry.get("sex", "F")),
        age=float(entry.get("age", 70.0)),
        education=float(entry.get("education", 12.0)),
        height=float(entry.get("height", 160.0)),
        weight=float(entry.get("weight", 60.0)),
        neuropsych={k: float(v) for k, v in neuro.items()} if neuro else None)


def load_cohort(manifest_path) -> Cohort:
    """Load every recording listed in a manifest, in manifest order.

    Raises on duplicate subject ids, missing recording files, or metadata
    outside the documented ranges. An empty manifest yields an empty
    cohort with a warning.
    """
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: invalid JSON: {exc}") from None
    entries = doc.get("subjects", [])
    if not entries:
        warnings.warn(f"{manifest_path}: manifest lists no subjects", stacklevel=2)
        return Cohort(recordings=(), provenance=doc.get("provenance", ""))

    seen = set()
    recordings = []
    for entry in entries:
        sid = str(entry.get("id", ""))
        if sid in seen:
            raise ValidationError(f"{manifest_path}: duplicate subject id {sid!r}")
        seen.add(sid)
        meta = _meta_from_manifest_entry(entry)
        rec_path = Path(entry["recording"])
        if not rec_path.is_absolute():
            rec_path = manifest_path.parent / rec_path
        if not rec_path.exists():
            raise ValidationError(f"{manifest_path}: recording file not found for "
                                  f"subject {sid!r}: {rec_path}")
        recordings.append(load_recording(rec_path, meta))
    return Cohort(recordings=tuple(recordings), provenance=doc.get("provenance", ""))


def save_cohort(cohort: Cohort, out_dir) -> Path:
    """Write per-subject recording CSVs plus a manifest; returns the
    manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in cohort.recordings:
        meta = rec.subject
        fname = f"{meta.id}.csv"
        write_recording(rec, out_dir / fname)
        entry = {"id": meta.id, "group": meta.group.value, "sex": meta.sex.value,
                 "age": meta.age, "education": meta.education,
                 "height": meta.height, "weight": meta.weight,
                 "recording": fname}
        if meta.neuropsych is not None:
            entry["neuropsych"] = dict(meta.neuropsych)
        entries.append(entry)
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps(
        {"provenance": cohort.provenance, "subjects": entries}, indent=1))
    return manifest
