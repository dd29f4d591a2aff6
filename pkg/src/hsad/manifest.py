"""Dataset manifest: record schema, line format, validation and ingestion.

A manifest is UTF-8 text with LF line endings. An optional first line
``{"manifest": {...}}`` carries dataset-level settings (``clean_complete``,
``seed``, effective config); every other line is one record with keys in the
fixed order of ``FIELDS``. Floats are written with 6 significant digits.
"""
from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path

from .audio import load_wav
from .errors import DataError

GROUP_CLASS = {"G1": 0, "G2": 1, "G3": 2, "G4": 3, "G5": 3, "G6": 0}
GROUP_NAMES = {
    "G1": "Genuine Human",
    "G2": "Pure AI Clone",
    "G3": "Pure AI Generated",
    "G4": "Mixed: AI Generated + Human",
    "G5": "Mixed: AI Cloned + AI Generated",
    "G6": "Human Recombined",
}
CLASS_NAMES = ("Human", "Cloned", "Generated", "Hybrid")
HYBRID_GROUPS = ("G4", "G5", "G6")
CLONING_CONDITIONS = ("C1", "C2", "C3", "C4")
MIN_SIMILARITY = 0.70

# sentence categories and per-speaker counts
SENTENCE_TYPES = {
    "alphanumeric": 8,
    "alphabetic": 8,
    "numeric": 8,
    "new_concept_english": 16,
    "coherent_pair": 16,
    "unrelated": 16,
    "grammatical_error": 16,
    "semantic_grammatical_anomaly": 16,
}
SENTENCES_PER_SPEAKER = sum(SENTENCE_TYPES.values())


@dataclass
class UtteranceRecord:
    utterance_id: str
    speaker_id: str | None = None
    age: int | None = None
    gender: str | None = None
    sentence_type: str | None = None
    class_label: int | None = None
    group: str | None = None
    cloning_condition: str | None = None
    similarity_score: float | None = None
    segment_boundaries: list | None = None
    composition: dict | None = None
    degradation: dict | None = None
    audio_path: str | None = None
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if self.class_label is None and self.group in GROUP_CLASS:
            self.class_label = GROUP_CLASS[self.group]

    @property
    def binary_label(self) -> int:
        """0 for genuine (class 0), 1 for anything spoofed."""
        return 0 if self.class_label == 0 else 1

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown record fields: {sorted(unknown)}")
        return cls(**d)


FIELDS = tuple(f.name for f in fields(UtteranceRecord))


def _encode(value) -> str:
    if value is None or isinstance(value, bool):
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite float {value!r} cannot be written to a manifest")
        text = format(value, ".6g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ",".join(json.dumps(str(k), ensure_ascii=False) + ":" + _encode(v)
                              for k, v in value.items()) + "}"
    if hasattr(value, "item"):  # numpy scalar
        return _encode(value.item())
    raise TypeError(f"cannot encode {type(value).__name__} in a manifest")


def encode_record(record: UtteranceRecord) -> str:
    return _encode(record.to_dict())


def decode_record(line: str) -> UtteranceRecord:
    return UtteranceRecord.from_dict(json.loads(line))


def dumps(records, header=None) -> str:
    lines = []
    if header is not None:
        lines.append(_encode({"manifest": header}))
    lines.extend(encode_record(r) for r in records)
    return "".join(line + "\n" for line in lines)


def loads(text: str):
    """Parse manifest text into ``(header, records)``; header is ``{}`` if absent."""
    header, records = {}, []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if lineno == 1 and set(obj) == {"manifest"}:
            header = obj["manifest"]
            continue
        try:
            records.append(UtteranceRecord.from_dict(obj))
        except (TypeError, DataError) as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
    return header, records


def write_manifest(path, records, header=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(records, header))


def read_manifest(path):
    return loads(Path(path).read_text(encoding="utf-8"))


def resolve_audio(manifest_path, record: UtteranceRecord) -> Path:
    return Path(manifest_path).parent / record.audio_path


# -- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    utterance_id: str | None = None

    def __str__(self):
        where = self.utterance_id or "<dataset>"
        return f"{where}: [{self.rule}] {self.message}"


@dataclass
class DatasetSummary:
    total: int
    per_class: dict
    per_group: dict
    per_speaker: dict
    per_sentence_type: dict

    def to_dict(self):
        return {"total": self.total, "per_class": self.per_class, "per_group": self.per_group,
                "per_speaker": self.per_speaker, "per_sentence_type": self.per_sentence_type}

    def render(self) -> str:
        lines = [f"total utterances: {self.total}"]
        for label, n in sorted(self.per_class.items()):
            lines.append(f"class {label} ({CLASS_NAMES[label]}): {n}")
        for g, n in sorted(self.per_group.items()):
            lines.append(f"{g} ({GROUP_NAMES.get(g, '?')}): {n}")
        lines.append(f"speakers: {len(self.per_speaker)}")
        for s, n in sorted(self.per_sentence_type.items()):
            lines.append(f"sentence type {s}: {n}")
        return "\n".join(lines)


@dataclass
class ValidationResult:
    summary: DatasetSummary
    violations: list
    warnings: list

    @property
    def ok(self) -> bool:
        return not self.violations


def summarize(records) -> DatasetSummary:
    return DatasetSummary(
        total=len(records),
        per_class=dict(sorted(Counter(r.class_label for r in records if r.class_label is not None).items())),
        per_group=dict(sorted(Counter(r.group for r in records if r.group).items())),
        per_speaker=dict(sorted(Counter(r.speaker_id for r in records if r.speaker_id).items())),
        per_sentence_type=dict(sorted(Counter(r.sentence_type for r in records if r.sentence_type).items())),
    )


def _check_record(r: UtteranceRecord, out, warn):
    uid = r.utterance_id
    if "incomplete" in r.flags:
        warn.append(Violation("incomplete-metadata", "record was ingested without full metadata", uid))
    if r.group not in GROUP_CLASS:
        out.append(Violation("unknown-group", f"group {r.group!r} is not one of G1..G6", uid))
    elif r.class_label != GROUP_CLASS[r.group]:
        out.append(Violation("group-class-mismatch",
                             f"group {r.group} implies class {GROUP_CLASS[r.group]}, record has {r.class_label}", uid))
    if r.class_label not in (0, 1, 2, 3):
        out.append(Violation("bad-class-label", f"class label {r.class_label!r} not in 0..3", uid))
    if r.sentence_type is not None and r.sentence_type not in SENTENCE_TYPES:
        out.append(Violation("unknown-sentence-type", f"sentence type {r.sentence_type!r}", uid))
    if r.similarity_score is not None and not 0.0 <= r.similarity_score <= 1.0:
        out.append(Violation("similarity-range", f"similarity {r.similarity_score} outside [0, 1]", uid))
    if r.cloning_condition is not None:
        if r.cloning_condition not in CLONING_CONDITIONS:
            out.append(Violation("unknown-cloning-condition", f"{r.cloning_condition!r}", uid))
        if r.similarity_score is None:
            warn.append(Violation("missing-similarity", "cloned record has no similarity score", uid))
        elif r.similarity_score < MIN_SIMILARITY:
            warn.append(Violation("low-similarity",
                                  f"similarity {r.similarity_score:.4f} below {MIN_SIMILARITY}", uid))
    if r.group in HYBRID_GROUPS and not r.segment_boundaries:
        out.append(Violation("missing-segment-boundaries", f"{r.group} records need segment boundaries", uid))
    for seg in r.segment_boundaries or []:
        if len(seg) != 3 or not seg[1] < seg[2] or seg[1] < 0:
            out.append(Violation("segment-order", f"bad segment {seg!r}", uid))


def validate(records, clean_complete: bool = False) -> ValidationResult:
    """Check record invariants and, for clean-complete corpora, dataset balance.

    Never mutates the records. Similarity shortfalls and incomplete metadata
    are warnings; everything else is a violation.
    """
    violations, warnings = [], []
    seen = set()
    for r in records:
        if r.utterance_id in seen:
            violations.append(Violation("duplicate-id", "utterance id appears more than once", r.utterance_id))
        seen.add(r.utterance_id)
        _check_record(r, violations, warnings)

    summary = summarize(records)
    if clean_complete:
        counts = set(summary.per_class.get(k, 0) for k in range(4))
        if len(counts) != 1:
            violations.append(Violation("class-imbalance", f"per-class counts {summary.per_class} are not equal"))
        by_speaker = {}
        for r in records:
            by_speaker.setdefault(r.speaker_id, Counter())[r.sentence_type] += 1
        for spk, got in sorted(by_speaker.items(), key=lambda kv: str(kv[0])):
            if dict(got) != SENTENCE_TYPES:
                violations.append(Violation(
                    "sentence-type-counts",
                    f"speaker {spk} has {dict(sorted(got.items(), key=lambda kv: str(kv[0])))}, "
                    f"expected {SENTENCE_TYPES}"))
    return ValidationResult(summary, violations, warnings)


# -- ingestion -----------------------------------------------------------------

REQUIRED_SIDECAR_KEYS = ("speaker_id", "group")


def ingest_directory(root, manifest_dir=None):
    """One record per ``*.wav`` under ``root`` (sorted), using ``<stem>.json`` sidecars.

    A sidecar holds one JSON object of record fields. Files without a sidecar,
    or with required keys missing, are kept and flagged ``incomplete``. Audio
    paths are stored relative to ``manifest_dir`` (default ``root``).
    """
    root = Path(root)
    base = Path(manifest_dir) if manifest_dir is not None else root
    records, origin = [], {}
    for wav in sorted(root.rglob("*.wav")):
        try:
            load_wav(wav)
        except OSError as exc:
            raise OSError(f"cannot read {wav}: {exc}") from exc
        sidecar = wav.with_suffix(".json")
        meta = {}
        if sidecar.exists():
            text = sidecar.read_text(encoding="utf-8").strip()
            meta = json.loads(text) if text else {}
        uid = meta.pop("utterance_id", None) or wav.stem
        meta.pop("audio_path", None)
        flags = list(meta.pop("flags", []))
        if not sidecar.exists() or any(meta.get(k) is None for k in REQUIRED_SIDECAR_KEYS):
            flags.append("incomplete")
        if uid in origin:
            raise DataError(f"duplicate utterance id {uid!r} in {origin[uid]} and {sidecar if sidecar.exists() else wav}")
        origin[uid] = sidecar if sidecar.exists() else wav
        rel = Path(os.path.relpath(wav, base)).as_posix()
        records.append(UtteranceRecord(utterance_id=uid, audio_path=rel, flags=flags, **meta))
    return records
