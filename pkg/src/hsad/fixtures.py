"""Synthetic corpora for tests and demos.

Nothing here imitates speech. Each class gets a distinct signal texture so a
small model has something learnable, and speakers differ by pitch.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .audio import TARGET_RATE, AudioClip, save_wav
from .manifest import SENTENCE_TYPES, UtteranceRecord

CLASS_GROUP = {0: "G1", 1: "G2", 2: "G3", 3: "G4"}


def speaker_ids(n: int = 12):
    return [f"spk{i:02d}" for i in range(n)]


def clean_corpus_records(n_speakers: int = 12):
    """Record-only clean corpus: every speaker reads the full sentence set once.

    Sentence ``j`` of a speaker gets class ``j % 4`` so each class ends up with
    a quarter of the records.
    """
    records = []
    for s, spk in enumerate(speaker_ids(n_speakers)):
        j = 0
        for stype, count in SENTENCE_TYPES.items():
            for k in range(count):
                label = j % 4
                rec = UtteranceRecord(
                    utterance_id=f"{spk}-{stype}-{k:02d}",
                    speaker_id=spk,
                    age=19 + (s * 19) % 20,
                    gender="female" if s % 2 else "male",
                    sentence_type=stype,
                    group=CLASS_GROUP[label],
                    audio_path=f"audio/{spk}/{stype}-{k:02d}.wav",
                )
                if label == 1:
                    rec.cloning_condition = f"C{1 + k % 4}"
                    rec.similarity_score = 0.75 + 0.05 * (k % 4)
                if label == 3:
                    rec.segment_boundaries = [["Human", 0, 48000], ["Generated", 47840, 96000]]
                records.append(rec)
                j += 1
    return records


def texture(label: int, seconds: float = 1.0, f0: float = 160.0, seed: int = 0,
            rate: int = TARGET_RATE) -> AudioClip:
    """Class-specific test signal.

    0: harmonic stack with vibrato, 1: steady harmonic stack, 2: band-limited
    noise bursts, 3: first half class 0 then class 2.
    """
    rng = np.random.default_rng(seed)
    n = int(round(seconds * rate))
    t = np.arange(n) / rate
    if label == 0:
        phase = 2 * np.pi * f0 * t + 3.0 * np.sin(2 * np.pi * 5.0 * t)
        x = sum(np.sin(h * phase) / h for h in range(1, 6))
    elif label == 1:
        x = sum(np.sin(2 * np.pi * h * f0 * 1.5 * t) / h for h in range(1, 4))
    elif label == 2:
        noise = rng.standard_normal(n)
        spec = np.fft.rfft(noise)
        freqs = np.fft.rfftfreq(n, 1 / rate)
        spec[(freqs < 2000) | (freqs > 5000)] = 0
        x = np.fft.irfft(spec, n) * (0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 4 * t)))
    elif label == 3:
        half = n // 2
        a = texture(0, half / rate, f0, seed, rate).samples
        b = texture(2, (n - half) / rate, f0, seed + 1, rate).samples
        x = np.concatenate([a, b])
    else:
        raise ValueError(f"unknown class {label}")
    x = np.asarray(x, dtype=np.float64)
    return AudioClip(0.5 * x / np.max(np.abs(x)), rate)


def texture_examples(n_per_class: int = 3, seconds: float = 1.0, seed: int = 0):
    """``[(clip, label), ...]`` with ``n_per_class`` clips per class at varied pitch."""
    out = []
    for label in range(4):
        for i in range(n_per_class):
            f0 = 110.0 + 37.0 * i + 11.0 * label
            out.append((texture(label, seconds, f0, seed + 100 * label + i), label))
    return out


def write_raw_corpus(root, n_speakers: int = 4, seconds: float = 1.0, rate: int = 22050, seed: int = 0):
    """Write human / cloned / generated clips with JSON sidecars for ``ingest``.

    Each speaker gets two human clips and one cloned and one generated clip.
    Clips are written at ``rate`` so ingestion exercises resampling.
    """
    root = Path(root)
    plan = [("G1", 0, "alphanumeric"), ("G1", 0, "numeric"), ("G2", 1, "coherent_pair"), ("G3", 2, "unrelated")]
    for s, spk in enumerate(speaker_ids(n_speakers)):
        f0 = 120.0 + 25.0 * s
        for j, (group, label, stype) in enumerate(plan):
            uid = f"{spk}-{j}"
            clip = texture(label, seconds, f0 + 7 * j, seed + 10 * s + j, rate)
            save_wav(root / spk / f"{uid}.wav", clip)
            meta = {"utterance_id": uid, "speaker_id": spk, "age": 20 + s, "gender": "female" if s % 2 else "male",
                    "sentence_type": stype, "group": group}
            if group == "G2":
                meta.update(cloning_condition="C3", similarity_score=0.82)
            (root / spk / f"{uid}.json").write_text(json.dumps(meta) + "\n", encoding="utf-8")
    return root
