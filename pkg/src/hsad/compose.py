"""Hybrid utterance construction by cross-faded concatenation."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .audio import TARGET_RATE, AudioClip


class SourceKind(str, enum.Enum):
    HUMAN = "Human"
    CLONED = "Cloned"
    GENERATED = "Generated"


class Pattern(str, enum.Enum):
    H_TO_S = "HtoS"
    S_TO_H = "StoH"
    INTERLEAVED = "Interleaved"
    # human-only rearrangement (G6)
    RECOMBINED = "Recombined"


@dataclass(frozen=True)
class SegmentSpec:
    source_clip: AudioClip
    source_kind: SourceKind
    source_id: str = ""


@dataclass(frozen=True)
class BoundaryAnnotation:
    segment_index: int
    source_kind: SourceKind
    start_sample: int
    end_sample: int

    def as_list(self):
        return [self.source_kind.value, self.start_sample, self.end_sample]


def fade_length(fade_ms: float, rate: int) -> int:
    return int(round(fade_ms * rate / 1000.0))


def _check_pattern(pattern: Pattern, kinds):
    if len(kinds) == 1:
        return  # degenerate recipe: no splice
    human = SourceKind.HUMAN
    if pattern is Pattern.H_TO_S:
        ok = len(kinds) == 2 and kinds[0] is human and kinds[1] is not human
    elif pattern is Pattern.S_TO_H:
        ok = len(kinds) == 2 and kinds[0] is not human and kinds[1] is human
    elif pattern is Pattern.INTERLEAVED:
        ok = len(kinds) >= 3 and all(a is not b for a, b in zip(kinds, kinds[1:]))
    elif pattern is Pattern.RECOMBINED:
        ok = all(k is human for k in kinds)
    else:
        ok = False
    if not ok:
        names = ", ".join(k.value for k in kinds)
        raise ValueError(f"segment kinds [{names}] are inconsistent with pattern {pattern.value}")


@dataclass(frozen=True)
class HybridRecipe:
    pattern: Pattern
    segments: tuple
    fade_ms: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("a recipe needs at least one segment")
        for seg in self.segments:
            if seg.source_clip.sample_rate != TARGET_RATE:
                raise ValueError(f"segment {seg.source_id!r} is not at {TARGET_RATE} Hz")
        _check_pattern(self.pattern, [SourceKind(s.source_kind) for s in self.segments])


def crossfade_concat(a: AudioClip, b: AudioClip, fade_ms: float = 10.0) -> AudioClip:
    """Join two clips with a linear cross-fade over ``round(fade_ms * rate / 1000)`` samples.

    The clips overlap by the fade length, so the result is ``len(a) + len(b) - L``
    samples long.
    """
    if a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")
    L = fade_length(fade_ms, a.sample_rate)
    if L < 0:
        raise ValueError("fade_ms must be non-negative")
    if L and (len(a) <= L or len(b) <= L):
        raise ValueError(f"fade of {L} samples does not fit clips of length {len(a)} and {len(b)}")
    x, y = a.samples, b.samples
    if L == 0:
        return AudioClip(np.concatenate([x, y]), a.sample_rate)
    w = np.ones(1) if L == 1 else np.arange(L) / (L - 1)
    fade = x[len(x) - L:] * (1.0 - w) + y[:L] * w
    return AudioClip(np.concatenate([x[:len(x) - L], fade, y[L:]]), a.sample_rate)


def compose(recipe: HybridRecipe):
    """Fold ``crossfade_concat`` over the recipe's segments.

    Returns the composed clip and one boundary annotation per segment in
    output coordinates; adjacent annotations overlap by the fade length.
    """
    segs = recipe.segments
    out = segs[0].source_clip
    L = fade_length(recipe.fade_ms, out.sample_rate)
    annotations = [BoundaryAnnotation(0, SourceKind(segs[0].source_kind), 0, len(out))]
    for i, seg in enumerate(segs[1:], start=1):
        start = len(out) - L
        out = crossfade_concat(out, seg.source_clip, recipe.fade_ms)
        annotations.append(BoundaryAnnotation(i, SourceKind(seg.source_kind), start, start + len(seg.source_clip)))
    return out, annotations
