"""PCM audio container, WAV I/O, resampling and small signal utilities.

Samples are held as float64 arrays in nominal [-1, 1]. Files on disk are
16-bit PCM little-endian; 32-bit float files are accepted on read.
"""
from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnsupportedCodecError, WavFormatError

TARGET_RATE = 16000

_PCM = 0x0001
_IEEE_FLOAT = 0x0003
_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"AudioClip expects mono samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "AudioClip":
        return AudioClip(samples, self.sample_rate)


def _read_chunks(data: bytes, path):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    chunks = {}
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size and cid != b"data":
            raise WavFormatError(f"{path}: truncated {cid!r} chunk")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    return chunks


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM or 32-bit float WAV file as a mono clip.

    Stereo input is averaged to mono; integer samples are scaled by 1/32768.
    The header sample rate is kept as-is.
    """
    path = Path(path)
    data = path.read_bytes()
    chunks = _read_chunks(data, path)
    fmt = chunks.get(b"fmt ")
    if fmt is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing or short fmt chunk")
    if b"data" not in chunks:
        raise WavFormatError(f"{path}: missing data chunk")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _EXTENSIBLE:
        if len(fmt) < 26:
            raise WavFormatError(f"{path}: short WAVE_FORMAT_EXTENSIBLE header")
        (tag,) = struct.unpack("<H", fmt[24:26])
    if rate == 0:
        raise WavFormatError(f"{path}: zero sample rate")
    if channels not in (1, 2):
        raise UnsupportedCodecError(f"{path}: {channels} channels (only mono/stereo supported)")
    if tag == _PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedCodecError(f"{path}: format tag {tag:#06x} with {bits} bits per sample")
    if block_align != channels * dtype.itemsize:
        raise WavFormatError(f"{path}: inconsistent block alignment {block_align}")

    payload = chunks[b"data"]
    frames = len(payload) // block_align
    raw = np.frombuffer(payload[:frames * block_align], dtype=dtype).astype(np.float64)
    raw = raw.reshape(frames, channels) * scale
    mono = raw.mean(axis=1) if channels == 2 else raw[:, 0]
    return AudioClip(mono, rate)


def to_pcm16(samples) -> np.ndarray:
    """Quantize float samples to int16 (values outside [-1, 1) saturate)."""
    scaled = np.round(np.asarray(samples, dtype=np.float64) * 32768.0)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def save_wav(path, clip: AudioClip) -> None:
    """Write a mono 16-bit PCM WAV file at the clip's sample rate."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(clip.sample_rate)
        w.writeframes(to_pcm16(clip.samples).tobytes())


def _kaiser_sinc(x, cutoff, half_width, beta):
    # x in input-sample units; cutoff as a fraction of the input Nyquist
    w = np.zeros_like(x)
    inside = np.abs(x) < half_width
    r = x[inside] / half_width
    w[inside] = np.i0(beta * np.sqrt(1.0 - r * r)) / np.i0(beta)
    return cutoff * np.sinc(cutoff * x) * w


def resample(clip: AudioClip, target_rate: int, taps: int = 64, beta: float = 8.6,
             rolloff: float = 0.95, block: int = 16384) -> AudioClip:
    """Band-limited resampling with a Kaiser-windowed sinc kernel.

    The kernel spans ``taps`` samples at the lower of the two rates, so a
    downsampler reads proportionally more input samples per output sample.
    Output length is ``round(len * target / source)``.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    src = clip.sample_rate
    if target_rate == src:
        return AudioClip(clip.samples.copy(), src)
    x = clip.samples
    n_out = int(round(len(x) * target_rate / src))
    ratio = target_rate / src
    cutoff = rolloff * min(1.0, ratio)
    half_width = (taps / 2) / min(1.0, ratio)
    reach = int(np.ceil(half_width))
    offsets = np.arange(-reach + 1, reach + 1)

    out = np.empty(n_out)
    for start in range(0, n_out, block):
        idx = np.arange(start, min(start + block, n_out))
        t = idx * (src / target_rate)
        base = np.floor(t).astype(np.int64)
        k = base[:, None] + offsets[None, :]
        h = _kaiser_sinc(t[:, None] - k, cutoff, half_width, beta)
        valid = (k >= 0) & (k < len(x))
        vals = np.where(valid, x[np.clip(k, 0, max(len(x) - 1, 0))], 0.0)
        out[idx] = np.sum(h * vals, axis=1)
    return AudioClip(out, target_rate)


def fit_duration(clip: AudioClip, target_seconds: float) -> AudioClip:
    """Zero-pad or truncate at the tail to exactly ``target_seconds``."""
    if target_seconds <= 0:
        raise ValueError(f"target_seconds must be positive, got {target_seconds}")
    if clip.sample_rate != TARGET_RATE:
        raise ValueError(f"fit_duration expects {TARGET_RATE} Hz audio, got {clip.sample_rate}")
    n = int(round(target_seconds * clip.sample_rate))
    x = clip.samples
    if len(x) >= n:
        return AudioClip(x[:n].copy(), clip.sample_rate)
    out = np.zeros(n)
    out[:len(x)] = x
    return AudioClip(out, clip.sample_rate)


def power(clip) -> float:
    """Mean of squared samples. Accepts an AudioClip or a raw array."""
    x = clip.samples if isinstance(clip, AudioClip) else np.asarray(clip, dtype=np.float64)
    if x.size == 0:
        raise ValueError("power of an empty clip is undefined")
    return float(np.mean(x * x))


def normalize_rate(clip: AudioClip) -> AudioClip:
    """Resample to the toolkit's working rate (16 kHz) when needed."""
    return clip if clip.sample_rate == TARGET_RATE else resample(clip, TARGET_RATE)
