"""128-bin log-Mel spectrogram frontend and spectrogram cache files."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .audio import TARGET_RATE, AudioClip, fit_duration, normalize_rate

WIN = 400  # 25 ms at 16 kHz
HOP = 160  # 10 ms
NFFT = 512
N_MELS = 128
LOG_FLOOR = 1e-10

CACHE_MAGIC = b"HSPC"
_FLAG_NORMALIZED = 1


@dataclass(frozen=True, eq=False)
class Spectrogram:
    values: np.ndarray  # (mel bins, frames)
    normalized: bool = False
    frame_ms: float = 25.0
    hop_ms: float = 10.0

    @property
    def shape(self):
        return self.values.shape


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def hamming(n: int = WIN) -> np.ndarray:
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


@lru_cache(maxsize=4)
def mel_filterbank(n_mels: int = N_MELS, nfft: int = NFFT, rate: int = TARGET_RATE,
                   fmin: float = 0.0, fmax: float = 8000.0) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (n_mels, nfft // 2 + 1).

    Triangles are built in the mel domain. Filters narrower than the FFT bin
    spacing (the lowest few at 512 points) can end up with no support and
    produce the log floor.
    """
    edges = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    bin_mel = hz_to_mel(np.arange(nfft // 2 + 1) * rate / nfft)
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_mel - left) / (center - left)
    down = (right - bin_mel) / (right - center)
    fb = np.maximum(0.0, np.minimum(up, down))
    fb.setflags(write=False)
    return fb


def frame_signal(clip: AudioClip) -> np.ndarray:
    """Hamming-windowed 400-sample frames at a 160-sample hop, shape (T, 400)."""
    if clip.sample_rate != TARGET_RATE:
        raise ValueError(f"expected {TARGET_RATE} Hz audio, got {clip.sample_rate}")
    n = len(clip)
    if n < WIN:
        raise ValueError(f"clip of {n} samples is shorter than one {WIN}-sample window")
    t = (n - WIN) // HOP + 1
    idx = np.arange(t)[:, None] * HOP + np.arange(WIN)[None, :]
    return clip.samples[idx] * hamming()


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    spec = np.fft.rfft(frames, n=NFFT, axis=-1)
    return spec.real ** 2 + spec.imag ** 2


def log_mel(frames: np.ndarray) -> Spectrogram:
    mel = power_spectrum(frames) @ mel_filterbank().T  # (T, n_mels)
    return Spectrogram(np.log(np.maximum(mel, LOG_FLOOR)).T.copy())


def normalize(spec: Spectrogram) -> Spectrogram:
    """Shift to zero mean and scale to standard deviation 0.5 using the spectrogram's own statistics."""
    x = spec.values
    mu = x.mean()
    sigma = x.std()
    if sigma == 0:
        return Spectrogram(np.zeros_like(x), normalized=True)
    return Spectrogram((x - mu) / (2.0 * sigma), normalized=True)


def featurize(clip: AudioClip, seconds: float | None = 6.0) -> Spectrogram:
    """Resample, fit to ``seconds`` (None keeps the full length), log-Mel, normalize."""
    clip = normalize_rate(clip)
    if seconds is not None:
        clip = fit_duration(clip, seconds)
    return normalize(log_mel(frame_signal(clip)))


def save_spectrogram(path, spec: Spectrogram) -> None:
    """Cache layout: magic, uint32 F, uint32 T, uint32 flags, then F*T float32 (row-major, LE)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    f, t = spec.values.shape
    flags = _FLAG_NORMALIZED if spec.normalized else 0
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC + struct.pack("<III", f, t, flags))
        fh.write(np.ascontiguousarray(spec.values, dtype="<f4").tobytes())


def load_spectrogram(path) -> Spectrogram:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC or len(data) < 16:
        raise ValueError(f"{path}: not a spectrogram cache file")
    f, t, flags = struct.unpack("<III", data[4:16])
    payload = data[16:]
    if len(payload) != 4 * f * t:
        raise ValueError(f"{path}: payload size {len(payload)} does not match {f}x{t}")
    values = np.frombuffer(payload, dtype="<f4").reshape(f, t).astype(np.float64)
    return Spectrogram(values, normalized=bool(flags & _FLAG_NORMALIZED))
