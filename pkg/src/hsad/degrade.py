"""Additive noise, channel low-pass and codec degradation."""
from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import firwin

from .audio import TARGET_RATE, AudioClip, load_wav, power, save_wav
from .errors import CodecError

CODEC_ENV = "HSAD_CODEC_CMD"
DEFAULT_SNRS = (10, 15, 20, 30)
DEFAULT_BITRATES = (16, 24)
MU = 255.0


@dataclass(frozen=True)
class DegradationSpec:
    """Degradation parameters; recorded verbatim on every degraded record.

    noise_kind is ``"none"``, ``"white"`` or ``"external"`` (``noise_id`` names
    the file). codec is ``"none"``, ``"passthrough"`` or ``"simulated"``.
    """
    noise_kind: str = "none"
    noise_id: str | None = None
    snr_db: float | None = None
    lowpass_hz: float | None = None
    codec: str = "none"
    bitrate_kbps: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.noise_kind not in ("none", "white", "external"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_kind != "none" and (self.snr_db is None or not np.isfinite(self.snr_db)):
            raise ValueError("noise injection needs a finite snr_db")
        if self.noise_kind == "external" and not self.noise_id:
            raise ValueError("external noise needs a noise_id")
        if self.lowpass_hz is not None and not 0 < self.lowpass_hz < TARGET_RATE / 2:
            raise ValueError(f"lowpass cutoff {self.lowpass_hz} outside (0, {TARGET_RATE // 2})")
        if self.codec not in ("none", "passthrough", "simulated"):
            raise ValueError(f"unknown codec {self.codec!r}")
        if self.codec == "simulated" and not (self.bitrate_kbps and self.bitrate_kbps > 0):
            raise ValueError("simulated codec needs a positive bitrate")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _match_length(noise: np.ndarray, n: int) -> np.ndarray:
    if len(noise) >= n:
        return noise[:n]
    reps = -(-n // len(noise))
    return np.tile(noise, reps)[:n]


def noise_gain(signal: AudioClip, noise: AudioClip, snr_db: float) -> float:
    n = _match_length(noise.samples, len(signal))
    ps, pn = power(signal), power(n)
    if ps <= 0 or pn <= 0:
        raise ValueError("SNR mixing needs signal and noise with nonzero power")
    return float(np.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0))))


def mix_at_snr(signal: AudioClip, noise: AudioClip, snr_db: float) -> AudioClip:
    """Return ``signal + alpha * noise`` with alpha chosen so the addends sit at ``snr_db``.

    Noise is tiled or truncated to the signal length before its power is
    measured. No clipping is applied here; see :func:`peak_limit`.
    """
    if signal.sample_rate != noise.sample_rate:
        raise ValueError("signal and noise sample rates differ")
    alpha = noise_gain(signal, noise, snr_db)
    n = _match_length(noise.samples, len(signal))
    return signal.with_samples(signal.samples + alpha * n)


def peak_limit(clip: AudioClip):
    """Hard-clip to [-1, 1]; returns the clip and whether anything was clipped."""
    clipped = bool(np.any(np.abs(clip.samples) > 1.0))
    return clip.with_samples(np.clip(clip.samples, -1.0, 1.0)), clipped


def white_noise(n: int, seed: int, rate: int = TARGET_RATE) -> AudioClip:
    rng = np.random.default_rng(seed)
    return AudioClip(rng.standard_normal(n), rate)


def lowpass_kernel(cutoff_hz: float, rate: int, taps: int = 255) -> np.ndarray:
    return firwin(taps, cutoff_hz, window="hamming", fs=rate)


def lowpass(clip: AudioClip, cutoff_hz: float, taps: int = 255) -> AudioClip:
    """Linear-phase Hamming-windowed FIR low-pass, applied with zero net delay.

    Edges are handled by reflecting the signal so a constant input stays
    constant. Output length equals input length.
    """
    if not 0 < cutoff_hz < clip.sample_rate / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz outside (0, {clip.sample_rate / 2})")
    h = lowpass_kernel(cutoff_hz, clip.sample_rate, taps)
    half = taps // 2
    x = np.pad(clip.samples, half, mode="symmetric")
    y = np.convolve(x, h, mode="valid")
    return clip.with_samples(y)


def effective_bits(bitrate_kbps: float, rate: int = TARGET_RATE) -> int:
    """Quantizer depth used by the codec simulator (bits per sample, 1 to 8)."""
    return int(min(8, max(1, np.floor(bitrate_kbps * 1000.0 / rate + 0.5))))


def mulaw_quantize(x: np.ndarray, bits: int) -> np.ndarray:
    """mu-law compress, mid-tread quantize to ``bits``, expand. Zero is a fixed point."""
    x = np.clip(x, -1.0, 1.0)
    y = np.sign(x) * np.log1p(MU * np.abs(x)) / np.log1p(MU)
    steps = 2 ** (bits - 1)
    q = np.round(y * steps) / steps
    return np.sign(q) * np.expm1(np.abs(q) * np.log1p(MU)) / MU


def simulate_codec(clip: AudioClip, bitrate_kbps: float, bits: int | None = None) -> AudioClip:
    """Stand-in for a low-bitrate speech codec: band-limit then mu-law requantize."""
    if clip.sample_rate != TARGET_RATE:
        raise ValueError(f"codec simulation expects {TARGET_RATE} Hz audio")
    bits = effective_bits(bitrate_kbps, clip.sample_rate) if bits is None else bits
    band = lowpass(clip, 0.9 * clip.sample_rate / 2)
    return clip.with_samples(mulaw_quantize(band.samples, bits))


def external_codec(clip: AudioClip, command: str | None = None) -> AudioClip:
    """Round-trip a clip through an external encode/decode command.

    ``command`` is a template with ``{in}`` and ``{out}`` placeholders; it
    defaults to the ``HSAD_CODEC_CMD`` environment variable.
    """
    command = command or os.environ.get(CODEC_ENV)
    if not command:
        raise CodecError(f"no external codec command configured (set {CODEC_ENV})")
    with tempfile.TemporaryDirectory() as tmp:
        src, dst = Path(tmp) / "in.wav", Path(tmp) / "out.wav"
        save_wav(src, clip)
        argv = [a.replace("{in}", str(src)).replace("{out}", str(dst)) for a in shlex.split(command)]
        try:
            proc = subprocess.run(argv, capture_output=True)
        except OSError as exc:
            raise CodecError(f"codec command failed to start: {exc}") from exc
        if proc.returncode != 0:
            raise CodecError(
                f"codec command exited with status {proc.returncode}: {proc.stderr.decode(errors='replace').strip()}",
                returncode=proc.returncode)
        out = load_wav(dst)
    if out.sample_rate != clip.sample_rate:
        raise CodecError(f"codec returned {out.sample_rate} Hz audio, expected {clip.sample_rate}")
    # codecs may add priming samples or drop a tail; keep the input length
    y = out.samples[:len(clip)]
    if len(y) < len(clip):
        y = np.concatenate([y, np.zeros(len(clip) - len(y))])
    return clip.with_samples(y)


def codec_degrade(clip: AudioClip, spec: DegradationSpec, command: str | None = None) -> AudioClip:
    if spec.codec == "none":
        return clip
    if spec.codec == "simulated":
        return simulate_codec(clip, spec.bitrate_kbps)
    return external_codec(clip, command)


def apply_degradation(clip: AudioClip, spec: DegradationSpec, noise: AudioClip | None = None,
                      command: str | None = None):
    """Noise, then low-pass, then codec, then peak limiting.

    Returns ``(clip, clipped)``. White noise is generated from ``spec.seed``;
    external noise must be passed in.
    """
    out = clip
    if spec.noise_kind == "white":
        noise = white_noise(len(clip), spec.seed or 0, clip.sample_rate)
    if spec.noise_kind != "none":
        if noise is None:
            raise ValueError(f"noise clip {spec.noise_id!r} was not supplied")
        out = mix_at_snr(out, noise, spec.snr_db)
    if spec.lowpass_hz is not None:
        out = lowpass(out, spec.lowpass_hz)
    out = codec_degrade(out, spec, command)
    return peak_limit(out)
