import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsad.audio import AudioClip, power
from hsad.degrade import (DegradationSpec, apply_degradation, codec_degrade, effective_bits,
                          external_codec, lowpass, lowpass_kernel, mix_at_snr, noise_gain, white_noise)
from hsad.errors import CodecError

from conftest import dft_amplitude, sine


def measured_snr(signal, noise, snr_db):
    alpha = noise_gain(signal, noise, snr_db)
    n = np.resize(noise.samples, len(signal))
    return 10 * math.log10(power(signal) / power(alpha * n))


def test_mix_hand_example():
    out = mix_at_snr(AudioClip([1, 1, 1, 1], 16000), AudioClip([1, -1, 1, -1], 16000), 20)
    assert out.samples == pytest.approx([1.1, 0.9, 1.1, 0.9], abs=1e-15)


def test_mix_limits():
    s = AudioClip([0.3, -0.2, 0.1], 16000)
    n = AudioClip([0.5, 0.5, -0.5], 16000)
    assert np.allclose(mix_at_snr(s, n, 300).samples, s.samples, atol=1e-12, rtol=0)
    eq = AudioClip([1, -1, 1], 16000)
    assert noise_gain(AudioClip([1, 1, 1], 16000), eq, 0) == 1.0


def test_mix_tiles_short_noise():
    out = mix_at_snr(AudioClip(np.ones(5), 16000), AudioClip([1.0, -1.0], 16000), 0)
    assert out.samples.tolist() == [2.0, 0.0, 2.0, 0.0, 2.0]


def test_mix_zero_power():
    with pytest.raises(ValueError):
        mix_at_snr(AudioClip([0.0, 0.0], 16000), AudioClip([1.0, 1.0], 16000), 10)
    with pytest.raises(ValueError):
        mix_at_snr(AudioClip([1.0, 1.0], 16000), AudioClip([0.0, 0.0], 16000), 10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([10, 15, 20, 30]), st.floats(-20, 60))
def test_mix_snr_exact(seed, snr, free_snr):
    rng = np.random.default_rng(seed)
    s = AudioClip(rng.uniform(-1, 1, int(rng.integers(1, 500))), 16000)
    n = AudioClip(rng.standard_normal(int(rng.integers(1, 500))), 16000)
    for target in (snr, free_snr):
        assert abs(measured_snr(s, n, target) - target) < 1e-9


def test_lowpass_dc_gain():
    # the filter's frequency response at 0 Hz is the sum of its taps
    assert abs(np.sum(lowpass_kernel(4000, 16000)) - 1.0) < 1e-3
    out = lowpass(AudioClip(np.full(2000, 0.5), 16000), 4000)
    assert np.max(np.abs(out.samples - 0.5)) < 1e-3


def test_lowpass_tones():
    x1, x7 = sine(1000, 16000), sine(7000, 16000)
    y1 = lowpass(AudioClip(x1, 16000), 4000).samples
    y7 = lowpass(AudioClip(x7, 16000), 4000).samples
    assert dft_amplitude(y1, 1000, 16000) == pytest.approx(dft_amplitude(x1, 1000, 16000), rel=0.01)
    atten = 20 * math.log10(dft_amplitude(y7, 7000, 16000) / dft_amplitude(x7, 7000, 16000))
    assert atten <= -40


def test_lowpass_zero_phase():
    # a centred impulse stays centred
    x = np.zeros(1001)
    x[500] = 1.0
    y = lowpass(AudioClip(x, 16000), 4000).samples
    assert int(np.argmax(y)) == 500
    assert np.allclose(y[500 - 50:500], y[501:551][::-1], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_lowpass_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(700), rng.standard_normal(700)
    lhs = lowpass(AudioClip(a * x + b * y, 16000), 4000).samples
    rhs = a * lowpass(AudioClip(x, 16000), 4000).samples + b * lowpass(AudioClip(y, 16000), 4000).samples
    assert np.allclose(lhs, rhs, atol=1e-9, rtol=0)


def test_lowpass_bad_cutoff():
    with pytest.raises(ValueError):
        lowpass(AudioClip(np.zeros(10), 16000), 8000)


def test_effective_bits():
    assert effective_bits(16) == 1
    assert effective_bits(24) == 2
    assert effective_bits(1000) == 8
    assert effective_bits(1) == 1


def test_simulated_codec_silence_and_snr_order():
    spec24 = DegradationSpec(codec="simulated", bitrate_kbps=24)
    spec16 = DegradationSpec(codec="simulated", bitrate_kbps=16)
    silent = AudioClip(np.zeros(4000), 16000)
    assert np.all(codec_degrade(silent, spec24).samples == 0.0)
    x = sine(440, 16000, amp=1.0)
    snrs = {}
    for kbps, spec in ((24, spec24), (16, spec16)):
        y = codec_degrade(AudioClip(x, 16000), spec).samples
        assert len(y) == len(x)
        snrs[kbps] = 10 * math.log10(np.sum(x * x) / np.sum((x - y) ** 2))
        assert math.isfinite(snrs[kbps])
    assert snrs[24] > snrs[16]


def test_external_codec_identity(rng):
    x = rng.uniform(-0.9, 0.9, 3000)
    cmd = f"{sys.executable} -c \"import shutil,sys; shutil.copy(sys.argv[1], sys.argv[2])\" {{in}} {{out}}"
    y = external_codec(AudioClip(x, 16000), cmd).samples
    assert np.max(np.abs(y - x)) <= 1.0 / 32768


def test_external_codec_failure():
    with pytest.raises(CodecError) as err:
        external_codec(AudioClip(np.zeros(100), 16000), f"{sys.executable} -c \"raise SystemExit(3)\" {{in}} {{out}}")
    assert err.value.returncode == 3


def test_external_codec_env(monkeypatch):
    monkeypatch.setenv("HSAD_CODEC_CMD", "cp {in} {out}")
    y = codec_degrade(AudioClip(np.full(50, 0.25), 16000), DegradationSpec(codec="passthrough"))
    assert np.allclose(y.samples, 0.25)


def test_white_noise_reproducible():
    assert np.array_equal(white_noise(100, 7).samples, white_noise(100, 7).samples)
    assert not np.array_equal(white_noise(100, 7).samples, white_noise(100, 8).samples)


def test_apply_degradation_preserves_length_and_flags_clipping():
    clip = AudioClip(sine(300, 16000, amp=0.99), 16000)
    spec = DegradationSpec(noise_kind="white", snr_db=10, lowpass_hz=4000, codec="simulated",
                           bitrate_kbps=24, seed=3)
    out, clipped = apply_degradation(clip, spec)
    assert len(out) == len(clip) and out.sample_rate == clip.sample_rate
    assert np.max(np.abs(out.samples)) <= 1.0
    loud = AudioClip(np.full(1000, 0.95), 16000)
    _, clipped = apply_degradation(loud, DegradationSpec(noise_kind="white", snr_db=0, seed=1))
    assert clipped
    assert DegradationSpec.from_dict(spec.to_dict()) == spec


def test_spec_validation():
    with pytest.raises(ValueError):
        DegradationSpec(noise_kind="white", snr_db=float("inf"))
    with pytest.raises(ValueError):
        DegradationSpec(lowpass_hz=9000)
    with pytest.raises(ValueError):
        DegradationSpec(codec="simulated", bitrate_kbps=0)
