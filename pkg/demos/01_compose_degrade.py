"""
Building a hybrid utterance and degrading it
=============================================

Two synthetic clips stand in for a human recording and a generated one. We
join them with a 10 ms cross-fade, then push the result through noise, a
telephone-band low-pass and a simulated low-bitrate codec.
"""

import numpy as np

from hsad import AudioClip, DegradationSpec, HybridRecipe, Pattern, SegmentSpec, SourceKind
from hsad import apply_degradation, compose, resample
from hsad.fixtures import texture

# Sources arrive at 22.05 kHz and are brought to the 16 kHz working rate.
human = resample(texture(0, seconds=2.0, f0=140.0, rate=22050), 16000)
generated = resample(texture(2, seconds=2.0, seed=5, rate=22050), 16000)
print("source lengths:", len(human), len(generated))

# A human-to-synthetic hybrid. Consecutive segments overlap by the fade length,
# so the total is the sum of the parts minus one fade.
recipe = HybridRecipe(Pattern.H_TO_S, [SegmentSpec(human, SourceKind.HUMAN, "h0"),
                                       SegmentSpec(generated, SourceKind.GENERATED, "g0")])
hybrid, notes = compose(recipe)
print("hybrid length:", len(hybrid), "=", len(human) + len(generated) - 160)
for note in notes:
    print("  segment", note.as_list())

# Degrade: white noise at 15 dB, a 4 kHz low-pass, then the 24 kbps codec model.
spec = DegradationSpec(noise_kind="white", snr_db=15.0, lowpass_hz=4000.0,
                       codec="simulated", bitrate_kbps=24.0, seed=7)
degraded, clipped = apply_degradation(hybrid, spec)
# The residual is large: the generated half is 2-5 kHz noise, and the low-pass
# removes most of what lies above 4 kHz.
err = degraded.samples - hybrid.samples
print("clean-to-residual ratio: %.2f dB, clipped=%s" % (
    10 * np.log10(np.sum(hybrid.samples ** 2) / np.sum(err ** 2)), clipped))

# The degradation settings travel with the record, so a manifest can say exactly what was done.
print(spec.to_dict())
