"""
From waveform to transformer tokens
===================================

A 6 s clip becomes a 128 x 598 normalized log-Mel spectrogram, which is cut
into overlapping 16 x 16 patches with stride 10.
"""

import numpy as np

from hsad import ModelConfig, extract_patches, featurize
from hsad.fixtures import texture
from hsad.features import mel_filterbank
from hsad.weights import resize_positional

clip = texture(0, seconds=6.0, f0=180.0)
spec = featurize(clip)
print("spectrogram:", spec.values.shape, "mean %.1e std %.6f" % (spec.values.mean(), spec.values.std()))

# The filterbank: 128 triangles on the mel scale over 257 FFT bins. The lowest
# filter is narrower than one bin and stays empty.
fb = mel_filterbank()
print("filters with support:", int(np.sum(fb.sum(axis=1) > 0)), "of", fb.shape[0])

# Patches: 12 along frequency and 59 along time, 708 tokens plus [CLS].
cfg = ModelConfig()
patches, (hp, wp) = extract_patches(spec.values, cfg)
print("patch grid %d x %d, token matrix %s" % (hp, wp, patches.shape))

# A longer clip needs a wider positional grid. Bilinear resizing stretches the
# learned grid; an identical size returns the grid untouched.
grid = np.random.default_rng(0).standard_normal((12, 59, 4))
print("resized grid:", resize_positional(grid, (12, 99)).shape,
      "identity exact:", np.array_equal(resize_positional(grid, (12, 59)), grid))
