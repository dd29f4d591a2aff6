"""Hybrid spoofed-audio toolkit: dataset synthesis, a numpy Audio Spectrogram
Transformer, and spoof-detection evaluation."""

from .audio import AudioClip, fit_duration, load_wav, power, resample, save_wav
from .compose import (BoundaryAnnotation, HybridRecipe, Pattern, SegmentSpec, SourceKind, compose,
                      crossfade_concat)
from .degrade import DegradationSpec, apply_degradation, codec_degrade, lowpass, mix_at_snr
from .features import Spectrogram, featurize, frame_signal, log_mel, normalize
from .manifest import UtteranceRecord, ingest_directory, read_manifest, validate, write_manifest
from .metrics import (EvalReport, ReliabilityStats, accuracy, eer, evaluate, prf_from_confusion,
                      reliability_stats, threshold_classify)
from .model import ClassLabel, ModelConfig, backward, count_params, extract_patches, forward, init_params
from .train import TrainConfig, adam_step, cosine_lr, fit, speaker_disjoint_split
from .weights import adapt_channels, load_weights, merge_dual_cls, resize_positional, save_weights

__version__ = "0.1.0"
