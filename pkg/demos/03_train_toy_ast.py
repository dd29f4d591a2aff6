"""
Training a small spectrogram transformer
========================================

Twelve one-second clips, three per class, each class with its own texture.
A 64-wide, two-layer model learns to separate them in a few dozen epochs.
"""

from hsad import ModelConfig, TrainConfig, count_params, featurize, fit, init_params
from hsad.fixtures import texture_examples

examples = [(featurize(clip, seconds=1.0).values, label) for clip, label in texture_examples(3)]
print("examples:", len(examples), "spectrogram", examples[0][0].shape)

cfg = ModelConfig(max_time_patches=9)
print("toy parameters: %d; full-size with 4 classes: %d" % (count_params(cfg), count_params(ModelConfig.vit_base())))

tc = TrainConfig(lr0=1e-3, epochs=40, early_stop_patience=40, seed=9)
result = fit(examples, examples, init_params(cfg, 9), cfg, tc,
             log=lambda r: r.epoch % 5 == 0 and print(
                 "epoch %2d loss %.4f acc %.2f lr %.2e" % (r.epoch, r.train_loss, r.train_acc, r.lr)))
print("best epoch:", result.best_epoch)
