"""Supervised fine-tuning: speaker-disjoint split, Adam with decoupled weight decay,
cosine learning-rate decay and early stopping on validation loss."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericError
from .model import ModelConfig, batch_loss_and_grad, cross_entropy, forward


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 2e-5
    epochs: int = 20
    batch_size: int = 3
    weight_decay: float = 1e-4
    early_stop_patience: int = 3
    seed: int = 0
    split_fraction: float = 0.8
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")

    def to_dict(self):
        return asdict(self)


def speaker_disjoint_split(records, fraction: float = 0.8, seed: int = 0):
    """Partition utterance ids so no speaker lands on both sides.

    Speakers are sorted, shuffled with ``seed`` and the first
    ``round(fraction * n_speakers)`` go to training.
    """
    speakers = set()
    for r in records:
        if r.speaker_id is None:
            raise ValueError(f"record {r.utterance_id} has no speaker id")
        speakers.add(r.speaker_id)
    if len(speakers) < 2:
        raise ValueError("speaker-disjoint split needs at least two speakers")
    order = sorted(speakers)
    perm = np.random.default_rng(seed).permutation(len(order))
    n_train = min(max(int(math.floor(fraction * len(order) + 0.5)), 1), len(order) - 1)
    train_spk = {order[i] for i in perm[:n_train]}
    train = [r.utterance_id for r in records if r.speaker_id in train_spk]
    test = [r.utterance_id for r in records if r.speaker_id not in train_spk]
    return train, test


def cosine_lr(t: int, total: int, lr0: float) -> float:
    if total < 1 or not 0 <= t <= total:
        raise ValueError(f"need 0 <= t <= total and total >= 1, got t={t}, total={total}")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total))


@dataclass
class OptimizerState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, state: OptimizerState, lr: float, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One in-place Adam update with decoupled weight decay (``p -= lr*wd*p`` first)."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    c1, c2 = 1.0 - beta1 ** t, 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if weight_decay:
            p -= lr * weight_decay * p
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True when training should stop."""

    def __init__(self, patience: int = 3):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = None
        self.bad_epochs = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = val_loss, epoch, 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


def evaluate_loss(examples, params, config: ModelConfig):
    """Mean cross-entropy and accuracy (fraction) over ``[(values, label), ...]``."""
    loss, correct = 0.0, 0
    for values, label in examples:
        logits, _ = forward(values, params, config)
        loss += cross_entropy(logits, label)
        correct += int(np.argmax(logits) == label)
    return loss / len(examples), correct / len(examples)


@dataclass
class FitResult:
    params: dict
    history: list = field(default_factory=list)
    best_epoch: int | None = None


def fit(train, val, params, config: ModelConfig, tc: TrainConfig, log=None) -> FitResult:
    """Mini-batch training with per-epoch validation.

    ``train``/``val`` are lists of ``(spectrogram values, label)``. Epoch order
    is a permutation drawn from ``tc.seed``; the last partial batch is kept.
    Returns a copy of the parameters from the best validation epoch.
    """
    if not train or not val:
        raise ValueError("training and validation sets must be non-empty")
    params = copy.deepcopy(params)
    state = OptimizerState.zeros(params)
    rng = np.random.default_rng(tc.seed)
    steps_per_epoch = -(-len(train) // tc.batch_size)
    total = steps_per_epoch * tc.epochs
    stopper = EarlyStopping(tc.early_stop_patience)
    best = copy.deepcopy(params)
    history = []
    step = 0
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(train))
        for start in range(0, len(train), tc.batch_size):
            batch = [train[i] for i in order[start:start + tc.batch_size]]
            lr = cosine_lr(step, total, tc.lr0)
            try:
                _, grads = batch_loss_and_grad(batch, params, config, jobs=tc.jobs)
                adam_step(params, grads, state, lr, tc.weight_decay)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, step {step}: {exc}") from exc
            step += 1
        train_loss, train_acc = evaluate_loss(train, params, config)
        val_loss, val_acc = evaluate_loss(val, params, config)
        rec = EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc, lr)
        history.append(rec)
        if log:
            log(rec)
        stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best = copy.deepcopy(params)
        if stop:
            break
    return FitResult(best, history, stopper.best_epoch)
