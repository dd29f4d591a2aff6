"""Audio Spectrogram Transformer in plain numpy (float64), with manual backprop.

Tokens are ``[cls] + overlapping 16x16 spectrogram patches``. Encoder blocks
are pre-norm: ``x += MHSA(LN(x)); x += MLP(LN(x))``. The classifier reads the
final-normed [CLS] token.

Parameters live in an ordered ``dict[str, np.ndarray]``; linear weights are
stored ``(out, in)`` and applied as ``x @ W.T + b``.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError

LN_EPS = 1e-6
GELU_C = math.sqrt(2.0 / math.pi)
GELU_K = 0.044715


class ClassLabel(enum.IntEnum):
    HUMAN = 0
    CLONED = 1
    GENERATED = 2
    HYBRID = 3


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    layers: int = 2
    heads: int = 4
    mlp_ratio: int = 4
    patch: int = 16
    stride: int = 10
    classes: int = 4
    mel_bins: int = 128
    max_time_patches: int = 59  # 6 s input

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if not self.patch >= self.stride >= 1:
            raise ValueError("need patch >= stride >= 1")
        if self.classes < 2:
            raise ValueError("need at least two classes")
        if self.mel_bins < self.patch:
            raise ValueError("mel_bins smaller than one patch")

    @classmethod
    def vit_base(cls, classes=4, max_time_patches=101):
        """ViT-Base sized AST (768-d, 12 layers, 12 heads); 101 time patches covers 1024 frames."""
        return cls(embed_dim=768, layers=12, heads=12, classes=classes, max_time_patches=max_time_patches)

    @property
    def freq_patches(self):
        return grid_size(self.mel_bins, self.patch, self.stride)

    @property
    def patch_dim(self):
        return self.patch * self.patch

    def to_dict(self):
        return asdict(self)


def grid_size(n: int, patch: int = 16, stride: int = 10) -> int:
    return (n - patch) // stride + 1


def extract_patches(values: np.ndarray, config: ModelConfig = ModelConfig()):
    """Overlapping patches of an (F, T) spectrogram.

    Returns ``(patches, (Hp, Wp))`` where ``patches`` has shape ``(Hp*Wp, patch**2)``
    in frequency-major raster order, each patch flattened row-major.
    """
    values = np.asarray(values, dtype=np.float64)
    p, s = config.patch, config.stride
    f, t = values.shape
    if f < p or t < p:
        raise ValueError(f"spectrogram {f}x{t} is smaller than one {p}x{p} patch")
    win = sliding_window_view(values, (p, p))[::s, ::s]
    hp, wp = win.shape[:2]
    return win.reshape(hp * wp, p * p).copy(), (hp, wp)


def param_shapes(config: ModelConfig):
    """Ordered (name, shape) for every learnable tensor."""
    d, h = config.embed_dim, config.embed_dim * config.mlp_ratio
    shapes = [
        ("patch.w", (d, config.patch_dim)),
        ("patch.b", (d,)),
        ("cls", (d,)),
        ("pos.cls", (d,)),
        ("pos.grid", (config.freq_patches, config.max_time_patches, d)),
    ]
    for i in range(config.layers):
        b = f"blocks.{i}."
        shapes += [(b + "ln1.g", (d,)), (b + "ln1.b", (d,))]
        for name in "qkvo":
            shapes += [(b + f"attn.{name}.w", (d, d)), (b + f"attn.{name}.b", (d,))]
        shapes += [
            (b + "ln2.g", (d,)), (b + "ln2.b", (d,)),
            (b + "mlp.fc1.w", (h, d)), (b + "mlp.fc1.b", (h,)),
            (b + "mlp.fc2.w", (d, h)), (b + "mlp.fc2.b", (d,)),
        ]
    shapes += [
        ("norm.g", (d,)), ("norm.b", (d,)),
        ("head.w", (config.classes, d)), ("head.b", (config.classes,)),
    ]
    return shapes


def count_params(config: ModelConfig) -> int:
    return sum(math.prod(shape) for _, shape in param_shapes(config))


def trunc_normal(rng, shape, std=0.02):
    """Normal(0, std) truncated to +-2 std by resampling."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def init_params(config: ModelConfig, seed: int = 0):
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config):
        if name.endswith(".g"):
            params[name] = np.ones(shape)
        elif name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = trunc_normal(rng, shape)
    return params


def zeros_like_params(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def check_params(params, config: ModelConfig):
    for name, shape in param_shapes(config):
        if name not in params:
            raise KeyError(f"missing parameter {name}")
        if params[name].shape != shape:
            raise ValueError(f"{name}: shape {params[name].shape}, expected {shape}")


# -- layers ------------------------------------------------------------------

def gelu(x):
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_K * x ** 3)))


def gelu_grad(x):
    t = np.tanh(GELU_C * (x + GELU_K * x ** 3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)


def softmax(z, axis=-1):
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    n = xhat.shape[-1]
    dxhat = dy * g
    dx = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
    dg = (dy * xhat).reshape(-1, n).sum(axis=0)
    db = dy.reshape(-1, n).sum(axis=0)
    return dx, dg, db


def _split_heads(x, heads):
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def attention(h, params, prefix, heads):
    q = h @ params[prefix + "q.w"].T + params[prefix + "q.b"]
    k = h @ params[prefix + "k.w"].T + params[prefix + "k.b"]
    v = h @ params[prefix + "v.w"].T + params[prefix + "v.b"]
    qh, kh, vh = (_split_heads(t, heads) for t in (q, k, v))
    scale = 1.0 / math.sqrt(qh.shape[-1])
    weights = softmax(qh @ kh.transpose(0, 2, 1) * scale)
    ctx = _merge_heads(weights @ vh)
    out = ctx @ params[prefix + "o.w"].T + params[prefix + "o.b"]
    return out, (h, qh, kh, vh, weights, ctx, scale)


def attention_backward(dout, params, grads, prefix, heads, cache):
    h, qh, kh, vh, weights, ctx, scale = cache
    grads[prefix + "o.w"] += dout.T @ ctx
    grads[prefix + "o.b"] += dout.sum(axis=0)
    dctx = _split_heads(dout @ params[prefix + "o.w"], heads)
    dweights = dctx @ vh.transpose(0, 2, 1)
    dvh = weights.transpose(0, 2, 1) @ dctx
    dscores = weights * (dweights - (dweights * weights).sum(axis=-1, keepdims=True)) * scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 2, 1) @ qh
    dh = np.zeros_like(h)
    for name, dt in (("q", dqh), ("k", dkh), ("v", dvh)):
        dt = _merge_heads(dt)
        grads[prefix + name + ".w"] += dt.T @ h
        grads[prefix + name + ".b"] += dt.sum(axis=0)
        dh += dt @ params[prefix + name + ".w"]
    return dh


# -- model -------------------------------------------------------------------

def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")


def embed(values, params, config: ModelConfig):
    patches, (hp, wp) = extract_patches(values, config)
    grid = params["pos.grid"]
    if hp != grid.shape[0] or wp > grid.shape[1]:
        raise ValueError(
            f"patch grid {hp}x{wp} does not fit positional grid {grid.shape[0]}x{grid.shape[1]}; "
            "resize the positional embeddings first")
    pos = grid[:, :wp].reshape(hp * wp, -1)
    tokens = patches @ params["patch.w"].T + params["patch.b"] + pos
    cls = (params["cls"] + params["pos.cls"])[None, :]
    return np.concatenate([cls, tokens], axis=0), (patches, hp, wp)


def forward(values, params, config: ModelConfig, keep_cache=False):
    """Logits and class probabilities for one (F, T) spectrogram.

    With ``keep_cache`` the activations needed by :func:`backward` are returned
    as a third element.
    """
    x, embed_cache = embed(values, params, config)
    blocks = []
    for i in range(config.layers):
        b = f"blocks.{i}."
        h1, ln1 = layer_norm(x, params[b + "ln1.g"], params[b + "ln1.b"])
        a, attn = attention(h1, params, b + "attn.", config.heads)
        x = x + a
        h2, ln2 = layer_norm(x, params[b + "ln2.g"], params[b + "ln2.b"])
        pre = h2 @ params[b + "mlp.fc1.w"].T + params[b + "mlp.fc1.b"]
        act = gelu(pre)
        x = x + act @ params[b + "mlp.fc2.w"].T + params[b + "mlp.fc2.b"]
        _check_finite(x, f"encoder block {i}")
        if keep_cache:
            blocks.append((ln1, attn, ln2, h2, pre, act))
    z, ln_final = layer_norm(x[0], params["norm.g"], params["norm.b"])
    logits = params["head.w"] @ z + params["head.b"]
    _check_finite(logits, "logits")
    probs = softmax(logits)
    if keep_cache:
        return logits, probs, (embed_cache, blocks, z, ln_final, x.shape)
    return logits, probs


def cross_entropy(logits, label):
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def backward(values, label, params, config: ModelConfig):
    """Cross-entropy loss and its gradient w.r.t. every parameter."""
    logits, probs, cache = forward(values, params, config, keep_cache=True)
    (patches, hp, wp), blocks, z, ln_final, xshape = cache
    grads = zeros_like_params(params)
    loss = cross_entropy(logits, label)

    dlogits = probs.copy()
    dlogits[label] -= 1.0
    grads["head.w"] += np.outer(dlogits, z)
    grads["head.b"] += dlogits
    dz = params["head.w"].T @ dlogits
    dx0, dg, db = layer_norm_backward(dz[None, :], params["norm.g"], (ln_final[0][None, :], ln_final[1][None, :]))
    grads["norm.g"] += dg
    grads["norm.b"] += db
    dx = np.zeros(xshape)
    dx[0] = dx0[0]

    for i in reversed(range(config.layers)):
        b = f"blocks.{i}."
        ln1, attn, ln2, h2, pre, act = blocks[i]
        grads[b + "mlp.fc2.w"] += dx.T @ act
        grads[b + "mlp.fc2.b"] += dx.sum(axis=0)
        dpre = (dx @ params[b + "mlp.fc2.w"]) * gelu_grad(pre)
        grads[b + "mlp.fc1.w"] += dpre.T @ h2
        grads[b + "mlp.fc1.b"] += dpre.sum(axis=0)
        dh2 = dpre @ params[b + "mlp.fc1.w"]
        dres, dg, db = layer_norm_backward(dh2, params[b + "ln2.g"], ln2)
        grads[b + "ln2.g"] += dg
        grads[b + "ln2.b"] += db
        dx = dx + dres
        dh1 = attention_backward(dx, params, grads, b + "attn.", config.heads, attn)
        dres, dg, db = layer_norm_backward(dh1, params[b + "ln1.g"], ln1)
        grads[b + "ln1.g"] += dg
        grads[b + "ln1.b"] += db
        dx = dx + dres

    grads["cls"] += dx[0]
    grads["pos.cls"] += dx[0]
    dtok = dx[1:]
    grads["patch.w"] += dtok.T @ patches
    grads["patch.b"] += dtok.sum(axis=0)
    grads["pos.grid"][:, :wp] += dtok.reshape(hp, wp, -1)
    for name, g in grads.items():
        _check_finite(g, f"gradient of {name}")
    return loss, grads


def batch_loss_and_grad(batch, params, config: ModelConfig, jobs: int = 1):
    """Mean loss and mean gradient over ``[(values, label), ...]``.

    Per-example work may run on ``jobs`` threads; the reduction is always
    summed in batch order so results do not depend on the worker count.
    """
    if jobs > 1 and len(batch) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda ex: backward(ex[0], ex[1], params, config), batch))
    else:
        results = [backward(v, y, params, config) for v, y in batch]
    total = zeros_like_params(params)
    loss = 0.0
    for l, g in results:
        loss += l
        for k in total:
            total[k] += g[k]
    n = len(batch)
    return loss / n, {k: v / n for k, v in total.items()}


def predict(values, params, config: ModelConfig):
    return forward(values, params, config)[1]
