"""Named-tensor weight files and import of pretrained ViT/DeiT weights.

File layout::

    b"HSADWT01" | uint64 header length | JSON header | zero padding to 8 | payloads

The header is ``{"tensors": [{"name", "shape", "dtype": "f32", "offset"}, ...],
"metadata": {...}}``; offsets are relative to the start of the payload area
and every payload is little-endian float32.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .model import ModelConfig, init_params, param_shapes, trunc_normal

MAGIC = b"HSADWT01"


def save_weights(path, tensors, metadata=None) -> None:
    entries, blobs, offset = [], [], 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "dtype": "f32", "offset": offset})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"tensors": entries, "metadata": metadata or {}},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    header += b" " * (-(len(MAGIC) + 8 + len(header)) % 8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<Q", len(header)) + header)
        for blob in blobs:
            fh.write(blob)


def load_weights(path):
    """Returns ``(tensors, metadata)``; tensors are widened to float64."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a weight file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen])
    base = 16 + hlen
    tensors = {}
    for e in header["tensors"]:
        if e["dtype"] != "f32":
            raise ValueError(f"{path}: unsupported dtype {e['dtype']} for {e['name']}")
        n = math.prod(e["shape"])
        start = base + e["offset"]
        if start + 4 * n > len(data):
            raise ValueError(f"{path}: tensor {e['name']} runs past end of file")
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=start)
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(np.float64)
    return tensors, header.get("metadata", {})


def adapt_channels(rgb_weights: np.ndarray) -> np.ndarray:
    """Average a 3-channel patch projection down to one input channel.

    Accepts ``(D, 3*P)`` with channel-major layout inside each row, or the
    convolution layout ``(D, 3, p, p)``. Returns ``(D, P)``.
    """
    w = np.asarray(rgb_weights, dtype=np.float64)
    if w.ndim == 4:
        if w.shape[1] != 3:
            raise ValueError(f"expected 3 input channels, got shape {w.shape}")
        return w.mean(axis=1).reshape(w.shape[0], -1)
    if w.ndim != 2 or w.shape[1] % 3:
        raise ValueError(f"expected (D, 3*P) weights, got shape {w.shape}")
    return w.reshape(w.shape[0], 3, -1).mean(axis=1)


def merge_dual_cls(cls_a, cls_b) -> np.ndarray:
    a, b = np.asarray(cls_a, dtype=np.float64), np.asarray(cls_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"token shapes differ: {a.shape} vs {b.shape}")
    return (a + b) / 2.0


def _interp_matrix(src: int, dst: int) -> np.ndarray:
    """(dst, src) corner-aligned linear interpolation weights."""
    if dst == 1:
        coords = np.array([(src - 1) / 2.0])
    else:
        coords = np.arange(dst) * (src - 1) / (dst - 1)
    lo = np.clip(np.floor(coords).astype(int), 0, src - 1)
    hi = np.minimum(lo + 1, src - 1)
    frac = coords - lo
    m = np.zeros((dst, src))
    np.add.at(m, (np.arange(dst), lo), 1.0 - frac)
    np.add.at(m, (np.arange(dst), hi), frac)
    return m


def resize_positional(grid: np.ndarray, target) -> np.ndarray:
    """Bilinearly resample an (Hs, Ws, D) positional grid to (Ht, Wt, D).

    Sampling is corner-aligned (source coordinate ``t*(S-1)/(T-1)``), so the
    same rule stretches a short axis and cuts down a long one. Equal sizes
    return an exact copy.
    """
    grid = np.asarray(grid, dtype=np.float64)
    ht, wt = target
    hs, ws = grid.shape[:2]
    if min(ht, wt, hs, ws) < 1:
        raise ValueError("grid sizes must be at least 1")
    if (hs, ws) == (ht, wt):
        return grid.copy()
    mh, mw = _interp_matrix(hs, ht), _interp_matrix(ws, wt)
    return np.einsum("ts,sud,vu->tvd", mh, grid, mw)


def import_vit(tensors, config: ModelConfig, seed: int = 0):
    """Build AST parameters from timm-style ViT/DeiT tensors.

    Channel weights are averaged to mono, a distillation token (if present) is
    averaged into the [CLS] token, the square positional grid is resized to the
    spectrogram patch grid, and a fresh classification head is initialized.
    """
    d = config.embed_dim
    params = init_params(config, seed)
    patch_w = tensors["patch_embed.proj.weight"]
    if patch_w.shape[-1] != config.patch:
        raise ValueError(f"pretrained patch size {patch_w.shape[-1]} != {config.patch}")
    params["patch.w"] = adapt_channels(patch_w)
    params["patch.b"] = np.asarray(tensors["patch_embed.proj.bias"], dtype=np.float64).copy()

    cls = np.asarray(tensors["cls_token"]).reshape(d)
    pos = np.asarray(tensors["pos_embed"]).reshape(-1, d)
    if "dist_token" in tensors:
        cls = merge_dual_cls(cls, np.asarray(tensors["dist_token"]).reshape(d))
        pos_cls, pos = merge_dual_cls(pos[0], pos[1]), pos[2:]
    else:
        pos_cls, pos = pos[0], pos[1:]
    side = int(round(math.sqrt(len(pos))))
    if side * side != len(pos):
        raise ValueError(f"pretrained positional grid of {len(pos)} entries is not square")
    params["cls"] = cls.astype(np.float64)
    params["pos.cls"] = pos_cls.astype(np.float64)
    params["pos.grid"] = resize_positional(pos.reshape(side, side, d),
                                           (config.freq_patches, config.max_time_patches))

    for i in range(config.layers):
        src, dst = f"blocks.{i}.", f"blocks.{i}."
        params[dst + "ln1.g"] = tensors[src + "norm1.weight"].copy()
        params[dst + "ln1.b"] = tensors[src + "norm1.bias"].copy()
        qkv_w, qkv_b = tensors[src + "attn.qkv.weight"], tensors[src + "attn.qkv.bias"]
        for j, name in enumerate("qkv"):
            params[dst + f"attn.{name}.w"] = qkv_w[j * d:(j + 1) * d].copy()
            params[dst + f"attn.{name}.b"] = qkv_b[j * d:(j + 1) * d].copy()
        params[dst + "attn.o.w"] = tensors[src + "attn.proj.weight"].copy()
        params[dst + "attn.o.b"] = tensors[src + "attn.proj.bias"].copy()
        params[dst + "ln2.g"] = tensors[src + "norm2.weight"].copy()
        params[dst + "ln2.b"] = tensors[src + "norm2.bias"].copy()
        for name in ("fc1", "fc2"):
            params[dst + f"mlp.{name}.w"] = tensors[src + f"mlp.{name}.weight"].copy()
            params[dst + f"mlp.{name}.b"] = tensors[src + f"mlp.{name}.bias"].copy()
    params["norm.g"] = tensors["norm.weight"].copy()
    params["norm.b"] = tensors["norm.bias"].copy()

    rng = np.random.default_rng(seed)
    params["head.w"] = trunc_normal(rng, (config.classes, d))
    params["head.b"] = np.zeros(config.classes)
    for name, shape in param_shapes(config):
        if params[name].shape != shape:
            raise ValueError(f"imported {name} has shape {params[name].shape}, expected {shape}")
    return params
