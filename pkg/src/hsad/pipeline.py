"""File-level pipeline stages behind the command-line subcommands.

Every stage reads its inputs, writes new files and never touches its input
manifest. Outputs depend only on inputs, configuration and seed.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .audio import load_wav, normalize_rate, save_wav
from .compose import HybridRecipe, Pattern, SegmentSpec, SourceKind, compose, fade_length
from .degrade import DegradationSpec, apply_degradation
from .features import HOP, WIN, featurize, load_spectrogram, save_spectrogram
from .manifest import (UtteranceRecord, ingest_directory, read_manifest, resolve_audio, validate,
                       write_manifest)
from .metrics import evaluate, render_reliability_table, reliability_stats
from .model import ModelConfig, grid_size, init_params, predict
from .train import TrainConfig, fit, speaker_disjoint_split
from .weights import load_weights, save_weights

log = logging.getLogger("hsad")

GROUP_KIND = {"G1": SourceKind.HUMAN, "G2": SourceKind.CLONED, "G3": SourceKind.GENERATED}
PATTERNS = {"h2s": Pattern.H_TO_S, "s2h": Pattern.S_TO_H, "inter": Pattern.INTERLEAVED,
            "recombined": Pattern.RECOMBINED}


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    feature_seconds: float = 6.0
    train: TrainConfig = field(default_factory=TrainConfig)
    model: dict = field(default_factory=dict)
    jobs: int = 1

    def model_config(self) -> ModelConfig:
        n = int(round(self.feature_seconds * 16000))
        frames = (n - WIN) // HOP + 1
        kwargs = {"max_time_patches": grid_size(frames), **self.model}
        return ModelConfig(**kwargs)

    def to_dict(self):
        return {"seed": self.seed, "feature_seconds": self.feature_seconds,
                "train": self.train.to_dict(), "model": self.model_config().to_dict(), "jobs": self.jobs}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        train = TrainConfig(**d.pop("train", {}))
        return cls(train=train, **d)


def load_config(path=None, **overrides) -> PipelineConfig:
    """Read a JSON config file (or defaults) and apply non-None overrides."""
    cfg = PipelineConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8"))) if path else PipelineConfig()
    top = {k: v for k, v in overrides.items() if v is not None and k in ("seed", "feature_seconds", "jobs")}
    cfg = replace(cfg, **top)
    train_over = {k: v for k, v in overrides.items() if v is not None and k in TrainConfig.__dataclass_fields__}
    if "seed" in top:
        train_over.setdefault("seed", top["seed"])
    if "jobs" in top:
        train_over.setdefault("jobs", top["jobs"])
    if train_over:
        cfg = replace(cfg, train=replace(cfg.train, **train_over))
    return cfg


def _pmap(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _rebase(records, old_manifest, new_dir):
    """Copies of records whose audio paths are relative to ``new_dir``."""
    out = []
    for r in records:
        path = os.path.relpath(resolve_audio(old_manifest, r), new_dir)
        out.append(replace(r, audio_path=Path(path).as_posix(), flags=list(r.flags)))
    return out


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# -- ingest -------------------------------------------------------------------

def run_ingest(root, out_manifest, seed: int = 0):
    out_manifest = Path(out_manifest)
    records = ingest_directory(root, manifest_dir=out_manifest.parent)
    write_manifest(out_manifest, records, {"stage": "ingest", "seed": seed})
    log.info("ingested %d files from %s", len(records), root)
    return records


# -- compose ------------------------------------------------------------------

def _hybrid_group(kinds):
    kinds = set(kinds)
    if kinds == {SourceKind.HUMAN}:
        return "G6"
    if SourceKind.HUMAN in kinds:
        return "G4"
    return "G5"


def run_compose(manifest, pattern: str, out_dir, fade_ms: float = 10.0, seed: int = 0,
                synthetic: str = "generated", count: int | None = None):
    """Build hybrid clips from the manifest's human/cloned/generated records.

    Writes ``out_dir/<id>.wav`` plus ``out_dir/manifest.jsonl`` holding the
    input records followed by one new record per hybrid.
    """
    header, records = read_manifest(manifest)
    out_dir = Path(out_dir)
    pat = PATTERNS[pattern]
    rng = np.random.default_rng(seed)
    pool = {kind: [r for r in records if GROUP_KIND.get(r.group) is kind] for kind in SourceKind}
    if synthetic == "mixed" and pat is not Pattern.INTERLEAVED:
        raise ValueError("synthetic=mixed is only meaningful with the interleaved pattern")
    syn_kind = {"generated": SourceKind.GENERATED, "cloned": SourceKind.CLONED}.get(synthetic)

    def pick(kind, speaker, exclude=()):
        cands = [r for r in pool[kind] if r.utterance_id not in exclude]
        same = [r for r in cands if r.speaker_id == speaker]
        cands = same or cands
        if not cands:
            raise ValueError(f"manifest has no {kind.value} records to compose from")
        return cands[int(rng.integers(len(cands)))]

    anchors_kind = SourceKind.CLONED if synthetic == "mixed" else SourceKind.HUMAN
    anchors = pool[anchors_kind][:count] if count is not None else pool[anchors_kind]
    L = fade_length(fade_ms, 16000)
    log.info("fade length %d samples (%.1f ms at 16000 Hz)", L, fade_ms)

    new = []
    for i, anchor in enumerate(anchors):
        spk = anchor.speaker_id
        if pat is Pattern.H_TO_S:
            chosen = [anchor, pick(syn_kind, spk)]
        elif pat is Pattern.S_TO_H:
            chosen = [pick(syn_kind, spk), anchor]
        elif pat is Pattern.RECOMBINED:
            chosen = [anchor, pick(SourceKind.HUMAN, spk, exclude={anchor.utterance_id})]
        elif synthetic == "mixed":
            chosen = [anchor, pick(SourceKind.GENERATED, spk),
                      pick(SourceKind.CLONED, spk, exclude={anchor.utterance_id})]
        else:
            chosen = [anchor, pick(syn_kind, spk), pick(SourceKind.HUMAN, spk, exclude={anchor.utterance_id})]
        segs = [SegmentSpec(normalize_rate(load_wav(resolve_audio(manifest, r))), GROUP_KIND[r.group], r.utterance_id)
                for r in chosen]
        clip, notes = compose(HybridRecipe(pat, segs, fade_ms))
        uid = f"hyb-{pattern}-{i:04d}"
        save_wav(out_dir / f"{uid}.wav", clip)
        first = next((r for r in chosen if GROUP_KIND[r.group] is SourceKind.HUMAN), chosen[0])
        new.append(UtteranceRecord(
            utterance_id=uid, speaker_id=spk, age=first.age, gender=first.gender,
            sentence_type=first.sentence_type, group=_hybrid_group(s.source_kind for s in segs),
            segment_boundaries=[a.as_list() for a in notes],
            composition={"pattern": pat.value, "fade_ms": float(fade_ms), "fade_samples": L,
                         "sources": [r.utterance_id for r in chosen], "seed": seed},
            audio_path=f"{uid}.wav"))
    out = _rebase(records, manifest, out_dir) + new
    write_manifest(out_dir / "manifest.jsonl", out,
                   {**header, "stage": "compose", "seed": seed,
                    "compose": {"pattern": pattern, "fade_ms": float(fade_ms), "synthetic": synthetic}})
    log.info("composed %d hybrid clips into %s", len(new), out_dir)
    return out


# -- degrade ------------------------------------------------------------------

def run_degrade(manifest, out_dir, snrs=(10, 15, 20, 30), lowpass_hz=None, codec: str = "none",
                seed: int = 0, noise_path=None, codec_command=None, jobs: int = 1):
    """Write a degraded copy of every record; SNRs are assigned round-robin."""
    header, records = read_manifest(manifest)
    out_dir = Path(out_dir)
    noise = normalize_rate(load_wav(noise_path)) if noise_path else None
    codec_kind, bitrate = {"none": ("none", None), "sim16": ("simulated", 16.0),
                           "sim24": ("simulated", 24.0), "ext": ("passthrough", None)}[codec]

    def work(item):
        i, r = item
        spec = DegradationSpec(
            noise_kind="external" if noise is not None else ("white" if snrs else "none"),
            noise_id=Path(noise_path).stem if noise is not None else None,
            snr_db=float(snrs[i % len(snrs)]) if snrs else None,
            lowpass_hz=float(lowpass_hz) if lowpass_hz else None,
            codec=codec_kind, bitrate_kbps=bitrate, seed=_child_seed(seed, i))
        clip = normalize_rate(load_wav(resolve_audio(manifest, r)))
        out, clipped = apply_degradation(clip, spec, noise=noise, command=codec_command)
        uid = f"{r.utterance_id}__deg"
        save_wav(out_dir / f"{uid}.wav", out)
        flags = list(r.flags) + (["clipped"] if clipped else [])
        return replace(r, utterance_id=uid, audio_path=f"{uid}.wav", flags=flags,
                       degradation={**spec.to_dict(), "source": r.utterance_id, "clipped": clipped})

    new = _pmap(work, list(enumerate(records)), jobs)
    write_manifest(out_dir / "manifest.jsonl", new,
                   {**header, "stage": "degrade", "seed": seed,
                    "degrade": {"snrs": [float(s) for s in snrs], "lowpass_hz": lowpass_hz, "codec": codec}})
    log.info("degraded %d clips into %s", len(new), out_dir)
    return new


# -- featurize ----------------------------------------------------------------

def _cache_path(cache_dir, uid):
    return Path(cache_dir) / f"{uid}.spec"


def record_features(manifest, record, seconds, cache_dir=None):
    if cache_dir is not None:
        p = _cache_path(cache_dir, record.utterance_id)
        if p.exists():
            return load_spectrogram(p).values
    return featurize(load_wav(resolve_audio(manifest, record)), seconds).values


def run_featurize(manifest, cache_dir, seconds: float = 6.0, jobs: int = 1):
    _, records = read_manifest(manifest)

    def work(r):
        spec = featurize(load_wav(resolve_audio(manifest, r)), seconds)
        save_spectrogram(_cache_path(cache_dir, r.utterance_id), spec)
        return spec.shape

    shapes = _pmap(work, records, jobs)
    log.info("featurized %d clips into %s", len(shapes), cache_dir)
    return shapes


# -- train / evaluate ---------------------------------------------------------

def run_train(manifest, out_ckpt, config: PipelineConfig, cache_dir=None):
    _, records = read_manifest(manifest)
    tc = config.train
    mc = config.model_config()
    train_ids, test_ids = speaker_disjoint_split(records, tc.split_fraction, tc.seed)
    by_id = {r.utterance_id: r for r in records}

    def examples(ids):
        feats = _pmap(lambda uid: record_features(manifest, by_id[uid], config.feature_seconds, cache_dir),
                      ids, config.jobs)
        return [(f, by_id[uid].class_label) for f, uid in zip(feats, ids)]

    train, test = examples(train_ids), examples(test_ids)
    params = init_params(mc, config.seed)
    result = fit(train, test, params, mc, tc,
                 log=lambda rec: log.info("epoch %d train_loss %.4f val_loss %.4f val_acc %.4f",
                                          rec.epoch, rec.train_loss, rec.val_loss, rec.val_acc))
    out_ckpt = Path(out_ckpt)
    meta = {"config": config.to_dict(), "best_epoch": result.best_epoch,
            "split": {"train": train_ids, "test": test_ids}}
    save_weights(out_ckpt, result.params, meta)
    history = out_ckpt.with_name(out_ckpt.name + ".history.jsonl")
    history.write_text("".join(r.to_json() + "\n" for r in result.history), encoding="utf-8")
    return result


def run_evaluate(manifest, ckpt, report_prefix, split: str = "test", cache_dir=None, jobs: int = 1):
    """Score the checkpoint's held-out speakers (or all records) and write the report.

    Produces ``<prefix>.txt``, ``<prefix>.jsonl`` and ``<prefix>.predictions.jsonl``.
    """
    _, records = read_manifest(manifest)
    params, meta = load_weights(ckpt)
    cfg = meta.get("config", {})
    mc = ModelConfig(**cfg["model"]) if "model" in cfg else ModelConfig()
    seconds = cfg.get("feature_seconds", 6.0)
    if split == "test" and "split" in meta:
        keep = set(meta["split"]["test"])
        records = [r for r in records if r.utterance_id in keep]
    if not records:
        raise ValueError("no records to evaluate (does the manifest match the checkpoint's split?)")

    def work(r):
        probs = predict(record_features(manifest, r, seconds, cache_dir), params, mc)
        return r, int(np.argmax(probs)), probs

    preds = _pmap(work, records, jobs)
    report = evaluate(preds)
    prefix = Path(report_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    provenance = {"checkpoint": Path(ckpt).name, "split": split, "config": cfg}
    Path(f"{prefix}.txt").write_text(
        f"config: {json.dumps(provenance, sort_keys=True)}\n\n" + report.render(), encoding="utf-8")
    Path(f"{prefix}.jsonl").write_text(report.to_lines(), encoding="utf-8")
    Path(f"{prefix}.predictions.jsonl").write_text("".join(
        json.dumps({"utterance_id": r.utterance_id, "group": r.group, "class_label": r.class_label,
                    "predicted": p, "probs": [float(x) for x in probs], "score": float(1.0 - probs[0])}) + "\n"
        for r, p, probs in preds), encoding="utf-8")
    return report


# -- validate / stats ---------------------------------------------------------

def run_validate(manifest):
    header, records = read_manifest(manifest)
    return validate(records, clean_complete=bool(header.get("clean_complete")))


def read_scores(path):
    """Scores file: JSON lines with ``group`` and ``score`` keys, or ``<group> <score>`` text lines."""
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("{"):
            obj = json.loads(line)
            rows.append((obj.get("group", "all"), float(obj["score"])))
        else:
            parts = line.split()
            rows.append((parts[0], float(parts[1])) if len(parts) > 1 else ("all", float(parts[0])))
    return rows


def run_stats(scores_path, by_group: bool = True, bin_width: float = 0.01):
    rows = read_scores(scores_path)
    if not rows:
        raise ValueError(f"{scores_path}: no scores")
    if by_group:
        groups = {}
        for g, s in rows:
            groups.setdefault(g, []).append(s)
        stats = {g: reliability_stats(groups[g], bin_width) for g in sorted(groups)}
    else:
        stats = {"all": reliability_stats([s for _, s in rows], bin_width)}
    return stats, render_reliability_table(stats)
