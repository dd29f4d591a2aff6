"""Detection metrics: threshold rule, accuracy, confusion-derived rates, EER and
per-group reliability statistics, plus report rendering."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import DataError
from .manifest import CLASS_NAMES, GROUP_CLASS

GROUPS = tuple(GROUP_CLASS)


def threshold_classify(real_tag: int, reliability: float) -> int:
    """0 when ``|real_tag - reliability| < 0.5``, otherwise 1 (0.5 exactly gives 1)."""
    if real_tag not in (0, 1):
        raise ValueError(f"real_tag must be 0 or 1, got {real_tag!r}")
    if not 0.0 <= reliability <= 1.0:
        raise ValueError(f"reliability {reliability!r} outside [0, 1]")
    return 0 if abs(real_tag - reliability) < 0.5 else 1


def accuracy(correct: int, total: int) -> float:
    """Percentage ``100 * correct / total`` rounded half-up to two decimals."""
    if total <= 0:
        raise ValueError("accuracy needs a positive total")
    if not 0 <= correct <= total:
        raise ValueError(f"correct={correct} outside [0, {total}]")
    pct = Decimal(100 * correct) / Decimal(total)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def confusion_matrix(truth, predicted, classes: int = 4) -> np.ndarray:
    cm = np.zeros((classes, classes), dtype=np.int64)
    for t, p in zip(truth, predicted):
        cm[t, p] += 1
    return cm


def _ratio(num, den):
    return num / den if den else 0.0


def prf_from_confusion(cm):
    """Per-class precision, recall, F1, FPR and FNR (class vs rest).

    Rows are truth, columns predictions. Zero denominators give 0.
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = cm.sum()
    out = {"precision": [], "recall": [], "f1": [], "fpr": [], "fnr": []}
    for k in range(cm.shape[0]):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        tn = int(total) - tp - fp - fn
        p, r = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        out["precision"].append(p)
        out["recall"].append(r)
        out["f1"].append(_ratio(2 * p * r, p + r))
        out["fpr"].append(_ratio(fp, fp + tn))
        out["fnr"].append(_ratio(fn, fn + tp))
    return out


def eer(genuine_scores, spoof_scores) -> float:
    """Equal error rate for scores where higher means more spoof-like.

    At threshold ``t`` a genuine score ``>= t`` is a false rejection and a
    spoof score ``< t`` a false acceptance. Thresholds sweep the sorted union
    of scores plus one point above the maximum; the crossing of the two rate
    curves is linearly interpolated between adjacent thresholds.
    """
    g = np.sort(np.asarray(genuine_scores, dtype=np.float64))
    s = np.sort(np.asarray(spoof_scores, dtype=np.float64))
    if g.size == 0 or s.size == 0:
        raise ValueError("EER needs non-empty genuine and spoof score lists")
    thresholds = np.append(np.unique(np.concatenate([g, s])), np.inf)
    frr = 1.0 - np.searchsorted(g, thresholds, side="left") / g.size
    far = np.searchsorted(s, thresholds, side="left") / s.size
    diff = frr - far  # starts >= 0, ends <= 0
    hit = np.flatnonzero(diff == 0)
    if hit.size:
        return float(frr[hit[0]])
    i = int(np.flatnonzero(diff < 0)[0]) - 1
    w = diff[i] / (diff[i] - diff[i + 1])
    return float(frr[i] + w * (frr[i + 1] - frr[i]))


@dataclass(frozen=True)
class ReliabilityStats:
    mean: float
    std_dev: float
    max: float
    min: float
    mode: float
    count: int = 0


def reliability_stats(scores, bin_width: float = 0.01) -> ReliabilityStats:
    """Mean, population std, max, min and histogram mode of scores in [0, 1].

    The mode is the centre of the fullest ``bin_width`` bin; ties go to the
    lower bin and a score of exactly 1 falls in the last bin.
    """
    x = np.asarray(scores, dtype=np.float64)
    if x.size == 0:
        raise ValueError("reliability statistics need at least one score")
    if np.any((x < 0) | (x > 1)):
        raise ValueError("reliability scores must lie in [0, 1]")
    nbins = int(round(1.0 / bin_width))
    idx = np.minimum(np.floor(x * nbins).astype(np.int64), nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    top = int(np.argmax(counts))
    return ReliabilityStats(
        mean=float(x.mean()), std_dev=float(x.std()), max=float(x.max()),
        min=float(x.min()), mode=(top + 0.5) / nbins, count=int(x.size))


def spoof_score(probs) -> float:
    """Spoof-likelihood of a 4-class output: 1 - P(Human)."""
    return float(min(1.0, max(0.0, 1.0 - probs[0])))


@dataclass
class EvalReport:
    accuracy_pct: float
    confusion: list
    precision: list
    recall: list
    f1: list
    fpr: list
    fnr: list
    eer: float | None
    threshold_accuracy_pct: float
    group_stats: dict = field(default_factory=dict)
    mode_bin_width: float = 0.01
    total: int = 0

    def to_dict(self):
        d = asdict(self)
        d["group_stats"] = {g: asdict(s) for g, s in self.group_stats.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["group_stats"] = {g: ReliabilityStats(**s) for g, s in d["group_stats"].items()}
        return cls(**d)

    def to_lines(self) -> str:
        """Line-delimited JSON: one summary line, one line per class, one per group."""
        d = self.to_dict()
        per_class = {k: d.pop(k) for k in ("precision", "recall", "f1", "fpr", "fnr")}
        groups = d.pop("group_stats")
        lines = [json.dumps({"kind": "summary", **d})]
        for k in range(len(per_class["f1"])):
            lines.append(json.dumps({"kind": "class", "class": k, **{m: v[k] for m, v in per_class.items()}}))
        for g, s in groups.items():
            lines.append(json.dumps({"kind": "group", "group": g, **s}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_lines(cls, text: str):
        summary, per_class, groups = None, {}, {}
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("kind")
            if kind == "summary":
                summary = obj
            elif kind == "class":
                per_class[obj.pop("class")] = obj
            elif kind == "group":
                groups[obj.pop("group")] = obj
        d = dict(summary)
        for m in ("precision", "recall", "f1", "fpr", "fnr"):
            d[m] = [per_class[k][m] for k in sorted(per_class)]
        d["group_stats"] = groups
        return cls.from_dict(d)

    def render(self) -> str:
        lines = [
            f"accuracy_pct: {self.accuracy_pct:.2f}",
            f"threshold_accuracy_pct: {self.threshold_accuracy_pct:.2f}",
            f"total: {self.total}",
            f"eer: {'n/a' if self.eer is None else format(self.eer, '.6f')}",
            f"mode_bin_width: {self.mode_bin_width}",
            "",
            "[confusion] rows=truth cols=prediction",
        ]
        lines += ["  " + " ".join(f"{c:6d}" for c in row) for row in self.confusion]
        lines += ["", "[per-class]", f"  {'class':<10} {'precision':>9} {'recall':>9} {'f1':>9} {'fpr':>9} {'fnr':>9}"]
        for k in range(len(self.f1)):
            name = CLASS_NAMES[k] if k < len(CLASS_NAMES) else str(k)
            lines.append(f"  {name:<10} {self.precision[k]:9.4f} {self.recall[k]:9.4f} {self.f1[k]:9.4f} "
                         f"{self.fpr[k]:9.4f} {self.fnr[k]:9.4f}")
        lines += ["", "[reliability]", render_reliability_table(self.group_stats)]
        return "\n".join(lines) + "\n"


def render_reliability_table(group_stats) -> str:
    """Plain-text table with columns Group, Mean, Std Dev, Max, Min, Mode."""
    head = f"{'Group':<6} {'Mean':>8} {'Std Dev':>8} {'Max':>8} {'Min':>8} {'Mode':>8}"
    rows = [head]
    for g, s in group_stats.items():
        rows.append(f"{g:<6} {s.mean:8.4f} {s.std_dev:8.4f} {s.max:8.4f} {s.min:8.4f} {s.mode:8.4f}")
    return "\n".join(rows)


def render_accuracy_table(rows) -> str:
    """``rows`` of ``(name, correct, total)`` as a model / correct / accuracy table."""
    out = [f"{'Model Name':<12} {'Correct Predictions':>21} {'Accuracy (%)':>13}"]
    for name, c, n in rows:
        out.append(f"{name:<12} {f'{c:,} / {n:,}':>21} {accuracy(c, n):12.2f}%")
    return "\n".join(out)


def evaluate(predictions, bin_width: float = 0.01, classes: int = 4) -> EvalReport:
    """Assemble a report from ``[(record, predicted_class, probabilities), ...]``.

    The spoof score is ``1 - P(Human)``; it feeds the EER, the threshold rule
    (against the record's binary label) and the per-group statistics.
    """
    if not predictions:
        raise ValueError("nothing to evaluate")
    truth, pred, scores = [], [], []
    by_group = {}
    for rec, p, probs in predictions:
        if rec.class_label not in range(classes) or rec.group not in GROUP_CLASS:
            raise DataError(f"record {rec.utterance_id}: class {rec.class_label!r} / group {rec.group!r} out of range")
        if p not in range(classes):
            raise DataError(f"record {rec.utterance_id}: predicted class {p!r} out of range")
        score = spoof_score(probs)
        truth.append(rec.class_label)
        pred.append(int(p))
        scores.append((rec.binary_label, score))
        by_group.setdefault(rec.group, []).append(score)

    cm = confusion_matrix(truth, pred, classes)
    rates = prf_from_confusion(cm)
    genuine = [s for b, s in scores if b == 0]
    spoof = [s for b, s in scores if b == 1]
    thr_ok = sum(threshold_classify(b, s) == 0 for b, s in scores)
    return EvalReport(
        accuracy_pct=accuracy(int(np.trace(cm)), len(truth)),
        confusion=cm.tolist(),
        eer=eer(genuine, spoof) if genuine and spoof else None,
        threshold_accuracy_pct=accuracy(thr_ok, len(scores)),
        group_stats={g: reliability_stats(by_group[g], bin_width) for g in GROUPS if g in by_group},
        mode_bin_width=bin_width,
        total=len(truth),
        **rates,
    )
