"""Instance segmentation metrics: IoU, AJI, object Dice, F1 and mAP.

Matching conventions used throughout:

* IoU thresholds are inclusive (``iou >= thr`` is a match).
* Predictions are ranked by descending score; equal scores keep input order.
* Equal-IoU candidates are resolved in favour of the earlier instance.
* Two empty sets score 1.0; exactly one empty side scores 0.0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scene import InstanceMask, Scene

MAP_THRESHOLDS = tuple(np.round(np.arange(0.5, 0.951, 0.05), 2).tolist())


@dataclass(frozen=True)
class InstanceSet:
    masks: tuple[np.ndarray, ...] = field(repr=False)
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        masks = tuple(np.asarray(m.mask if isinstance(m, InstanceMask) else m, dtype=bool) for m in self.masks)
        for m in masks:
            if m.ndim != 2 or not m.any():
                raise ValueError("instance masks must be non-empty 2-D arrays")
        if len({m.shape for m in masks}) > 1:
            raise ValueError("instance masks have differing shapes")
        scores = self.scores
        if scores is not None:
            scores = tuple(float(s) for s in scores)
            if len(scores) != len(masks):
                raise ValueError(f"{len(masks)} masks but {len(scores)} scores")
            if any(not 0.0 <= s <= 1.0 for s in scores):
                raise ValueError("scores must lie in [0, 1]")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_scene(cls, scene: Scene, scores: Mapping[int, float] | Sequence[float] | None = None):
        if isinstance(scores, Mapping):
            missing = [i for i in scene.ids if i not in scores]
            if missing:
                raise ValueError(f"no score for prediction ids {missing}")
            scores = [scores[i] for i in scene.ids]
        return cls(tuple(inst.mask for inst in scene.instances), scores)

    def __len__(self):
        return len(self.masks)

    @property
    def shape(self):
        return self.masks[0].shape if self.masks else None


@dataclass(frozen=True)
class MetricReport:
    aji: float
    dice: float
    f1: float
    map: float
    ap_table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_shapes(gt: InstanceSet, pred: InstanceSet):
    if gt.shape is not None and pred.shape is not None and gt.shape != pred.shape:
        raise ValueError(f"ground truth is {gt.shape}, prediction is {pred.shape}")


def iou(a, b) -> float:
    a = np.asarray(a.mask if isinstance(a, InstanceMask) else a, dtype=bool)
    b = np.asarray(b.mask if isinstance(b, InstanceMask) else b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


def _overlaps(gt: InstanceSet, pred: InstanceSet):
    """Intersection and union counts for every (gt, pred) pair."""
    shape = gt.shape or pred.shape or (0, 0)
    npix = shape[0] * shape[1]
    g = np.array([m.ravel() for m in gt.masks], dtype=np.int64).reshape(len(gt), npix)
    p = np.array([m.ravel() for m in pred.masks], dtype=np.int64).reshape(len(pred), npix)
    inter = g @ p.T
    union = g.sum(axis=1)[:, None] + p.sum(axis=1)[None, :] - inter
    return inter, union


def _iou_matrix(gt: InstanceSet, pred: InstanceSet) -> np.ndarray:
    inter, union = _overlaps(gt, pred)
    return np.divide(inter, union, out=np.zeros(inter.shape), where=union > 0)


def aji(gt: InstanceSet, pred: InstanceSet) -> float:
    """Aggregated Jaccard Index with greedy one-to-one matching.

    Each ground-truth instance, in order, takes the unused prediction with the
    highest IoU.  A ground-truth instance overlapping no unused prediction is
    left unmatched and its area joins the denominator, as do the areas of
    predictions never matched.
    """
    _check_shapes(gt, pred)
    if len(gt) == 0 and len(pred) == 0:
        return 1.0
    inter, union = _overlaps(gt, pred)
    ious = np.divide(inter, union, out=np.zeros(inter.shape), where=union > 0)
    used = np.zeros(len(pred), dtype=bool)
    num = den = 0
    for g in range(len(gt)):
        cand = np.where(used, -1.0, ious[g]) if len(pred) else np.array([])
        if cand.size and cand.max() > 0:
            j = int(np.argmax(cand))
            used[j] = True
            num += int(inter[g, j])
            den += int(union[g, j])
        else:
            den += int(gt.masks[g].sum())
    den += sum(int(pred.masks[j].sum()) for j in np.flatnonzero(~used))
    return num / den if den else 0.0


def dice_object(gt: InstanceSet, pred: InstanceSet) -> float:
    """Mean over ground-truth instances of Dice against the best-IoU prediction."""
    _check_shapes(gt, pred)
    if len(gt) == 0:
        return 1.0 if len(pred) == 0 else 0.0
    if len(pred) == 0:
        return 0.0
    inter, _ = _overlaps(gt, pred)
    ious = _iou_matrix(gt, pred)
    g_area = np.array([m.sum() for m in gt.masks])
    p_area = np.array([m.sum() for m in pred.masks])
    scores = []
    for g in range(len(gt)):
        j = int(np.argmax(ious[g]))
        scores.append(0.0 if ious[g, j] == 0 else 2 * inter[g, j] / (g_area[g] + p_area[j]))
    return float(np.mean(scores))


def _score_order(pred: InstanceSet) -> list[int]:
    scores = pred.scores if pred.scores is not None else (1.0,) * len(pred)
    return sorted(range(len(pred)), key=lambda j: -scores[j])


def _greedy_tp(ious: np.ndarray, order: Sequence[int], thr: float) -> list[bool]:
    """TP flag per ranked prediction; each takes its best unmatched GT at IoU >= thr."""
    matched = np.zeros(ious.shape[0], dtype=bool)
    flags = []
    for j in order:
        cand = np.where(matched, -1.0, ious[:, j]) if ious.shape[0] else np.array([])
        if cand.size and cand.max() >= thr:
            matched[int(np.argmax(cand))] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def f1_at_iou(gt: InstanceSet, pred: InstanceSet, thr: float = 0.5) -> float:
    _check_shapes(gt, pred)
    if not 0 < thr < 1:
        raise ValueError(f"IoU threshold must lie in (0, 1), got {thr}")
    if len(gt) == 0 and len(pred) == 0:
        return 1.0
    if len(gt) == 0 or len(pred) == 0:
        return 0.0
    tp = sum(_greedy_tp(_iou_matrix(gt, pred), _score_order(pred), thr))
    precision, recall = tp / len(pred), tp / len(gt)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def average_precision(flags: Sequence[bool], num_gt: int) -> float:
    """All-point interpolated AP from ranked TP flags."""
    if num_gt == 0:
        return 1.0 if not flags else 0.0
    if not flags:
        return 0.0
    tp = np.cumsum(flags)
    precision = tp / np.arange(1, len(flags) + 1)
    recall = tp / num_gt
    # monotone precision envelope
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float((steps * envelope).sum())


def map_over_thresholds(gt: InstanceSet, pred: InstanceSet, thresholds=MAP_THRESHOLDS):
    """Mean AP over IoU thresholds 0.50:0.05:0.95.

    Returns ``(map, table)`` where ``table`` lists ``{"iou": thr, "ap": ap}``.
    """
    _check_shapes(gt, pred)
    if len(pred) and pred.scores is None:
        raise ValueError("predictions need confidence scores for mAP")
    ious = _iou_matrix(gt, pred) if len(gt) and len(pred) else np.zeros((len(gt), len(pred)))
    order = _score_order(pred)
    table = []
    for thr in thresholds:
        flags = _greedy_tp(ious, order, thr) if len(pred) else []
        table.append({"iou": float(thr), "ap": average_precision(flags, len(gt))})
    return float(np.mean([row["ap"] for row in table])), table


def evaluate(gt: InstanceSet, pred: InstanceSet) -> MetricReport:
    m, table = map_over_thresholds(gt, pred)
    return MetricReport(aji=aji(gt, pred), dice=dice_object(gt, pred), f1=f1_at_iou(gt, pred), map=m, ap_table=table)
