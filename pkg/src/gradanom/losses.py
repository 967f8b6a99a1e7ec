"""Anomaly-aware loss arithmetic (no autograd; plain numpy values)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gamm import AnomalyMap

PROB_EPS = 1e-12
WEIGHT_MODES = ("literal", "offset")


def _values(m) -> np.ndarray:
    return np.asarray(m.values if isinstance(m, AnomalyMap) else m, dtype=np.float64)


@dataclass(frozen=True)
class ProbMap:
    """Per-pixel class probabilities, shape (K, H, W)."""

    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 3:
            raise ValueError(f"probabilities must have shape (K, H, W), got {p.shape}")
        if (p < 0).any() or (p > 1).any():
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.allclose(p.sum(axis=0), 1.0, rtol=0, atol=1e-6):
            raise ValueError("class probabilities must sum to 1 at every pixel")
        object.__setattr__(self, "probs", p)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape[1:]


@dataclass(frozen=True)
class LossBreakdown:
    ga: float
    mr: float
    reg: float
    cls: float
    rpn: float
    total: float


def gradient_anomaly_loss(gt_maps: Sequence, pred_maps: Sequence) -> float:
    """Sum over maps of the per-map mean squared error."""
    if len(gt_maps) != len(pred_maps):
        raise ValueError(f"{len(gt_maps)} ground-truth maps but {len(pred_maps)} predictions")
    total = 0.0
    for i, (gt, pred) in enumerate(zip(gt_maps, pred_maps)):
        g, p = _values(gt), _values(pred)
        if g.shape != p.shape:
            raise ValueError(f"map {i}: shape {g.shape} vs prediction {p.shape}")
        total += float(((g - p) ** 2).mean())
    return total


def pixel_ce(pred, gt_labels) -> np.ndarray:
    """Unreduced cross-entropy ``-log p(true class)`` at every pixel.

    Probabilities are clamped to ``[1e-12, 1]`` before the log.
    """
    probs = pred.probs if isinstance(pred, ProbMap) else ProbMap(pred).probs
    labels = np.asarray(gt_labels)
    if labels.shape != probs.shape[1:]:
        raise ValueError(f"labels {labels.shape} do not match prediction {probs.shape[1:]}")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[0]):
        raise ValueError(f"labels must lie in [0, {probs.shape[0]})")
    p = np.take_along_axis(probs, labels[None].astype(np.intp), axis=0)[0]
    return -np.log(np.clip(p, PROB_EPS, 1.0))


def mask_refinement_loss(ce_map, mg, weight_mode: str = "literal") -> float:
    """Reweight per-pixel CE by the anomaly map, then sum.

    ``literal`` weights by ``mg``; ``offset`` weights by ``1 + mg`` so that
    pixels outside anomaly regions keep their plain CE.
    """
    ce, w = np.asarray(ce_map, dtype=np.float64), _values(mg)
    if ce.shape != w.shape:
        raise ValueError(f"CE map {ce.shape} and anomaly map {w.shape} differ")
    if weight_mode == "literal":
        return float((w * ce).sum())
    if weight_mode == "offset":
        return float((w * ce).sum() + ce.sum())
    raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}, got {weight_mode!r}")


def total_loss(ga, mr, reg, cls, rpn) -> LossBreakdown:
    """Combine the two anomaly losses with externally supplied detector losses."""
    terms = (ga, mr, reg, cls, rpn)
    if not all(math.isfinite(t) for t in terms):
        raise ValueError(f"loss terms must be finite, got {terms}")
    return LossBreakdown(*map(float, terms), total=math.fsum(terms))
