"""Gradient anomaly maps from stacked radial direction fields.

A ``ws x ws`` window is centred on every pixel.  A window is *active* when its
layers come from at least two distinct instances (touching, crossing or
overlapping instances).  For each active window the population standard
deviation of all pooled layer angles is written into every pixel of the
window, combining overlapping windows by maximum.  The joint map is then
normalised by its global maximum and scaled by ``f_ga``.

With ``mode="interior-diff"``, windows lying strictly inside an intersection
(every pixel covered by the same set of >= 2 instances and no pixel touching
a different set) use the standard deviation of the per-pixel angular
separations between layers instead, which damps the large but uninformative
response deep inside overlaps.

Window anchoring: the window around centre ``c`` spans ``[c - ws//2,
c - ws//2 + ws - 1]`` on each axis, clipped to the canvas.  For even ``ws``
this biases the window towards the top/left.

Two interchangeable implementations are provided.  ``method="reference"``
recomputes every window directly (cost grows with ``ws**2``);
``method="optimized"`` uses fixed-point summed-area tables so that the cost
per pixel does not depend on ``ws``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d

from .fields import FieldStack, build_field_stack
from .scene import Scene

MODES = ("std", "interior-diff")
METHODS = ("optimized", "reference")


@dataclass(frozen=True)
class GammConfig:
    ws: int = 5
    f_ga: float = 0.5
    mode: str = "std"
    accumulate: str = "max"
    normalize: str = "global-max"

    def __post_init__(self):
        if int(self.ws) != self.ws or self.ws < 2:
            raise ValueError(f"window size must be an integer >= 2, got {self.ws!r}")
        if not (self.f_ga > 0) or not math.isfinite(self.f_ga):
            raise ValueError(f"f_ga must be a positive finite number, got {self.f_ga!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.accumulate != "max":
            raise ValueError("only max accumulation is supported")
        if self.normalize != "global-max":
            raise ValueError("only global-max normalisation is supported")


@dataclass(frozen=True)
class AnomalyMap:
    """Dense non-negative map; ``instance_id`` is None for the joint map."""

    values: np.ndarray = field(repr=False)
    instance_id: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"anomaly map must be 2-D, got shape {v.shape}")
        if (v < 0).any() or not np.isfinite(v).all():
            raise ValueError("anomaly map values must be finite and non-negative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def scope(self) -> str:
        return "joint" if self.instance_id is None else f"instance({self.instance_id})"


def _extent(ws: int) -> tuple[int, int]:
    before = ws // 2
    return before, ws - 1 - before


def window_bounds(center: int, ws: int, size: int) -> tuple[int, int]:
    """Inclusive clipped index range of the window around ``center`` on one axis."""
    before, after = _extent(ws)
    return max(center - before, 0), min(center + after, size - 1)


def _window(stack: FieldStack, center, ws):
    x, y = center
    if not (0 <= x < stack.width and 0 <= y < stack.height):
        raise ValueError(f"window centre {center} outside {stack.width}x{stack.height} canvas")
    x0, x1 = window_bounds(x, ws, stack.width)
    y0, y1 = window_bounds(y, ws, stack.height)
    return slice(y0, y1 + 1), slice(x0, x1 + 1)


def angular_separation(a, b):
    """``|a - b|`` wrapped onto the circle, in ``[0, pi]``."""
    d = np.abs(np.remainder(np.asarray(a) - np.asarray(b), 2 * np.pi))
    return np.minimum(d, 2 * np.pi - d)


def _population_std(samples) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        return 0.0
    mean = samples.mean()
    return float(np.sqrt(((samples - mean) ** 2).sum() / samples.size))


# --- single-window definitions ----------------------------------------------

def window_is_active(stack: FieldStack, center, ws: int) -> bool:
    """True iff the clipped window holds layers from >= 2 distinct instances.

    ``center`` is ``(x, y)``.
    """
    rows, cols = _window(stack, center, ws)
    present = stack.valid[:, rows, cols].any(axis=(1, 2))
    return int(present.sum()) >= 2


def is_interior_window(stack: FieldStack, center, ws: int) -> bool:
    """All window pixels share one covering set of >= 2 ids, and none is
    4-adjacent to an on-canvas pixel with a different covering set."""
    rows, cols = _window(stack, center, ws)
    ref = None
    for y in range(rows.start, rows.stop):
        for x in range(cols.start, cols.stop):
            ids = stack.covering_ids(x, y)
            if ref is None:
                ref = ids
                if len(ref) < 2:
                    return False
            elif ids != ref:
                return False
            for nx, ny in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)):
                if 0 <= nx < stack.width and 0 <= ny < stack.height:
                    if stack.covering_ids(nx, ny) != ref:
                        return False
    return True


def window_sigma(stack: FieldStack, center, ws: int, mode: str = "std") -> float:
    """Standard deviation statistic of one active window (direct evaluation)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not window_is_active(stack, center, ws):
        raise ValueError(f"window at {center} is not active")
    rows, cols = _window(stack, center, ws)
    block = stack.angles[:, rows, cols]
    if mode == "interior-diff" and is_interior_window(stack, center, ws):
        diffs = []
        for pixel in block.reshape(block.shape[0], -1).T:
            layer = pixel[~np.isnan(pixel)]
            for i in range(len(layer)):
                for j in range(i + 1, len(layer)):
                    diffs.append(float(angular_separation(layer[i], layer[j])))
        return _population_std(diffs)
    return _population_std(block[~np.isnan(block)])


# --- shared helpers -----------------------------------------------------------

def _good_pixels(coverage: np.ndarray) -> np.ndarray:
    """Pixels covered by >= 2 instances whose on-canvas 4-neighbours share
    exactly the same covering set."""
    n, h, w = coverage.shape
    good = coverage.sum(axis=0) >= 2
    same = np.ones((h, w), dtype=bool)
    vertical = (coverage[:, 1:, :] == coverage[:, :-1, :]).all(axis=0)
    horizontal = (coverage[:, :, 1:] == coverage[:, :, :-1]).all(axis=0)
    same[1:, :] &= vertical
    same[:-1, :] &= vertical
    same[:, 1:] &= horizontal
    same[:, :-1] &= horizontal
    return good & same


def _pair_separations(stack: FieldStack) -> np.ndarray:
    """(P, H, W) angular separation of every overlapping layer pair, NaN where
    the pair does not co-occur."""
    valid = stack.valid
    out = []
    n = len(stack.ids)
    for i in range(n):
        for j in range(i + 1, n):
            both = valid[i] & valid[j]
            if both.any():
                sep = angular_separation(stack.angles[i], stack.angles[j])
                out.append(np.where(both, sep, np.nan))
    if not out:
        return np.full((0, stack.height, stack.width), np.nan)
    return np.stack(out)


# --- reference implementation: direct per-window recomputation ---------------

def _shifted_views(arr: np.ndarray, ws: int, fill):
    """Yield, for every in-window offset, ``arr`` sampled at ``centre + offset``."""
    before, after = _extent(ws)
    h, w = arr.shape[-2:]
    pad = [(0, 0)] * (arr.ndim - 2) + [(before, after), (before, after)]
    padded = np.pad(arr, pad, constant_values=fill)
    for oy in range(ws):
        for ox in range(ws):
            yield padded[..., oy:oy + h, ox:ox + w]


def _direct_window_std(samples: np.ndarray, ws: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-pass pooled population std over each window of a NaN-padded
    (L, H, W) sample stack.  Returns (count, sigma)."""
    h, w = samples.shape[-2:]
    count = np.zeros((h, w))
    total = np.zeros((h, w))
    for view in _shifted_views(samples, ws, np.nan):
        ok = ~np.isnan(view)
        count += ok.sum(axis=0)
        total += np.where(ok, view, 0.0).sum(axis=0)
    mean = total / np.maximum(count, 1)
    dev = np.zeros((h, w))
    for view in _shifted_views(samples, ws, np.nan):
        d = view - mean
        dev += np.where(np.isnan(d), 0.0, d * d).sum(axis=0)
    sigma = np.where(count >= 2, np.sqrt(dev / np.maximum(count, 1)), 0.0)
    return count, sigma


def _reference_sigma(stack: FieldStack, ws: int, mode: str) -> np.ndarray:
    h, w = stack.height, stack.width
    present = np.zeros((len(stack.ids), h, w), dtype=bool)
    for view in _shifted_views(stack.valid, ws, False):
        present |= view
    active = present.sum(axis=0) >= 2
    _, sigma = _direct_window_std(stack.angles, ws)
    if mode == "interior-diff":
        interior = np.ones((h, w), dtype=bool)
        # off-canvas positions are not part of the clipped window
        for view in _shifted_views(_good_pixels(stack.coverage), ws, True):
            interior &= view
        _, diff_sigma = _direct_window_std(_pair_separations(stack), ws)
        sigma = np.where(interior, diff_sigma, sigma)
    return np.where(active, sigma, 0.0)


def _reference_accumulate(sigma: np.ndarray, ws: int) -> np.ndarray:
    before, after = _extent(ws)
    h, w = sigma.shape
    out = np.zeros((h + ws - 1, w + ws - 1))
    for oy in range(ws):
        for ox in range(ws):
            region = out[oy:oy + h, ox:ox + w]
            np.maximum(region, sigma, out=region)
    return out[before:before + h, before:before + w]


# --- optimized implementation: fixed-point summed-area tables -----------------

def _box_sums(arr: np.ndarray, ws: int) -> np.ndarray:
    """Clipped window sums of an int64 (..., H, W) array.

    Prefix sums may wrap around in int64; the differences are still exact as
    long as each window total fits, which the fixed-point scale guarantees.
    """
    before, after = _extent(ws)
    h, w = arr.shape[-2:]
    table = np.zeros(arr.shape[:-2] + (h + 1, w + 1), dtype=np.int64)
    table[..., 1:, 1:] = arr.cumsum(axis=-2, dtype=np.int64).cumsum(axis=-1, dtype=np.int64)
    r0 = np.clip(np.arange(h) - before, 0, h)[:, None]
    r1 = np.clip(np.arange(h) + after + 1, 0, h)[:, None]
    c0 = np.clip(np.arange(w) - before, 0, w)[None, :]
    c1 = np.clip(np.arange(w) + after + 1, 0, w)[None, :]
    return table[..., r1, c1] - table[..., r0, c1] - table[..., r1, c0] + table[..., r0, c0]


def _fixed_point_bits(max_layers: int, ws: int, max_value: float = math.pi) -> int:
    # keep every window's sum of squared fixed-point values below 2**62
    bound = max(max_layers, 1) * ws * ws * max_value * max_value
    return max(0, min(30, int(math.floor((62 - math.log2(bound)) / 2))))


def _fast_window_std(samples: np.ndarray, ws: int) -> np.ndarray:
    """Pooled population std per window of a NaN-padded (L, H, W) stack."""
    ok = ~np.isnan(samples)
    per_pixel = ok.sum(axis=0)
    bits = _fixed_point_bits(int(per_pixel.max(initial=0)), ws)
    scale = float(2 ** bits)
    q = np.where(ok, np.rint(np.where(ok, samples, 0.0) * scale), 0.0).astype(np.int64)
    agg = np.stack([per_pixel.astype(np.int64), q.sum(axis=0), (q * q).sum(axis=0)])
    count, total, squares = _box_sums(agg, ws).astype(np.float64)
    n = np.maximum(count, 1.0)
    var = (squares - total * total / n) / n
    return np.where(count >= 2, np.sqrt(np.maximum(var, 0.0)) / scale, 0.0)


def _optimized_sigma(stack: FieldStack, ws: int, mode: str) -> np.ndarray:
    per_instance = _box_sums(stack.valid.astype(np.int64), ws)
    active = (per_instance > 0).sum(axis=0) >= 2
    sigma = _fast_window_std(stack.angles, ws)
    if mode == "interior-diff":
        h, w = stack.height, stack.width
        good = _box_sums(_good_pixels(stack.coverage).astype(np.int64), ws)
        area = _box_sums(np.ones((h, w), dtype=np.int64), ws)
        interior = good == area
        if interior.any():
            sigma = np.where(interior, _fast_window_std(_pair_separations(stack), ws), sigma)
    return np.where(active, sigma, 0.0)


def _optimized_accumulate(sigma: np.ndarray, ws: int) -> np.ndarray:
    # pixel p receives the max over centres c with c - before <= p <= c + after
    origin = ws % 2 - 1
    out = maximum_filter1d(sigma, ws, axis=0, mode="constant", cval=0.0, origin=origin)
    return maximum_filter1d(out, ws, axis=1, mode="constant", cval=0.0, origin=origin)


# --- public pipeline ----------------------------------------------------------

def window_sigma_map(stack: FieldStack, ws: int, mode: str = "std", method: str = "optimized") -> np.ndarray:
    """Per-centre statistic (0 for inactive windows), before accumulation."""
    if method == "optimized":
        return _optimized_sigma(stack, ws, mode)
    if method == "reference":
        return _reference_sigma(stack, ws, mode)
    raise ValueError(f"method must be one of {METHODS}, got {method!r}")


def interior_windows(stack: FieldStack, ws: int) -> np.ndarray:
    """Boolean (H, W) map of window centres whose window is interior."""
    good = _box_sums(_good_pixels(stack.coverage).astype(np.int64), ws)
    area = _box_sums(np.ones((stack.height, stack.width), dtype=np.int64), ws)
    return good == area


def generate_joint_map(stack: FieldStack, cfg: GammConfig = GammConfig(), method: str = "optimized") -> AnomalyMap:
    """Unnormalised joint anomaly map (max-accumulated window statistics)."""
    sigma = window_sigma_map(stack, cfg.ws, cfg.mode, method)
    if method == "optimized":
        joint = _optimized_accumulate(sigma, cfg.ws)
    else:
        joint = _reference_accumulate(sigma, cfg.ws)
    return AnomalyMap(joint)


def normalize_and_scale(raw: AnomalyMap, f_ga: float) -> AnomalyMap:
    if not f_ga > 0:
        raise ValueError(f"f_ga must be positive, got {f_ga!r}")
    peak = raw.values.max(initial=0.0)
    if peak == 0:
        return AnomalyMap(np.zeros_like(raw.values), raw.instance_id)
    return AnomalyMap(raw.values / peak * f_ga, raw.instance_id)


def per_instance_maps(joint: AnomalyMap, scene: Scene) -> list[AnomalyMap]:
    """Restrict the joint map to each instance's support, in scene order."""
    if joint.values.shape != (scene.height, scene.width):
        raise ValueError("joint map and scene dimensions differ")
    return [AnomalyMap(np.where(inst.mask, joint.values, 0.0), inst.id) for inst in scene.instances]


def gradient_anomaly_maps(
    scene: Scene, cfg: GammConfig = GammConfig(), method: str = "optimized"
) -> tuple[AnomalyMap, list[AnomalyMap]]:
    """Full pipeline: fields, window statistics, normalisation, restriction."""
    stack = build_field_stack(scene)
    joint = normalize_and_scale(generate_joint_map(stack, cfg, method), cfg.f_ga)
    return joint, per_instance_maps(joint, scene)

