"""Per-instance radial distance/direction fields and their per-pixel stack.

Every instance gets a paraboloid ``z = (x - cx)^2 + (y - cy)^2`` centred on
its centroid.  The gradient of ``z`` points radially outward, and the angle of
that gradient is the pixel's direction angle.  Stacking the angle fields of
all instances yields, at each pixel, one layer per covering instance.

Off-support pixels hold ``NaN`` in both maps.  The pixel that coincides with
the centroid (only possible for integer centroids) has no direction; its
angle is also ``NaN`` and it contributes no layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import InstanceMask, Scene, SceneError

UNDEFINED = np.nan


def _as_mask(mask) -> np.ndarray:
    if isinstance(mask, InstanceMask):
        return mask.mask
    return np.asarray(mask, dtype=bool)


def centroid(mask) -> tuple[float, float]:
    """Mean ``(x, y)`` of the foreground pixels, not rounded."""
    m = _as_mask(mask)
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise SceneError("centroid of an empty mask")
    return float(xs.sum()) / xs.size, float(ys.sum()) / ys.size


def _offsets(m: np.ndarray, center):
    h, w = m.shape
    if center is None:
        # n*x - sum(x) is an exact integer, so offsets are bit-identical
        # under integer translation of the mask
        ys, xs = np.nonzero(m)
        n = xs.size
        if n == 0:
            raise SceneError("radial field of an empty mask")
        dx = (np.arange(w, dtype=np.int64) * n - int(xs.sum())) / n
        dy = (np.arange(h, dtype=np.int64) * n - int(ys.sum())) / n
    else:
        dx = np.arange(w, dtype=np.float64) - center[0]
        dy = np.arange(h, dtype=np.float64) - center[1]
    return np.broadcast_to(dx[None, :], (h, w)), np.broadcast_to(dy[:, None], (h, w))


def radial_distance_map(mask, center=None) -> np.ndarray:
    """Squared distance to the centroid on the support, NaN elsewhere.

    ``center`` defaults to the mask centroid.
    """
    m = _as_mask(mask)
    dx, dy = _offsets(m, center)
    return np.where(m, dx * dx + dy * dy, UNDEFINED)


def radial_angle_map(mask, center=None) -> np.ndarray:
    """Direction of the outward radial gradient, in ``(-pi, pi]``.

    NaN off-support and at the centroid pixel itself.
    """
    m = _as_mask(mask)
    dx, dy = _offsets(m, center)
    ang = np.arctan2(dy, dx)
    ang[ang == -np.pi] = np.pi
    degenerate = (dx == 0) & (dy == 0)
    return np.where(m & ~degenerate, ang, UNDEFINED)


@dataclass(frozen=True)
class InstanceField:
    id: int
    centroid: tuple[float, float]
    distance_map: np.ndarray = field(repr=False)
    angle_map: np.ndarray = field(repr=False)
    support: np.ndarray = field(repr=False)

    @property
    def degenerate_pixel(self) -> tuple[int, int] | None:
        """``(x, y)`` of the on-support pixel sitting exactly on the centroid, if any."""
        hit = np.argwhere(self.support & np.isnan(self.angle_map))
        if len(hit) == 0:
            return None
        y, x = hit[0]
        return int(x), int(y)


def instance_field(inst: InstanceMask) -> InstanceField:
    m = inst.mask
    return InstanceField(
        id=inst.id,
        centroid=centroid(m),
        distance_map=radial_distance_map(m),
        angle_map=radial_angle_map(m),
        support=m,
    )


@dataclass(frozen=True)
class FieldStack:
    """Multi-layer direction field over the canvas.

    ``angles[k]`` is the angle field of instance ``ids[k]`` (NaN where that
    instance has no layer) and ``coverage[k]`` its mask.  The layers at pixel
    ``(x, y)`` are the non-NaN entries of ``angles[:, y, x]`` in instance order.
    """

    height: int
    width: int
    ids: tuple[int, ...]
    angles: np.ndarray = field(repr=False)
    coverage: np.ndarray = field(repr=False)

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.angles)

    def layers(self, x: int, y: int) -> list[tuple[int, float]]:
        col = self.angles[:, y, x]
        return [(i, float(a)) for i, a in zip(self.ids, col) if not np.isnan(a)]

    def layer_count(self) -> np.ndarray:
        return self.valid.sum(axis=0)

    def covering_ids(self, x: int, y: int) -> frozenset[int]:
        return frozenset(i for i, c in zip(self.ids, self.coverage[:, y, x]) if c)


def build_field_stack(scene: Scene) -> FieldStack:
    n = len(scene)
    angles = np.full((n, scene.height, scene.width), np.nan)
    for k, inst in enumerate(scene.instances):
        angles[k] = radial_angle_map(inst.mask)
    angles.setflags(write=False)
    coverage = scene.mask_stack()
    coverage.setflags(write=False)
    return FieldStack(scene.height, scene.width, scene.ids, angles, coverage)
