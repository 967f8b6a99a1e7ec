"""Scenes of (possibly overlapping) instance masks.

A scene is stored as one boolean mask per instance rather than a label map,
because overlapping instances cannot be encoded in a single label image.
Coordinates follow the image convention: ``x`` is the column index, ``y`` the
row index, origin at the top-left pixel.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

SHAPE_KINDS = ("disk", "ellipse", "rotated-bar", "axis-aligned-rectangle")
PRESETS = ("overlap-pair", "cross-bars", "touch-squares", "random-cluster")
MIN_SYNTH_SIZE = 32


class SceneError(ValueError):
    """Raised when a scene, mask or manifest violates its invariants."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=bool, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class InstanceMask:
    id: int
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.id, (int, np.integer)) or self.id < 1:
            raise SceneError(f"instance id must be a positive integer, got {self.id!r}")
        mask = np.asarray(self.mask)
        if mask.ndim != 2:
            raise SceneError(f"instance {self.id}: mask must be 2-D, got shape {mask.shape}")
        mask = _frozen(mask != 0)
        if not mask.any():
            raise SceneError(f"instance {self.id}: mask is empty")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "mask", mask)

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape


@dataclass(frozen=True)
class Scene:
    height: int
    width: int
    instances: tuple[InstanceMask, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise SceneError(f"scene dimensions must be positive, got {self.height}x{self.width}")
        instances = tuple(self.instances)
        seen = set()
        for inst in instances:
            if inst.shape != (self.height, self.width):
                raise SceneError(
                    f"instance {inst.id}: mask is {inst.shape[0]}x{inst.shape[1]}, "
                    f"scene is {self.height}x{self.width}"
                )
            if inst.id in seen:
                raise SceneError(f"duplicate instance id {inst.id}")
            seen.add(inst.id)
        object.__setattr__(self, "instances", instances)

    @classmethod
    def from_masks(cls, masks: Sequence[np.ndarray], ids: Sequence[int] | None = None) -> "Scene":
        """Build a scene from bare masks; ids default to 1..n."""
        if not masks:
            raise SceneError("cannot infer scene size from zero masks")
        ids = list(range(1, len(masks) + 1)) if ids is None else list(ids)
        h, w = np.asarray(masks[0]).shape
        return cls(h, w, tuple(InstanceMask(i, m) for i, m in zip(ids, masks)))

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(inst.id for inst in self.instances)

    def __len__(self):
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def mask_stack(self) -> np.ndarray:
        """(n, H, W) boolean array in instance order."""
        if not self.instances:
            return np.zeros((0, self.height, self.width), dtype=bool)
        return np.stack([inst.mask for inst in self.instances])

    def translated(self, dx: int, dy: int) -> "Scene":
        """Shift every mask by an integer offset; pixels pushed off-canvas are dropped."""
        out = []
        for inst in self.instances:
            m = np.zeros_like(inst.mask)
            src = inst.mask[max(0, -dy):self.height - max(0, dy), max(0, -dx):self.width - max(0, dx)]
            m[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
            out.append(InstanceMask(inst.id, m))
        return Scene(self.height, self.width, tuple(out))


@dataclass(frozen=True)
class ShapeSpec:
    """Analytic shape in pixel units.

    ``rx``/``ry`` are the radius pair (disk uses ``rx``), the ellipse
    semi-axes, the bar half-length/half-width or the rectangle half-extents.
    ``angle`` rotates ellipses and bars counter-clockwise in the x/y frame.
    """

    kind: str
    id: int
    cx: float
    cy: float
    rx: float
    ry: float
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise SceneError(f"unknown shape kind {self.kind!r}")
        if self.rx < 1 or self.ry < 1:
            raise SceneError(f"shape {self.id}: radii/half-widths must be >= 1 pixel")
        if not (-math.pi < self.angle <= math.pi):
            raise SceneError(f"shape {self.id}: angle must lie in (-pi, pi]")

    @classmethod
    def disk(cls, id, cx, cy, r):
        return cls("disk", id, cx, cy, r, r)

    @classmethod
    def ellipse(cls, id, cx, cy, a, b, angle=0.0):
        return cls("ellipse", id, cx, cy, a, b, angle)

    @classmethod
    def bar(cls, id, cx, cy, half_length, half_width, angle=0.0):
        return cls("rotated-bar", id, cx, cy, half_length, half_width, angle)

    @classmethod
    def rectangle(cls, id, x0, y0, x1, y1):
        """Inclusive pixel range ``x0..x1`` by ``y0..y1``."""
        return cls("axis-aligned-rectangle", id, (x0 + x1) / 2, (y0 + y1) / 2,
                   (x1 - x0) / 2, (y1 - y0) / 2)


def rasterize(spec: ShapeSpec, height: int, width: int) -> InstanceMask:
    """Pixel (x, y) is foreground iff its center (x, y) lies inside the shape."""
    y, x = np.mgrid[0:height, 0:width]
    dx = x - spec.cx
    dy = y - spec.cy
    if spec.kind == "disk":
        inside = dx * dx + dy * dy <= spec.rx * spec.rx
    elif spec.kind == "axis-aligned-rectangle":
        inside = (np.abs(dx) <= spec.rx) & (np.abs(dy) <= spec.ry)
    else:
        c, s = math.cos(spec.angle), math.sin(spec.angle)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        if spec.kind == "ellipse":
            inside = (u / spec.rx) ** 2 + (v / spec.ry) ** 2 <= 1.0
        else:
            inside = (np.abs(u) <= spec.rx) & (np.abs(v) <= spec.ry)
    if not inside.any():
        raise SceneError(f"shape {spec.id} ({spec.kind}) does not cover any pixel of the canvas")
    return InstanceMask(spec.id, inside)


def scene_from_shapes(shapes: Sequence[ShapeSpec], height: int, width: int) -> Scene:
    return Scene(height, width, tuple(rasterize(s, height, width) for s in shapes))


def _wrap_angle(a: float) -> float:
    a = math.remainder(a, 2 * math.pi)
    return math.pi if a <= -math.pi else a


def _overlap_pair(rng, h, w):
    m = min(h, w)
    r1, r2 = rng.uniform(0.15, 0.22, size=2) * m
    d = rng.uniform(0.3, 0.6) * (r1 + r2)
    phi = rng.uniform(-math.pi, math.pi)
    mx = w / 2 + rng.uniform(-0.05, 0.05) * m
    my = h / 2 + rng.uniform(-0.05, 0.05) * m
    ux, uy = math.cos(phi) * d / 2, math.sin(phi) * d / 2
    return [ShapeSpec.disk(1, mx - ux, my - uy, r1), ShapeSpec.disk(2, mx + ux, my + uy, r2)]


def _cross_bars(rng, h, w):
    m = min(h, w)
    cx = w / 2 + rng.uniform(-0.05, 0.05) * m
    cy = h / 2 + rng.uniform(-0.05, 0.05) * m
    a1 = rng.uniform(-math.pi / 2, math.pi / 2)
    a2 = _wrap_angle(a1 + rng.uniform(math.pi / 4, 3 * math.pi / 4))
    shapes = []
    for i, a in enumerate((a1, a2), start=1):
        half_len = rng.uniform(0.3, 0.4) * m
        half_wid = max(1.5, rng.uniform(0.05, 0.08) * m)
        shapes.append(ShapeSpec.bar(i, cx, cy, half_len, half_wid, a))
    return shapes


def _touch_squares(rng, h, w):
    vertical = bool(rng.integers(2))
    if vertical:
        h, w = w, h
    m = min(h, w)
    lo, hi = max(3, m // 5), max(4, m // 3)
    wa, wb, ha, hb = (int(v) for v in rng.integers(lo, hi + 1, size=4))
    split = w // 2 + int(rng.integers(-(m // 16), m // 16 + 1))
    ya0 = h // 2 - ha // 2 + int(rng.integers(-(m // 16), m // 16 + 1))
    yb0 = h // 2 - hb // 2 + int(rng.integers(-(m // 16), m // 16 + 1))
    boxes = [(split - wa + 1, ya0, split, ya0 + ha - 1), (split + 1, yb0, split + wb, yb0 + hb - 1)]
    if vertical:
        boxes = [(y0, x0, y1, x1) for (x0, y0, x1, y1) in boxes]
    return [ShapeSpec.rectangle(i, *box) for i, box in enumerate(boxes, start=1)]


def _random_shape(rng, id, cx, cy, m):
    kind = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
    a, b = (max(1.0, v) for v in rng.uniform(0.06, 0.15, size=2) * m)
    angle = _wrap_angle(rng.uniform(-math.pi, math.pi))
    if kind == "disk":
        return ShapeSpec.disk(id, cx, cy, a)
    if kind == "ellipse":
        return ShapeSpec.ellipse(id, cx, cy, a, b, angle)
    if kind == "rotated-bar":
        return ShapeSpec.bar(id, cx, cy, a, max(1.0, b / 2), angle)
    return ShapeSpec.rectangle(id, round(cx - a), round(cy - b), round(cx + a), round(cy + b))


def _random_cluster(rng, h, w):
    m = min(h, w)
    count = int(rng.integers(3, 9))
    first = _random_shape(rng, 1, round(rng.uniform(0.3, 0.7) * w), round(rng.uniform(0.3, 0.7) * h), m)
    # the second shape is centred on a pixel of the first, which guarantees an overlap
    ys, xs = np.nonzero(rasterize(first, h, w).mask)
    k = int(rng.integers(len(xs)))
    shapes = [first, _random_shape(rng, 2, int(xs[k]), int(ys[k]), m)]
    for i in range(3, count + 1):
        cx = round(rng.uniform(0.1, 0.9) * w)
        cy = round(rng.uniform(0.1, 0.9) * h)
        shapes.append(_random_shape(rng, i, cx, cy, m))
    return shapes


_PRESET_BUILDERS = {
    "overlap-pair": _overlap_pair,
    "cross-bars": _cross_bars,
    "touch-squares": _touch_squares,
    "random-cluster": _random_cluster,
}


def synth_shapes(preset: str, seed: int, height: int, width: int) -> list[ShapeSpec]:
    if preset not in _PRESET_BUILDERS:
        raise SceneError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    if height < MIN_SYNTH_SIZE or width < MIN_SYNTH_SIZE:
        raise SceneError(f"canvas {height}x{width} too small, need at least {MIN_SYNTH_SIZE}x{MIN_SYNTH_SIZE}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return _PRESET_BUILDERS[preset](rng, height, width)


def synth_scene(preset: str, seed: int, height: int, width: int) -> Scene:
    """Deterministic synthetic crossing/touching/overlapping scene.

    The generator is an explicitly seeded PCG64 so that the same
    ``(preset, seed, height, width)`` gives a bit-identical scene everywhere.
    """
    return scene_from_shapes(synth_shapes(preset, seed, height, width), height, width)


# --- manifest I/O ---------------------------------------------------------

def _read_mask_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise SceneError(f"{path}: expected a single-channel image, got shape {arr.shape}")
    return arr


def load_manifest(path) -> Scene:
    """Read a scene manifest; mask paths are resolved relative to the manifest."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError as exc:
        raise SceneError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: malformed JSON ({exc})") from exc
    try:
        height, width = int(doc["height"]), int(doc["width"])
        entries = doc["instances"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"{path}: manifest needs height, width and instances") from exc

    instances = []
    for entry in entries:
        try:
            mask_path = path.parent / entry["mask"]
            inst_id = int(entry["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"{path}: every instance needs an integer id and a mask path") from exc
        if not mask_path.exists():
            raise SceneError(f"mask file not found: {mask_path}")
        try:
            arr = _read_mask_png(mask_path)
        except OSError as exc:
            raise SceneError(f"{mask_path}: cannot decode image ({exc})") from exc
        if arr.shape != (height, width):
            raise SceneError(
                f"{mask_path}: mask is {arr.shape[0]}x{arr.shape[1]}, manifest says {height}x{width}"
            )
        instances.append(InstanceMask(inst_id, arr != 0))
    return Scene(height, width, tuple(instances))


def _atomic_write_bytes(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def save_manifest(scene: Scene, out_dir, name: str = "manifest.json") -> Path:
    """Write ``scene`` as a manifest plus one 8-bit PNG (0/255) per instance."""
    import io

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for inst in scene.instances:
        fname = f"mask_{inst.id}.png"
        buf = io.BytesIO()
        Image.fromarray(inst.mask.astype(np.uint8) * 255).save(buf, format="PNG")
        _atomic_write_bytes(out_dir / fname, buf.getvalue())
        entries.append({"id": inst.id, "mask": fname})
    doc = {"height": scene.height, "width": scene.width, "instances": entries}
    manifest = out_dir / name
    _atomic_write_bytes(manifest, (json.dumps(doc, indent=2) + "\n").encode("utf-8"))
    return manifest


def load_label_map(path) -> Scene:
    """Expand a non-overlapping label image (0 = background, k = instance k)."""
    arr = _read_mask_png(Path(path))
    labels = [int(v) for v in np.unique(arr) if v != 0]
    if not labels:
        raise SceneError(f"{path}: label map has no instances")
    h, w = arr.shape
    return Scene(h, w, tuple(InstanceMask(k, arr == k) for k in labels))
