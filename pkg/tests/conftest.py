import math

import numpy as np
import pytest

from gradanom.scene import SceneError, ShapeSpec, Scene, rasterize


def random_scene(rng, height, width, n_instances, margin=0):
    """Random disks/ellipses/bars/rectangles kept ``margin`` pixels off the border."""
    m = min(height, width)
    out = []
    while len(out) < n_instances:
        i = len(out) + 1
        kind = rng.integers(4)
        a, b = (max(1.0, v) for v in rng.uniform(0.08, 0.25, size=2) * m)
        cx = rng.uniform(margin + a, width - 1 - margin - a) if width - 1 - 2 * (margin + a) > 0 else width / 2
        cy = rng.uniform(margin + a, height - 1 - margin - a) if height - 1 - 2 * (margin + a) > 0 else height / 2
        ang = rng.uniform(-math.pi + 1e-9, math.pi)
        if kind == 0:
            spec = ShapeSpec.disk(i, cx, cy, a)
        elif kind == 1:
            spec = ShapeSpec.ellipse(i, cx, cy, a, b, ang)
        elif kind == 2:
            spec = ShapeSpec.bar(i, cx, cy, a, max(1.0, b / 3), ang)
        else:
            r = min(a, b)
            spec = ShapeSpec.rectangle(i, round(cx - r), round(cy - r), round(cx + r), round(cy + r))
        try:
            inst = rasterize(spec, height, width)
        except SceneError:
            continue
        if margin:
            ys, xs = np.nonzero(inst.mask)
            if ys.min() < margin or xs.min() < margin or ys.max() >= height - margin or xs.max() >= width - margin:
                continue
        out.append(inst)
    return Scene(height, width, tuple(out))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def block(h, w, x0, y0, x1, y1):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1 + 1, x0:x1 + 1] = True
    return m


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
