import json

import numpy as np
import pytest
from PIL import Image

from gradanom.scene import (
    PRESETS,
    InstanceMask,
    Scene,
    SceneError,
    ShapeSpec,
    load_label_map,
    load_manifest,
    rasterize,
    save_manifest,
    synth_scene,
)

from conftest import block


def _write_png(path, arr, mode=None):
    Image.fromarray(arr, mode=mode).save(path)


class TestRasterize:
    def test_disk_matches_enumeration(self):
        expected = {(x, y) for x in range(21) for y in range(21) if (x - 10) ** 2 + (y - 10) ** 2 <= 9}
        mask = rasterize(ShapeSpec.disk(1, 10, 10, 3), 21, 21).mask
        got = {(int(x), int(y)) for y, x in zip(*np.nonzero(mask))}
        assert got == expected
        assert len(got) == 29

    def test_rectangle_is_inclusive(self):
        mask = rasterize(ShapeSpec.rectangle(1, 2, 2, 4, 4), 10, 10).mask
        assert mask.sum() == 9
        assert mask[2:5, 2:5].all()

    def test_disk_off_canvas_raises(self):
        with pytest.raises(SceneError):
            rasterize(ShapeSpec.disk(1, -50, -50, 3), 20, 20)

    def test_rotated_bar_axis_aligned_matches_rectangle(self):
        bar = rasterize(ShapeSpec.bar(1, 10, 10, 4, 1, 0.0), 21, 21).mask
        rect = rasterize(ShapeSpec.rectangle(1, 6, 9, 14, 11), 21, 21).mask
        assert np.array_equal(bar, rect)

    def test_ellipse_quarter_turn(self):
        a = rasterize(ShapeSpec.ellipse(1, 10, 10, 6, 2, 0.0), 21, 21).mask
        b = rasterize(ShapeSpec.ellipse(1, 10, 10, 6, 2, np.pi / 2), 21, 21).mask
        assert np.array_equal(a, b.T)

    @pytest.mark.parametrize("bad", [dict(rx=0.5), dict(angle=-np.pi), dict(angle=4.0), dict(kind="star")])
    def test_shape_invariants(self, bad):
        args = dict(kind="disk", id=1, cx=5, cy=5, rx=2, ry=2, angle=0.0)
        args.update(bad)
        with pytest.raises(SceneError):
            ShapeSpec(**args)


class TestSceneInvariants:
    def test_empty_mask_rejected(self):
        with pytest.raises(SceneError):
            InstanceMask(1, np.zeros((4, 4)))

    def test_duplicate_ids_rejected(self):
        m = block(8, 8, 1, 1, 2, 2)
        with pytest.raises(SceneError):
            Scene(8, 8, (InstanceMask(1, m), InstanceMask(1, m)))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(SceneError):
            Scene(8, 9, (InstanceMask(1, block(8, 8, 1, 1, 2, 2)),))

    def test_masks_are_read_only(self):
        inst = InstanceMask(1, block(8, 8, 1, 1, 2, 2))
        with pytest.raises(ValueError):
            inst.mask[0, 0] = True

    def test_translated(self):
        sc = Scene.from_masks([block(10, 10, 1, 1, 3, 3)])
        moved = sc.translated(2, 3)
        assert np.array_equal(moved.instances[0].mask, block(10, 10, 3, 4, 5, 6))


class TestSynth:
    def test_touch_squares_seed0(self):
        sc = synth_scene("touch-squares", 0, 64, 64)
        a, b = (inst.mask for inst in sc.instances)
        assert len(sc) == 2
        assert not (a & b).any()
        # some pixel of b is a 4-neighbour of a pixel of a
        grown = a.copy()
        grown[1:] |= a[:-1]
        grown[:-1] |= a[1:]
        grown[:, 1:] |= a[:, :-1]
        grown[:, :-1] |= a[:, 1:]
        assert (grown & b).any()

    def test_overlap_pair_seed0(self):
        sc = synth_scene("overlap-pair", 0, 64, 64)
        assert (sc.instances[0].mask & sc.instances[1].mask).sum() > 0

    @pytest.mark.parametrize("preset", PRESETS)
    def test_deterministic(self, preset):
        a = synth_scene(preset, 7, 64, 80)
        b = synth_scene(preset, 7, 64, 80)
        assert a.ids == b.ids
        for x, y in zip(a.instances, b.instances):
            assert np.array_equal(x.mask, y.mask)

    def test_seed_changes_scene(self):
        a = synth_scene("random-cluster", 1, 64, 64)
        b = synth_scene("random-cluster", 2, 64, 64)
        assert a.ids != b.ids or any(not np.array_equal(x.mask, y.mask) for x, y in zip(a, b))

    @pytest.mark.parametrize("seed", range(100))
    def test_preset_properties_hold_for_all_seeds(self, seed):
        m = synth_scene("overlap-pair", seed, 64, 64).mask_stack()
        assert (m[0] & m[1]).any()

        cb = synth_scene("cross-bars", seed, 64, 64).mask_stack()
        inter = cb[0] & cb[1]
        assert inter.any()
        assert not (inter[0].any() or inter[-1].any() or inter[:, 0].any() or inter[:, -1].any())

        ts = synth_scene("touch-squares", seed, 64, 64).mask_stack()
        assert not (ts[0] & ts[1]).any()
        ys, xs = np.nonzero(ts[1])
        a = ts[0]
        touching = False
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            yy, xx = ys + dy, xs + dx
            ok = (yy >= 0) & (yy < 64) & (xx >= 0) & (xx < 64)
            touching |= bool(a[yy[ok], xx[ok]].any())
        assert touching

        rc = synth_scene("random-cluster", seed, 64, 64).mask_stack()
        assert 3 <= len(rc) <= 8
        assert (rc.sum(axis=0) >= 2).any()

    @pytest.mark.parametrize("preset", ["overlap-pair", "nope"])
    def test_invalid_arguments(self, preset):
        with pytest.raises(SceneError):
            synth_scene(preset, 0, 16, 64)


class TestManifest:
    def test_round_trip(self, tmp_path):
        sc = synth_scene("random-cluster", 3, 48, 40)
        path = save_manifest(sc, tmp_path)
        back = load_manifest(path)
        assert (back.height, back.width, back.ids) == (48, 40, sc.ids)
        for x, y in zip(sc, back):
            assert np.array_equal(x.mask, y.mask)

    def test_two_masks(self, tmp_path):
        for i in (1, 2):
            _write_png(tmp_path / f"m{i}.png", block(64, 64, i, i, i + 5, i + 5).astype(np.uint8) * 255)
        doc = {"height": 64, "width": 64, "instances": [{"id": 1, "mask": "m1.png"}, {"id": 2, "mask": "m2.png"}]}
        (tmp_path / "scene.json").write_text(json.dumps(doc))
        sc = load_manifest(tmp_path / "scene.json")
        assert len(sc) == 2 and sc.height == sc.width == 64

    def test_sixteen_bit_masks(self, tmp_path):
        _write_png(tmp_path / "m.png", block(16, 16, 2, 2, 5, 5).astype(np.uint16) * 1000)
        (tmp_path / "s.json").write_text(json.dumps({"height": 16, "width": 16, "instances": [{"id": 4, "mask": "m.png"}]}))
        assert load_manifest(tmp_path / "s.json").instances[0].area == 16

    def test_dimension_mismatch(self, tmp_path):
        _write_png(tmp_path / "a.png", np.full((64, 64), 255, np.uint8))
        _write_png(tmp_path / "b.png", np.full((32, 32), 255, np.uint8))
        doc = {"height": 64, "width": 64, "instances": [{"id": 1, "mask": "a.png"}, {"id": 2, "mask": "b.png"}]}
        (tmp_path / "s.json").write_text(json.dumps(doc))
        with pytest.raises(SceneError, match="32x32"):
            load_manifest(tmp_path / "s.json")

    def test_empty_mask(self, tmp_path):
        _write_png(tmp_path / "z.png", np.zeros((8, 8), np.uint8))
        (tmp_path / "s.json").write_text(json.dumps({"height": 8, "width": 8, "instances": [{"id": 1, "mask": "z.png"}]}))
        with pytest.raises(SceneError, match="empty"):
            load_manifest(tmp_path / "s.json")

    def test_duplicate_ids(self, tmp_path):
        _write_png(tmp_path / "a.png", np.full((8, 8), 255, np.uint8))
        doc = {"height": 8, "width": 8, "instances": [{"id": 1, "mask": "a.png"}, {"id": 1, "mask": "a.png"}]}
        (tmp_path / "s.json").write_text(json.dumps(doc))
        with pytest.raises(SceneError, match="duplicate"):
            load_manifest(tmp_path / "s.json")

    def test_missing_and_malformed(self, tmp_path):
        with pytest.raises(SceneError):
            load_manifest(tmp_path / "nothing.json")
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(SceneError):
            load_manifest(tmp_path / "bad.json")
        (tmp_path / "nomask.json").write_text(json.dumps({"height": 8, "width": 8, "instances": [{"id": 1, "mask": "x.png"}]}))
        with pytest.raises(SceneError):
            load_manifest(tmp_path / "nomask.json")

    def test_label_map_import(self, tmp_path):
        labels = np.zeros((20, 20), np.uint16)
        labels[2:6, 2:6] = 3
        labels[10:15, 4:9] = 7
        _write_png(tmp_path / "labels.png", labels)
        sc = load_label_map(tmp_path / "labels.png")
        assert sc.ids == (3, 7)
        assert sc.instances[0].area == 16 and sc.instances[1].area == 25
