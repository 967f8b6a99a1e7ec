import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradanom.fields import build_field_stack
from gradanom.gamm import AnomalyMap, GammConfig, generate_joint_map, normalize_and_scale
from gradanom.losses import ProbMap, gradient_anomaly_loss, mask_refinement_loss, pixel_ce, total_loss
from gradanom.scene import synth_scene

GT = np.array([[0.5, 0.0], [0.0, 0.0]])


class TestGradientAnomalyLoss:
    def test_identity(self):
        assert gradient_anomaly_loss([AnomalyMap(GT)], [GT.copy()]) == 0.0

    def test_single_map(self):
        assert gradient_anomaly_loss([AnomalyMap(GT)], [np.zeros((2, 2))]) == pytest.approx(0.0625, abs=1e-12)

    def test_sums_over_maps(self):
        loss = gradient_anomaly_loss([GT, GT], [np.zeros((2, 2))] * 2)
        assert loss == pytest.approx(0.125, abs=1e-12)

    def test_mismatches(self):
        with pytest.raises(ValueError):
            gradient_anomaly_loss([GT], [])
        with pytest.raises(ValueError):
            gradient_anomaly_loss([GT], [np.zeros((3, 2))])

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_non_negative_and_zero_iff_equal(self, seed):
        rng = np.random.default_rng(seed)
        gt = [rng.random((4, 5)) for _ in range(3)]
        pred = [g + rng.normal(0, 0.1, g.shape) for g in gt]
        assert gradient_anomaly_loss(gt, pred) > 0
        assert gradient_anomaly_loss(gt, gt) == 0


class TestPixelCE:
    def test_values(self):
        probs = np.array([[[1.0, 0.5, 0.0]], [[0.0, 0.5, 1.0]]])
        ce = pixel_ce(ProbMap(probs), np.array([[0, 0, 0]]))
        assert ce[0, 0] == 0.0
        assert ce[0, 1] == pytest.approx(math.log(2), abs=1e-12)
        assert ce[0, 2] == pytest.approx(-math.log(1e-12))
        assert np.isfinite(ce).all()

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            pixel_ce(np.full((2, 1, 1), 0.5), np.array([[2]]))

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            ProbMap(np.full((2, 2, 2), 0.6))

    def test_decreasing_in_true_class_probability(self):
        p = np.linspace(0, 1, 11)
        ce = pixel_ce(np.stack([1 - p, p])[:, None, :], np.ones((1, 11), dtype=int))[0]
        assert (ce >= 0).all() and (np.diff(ce) < 0).all()


class TestMaskRefinementLoss:
    def test_zero_map_annihilates(self):
        assert mask_refinement_loss(np.array([3.0, 1.0]), np.zeros(2)) == 0.0

    def test_literal(self):
        assert mask_refinement_loss(np.array([0.2, 0.4]), np.array([0.0, 1.0])) == pytest.approx(0.4, abs=1e-12)

    def test_offset(self):
        ce, mg = np.array([0.2, 0.4]), np.array([0.0, 1.0])
        assert mask_refinement_loss(ce, mg, "offset") == pytest.approx(1.0, abs=1e-12)
        assert mask_refinement_loss(ce, mg, "offset") == mask_refinement_loss(ce, mg) + ce.sum()

    def test_bad_mode_and_shape(self):
        with pytest.raises(ValueError):
            mask_refinement_loss(np.ones(2), np.ones(2), "square")
        with pytest.raises(ValueError):
            mask_refinement_loss(np.ones(2), np.ones(3))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_linear_in_weights(self, seed):
        rng = np.random.default_rng(seed)
        ce, mg = rng.random((5, 5)), rng.random((5, 5))
        assert mask_refinement_loss(ce, 2 * mg) == pytest.approx(2 * mask_refinement_loss(ce, mg), rel=1e-12)

    def test_f_ga_is_a_pure_weight(self):
        raw = generate_joint_map(build_field_stack(synth_scene("overlap-pair", 0, 48, 48)), GammConfig())
        ce = np.random.default_rng(0).random((48, 48))
        a = mask_refinement_loss(ce, normalize_and_scale(raw, 0.75))
        b = mask_refinement_loss(ce, normalize_and_scale(raw, 0.5))
        assert a == pytest.approx(0.75 / 0.5 * b, rel=1e-12)


class TestTotalLoss:
    def test_zero(self):
        assert total_loss(0, 0, 0, 0, 0).total == 0

    def test_sum(self):
        out = total_loss(0.1, 0.2, 0.3, 0.4, 0.5)
        assert out.total == pytest.approx(1.5, abs=1e-9)
        assert (out.ga, out.rpn) == (0.1, 0.5)

    def test_commutative(self):
        import itertools

        terms = (0.1, 0.2, 0.3, 0.4, 0.5)
        totals = {total_loss(*p).total for p in itertools.permutations(terms)}
        assert len(totals) == 1

    def test_non_finite(self):
        with pytest.raises(ValueError):
            total_loss(0, float("nan"), 0, 0, 0)
