import numpy as np
import pytest

from affinity_lab import (
    AffinityField,
    LabelMap,
    PropagationConfig,
    RateSet,
    expand_rate_set,
    ground_truth_affinity,
    propagate,
    refine_step,
    steep_sigmoid,
    validate_probability_map,
)


class TestSteepSigmoid:
    def test_zero_is_half(self):
        assert steep_sigmoid(0.0, 7.0) == 0.5

    def test_one_is_seven_eighths_exactly(self):
        assert steep_sigmoid(1.0, 7.0) == 0.875

    def test_minus_one_is_one_eighth(self):
        assert steep_sigmoid(-1.0, 7.0) == 0.125

    def test_complement_identity(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-30, 30, size=1000)
        np.testing.assert_allclose(
            steep_sigmoid(x, 7.0) + steep_sigmoid(-x, 7.0), 1.0, atol=1e-12)

    def test_extreme_inputs_stable(self):
        # gradual underflow to 0/1 is fine; overflow or NaN is not
        with np.errstate(over="raise", invalid="raise"):
            assert steep_sigmoid(5000.0, 7.0) == 1.0
            assert steep_sigmoid(-5000.0, 7.0) == 0.0

    def test_steeper_than_base_e(self):
        # mu = 7 squashes harder than the ordinary sigmoid at x = 1
        assert steep_sigmoid(1.0, 7.0) > 1.0 / (1.0 + np.exp(-1.0))


def _one_neighbor_setup():
    # 1x2 grid, 2 classes; pixel (0,0) sees (0,1) with affinity 1
    p = np.zeros((2, 1, 2))
    p[:, 0, 0] = [0.6, 0.4]
    p[:, 0, 1] = [0.1, 0.9]
    values = np.zeros((8, 1, 2))
    valid = np.zeros((8, 1, 2), dtype=bool)
    values[4, 0, 0] = 1.0
    valid[4, 0, 0] = True
    field = AffinityField(values=values, valid=valid)
    return p, field, expand_rate_set("1")


class TestRefineStep:
    def test_hand_evaluated_pin(self):
        p, field, rates = _one_neighbor_setup()
        cfg = PropagationConfig(lam=6.0, iterations=1, affinity_mode="binary_gt")
        out = refine_step(p, field, rates, cfg)
        np.testing.assert_allclose(
            out[:, 0, 0], [0.49130434782608695, 0.5086956521739131], atol=1e-9)
        assert np.argmax(out[:, 0, 0]) == 1  # argmax flipped to the neighbor

    def test_pixel_without_neighbors_unchanged(self):
        p, field, rates = _one_neighbor_setup()
        cfg = PropagationConfig(iterations=1, affinity_mode="binary_gt")
        out = refine_step(p, field, rates, cfg)
        assert np.array_equal(out[:, 0, 1], p[:, 0, 1])

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        p = rng.random((4, 9, 9))
        p /= p.sum(axis=0, keepdims=True)
        labels = LabelMap(rng.integers(0, 4, size=(9, 9)).astype(np.uint8))
        gt = ground_truth_affinity(labels, expand_rate_set("1,2"))
        cfg = PropagationConfig(iterations=1, affinity_mode="binary_gt")
        out = refine_step(p, gt, expand_rate_set("1,2"), cfg)
        np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-9)

    def test_channel_count_mismatch(self):
        p, field, _ = _one_neighbor_setup()
        cfg = PropagationConfig(iterations=1)
        with pytest.raises(ValueError, match="channels"):
            refine_step(p, field, expand_rate_set("1,2"), cfg)


class TestPropagate:
    def test_zero_iterations_identity(self):
        p, field, rates = _one_neighbor_setup()
        cfg = PropagationConfig(iterations=0, affinity_mode="binary_gt")
        out = propagate(p, field, rates, cfg)
        assert np.array_equal(out, p)

    def test_zero_affinity_exact_identity(self):
        rng = np.random.default_rng(2)
        p = rng.random((3, 8, 8))
        p /= p.sum(axis=0, keepdims=True)
        rates = expand_rate_set("1")
        values = np.zeros((8, 8, 8))
        valid = np.ones((8, 8, 8), dtype=bool)
        field = AffinityField(values=values, valid=valid)
        cfg = PropagationConfig(iterations=5, affinity_mode="binary_gt")
        out = propagate(p, field, rates, cfg)
        assert np.array_equal(out, p)

    def test_uniform_stays_uniform(self):
        rng = np.random.default_rng(3)
        c = 4
        p = np.full((c, 6, 6), 1.0 / c)
        values = rng.random((8, 6, 6))
        valid = np.ones((8, 6, 6), dtype=bool)
        field = AffinityField(values=values, valid=valid)
        cfg = PropagationConfig(iterations=3, affinity_mode="binary_gt")
        out = propagate(p, field, rates=expand_rate_set("1"), cfg=cfg)
        np.testing.assert_allclose(out, 1.0 / c, atol=1e-12)

    def test_one_hot_gt_affinity_keeps_argmax(self):
        rng = np.random.default_rng(4)
        labels = LabelMap(rng.integers(0, 3, size=(12, 12)).astype(np.uint8))
        rates = expand_rate_set("1,(1,2)")
        gt = ground_truth_affinity(labels, rates)
        p = np.zeros((3, 12, 12))
        p[labels.data, np.arange(12)[:, None], np.arange(12)[None, :]] = 1.0
        cfg = PropagationConfig(iterations=10, affinity_mode="binary_gt")
        out = propagate(p, gt, rates, cfg)
        assert np.array_equal(np.argmax(out, axis=0), labels.data)

    def test_large_anchor_preserves_argmax(self):
        rng = np.random.default_rng(6)
        p = rng.random((5, 10, 10)) + 0.05
        p /= p.sum(axis=0, keepdims=True)
        values = rng.random((8, 10, 10))
        valid = np.ones((8, 10, 10), dtype=bool)
        field = AffinityField(values=values, valid=valid)
        cfg = PropagationConfig(lam=1e6, iterations=1,
                                affinity_mode="binary_gt")
        out = propagate(p, field, expand_rate_set("1"), cfg)
        assert np.array_equal(np.argmax(out, axis=0), np.argmax(p, axis=0))

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        p = rng.random((4, 7, 7))
        p /= p.sum(axis=0, keepdims=True)
        values = rng.normal(size=(8, 7, 7))
        valid = np.ones((8, 7, 7), dtype=bool)
        field = AffinityField(values=values, valid=valid)
        rates = expand_rate_set("1")
        cfg = PropagationConfig(iterations=3)
        perm = np.array([2, 0, 3, 1])
        out_then_perm = propagate(p, field, rates, cfg)[perm]
        perm_then_out = propagate(p[perm], field, rates, cfg)
        np.testing.assert_allclose(out_then_perm, perm_then_out, atol=1e-12)

    def test_logit_mode_applies_steep_sigmoid(self):
        p, field, rates = _one_neighbor_setup()
        logits = AffinityField(values=np.where(field.valid, 1.0, 0.0),
                               valid=field.valid)
        cfg = PropagationConfig(lam=6.0, mu=7.0, iterations=1,
                                affinity_mode="logits_steep_sigmoid")
        out = propagate(p, logits, rates, cfg)
        # neighbor contribution scaled by g(1) = 0.875
        pre = 6.0 * 0.6 * np.array([0.6, 0.4]) + 0.875 * np.array([0.1, 0.9])
        np.testing.assert_allclose(out[:, 0, 0], pre / pre.sum(), atol=1e-12)

    def test_degenerate_probability_rejected(self):
        _, field, rates = _one_neighbor_setup()
        bad = np.zeros((2, 1, 2))
        cfg = PropagationConfig(iterations=1)
        with pytest.raises(ValueError, match="sum to 1"):
            propagate(bad, field, rates, cfg)

    def test_symmetrize_averages_reverse_direction(self):
        # (0,0) -> (0,1) is direction 4; the reverse link is direction 3
        p = np.zeros((2, 1, 2))
        p[:, 0, 0] = [0.6, 0.4]
        p[:, 0, 1] = [0.1, 0.9]
        values = np.zeros((8, 1, 2))
        valid = np.zeros((8, 1, 2), dtype=bool)
        values[4, 0, 0] = 1.0
        valid[4, 0, 0] = True
        values[3, 0, 1] = 0.5
        valid[3, 0, 1] = True
        field = AffinityField(values=values, valid=valid)
        rates = expand_rate_set("1")
        cfg = PropagationConfig(lam=6.0, iterations=1,
                                affinity_mode="binary_gt", symmetrize=True)
        out = refine_step(p, field, rates, cfg)
        a = 0.5 * (1.0 + 0.5)
        pre = 6.0 * 0.6 * np.array([0.6, 0.4]) + a * np.array([0.1, 0.9])
        np.testing.assert_allclose(out[:, 0, 0], pre / pre.sum(), atol=1e-12)

    def test_binary_mode_rejects_out_of_range(self):
        p, field, rates = _one_neighbor_setup()
        vals = field.values.copy()
        vals[4, 0, 0] = 1.5
        bad = AffinityField(values=vals, valid=field.valid)
        cfg = PropagationConfig(iterations=1, affinity_mode="binary_gt")
        with pytest.raises(ValueError, match="0, 1"):
            propagate(p, bad, rates, cfg)


class TestConfigValidation:
    @pytest.mark.parametrize("kw", [dict(lam=0.0), dict(mu=1.0),
                                    dict(iterations=-1),
                                    dict(affinity_mode="nope")])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            PropagationConfig(**kw)


def test_validate_probability_map_accepts_valid():
    p = np.full((2, 3, 3), 0.5)
    out = validate_probability_map(p)
    assert out.shape == (2, 3, 3)


def test_validate_probability_map_rejects_out_of_range():
    p = np.full((2, 2, 2), 0.5)
    p[0, 0, 0] = -0.1
    p[1, 0, 0] = 1.1
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        validate_probability_map(p)
