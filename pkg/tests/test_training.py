"""Tests for the loss, learning-rate schedule and toy training loop."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.attention.config import EmimConfig
from core.errors import ConfigurationError, DimensionError, DivergenceError
from core.model.stack import ModelConfig, build_stack
from core.synthetic.motion import gen_direction_dataset, split_dataset
from core.tensor.ops import fast_matmul
from core.training.objective import clip_grad_norm, cross_entropy, learning_rate, sgd_step, warmup_steps
from core.training.trainer import TrainConfig, accuracy, motion_parameter_names, train_toy
from core.verification.gradcheck import finite_diff_grad


def _tiny_model(seed=0):
    cfg = ModelConfig(depth=2, channels=8, heads=2, num_classes=4, emim=EmimConfig(radius=1))
    return build_stack(cfg, seed=seed)


def _tiny_data():
    clips = gen_direction_dataset(8, seed=3, classes=4, extents=(8, 8))
    return split_dataset(clips, seed=3)


class TestCrossEntropy:
    """Tests for softmax cross-entropy."""

    def test_uniform_logits(self):
        """Test equal logits give log(classes)."""
        loss, grad = cross_entropy(np.zeros(4), 1)
        assert loss == pytest.approx(math.log(4))
        assert_allclose(grad, [0.25, -0.75, 0.25, 0.25], rtol=0, atol=1e-15)

    def test_gradient(self, rng):
        """Test the logit gradient against central differences."""
        logits = rng.standard_normal(5)
        _, grad = cross_entropy(logits, 3)
        numeric = finite_diff_grad(lambda v: cross_entropy(v, 3)[0], logits)
        assert_allclose(grad, numeric, rtol=1e-6, atol=1e-9)

    def test_large_logits_stay_finite(self):
        """Test very large logits do not overflow."""
        loss, _ = cross_entropy(np.array([1000.0, 0.0]), 0)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_bad_label(self):
        """Test a label outside the logits is rejected."""
        with pytest.raises(ConfigurationError):
            cross_entropy(np.zeros(3), 3)

    def test_bad_rank(self):
        """Test a batch of logits is rejected."""
        with pytest.raises(DimensionError):
            cross_entropy(np.zeros((2, 3)), 0)


class TestSchedule:
    """Tests for the warmup schedule and SGD update."""

    def test_warmup_ramp(self):
        """Test the rate ramps linearly then stays constant."""
        assert warmup_steps(100, 0.05) == 5
        rates = [learning_rate(s, 100, 0.1, 0.05) for s in range(8)]
        assert_allclose(rates, [0.02, 0.04, 0.06, 0.08, 0.1, 0.1, 0.1, 0.1])

    def test_no_warmup(self):
        """Test a zero fraction starts at the base rate."""
        assert learning_rate(0, 10, 0.3, 0.0) == 0.3

    def test_bad_fraction(self):
        """Test a fraction of one or more is rejected."""
        with pytest.raises(ConfigurationError):
            warmup_steps(10, 1.0)

    def test_sgd_skips_frozen(self):
        """Test frozen tensors are not updated."""
        params = {"a": np.ones(2), "b": np.ones(2)}
        grads = {"a": np.full(2, 2.0), "b": np.full(2, 2.0)}
        sgd_step(params, grads, 0.5, frozenset({"b"}))
        assert_array_equal(params["a"], [0.0, 0.0])
        assert_array_equal(params["b"], [1.0, 1.0])


class TestClipGradNorm:
    """Tests for global gradient-norm clipping."""

    def test_scales_to_bound(self):
        """Test a 3-4-0 gradient with bound 1 is scaled to norm one."""
        grads = {"a": np.array([3.0, 4.0]), "b": np.array([0.0])}
        norm = clip_grad_norm(grads, 1.0)
        assert norm == pytest.approx(5.0)
        assert_allclose(grads["a"], [0.6, 0.8], rtol=1e-6)
        assert grads["b"][0] == 0.0

    def test_small_norm_untouched(self):
        """Test gradients already inside the bound are unchanged."""
        grads = {"a": np.array([0.3, 0.4])}
        clip_grad_norm(grads, 1.0)
        assert_array_equal(grads["a"], [0.3, 0.4])

    def test_frozen_excluded(self):
        """Test frozen tensors neither count toward the norm nor get scaled."""
        grads = {"a": np.array([0.6]), "b": np.array([100.0])}
        assert clip_grad_norm(grads, 1.0, frozenset({"b"})) == pytest.approx(0.6)
        assert_array_equal(grads["b"], [100.0])

    def test_bad_bound(self):
        """Test a non-positive bound is rejected."""
        with pytest.raises(ConfigurationError):
            clip_grad_norm({"a": np.ones(1)}, 0.0)


class TestTrainToy:
    """Tests for the training loop."""

    def test_zero_epochs(self):
        """Test zero epochs only records the untrained model."""
        model = _tiny_model()
        train, val = _tiny_data()
        before = {k: v.copy() for k, v in model.named_parameters().items()}
        result = train_toy(model, train, val, TrainConfig(epochs=0, learning_rate=0.1, batch_size=4))
        assert len(result.history) == 1
        with fast_matmul():
            assert result.history[0].val_acc == accuracy(model, val)
        for name, value in model.named_parameters().items():
            assert_array_equal(value, before[name])

    def test_deterministic(self):
        """Test identical inputs give bit-identical histories and weights."""
        train, val = _tiny_data()
        cfg = TrainConfig(epochs=1, learning_rate=0.05, batch_size=3)
        a, b = _tiny_model(), _tiny_model()
        ha = train_toy(a, train, val, cfg).history
        hb = train_toy(b, train, val, cfg).history
        assert [m.as_dict() for m in ha[1:]] == [m.as_dict() for m in hb[1:]]
        for name, value in a.named_parameters().items():
            assert_array_equal(value, b.named_parameters()[name])

    def test_training_changes_weights(self):
        """Test one epoch moves the parameters."""
        model = _tiny_model()
        train, val = _tiny_data()
        before = model.head.weight.copy()
        train_toy(model, train, val, TrainConfig(epochs=1, learning_rate=0.1, batch_size=2))
        assert not np.array_equal(model.head.weight, before)

    def test_motion_ablation_freezes_mlp(self):
        """Test the motion ablation zeroes and freezes every motion tensor."""
        model = _tiny_model()
        train, val = _tiny_data()
        result = train_toy(model, train, val,
                           TrainConfig(epochs=1, learning_rate=0.1, batch_size=2, ablate=("motion",)))
        names = motion_parameter_names(model)
        assert names and sorted(result.frozen) == sorted(names)
        params = model.named_parameters()
        assert all(not params[name].any() for name in names)

    def test_clipped_step_is_bounded(self):
        """Test one clipped SGD step moves the weights by at most lr times the bound."""
        model = _tiny_model()
        train, val = _tiny_data()
        before = {k: v.copy() for k, v in model.named_parameters().items()}
        cfg = TrainConfig(epochs=1, learning_rate=5.0, batch_size=len(train), warmup_fraction=0.0, clip_norm=0.5)
        result = train_toy(model, train, val, cfg)
        moved = math.sqrt(sum(float(np.sum((v - before[k]) ** 2)) for k, v in model.named_parameters().items()))
        assert 0.0 < moved <= 5.0 * 0.5 + 1e-9
        assert math.isfinite(result.final.train_loss)

    def test_ordered_matmul_matches_fast(self):
        """Test the fixed-order and BLAS matmul paths train to nearly the same weights."""
        train, val = _tiny_data()
        fast, ordered = _tiny_model(), _tiny_model()
        cfg = TrainConfig(epochs=1, learning_rate=0.05, batch_size=3)
        train_toy(fast, train, val, cfg)
        train_toy(ordered, train, val, TrainConfig(epochs=1, learning_rate=0.05, batch_size=3, fast_matmul=False))
        for name, value in fast.named_parameters().items():
            assert_allclose(value, ordered.named_parameters()[name], rtol=1e-9, atol=1e-12)

    def test_divergence(self):
        """Test a non-finite loss raises a divergence error."""
        model = _tiny_model()
        model.head.weight[...] = np.inf
        train, val = _tiny_data()
        with pytest.raises(DivergenceError) as exc:
            train_toy(model, train, val, TrainConfig(epochs=1, learning_rate=0.1, batch_size=2))
        assert exc.value.epoch == 1

    @pytest.mark.parametrize("kwargs", [
        {"epochs": -1},
        {"batch_size": 0},
        {"learning_rate": 0.0},
        {"ablate": ("attention",)},
        {"clip_norm": 0.0},
    ])
    def test_invalid_config(self, kwargs):
        """Test invalid training settings are rejected."""
        base = {"epochs": 1, "learning_rate": 0.1, "batch_size": 2}
        base.update(kwargs)
        with pytest.raises(ConfigurationError):
            TrainConfig(**base)
