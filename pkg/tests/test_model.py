"""Tests for patch embedding, transformer blocks, stacks and checkpoints."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.attention.config import EmimConfig
from core.errors import ConfigurationError, DimensionError, StateError
from core.model import (
    BlockParams,
    BlockPattern,
    ModelConfig,
    batch_forward,
    block_backward,
    block_forward,
    build_stack,
    load_checkpoint,
    model_backward,
    model_forward,
    patch_embed,
    patchify,
    save_checkpoint,
)
from core.tensor.linear import LinearParams
from core.training.objective import cross_entropy
from core.verification.gradcheck import finite_diff_grad


def _small_cfg(**overrides):
    base = dict(depth=2, channels=8, heads=2, num_classes=4, emim=EmimConfig(radius=1))
    base.update(overrides)
    return ModelConfig(**base)


class TestPatchEmbed:
    """Tests for non-overlapping patch embedding."""

    def test_index_oracle(self):
        """Test a 2x4x4x1 clip with patch 2 against index arithmetic."""
        clip = np.arange(32, dtype=np.float64).reshape(2, 4, 4, 1)
        tokens = patchify(clip, 2)
        assert tokens.shape == (2, 2, 2, 4)
        for t in range(2):
            for i in range(2):
                for j in range(2):
                    expected = [clip[t, 2 * i + a, 2 * j + b, 0] for a in range(2) for b in range(2)]
                    assert_array_equal(tokens[t, i, j], expected)

    def test_whole_frame_patch(self, rng):
        """Test patch size equal to the frame gives one token per frame."""
        tokens = patch_embed(rng.standard_normal((3, 4, 4, 1)), 4, LinearParams.init(16, 5, rng))
        assert tokens.shape == (3, 1, 1, 5)

    def test_constant_clip(self, rng):
        """Test a constant clip embeds to identical tokens."""
        tokens = patch_embed(np.full((2, 4, 4, 1), 0.3), 2, LinearParams.init(4, 6, rng))
        assert_allclose(tokens.values, np.broadcast_to(tokens.values[0, 0, 0], tokens.shape), rtol=0, atol=0)

    def test_non_divisible(self):
        """Test extents not divisible by the patch are rejected."""
        with pytest.raises(ConfigurationError):
            patchify(np.zeros((1, 5, 4, 1)), 2)

    def test_wrong_rank(self):
        """Test a 3-D clip is rejected."""
        with pytest.raises(DimensionError):
            patchify(np.zeros((4, 4, 1)), 1)


class TestBlock:
    """Tests for pre-norm residual blocks."""

    @pytest.mark.parametrize("kind", ["O", "E"])
    def test_identity_when_outputs_zeroed(self, rng, kind):
        """Test zero output projection and zero second FFN make the block the identity."""
        cfg = EmimConfig(radius=1, heads=2)
        params = BlockParams.init(kind, 8, cfg, rng)
        o = params.attn.attention.o if kind == "E" else params.attn.o
        o.weight[...] = 0.0
        params.ffn2.weight[...] = 0.0
        z = rng.standard_normal((2, 4, 4, 8))
        assert_array_equal(block_forward(z, kind, params, cfg).values, z)

    def test_kind_mismatch(self, rng):
        """Test running E parameters as an O block is rejected."""
        cfg = EmimConfig(radius=1)
        params = BlockParams.init("E", 4, cfg, rng)
        with pytest.raises(ConfigurationError):
            block_forward(rng.standard_normal((1, 3, 3, 4)), "O", params, cfg)

    def test_unknown_kind(self, rng):
        """Test only O and E blocks exist."""
        with pytest.raises(ConfigurationError):
            BlockParams.init("X", 4, EmimConfig(radius=1), rng)

    def test_backward_without_cache(self):
        """Test a missing cache raises a state error."""
        with pytest.raises(StateError):
            block_backward(np.zeros((1, 1, 1, 1)), None)

    @pytest.mark.parametrize("variant", ["emim", "cost_volume"])
    def test_input_gradient(self, rng, variant):
        """Test the block input gradient against central differences."""
        cfg = EmimConfig(radius=1, heads=2)
        params = BlockParams.init("E", 4, cfg, rng)
        z = rng.standard_normal((2, 3, 3, 4))
        w = rng.standard_normal(z.shape)
        _, cache = block_forward(z, "E", params, cfg, variant, return_cache=True)
        grad_z, _ = block_backward(w, cache)
        numeric = finite_diff_grad(lambda v: np.sum(block_forward(v, "E", params, cfg, variant).values * w), z)
        assert_allclose(grad_z, numeric, rtol=1e-5, atol=1e-7)


class TestStack:
    """Tests for block patterns and whole-model passes."""

    @pytest.mark.parametrize("pattern,depth,expected", [
        ("EO", 4, ["E", "O", "E", "O"]),
        ("OO", 4, ["O", "O", "O", "O"]),
        ("E", 3, ["E", "E", "E"]),
        ("OE", 3, ["O", "E", "O"]),
    ])
    def test_pattern_kinds(self, pattern, depth, expected):
        """Test patterns repeat cyclically over depth."""
        assert BlockPattern(pattern).kinds(depth) == expected
        assert build_stack(_small_cfg(depth=depth, pattern=pattern)).kinds == expected

    @pytest.mark.parametrize("pattern", ["", "EX", "eo"])
    def test_bad_pattern(self, pattern):
        """Test patterns outside {O, E} are rejected."""
        with pytest.raises(ConfigurationError):
            BlockPattern(pattern)

    def test_global_mechanism_uses_o_blocks(self):
        """Test the global mechanism replaces every E block."""
        assert build_stack(_small_cfg(mechanism="global", pattern="E")).kinds == ["O", "O"]

    def test_non_sliding_mechanism(self):
        """Test the non-sliding mechanism switches the window sampling."""
        assert _small_cfg(mechanism="non_sliding").emim.sampling == "non_sliding"

    def test_heads_propagate(self):
        """Test the model head count reaches the mechanism config."""
        assert _small_cfg(heads=4).emim.heads == 4

    def test_zero_head_gives_bias(self, rng):
        """Test zero head weights make every logit equal its bias."""
        model = build_stack(_small_cfg(num_classes=1))
        model.head.weight[...] = 0.0
        model.head.bias[...] = 0.7
        logits = model_forward(model, rng.standard_normal((2, 4, 4, 1)))
        assert_array_equal(logits, [0.7])

    def test_seeded_build(self):
        """Test the same seed builds identical parameters."""
        a = build_stack(_small_cfg(), seed=3).named_parameters()
        b = build_stack(_small_cfg(), seed=3).named_parameters()
        assert a.keys() == b.keys()
        for name in a:
            assert_array_equal(a[name], b[name])

    def test_wrong_clip_channels(self, rng):
        """Test a clip with the wrong channel count is rejected."""
        with pytest.raises(DimensionError):
            model_forward(build_stack(_small_cfg()), rng.standard_normal((2, 4, 4, 3)))

    def test_gradient_keys(self, rng):
        """Test model gradients cover every named parameter."""
        model = build_stack(_small_cfg())
        logits, cache = model_forward(model, rng.standard_normal((2, 4, 4, 1)), return_cache=True)
        grads = model_backward(model, cache, np.ones_like(logits))
        params = model.named_parameters()
        assert grads.keys() == params.keys()
        for name in params:
            assert grads[name].shape == params[name].shape

    def test_head_gradient(self, rng):
        """Test the classifier head gradient against central differences."""
        model = build_stack(_small_cfg(depth=1, pattern="E"))
        clip = rng.standard_normal((2, 4, 4, 1))
        logits, cache = model_forward(model, clip, return_cache=True)
        _, g_logits = cross_entropy(logits, 2)
        grads = model_backward(model, cache, g_logits)
        numeric = finite_diff_grad(lambda _: cross_entropy(model_forward(model, clip), 2)[0], model.head.weight)
        assert_allclose(grads["head.weight"], numeric, rtol=1e-5, atol=1e-8)

    def test_backward_without_cache(self):
        """Test a missing cache raises a state error."""
        model = build_stack(_small_cfg())
        with pytest.raises(StateError):
            model_backward(model, None, np.zeros(4))

    def test_batch_order(self, rng):
        """Test threaded batches keep input order and match serial logits."""
        model = build_stack(_small_cfg())
        clips = [rng.standard_normal((2, 4, 4, 1)) for _ in range(5)]
        serial = batch_forward(model, clips)
        threaded = batch_forward(model, clips, threads=3)
        assert_array_equal(serial, threaded)
        permuted = batch_forward(model, clips[::-1])
        assert_array_equal(permuted, serial[::-1])


class TestCheckpoint:
    """Tests for checkpoint directories."""

    def test_round_trip(self, rng, tmp_path):
        """Test a saved model reloads with identical config and logits."""
        model = build_stack(_small_cfg(mechanism="cost_volume"), seed=5)
        save_checkpoint(model, tmp_path / "ckpt")
        loaded = load_checkpoint(tmp_path / "ckpt")
        assert loaded.cfg == model.cfg
        clip = rng.standard_normal((2, 4, 4, 1))
        assert_array_equal(model_forward(loaded, clip), model_forward(model, clip))

    def test_missing_tensor(self, tmp_path):
        """Test a checkpoint without a parameter file is rejected."""
        save_checkpoint(build_stack(_small_cfg()), tmp_path)
        (tmp_path / "head.weight").unlink()
        with pytest.raises(ConfigurationError, match="head.weight"):
            load_checkpoint(tmp_path)

    def test_missing_config(self, tmp_path):
        """Test an empty directory is rejected."""
        with pytest.raises(ConfigurationError):
            load_checkpoint(tmp_path)
