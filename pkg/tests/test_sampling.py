"""Tests for window sampling and its vectorized gather/scatter."""

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from core.attention.config import EmimConfig
from core.attention.sampling import (
    gather_windows,
    offset_of_slot,
    sample_window,
    scatter_windows,
    source_frame,
    window_offsets,
    window_positions,
)
from core.attention.volume import TokenVolume
from core.errors import ConfigurationError


def _integer_volume(shape):
    return TokenVolume(np.arange(np.prod(shape), dtype=np.float64).reshape(shape))


class TestWindowLayout:
    """Tests for slot ordering and source-frame selection."""

    def test_dx_is_outer_axis(self):
        """Test slots run dy fastest."""
        assert window_offsets(1)[:4] == [(-1, -1), (-1, 0), (-1, 1), (0, -1)]

    def test_offset_of_slot(self):
        """Test slot indices invert the raster order."""
        for slot, offset in enumerate(window_offsets(2)):
            assert offset_of_slot(slot, 2) == offset

    def test_last_frame_reads_itself(self):
        """Test queries past the clip end read their own frame."""
        cfg = EmimConfig(radius=1, interval=2)
        assert [source_frame(t, 4, cfg) for t in range(4)] == [2, 3, 2, 3]


class TestSampleWindow:
    """Tests for per-query window sampling."""

    def test_zero_radius(self):
        """Test P=0 returns the single token at (t + interval, x, y)."""
        vol = _integer_volume((2, 3, 3, 2))
        window = sample_window(vol, 0, 1, 2, EmimConfig(radius=0))
        assert_array_equal(window, vol.values[1, 1, 2][None])

    def test_corner_padding(self):
        """Test five of nine slots are padded at the top-left corner."""
        vol = _integer_volume((2, 4, 4, 3))
        cfg = EmimConfig(radius=1)
        window = sample_window(vol, 0, 0, 0, cfg)
        padded = np.all(window == cfg.pad_value, axis=1)
        assert padded.sum() == 5
        assert sum(p.padded for p in window_positions(0, 0, 0, vol.shape, cfg)) == 5

    def test_interior_index_oracle(self):
        """Test an interior window matches direct index arithmetic."""
        vol = _integer_volume((2, 5, 5, 1))
        window = sample_window(vol, 0, 2, 3, EmimConfig(radius=1))
        expected = [(1 * 25 + (2 + dx) * 5 + (3 + dy)) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]
        assert_array_equal(window[:, 0], expected)

    def test_clamp_edge(self):
        """Test clamp_edge repeats border tokens instead of padding."""
        vol = _integer_volume((1, 3, 3, 1))
        window = sample_window(vol, 0, 0, 0, EmimConfig(radius=1, boundary="clamp_edge"))
        assert_array_equal(window[:, 0], [0, 0, 1, 0, 0, 1, 3, 3, 4])

    def test_non_sliding_shares_window(self):
        """Test every query reads the same center-anchored window."""
        vol = _integer_volume((2, 5, 5, 2))
        cfg = EmimConfig(radius=1, sampling="non_sliding")
        first = sample_window(vol, 0, 0, 0, cfg)
        for x, y in [(4, 4), (2, 1), (0, 3)]:
            assert_array_equal(sample_window(vol, 0, x, y, cfg), first)
        assert_array_equal(first, sample_window(vol, 0, 2, 2, EmimConfig(radius=1)))

    def test_single_frame_clamps_to_self(self):
        """Test a one-frame clip attends within its own frame."""
        vol = _integer_volume((1, 3, 3, 1))
        window = sample_window(vol, 0, 1, 1, EmimConfig(radius=1))
        assert_array_equal(window[:, 0], np.arange(9))

    def test_window_too_large(self):
        """Test a window wider than the frame is rejected."""
        with pytest.raises(ConfigurationError):
            sample_window(_integer_volume((1, 4, 4, 1)), 0, 0, 0, EmimConfig(radius=2))

    def test_query_outside_volume(self):
        """Test an out-of-range query index is rejected."""
        with pytest.raises(ConfigurationError):
            sample_window(_integer_volume((1, 4, 4, 1)), 0, 4, 0, EmimConfig(radius=1))


class TestGatherScatter:
    """Tests for the vectorized window gather and its adjoint."""

    @pytest.mark.parametrize("cfg", [
        EmimConfig(radius=1),
        EmimConfig(radius=2, boundary="clamp_edge"),
        EmimConfig(radius=1, sampling="non_sliding", interval=2),
    ])
    def test_gather_matches_sample_window(self, rng, cfg):
        """Test every gathered window equals the per-query sample."""
        vol = TokenVolume(rng.standard_normal((3, 5, 6, 2)))
        gathered = gather_windows(vol.values, cfg)
        for t in range(3):
            for x in range(5):
                for y in range(6):
                    assert_array_equal(gathered[t, x, y], sample_window(vol, t, x, y, cfg))

    @pytest.mark.parametrize("cfg", [
        EmimConfig(radius=1),
        EmimConfig(radius=1, boundary="clamp_edge"),
        EmimConfig(radius=2, sampling="non_sliding"),
    ])
    def test_scatter_is_adjoint(self, rng, cfg):
        """Test <gather(x) - gather(0), g> == <x, scatter(g)>; constant padding makes gather affine."""
        shape = (2, 5, 5, 3)
        x = rng.standard_normal(shape)
        g = rng.standard_normal(shape[:3] + (cfg.window_area, shape[3]))
        linear_part = gather_windows(x, cfg) - gather_windows(np.zeros(shape), cfg)
        lhs = np.sum(linear_part * g)
        rhs = np.sum(x * scatter_windows(g, shape, cfg))
        assert lhs == pytest.approx(rhs, rel=1e-10)
