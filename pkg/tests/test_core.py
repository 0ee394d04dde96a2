import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdqz import (BlockGrid, ErrorBoundSpec, FieldDescriptor, QuantConfig, SdqzError,
                  describe_field, partition_blocks, resolve_error_bound)


class TestDescribeField:
    def test_min_max(self):
        fd = describe_field([0.0, 1.0, 2.0], [3])
        assert fd.value_min == 0.0 and fd.value_max == 2.0
        assert fd.n_points == 3 and not fd.contains_nonfinite

    def test_singleton(self):
        fd = describe_field([5.0], [1])
        assert fd.value_min == fd.value_max == 5.0

    def test_nonfinite_flag(self):
        assert describe_field([0.0, np.nan], [2]).contains_nonfinite
        assert describe_field([np.inf, 1.0], [2]).contains_nonfinite

    def test_length_mismatch(self):
        with pytest.raises(SdqzError, match="4 values.*3x2.*6"):
            describe_field(np.zeros(4), [3, 2])

    def test_records_dtype(self):
        assert describe_field(np.zeros(4, np.float32), [4]).dtype == np.float32
        assert describe_field(np.zeros(4), [4]).dtype == np.float64


class TestResolveErrorBound:
    def test_valrel(self):
        fd = describe_field(np.array([0.0, 100.0]), [2])
        assert resolve_error_bound(ErrorBoundSpec("valrel", 1e-4), fd) == pytest.approx(0.01)

    def test_absolute_identity(self):
        fd = describe_field(np.array([0.0, 100.0]), [2])
        assert resolve_error_bound(ErrorBoundSpec("abs", 0.5), fd) == 0.5

    def test_valrel_signed_range(self):
        fd = describe_field(np.array([-1.0, 1.0]), [2])
        assert resolve_error_bound(ErrorBoundSpec("valrel", 1e-3), fd) == pytest.approx(0.002)

    def test_valrel_constant_field_rejected(self):
        fd = describe_field(np.full(8, 3.0), [8])
        with pytest.raises(SdqzError, match="absolute"):
            resolve_error_bound(ErrorBoundSpec("valrel", 1e-4), fd)

    def test_nonfinite_rejected(self):
        fd = describe_field([0.0, np.nan], [2])
        with pytest.raises(SdqzError, match="NaN"):
            resolve_error_bound(ErrorBoundSpec("abs", 0.5), fd)

    def test_zero_magnitude_rejected(self):
        fd = describe_field([0.0, 1.0], [2])
        with pytest.raises(SdqzError, match="must be positive"):
            resolve_error_bound(ErrorBoundSpec("abs", 0.0), fd)

    def test_unknown_mode_rejected(self):
        with pytest.raises(SdqzError, match="mode"):
            ErrorBoundSpec("pointwise", 1e-3)

    @given(st.floats(1e-12, 1e3), st.floats(1e-12, 1e3))
    def test_monotone_in_magnitude(self, m1, m2):
        fd = describe_field(np.array([-2.0, 5.0]), [2])
        lo, hi = sorted((m1, m2))
        for mode in ("abs", "valrel"):
            assert (resolve_error_bound(ErrorBoundSpec(mode, lo), fd)
                    <= resolve_error_bound(ErrorBoundSpec(mode, hi), fd))


class TestQuantConfig:
    def test_radius_is_half_cap(self):
        assert QuantConfig(eb=0.1, cap=1024, block_shape=(8, 8, 8)).radius == 512
        assert QuantConfig(eb=0.1, cap=4, block_shape=(32,)).radius == 2

    def test_default_block_shapes(self):
        assert QuantConfig.for_rank(0.1, 1).block_shape == (32,)
        assert QuantConfig.for_rank(0.1, 2).block_shape == (16, 16)
        assert QuantConfig.for_rank(0.1, 3).block_shape == (8, 8, 8)

    @pytest.mark.parametrize("cap", [0, 2, 3, 100, 131072])
    def test_bad_cap_rejected(self, cap):
        with pytest.raises(SdqzError, match="cap"):
            QuantConfig(eb=0.1, cap=cap, block_shape=(8,))

    def test_nonpositive_eb_rejected(self):
        for eb in (0.0, -1.0, math.nan):
            with pytest.raises(SdqzError, match="positive"):
                QuantConfig(eb=eb, cap=1024, block_shape=(8,))

    def test_rank_mismatch_rejected(self):
        with pytest.raises(SdqzError, match="rank"):
            QuantConfig.for_rank(0.1, 2, block_shape=(8, 8, 8))


class TestPartitionBlocks:
    def test_1d_partial_tail(self):
        fd = describe_field(np.zeros(100), [100])
        grid = partition_blocks(fd, QuantConfig.for_rank(0.1, 1))
        assert grid.blocks_per_axis == (4,)
        assert [grid.block_extents((i,))[0] for i in range(4)] == [32, 32, 32, 4]

    def test_2d_exact_fit(self):
        fd = describe_field(np.zeros(256), [16, 16])
        grid = partition_blocks(fd, QuantConfig.for_rank(0.1, 2))
        assert grid.blocks_per_axis == (1, 1) and grid.total_blocks == 1

    def test_3d_hurricane_layout(self):
        fd = FieldDescriptor((500, 500, 100), 500 * 500 * 100, 0.0, 1.0, False,
                             np.dtype(np.float32))
        grid = partition_blocks(fd, QuantConfig.for_rank(0.1, 3))
        assert grid.blocks_per_axis == (63, 63, 13)

    @given(st.lists(st.integers(1, 40), min_size=1, max_size=3), st.data())
    def test_block_volumes_cover_field(self, dims, data):
        block = tuple(data.draw(st.integers(1, 12)) for _ in dims)
        fd = FieldDescriptor(tuple(dims), math.prod(dims), 0.0, 1.0, False,
                             np.dtype(np.float32))
        grid = partition_blocks(fd, QuantConfig(eb=1.0, cap=1024, block_shape=block))
        total = 0
        for flat in range(grid.total_blocks):
            coords, rem = [], flat
            for n in reversed(grid.blocks_per_axis):
                coords.append(rem % n)
                rem //= n
            total += math.prod(grid.block_extents(tuple(reversed(coords))))
        assert total == fd.n_points

    def test_rank_mismatch(self):
        fd = describe_field(np.zeros(8), [8])
        with pytest.raises(SdqzError, match="rank"):
            partition_blocks(fd, QuantConfig(eb=0.1, cap=1024, block_shape=(4, 4)))
