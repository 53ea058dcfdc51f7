import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocklp.blocks import (
    BlockIndexSet,
    BlockPattern,
    BlockVector,
    best_k_block_approx,
    block_l20,
    block_norms,
    mixed_norm,
    snr_db,
    weighted_objective,
)


def vec(pattern, values):
    return BlockVector(pattern, np.asarray(values, dtype=float))


class TestPatternAndTypes:
    def test_pattern_dimensions(self):
        pat = BlockPattern(3, 2)
        assert pat.N == 6
        assert pat.block_slice(1) == slice(2, 4)

    @pytest.mark.parametrize("n,d", [(0, 2), (3, 0), (-1, 2)])
    def test_pattern_rejects_nonpositive(self, n, d):
        with pytest.raises(ValueError):
            BlockPattern(n, d)

    def test_vector_length_checked(self):
        with pytest.raises(ValueError):
            BlockVector(BlockPattern(3, 2), np.zeros(5))

    def test_vector_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            BlockVector(BlockPattern(1, 2), [1.0, np.nan])

    def test_vector_values_read_only(self):
        x = vec(BlockPattern(2, 2), [1, 2, 3, 4])
        with pytest.raises(ValueError):
            x.values[0] = 9.0

    def test_index_set_sorted_and_validated(self):
        pat = BlockPattern(5, 1)
        assert BlockIndexSet(pat, (3, 1, 0)).indices == (0, 1, 3)
        with pytest.raises(ValueError):
            BlockIndexSet(pat, (1, 1))
        with pytest.raises(IndexError):
            BlockIndexSet(pat, (5,))

    def test_index_set_scalar_indices(self):
        pat = BlockPattern(4, 3)
        s = BlockIndexSet(pat, (0, 2))
        assert s.scalar_indices().tolist() == [0, 1, 2, 6, 7, 8]
        assert s.complement().indices == (1, 3)


class TestBlockNorms:
    def test_zero_vector(self):
        x = vec(BlockPattern(3, 2), np.zeros(6))
        assert block_norms(x).tolist() == [0, 0, 0]

    def test_three_four_five(self):
        x = vec(BlockPattern(3, 2), [3, 4, 0, 0, 0, 0])
        assert block_norms(x).tolist() == [5, 0, 0]

    def test_matches_scalar_summation(self):
        rng = np.random.default_rng(7)
        pat = BlockPattern(6, 3)
        x = vec(pat, rng.standard_normal(pat.N))
        norms = block_norms(x)
        for i in range(pat.n):
            acc = 0.0
            for j in range(pat.d):
                acc += float(x.values[i * pat.d + j]) ** 2
            assert norms[i] == pytest.approx(math.sqrt(acc), rel=1e-14)


class TestMixedNorm:
    def test_zero(self):
        assert mixed_norm(vec(BlockPattern(2, 2), np.zeros(4)), 0.7) == 0.0

    def test_p1_sums_block_norms(self):
        x = vec(BlockPattern(2, 2), [3, 0, 0, 4])
        assert mixed_norm(x, 1.0) == pytest.approx(7.0)

    def test_p_half_closed_form(self):
        x = vec(BlockPattern(2, 2), [3, 0, 0, 4])
        # (sqrt(3) + sqrt(4))^2, evaluated by hand
        assert mixed_norm(x, 0.5) == pytest.approx(13.928203230275509, rel=1e-12)

    @pytest.mark.parametrize("p", [0.0, -0.5, 1.5, 2.0])
    def test_rejects_bad_p(self, p):
        with pytest.raises(ValueError):
            mixed_norm(vec(BlockPattern(1, 1), [1.0]), p)

    @given(
        st.integers(1, 5),
        st.integers(1, 3),
        st.floats(0.05, 1.0),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_pth_power_additive_over_supports(self, n, d, p, seed):
        rng = np.random.default_rng(seed)
        pat = BlockPattern(n, d)
        x = vec(pat, rng.standard_normal(pat.N))
        total = mixed_norm(x, p) ** p
        for r in range(n + 1):
            for T in itertools.combinations(range(n), r):
                mask = np.zeros(pat.N)
                sel = BlockIndexSet(pat, T).scalar_indices()
                mask[sel] = x.values[sel]
                inside = mixed_norm(vec(pat, mask), p) ** p
                outside = mixed_norm(vec(pat, x.values - mask), p) ** p
                assert inside + outside == pytest.approx(total, rel=1e-12, abs=1e-12)

    @given(
        st.floats(0.05, 1.0),
        st.floats(-100, 100).filter(lambda c: abs(c) > 1e-6),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_equivariance(self, p, c, seed):
        rng = np.random.default_rng(seed)
        pat = BlockPattern(4, 2)
        raw = rng.standard_normal(pat.N)
        lhs = mixed_norm(vec(pat, c * raw), p)
        rhs = abs(c) * mixed_norm(vec(pat, raw), p)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


class TestBlockL20:
    def test_zero(self):
        assert block_l20(vec(BlockPattern(3, 2), np.zeros(6)), 0.0) == 0

    def test_single_block(self):
        assert block_l20(vec(BlockPattern(3, 2), [0, 0, 1, 0, 0, 0]), 0.0) == 1

    def test_planted_unit_blocks(self):
        pat = BlockPattern(10, 3)
        x = np.zeros(pat.N)
        planted = (1, 4, 7, 9)
        for i in planted:
            x[i * pat.d] = 1.0
        assert block_l20(vec(pat, x), 1e-9) == len(planted)

    def test_rejects_negative_tol(self):
        with pytest.raises(ValueError):
            block_l20(vec(BlockPattern(1, 1), [0.0]), -1e-3)


class TestBestKBlockApprox:
    def test_k_equals_n_is_identity(self):
        pat = BlockPattern(3, 2)
        x = vec(pat, [1, 2, 3, 4, 5, 6])
        approx, kept = best_k_block_approx(x, 3)
        assert np.array_equal(approx.values, x.values)
        assert kept.indices == (0, 1, 2)

    def test_k_zero(self):
        pat = BlockPattern(3, 2)
        approx, kept = best_k_block_approx(vec(pat, np.ones(6)), 0)
        assert not approx.values.any()
        assert kept.indices == ()

    def test_keeps_largest_blocks(self):
        pat = BlockPattern(4, 1)
        approx, kept = best_k_block_approx(vec(pat, [1, 5, 3, 5]), 2)
        assert kept.indices == (1, 3)
        assert approx.values.tolist() == [0, 5, 0, 5]

    def test_tie_breaks_to_lowest_index(self):
        pat = BlockPattern(3, 1)
        _, kept = best_k_block_approx(vec(pat, [5, 5, 1]), 1)
        assert kept.indices == (0,)

    @pytest.mark.parametrize("seed", range(6))
    def test_minimizes_l21_error_over_all_subsets(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 6, 2
        pat = BlockPattern(n, d)
        x = vec(pat, rng.standard_normal(pat.N))
        for k in range(n + 1):
            approx, _ = best_k_block_approx(x, k)
            achieved = mixed_norm(vec(pat, x.values - approx.values), 1.0)
            best = min(
                mixed_norm(vec(pat, x.values - _restrict(x, pat, T)), 1.0)
                for T in itertools.combinations(range(n), k)
            )
            assert achieved == pytest.approx(best, rel=1e-12, abs=1e-12)


def _restrict(x, pat, T):
    out = np.zeros(pat.N)
    sel = BlockIndexSet(pat, T).scalar_indices()
    out[sel] = x.values[sel]
    return out


class TestSnrDb:
    def test_exact_recovery_is_inf(self):
        pat = BlockPattern(2, 2)
        x = vec(pat, [1, 2, 3, 4])
        assert snr_db(x, x) == math.inf

    def test_zero_estimate_is_zero_db(self):
        pat = BlockPattern(2, 2)
        x = vec(pat, [1, 2, 3, 4])
        assert snr_db(x, vec(pat, np.zeros(4))) == pytest.approx(0.0, abs=1e-12)

    def test_tenth_error_is_twenty_db(self):
        pat = BlockPattern(2, 2)
        x = vec(pat, [1, 2, 3, 4])
        rec = vec(pat, x.values - x.values / 10.0)
        assert snr_db(x, rec) == pytest.approx(20.0, rel=1e-12)

    def test_rejects_zero_reference(self):
        pat = BlockPattern(1, 2)
        with pytest.raises(ValueError):
            snr_db(vec(pat, [0, 0]), vec(pat, [1, 0]))

    @given(st.floats(-50, 50).filter(lambda c: abs(c) > 1e-6), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_joint_scaling(self, c, seed):
        rng = np.random.default_rng(seed)
        pat = BlockPattern(3, 2)
        xt = rng.standard_normal(pat.N)
        xr = xt + 0.1 * rng.standard_normal(pat.N)
        base = snr_db(vec(pat, xt), vec(pat, xr))
        scaled = snr_db(vec(pat, c * xt), vec(pat, c * xr))
        assert scaled == pytest.approx(base, rel=1e-9, abs=1e-9)


class TestWeightedObjective:
    def test_all_ones_reduces_to_mixed_norm_power(self):
        pat = BlockPattern(3, 2)
        x = vec(pat, np.arange(1.0, 7.0))
        p = 0.5
        expected = mixed_norm(x, p) ** p
        assert weighted_objective(x, np.ones(3), p) == pytest.approx(expected, rel=1e-12)

    def test_all_zeros(self):
        pat = BlockPattern(2, 2)
        assert weighted_objective(vec(pat, [1, 2, 3, 4]), np.zeros(2), 0.5) == 0.0

    def test_hand_value(self):
        pat = BlockPattern(2, 1)
        x = vec(pat, [2.0, 4.0])
        assert weighted_objective(x, [1.0, 0.5], 1.0) == pytest.approx(4.0)

    def test_rejects_out_of_range_weights(self):
        pat = BlockPattern(2, 1)
        x = vec(pat, [1.0, 1.0])
        with pytest.raises(ValueError):
            weighted_objective(x, [1.5, 0.0], 1.0)
        with pytest.raises(ValueError):
            weighted_objective(x, [0.5, -0.1], 1.0)
