import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedom.grid import Domain, grid_function_from_values, make_grid_function, shifted_grids
from sparsedom.operators import (
    KernelError,
    best_maximal,
    dyadic_maximal,
    hilbert_kernel,
    maximal_truncated,
    shifted_sparse_operator,
    sparse_operator,
    truncated_integral,
    validate_kernel,
    weighted_dyadic_maximal,
)
from sparsedom.sparse import build_sparse_family
from sparsedom.weights import Weight, unit_weight


def bruteforce_truncated_sup(f, kernel):
    """All truncation pairs, scalar accumulation mirroring left-to-right prefixes."""
    d = f.domain
    n = d.n_cells
    mids = d.midpoints()
    out = []
    for i in range(n):
        coeff = [
            float(kernel.evaluate(mids[i], mids[j]) * f.values[j] * d.h) if j != i else 0.0
            for j in range(n)
        ]
        prefix = []
        s = 0.0
        for c in coeff:
            s += c
            prefix.append(s)
        total = prefix[-1]

        def g(k):
            left = prefix[i - k] if i - k >= 0 else 0.0
            right = total - prefix[i + k - 1] if i + k - 1 <= n - 1 else 0.0
            return left + right

        gs = [g(k) for k in range(1, n + 1)]
        best = 0.0
        for k1 in range(len(gs)):
            for k2 in range(k1 + 1, len(gs)):
                best = max(best, abs(gs[k1] - gs[k2]))
        out.append(best)
    return np.array(out)


class TestMaximalTruncated:
    def test_zero_function(self):
        d = Domain(0.0, 1.0, 4)
        f = grid_function_from_values(d, np.zeros(16))
        assert maximal_truncated(f, hilbert_kernel()).values.tolist() == [0.0] * 16

    @pytest.mark.parametrize("level", [3, 4, 5])
    def test_bruteforce_agreement_bit_for_bit(self, level):
        rng = np.random.default_rng(level)
        d = Domain(-0.5, 2.0, level)
        f = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        fast = maximal_truncated(f, hilbert_kernel()).values
        slow = bruteforce_truncated_sup(f, hilbert_kernel())
        assert fast.tolist() == slow.tolist()

    def test_log2_at_distance_two(self):
        # distant point sees the full indicator: integral of 1/(2-y) over [0,1)
        d = Domain(0.0, 4.0, 8)
        f = make_grid_function(d, lambda x: 1.0 if x < 1 else 0.0)
        t = maximal_truncated(f, hilbert_kernel())
        cell = d.cell_of(2.0)
        assert abs(t.values[cell] - math.log(2.0)) < 2 * d.h

    def test_sublinear(self):
        rng = np.random.default_rng(0)
        d = Domain(0.0, 1.0, 5)
        f = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        g = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        fg = grid_function_from_values(d, f.values + g.values)
        k = hilbert_kernel()
        lhs = maximal_truncated(fg, k).values
        rhs = maximal_truncated(f, k).values + maximal_truncated(g, k).values
        assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-15)

    @given(st.floats(-4, 4).filter(lambda a: a != 0))
    @settings(max_examples=20, deadline=None)
    def test_positive_homogeneity(self, a):
        rng = np.random.default_rng(3)
        d = Domain(0.0, 1.0, 4)
        f = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        af = grid_function_from_values(d, a * f.values)
        k = hilbert_kernel()
        scaled = maximal_truncated(af, k).values
        base = abs(a) * maximal_truncated(f, k).values
        assert scaled == pytest.approx(base, rel=1e-12, abs=1e-300)

    def test_dominates_every_single_truncation(self):
        rng = np.random.default_rng(5)
        d = Domain(0.0, 1.0, 5)
        f = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        k = hilbert_kernel()
        tstar = maximal_truncated(f, k).values
        for eps1, eps2 in [(d.h, 3 * d.h), (2 * d.h, 0.5), (d.h, 2.0)]:
            single = np.abs(truncated_integral(f, k, eps1, eps2).values)
            assert np.all(single <= tstar * (1 + 1e-12) + 1e-15)


class TestKernelValidation:
    def test_hilbert_passes(self):
        validate_kernel(hilbert_kernel(), Domain(0.0, 1.0, 6))

    def test_oversized_kernel_fails(self):
        from sparsedom.operators import KernelSpec

        bad = KernelSpec("bad", lambda x, y: 3.0 / (x - y), 1.0, 1.0)
        with pytest.raises(KernelError, match="size"):
            validate_kernel(bad, Domain(0.0, 1.0, 6))


class TestDyadicMaximal:
    def test_best_ancestor_average(self):
        d = Domain(0.0, 8.0, 3)
        f = make_grid_function(d, lambda x: 1.0 if x < 1 else 0.0)
        m = dyadic_maximal(f, shifted_grids(d)[0])
        assert m.values[d.cell_of(3.0)] == 0.25  # ancestor [0, 4)

    def test_dominates_function(self):
        rng = np.random.default_rng(1)
        d = Domain(0.0, 1.0, 6)
        f = grid_function_from_values(d, rng.random(d.n_cells))
        for g in shifted_grids(d):
            assert np.all(dyadic_maximal(f, g).values >= f.values)

    def test_constant(self):
        d = Domain(0.0, 1.0, 4)
        f = make_grid_function(d, lambda x: -2.0)
        assert dyadic_maximal(f, shifted_grids(d)[0]).values.tolist() == [2.0] * 16

    def test_idempotent_monotone(self):
        rng = np.random.default_rng(2)
        d = Domain(0.0, 1.0, 6)
        f = grid_function_from_values(d, rng.random(d.n_cells))
        m = best_maximal(f)
        mm = best_maximal(m)
        assert np.all(mm.values >= m.values * (1 - 1e-12))


class TestWeightedMaximal:
    def test_unit_weight_matches_plain(self):
        rng = np.random.default_rng(4)
        d = Domain(0.0, 1.0, 5)
        f = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        g = shifted_grids(d)[0]
        w = unit_weight(d)
        assert weighted_dyadic_maximal(f, w, g).values == pytest.approx(
            dyadic_maximal(f, g).values, rel=1e-14
        )

    def test_indicator_of_cube_attains_one(self):
        d = Domain(0.0, 1.0, 4)
        g = shifted_grids(d)[0]
        cube = g.cube(2, 1)
        f = grid_function_from_values(d, cube.cell_mask().astype(float))
        rng = np.random.default_rng(9)
        w = Weight(grid_function_from_values(d, 0.5 + rng.random(d.n_cells)))
        values = weighted_dyadic_maximal(f, w, g).values
        assert values[cube.cell_slice] == pytest.approx(1.0, rel=1e-14)

    def test_constant_one(self):
        d = Domain(0.0, 1.0, 4)
        g = shifted_grids(d)[1]
        rng = np.random.default_rng(8)
        w = Weight(grid_function_from_values(d, 0.5 + rng.random(d.n_cells)))
        f = make_grid_function(d, lambda x: 1.0)
        assert weighted_dyadic_maximal(f, w, g).values == pytest.approx(1.0, rel=1e-14)


class TestSparseOperators:
    def test_single_cube_indicator(self):
        d = Domain(0.0, 1.0, 3)
        g = shifted_grids(d)[0]
        root = g.cube(0, 0)
        f = make_grid_function(d, lambda x: 1.0)
        fam = build_sparse_family(f, root)
        assert sparse_operator(f, fam).values.tolist() == [1.0] * 8

    def test_nested_indicators(self):
        d = Domain(0.0, 1.0, 3)
        g = shifted_grids(d)[0]
        from sparsedom.sparse import SparseFamily

        fam = SparseFamily(g.cube(0, 0), (g.cube(0, 0), g.cube(1, 0)))
        f = make_grid_function(d, lambda x: 1.0)
        out = sparse_operator(f, fam).values
        assert out.tolist() == [2, 2, 2, 2, 1, 1, 1, 1]

    def test_linearity_bit_exact(self):
        rng = np.random.default_rng(11)
        d = Domain(0.0, 1.0, 5)
        g = shifted_grids(d)[0]
        f = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        fam = build_sparse_family(f, g.cube(0, 0))
        a, b = 2.0, -0.5
        u = grid_function_from_values(d, rng.standard_normal(d.n_cells))
        combo = grid_function_from_values(d, a * f.values + b * u.values)
        lhs = sparse_operator(combo, fam).values
        rhs = a * sparse_operator(f, fam).values + b * sparse_operator(u, fam).values
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)

    def test_shift_zero_matches_plain(self):
        rng = np.random.default_rng(12)
        d = Domain(0.0, 1.0, 5)
        g = shifted_grids(d)[0]
        f = grid_function_from_values(d, rng.random(d.n_cells))
        fam = build_sparse_family(f, g.cube(0, 0))
        assert shifted_sparse_operator(f, fam, 0).values.tolist() == sparse_operator(f, fam).values.tolist()

    def test_dilate_average_with_zero_extension(self):
        d = Domain(0.0, 1.0, 3)
        g = shifted_grids(d)[0]
        f = make_grid_function(d, lambda x: 1.0)
        from sparsedom.sparse import SparseFamily

        fam = SparseFamily(g.cube(0, 0), (g.cube(0, 0),))
        out = shifted_sparse_operator(f, fam, 1)
        assert out.values == pytest.approx(0.5, rel=1e-14)

    def test_large_dilate_vanishes(self):
        d = Domain(0.0, 1.0, 3)
        g = shifted_grids(d)[0]
        f = make_grid_function(d, lambda x: 1.0)
        from sparsedom.sparse import SparseFamily

        fam = SparseFamily(g.cube(0, 0), (g.cube(0, 0),))
        prev = math.inf
        for m in range(1, 8):
            val = shifted_sparse_operator(f, fam, m).values[0]
            assert val == pytest.approx(2.0**-m, rel=1e-12)  # mass 1 over measure 2^m
            assert val < prev
            prev = val
