import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedom.grid import (
    Domain,
    GridError,
    average,
    grid_function_from_values,
    make_grid_function,
    median,
    shifted_grids,
    smallest_covering_cube,
)


def unit_domain(level=2, lo=0.0, length=1.0):
    return Domain(lo, length, level)


class TestMakeGridFunction:
    def test_constant(self):
        f = make_grid_function(unit_domain(2), lambda x: 1.0)
        assert f.values.tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_midpoint_rule(self):
        f = make_grid_function(Domain(0.0, 1.0, 1), lambda x: x)
        assert f.values.tolist() == [0.25, 0.75]

    def test_indicator(self):
        f = make_grid_function(Domain(0.0, 2.0, 3), lambda x: 1.0 if x < 1 else 0.0)
        assert f.values.tolist() == [1, 1, 1, 1, 0, 0, 0, 0]

    def test_non_finite_sample_names_cell(self):
        with pytest.raises(GridError, match="cell 2"):
            make_grid_function(unit_domain(2), lambda x: math.inf if x > 0.5 else 0.0)

    def test_non_finite_values_rejected(self):
        with pytest.raises(GridError):
            grid_function_from_values(unit_domain(1), [1.0, math.nan])


class TestAverage:
    def test_indicator_mass(self):
        d = Domain(0.0, 2.0, 3)
        f = make_grid_function(d, lambda x: 1.0 if x < 1 else 0.0)
        root = shifted_grids(d)[0].cube(0, 0)
        assert average(f, root) == 0.5

    def test_symmetry(self):
        d = Domain(0.0, 1.0, 1)
        f = make_grid_function(d, lambda x: x)
        assert average(f, shifted_grids(d)[0].cube(0, 0)) == 0.5

    def test_constant(self):
        d = unit_domain(4)
        f = make_grid_function(d, lambda x: 3.25)
        for cube in shifted_grids(d)[0].cubes():
            if cube.is_inside:
                assert average(f, cube) == pytest.approx(3.25, rel=1e-14)

    def test_zero_extension_outside_domain(self):
        d = unit_domain(2)
        f = make_grid_function(d, lambda x: 1.0)
        partial = [c for c in shifted_grids(d)[2].cubes() if not c.is_inside]
        assert partial
        for cube in partial:
            assert average(f, cube) == cube.n_domain_cells / cube.size_cells


class TestShiftedGrids:
    def test_shift_zero_is_standard_lattice(self):
        d = unit_domain(3)
        g0 = shifted_grids(d)[0]
        assert g0.shift_cells == 0
        lefts = [c.interval[0] for c in g0.cubes_at_level(1)]
        assert lefts == [0.0, 0.5]

    def test_dyadic_cube_is_its_own_cover(self):
        d = unit_domain(6)
        grids = shifted_grids(d)
        cube = grids[0].cube(3, 5)
        a, b = cube.interval
        found = smallest_covering_cube(grids, a, b)
        assert found.measure == cube.measure

    @pytest.mark.parametrize("level", [4, 6, 8])
    def test_cover_property_exhaustive(self, level):
        d = unit_domain(level)
        grids = shifted_grids(d)
        n = d.n_cells
        # smallest covering cube for every cell-aligned interval
        cubes = sorted(
            {(c.left_cell, c.right_cell) for g in grids for c in g.cubes()},
            key=lambda q: q[1] - q[0],
        )
        for a in range(n):
            for b in range(a + 1, n + 1):
                best = next(r - l for l, r in cubes if l <= a and b <= r)
                assert best <= 6 * (b - a)

    def test_cover_property_non_aligned_interval(self):
        d = Domain(0.0, 1.0, 10)
        cube = smallest_covering_cube(shifted_grids(d), 0.4, 0.6)
        assert cube.measure <= 1.2 + 1e-12

    def test_nesting_property(self):
        # any two cubes of one grid intersect in nothing or the smaller one
        d = unit_domain(4)
        for g in shifted_grids(d):
            cubes = list(g.cubes())
            for q in cubes:
                for r in cubes:
                    lo = max(q.left_cell, r.left_cell)
                    hi = min(q.right_cell, r.right_cell)
                    if lo < hi:  # they intersect
                        assert q.contains(r) or r.contains(q)

    def test_levels_partition_line_over_domain(self):
        d = unit_domain(5)
        for g in shifted_grids(d):
            for level in range(g.n_levels):
                cubes = g.cubes_at_level(level)
                starts = [c.left_cell for c in cubes]
                assert starts == sorted(starts)
                for prev, nxt in zip(cubes, cubes[1:]):
                    assert prev.right_cell == nxt.left_cell
                assert cubes[0].left_cell <= 0 < d.n_cells <= cubes[-1].right_cell

    def test_parent_child_roundtrip(self):
        d = unit_domain(5)
        for g in shifted_grids(d):
            for cube in g.cubes():
                if cube.level < d.level:
                    for child in cube.children():
                        assert child.parent() == cube
                        assert cube.contains(child)

    def test_largest_inside_cube(self):
        d = unit_domain(6)
        g0, g1, g2 = shifted_grids(d)
        assert g0.largest_inside_cube().size_cells == d.n_cells
        for g in (g1, g2):
            root = g.largest_inside_cube()
            assert root.is_inside
            assert root.size_cells == d.n_cells // 2


class TestMedian:
    def test_constant(self):
        d = unit_domain(3)
        f = make_grid_function(d, lambda x: 2.5)
        assert median(f, shifted_grids(d)[0].cube(0, 0)) == 2.5

    def test_half_indicator(self):
        d = Domain(0.0, 2.0, 3)
        f = make_grid_function(d, lambda x: 1.0 if x < 1 else 0.0)
        assert median(f, shifted_grids(d)[0].cube(0, 0)) == 1.0

    def test_four_values(self):
        d = unit_domain(2)
        f = grid_function_from_values(d, [1.0, 2.0, 3.0, 4.0])
        assert median(f, shifted_grids(d)[0].cube(0, 0)) == 3.0

    def test_matches_definition_scan(self):
        # independent oracle: scan candidate levels (values and midpoints)
        rng = np.random.default_rng(7)
        d = unit_domain(4)
        cube = shifted_grids(d)[0].cube(0, 0)
        for _ in range(25):
            f = grid_function_from_values(d, rng.integers(-3, 4, d.n_cells).astype(float))
            vals = np.sort(f.values)
            candidates = np.concatenate([vals, (vals[:-1] + vals[1:]) / 2, [vals[-1] + 1]])
            half = cube.measure / 2
            feasible = [
                lam
                for lam in candidates
                if max(
                    distribution_measure(f, lam, d, above=True),
                    distribution_measure(f, lam, d, above=False),
                )
                <= half + 1e-15
            ]
            assert median(f, cube) == max(feasible)

    @given(
        st.lists(st.integers(-5, 5), min_size=8, max_size=8),
        st.integers(-3, 3),
        st.integers(1, 4),
    )
    @settings(max_examples=60, deadline=None)
    def test_translation_and_scale_equivariance(self, cells, shift, scale):
        d = unit_domain(3)
        cube = shifted_grids(d)[0].cube(0, 0)
        f = grid_function_from_values(d, [float(c) for c in cells])
        g = grid_function_from_values(d, f.values + shift)
        s = grid_function_from_values(d, scale * f.values)
        assert median(g, cube) == median(f, cube) + shift
        assert median(s, cube) == scale * median(f, cube)


def distribution_measure(f, lam, d, above):
    vals = f.values
    picked = vals > lam if above else vals < lam
    return picked.sum() * d.h


@given(st.lists(st.floats(-10, 10), min_size=16, max_size=16),
       st.lists(st.floats(-10, 10), min_size=16, max_size=16))
@settings(max_examples=40, deadline=None)
def test_average_linear_and_monotone(a_cells, b_cells):
    d = unit_domain(4)
    f = grid_function_from_values(d, a_cells)
    g = grid_function_from_values(d, b_cells)
    for cube in shifted_grids(d)[1].cubes_at_level(2):
        combo = grid_function_from_values(d, 2.0 * f.values + 3.0 * g.values)
        assert average(combo, cube) == pytest.approx(
            2 * average(f, cube) + 3 * average(g, cube), rel=1e-12, abs=1e-12
        )
        lower = grid_function_from_values(d, np.minimum(f.values, g.values))
        assert average(lower, cube) <= average(f, cube) + 1e-15
