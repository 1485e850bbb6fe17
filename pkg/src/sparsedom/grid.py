"""Dyadic cell geometry.

A Domain is a half-open interval split into 2**J equal cells; grid functions
are constant on cells and extend by zero outside the domain.  Three shifted
dyadic grids (cell shifts 0, floor(N/3), floor(2N/3)) provide the lattice of
cubes used everywhere else: any subinterval of the domain is contained in a
cube of at most 6 times its length from one of the three grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "GridError",
    "Domain",
    "GridFunction",
    "DyadicGrid",
    "DyadicCube",
    "make_grid_function",
    "grid_function_from_values",
    "shifted_grids",
    "average",
    "median",
    "smallest_covering_cube",
]


class GridError(ValueError):
    """Malformed domain, non-finite sample, or incompatible cube/function pair."""


@dataclass(frozen=True)
class Domain:
    """Interval [lo, lo + length) refined into n_cells = 2**level equal cells."""

    lo: float
    length: float
    level: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.length) and self.length > 0):
            raise GridError(f"domain endpoints must be finite with length > 0, got lo={self.lo}, length={self.length}")
        if self.level < 1:
            raise GridError(f"refinement level must be >= 1, got {self.level}")

    @property
    def n_cells(self) -> int:
        return 1 << self.level

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    def midpoints(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_cells) + 0.5) * self.h

    def cell_of(self, x: float) -> int:
        """Index of the cell containing x; raises if x is outside the domain."""
        i = math.floor((x - self.lo) / self.h)
        if not 0 <= i < self.n_cells:
            raise GridError(f"point {x} lies outside {self}")
        return i

    def refined(self) -> "Domain":
        return Domain(self.lo, self.length, self.level + 1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell-wise constant function on a Domain, zero outside it."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.domain.n_cells,):
            raise GridError(f"expected {self.domain.n_cells} cell values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise GridError(f"non-finite value at cell {bad}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.domain, values)


def make_grid_function(domain: Domain, sampler: Callable[[float], float]) -> GridFunction:
    """Sample `sampler` at cell midpoints.  Non-finite samples are rejected."""
    vals = np.empty(domain.n_cells)
    for i, x in enumerate(domain.midpoints()):
        v = float(sampler(x))
        if not math.isfinite(v):
            raise GridError(f"non-finite sample at cell {i} (midpoint {x})")
        vals[i] = v
    return GridFunction(domain, vals)


def grid_function_from_values(domain: Domain, values: Sequence[float]) -> GridFunction:
    return GridFunction(domain, np.asarray(values, dtype=np.float64))


@dataclass(frozen=True)
class DyadicGrid:
    """One of the three shifted dyadic grids over a domain.

    Cubes live on the cell lattice: at level k (0 = coarsest) they have
    sidelength 2**(J - k) cells and left edges shift_cells + m * sidelength,
    m integer.  A single global shift keeps nesting exact; the shifts
    floor(t * N / 3), t in {0, 1, 2}, reproduce the alternating-offset
    pattern (roughly L/3 and 2L/3, swapping with level parity) that gives
    the three-lattice cover property.  Cubes may extend past the domain;
    only those meeting the domain are enumerated.
    """

    domain: Domain
    thirds: int

    def __post_init__(self) -> None:
        if self.thirds not in (0, 1, 2):
            raise GridError(f"shift selector must be 0, 1, or 2, got {self.thirds}")

    @property
    def shift_cells(self) -> int:
        return (self.thirds * self.domain.n_cells) // 3

    @property
    def shift(self) -> float:
        return self.shift_cells * self.domain.h

    @property
    def n_levels(self) -> int:
        return self.domain.level + 1

    def sidelength_cells(self, level: int) -> int:
        if not 0 <= level <= self.domain.level:
            raise GridError(f"level must be in [0, {self.domain.level}], got {level}")
        return 1 << (self.domain.level - level)

    def index_span(self, level: int) -> range:
        """Indices m of the level's cubes that intersect the domain."""
        size = self.sidelength_cells(level)
        m_lo = math.floor(-self.shift_cells / size)
        m_hi = math.ceil((self.domain.n_cells - self.shift_cells) / size) - 1
        return range(m_lo, m_hi + 1)

    def cube(self, level: int, index: int) -> "DyadicCube":
        return DyadicCube(self, level, index)

    def cubes_at_level(self, level: int) -> list["DyadicCube"]:
        return [DyadicCube(self, level, m) for m in self.index_span(level)]

    def cubes(self) -> Iterator["DyadicCube"]:
        for level in range(self.n_levels):
            yield from self.cubes_at_level(level)

    def cube_containing_cell(self, cell: int, level: int) -> "DyadicCube":
        size = self.sidelength_cells(level)
        return DyadicCube(self, level, (cell - self.shift_cells) // size)

    def largest_inside_cube(self) -> "DyadicCube":
        """Leftmost cube of maximal size that lies fully inside the domain."""
        for level in range(self.n_levels):
            for cube in self.cubes_at_level(level):
                if cube.is_inside:
                    return cube
        raise GridError("no cube inside the domain")  # unreachable: cells qualify

    # Lattice arithmetic used by the operators and weight characteristics.

    def cell_cube_indices(self, level: int) -> np.ndarray:
        """For each domain cell, the local index of its level-`level` cube."""
        size = self.sidelength_cells(level)
        span = self.index_span(level)
        return (np.arange(self.domain.n_cells) - self.shift_cells) // size - span.start

    def level_cell_sums(self, cell_values: np.ndarray, level: int) -> np.ndarray:
        """Sum of `cell_values` over the domain cells of each level cube.

        Returns one entry per cube in index_span order; cells outside the
        domain contribute nothing.
        """
        size = self.sidelength_cells(level)
        span = self.index_span(level)
        left_edge = self.shift_cells + span.start * size
        padded = np.zeros(len(span) * size)
        offset = -left_edge
        padded[offset : offset + self.domain.n_cells] = cell_values
        return padded.reshape(len(span), size).sum(axis=1)

    def level_cell_counts(self, level: int) -> np.ndarray:
        """Number of domain cells in each level cube (clipped size)."""
        ones = np.ones(self.domain.n_cells)
        return self.level_cell_sums(ones, level).round().astype(int)


@dataclass(frozen=True)
class DyadicCube:
    """Cube of a shifted dyadic grid, stored as (level, index) on the cell lattice."""

    grid: DyadicGrid
    level: int
    index: int

    @property
    def size_cells(self) -> int:
        return self.grid.sidelength_cells(self.level)

    @property
    def left_cell(self) -> int:
        return self.grid.shift_cells + self.index * self.size_cells

    @property
    def right_cell(self) -> int:
        return self.left_cell + self.size_cells

    @property
    def measure(self) -> float:
        """Full sidelength times h, including any part outside the domain."""
        return self.size_cells * self.grid.domain.h

    @property
    def interval(self) -> tuple[float, float]:
        d = self.grid.domain
        return (d.lo + self.left_cell * d.h, d.lo + self.right_cell * d.h)

    @property
    def cell_slice(self) -> slice:
        """Domain cells covered by the cube."""
        n = self.grid.domain.n_cells
        return slice(max(self.left_cell, 0), min(self.right_cell, n))

    @property
    def n_domain_cells(self) -> int:
        s = self.cell_slice
        return max(s.stop - s.start, 0)

    @property
    def is_inside(self) -> bool:
        return self.left_cell >= 0 and self.right_cell <= self.grid.domain.n_cells

    def children(self) -> tuple["DyadicCube", "DyadicCube"]:
        if self.level >= self.grid.domain.level:
            raise GridError("cell-level cube has no children")
        return (
            DyadicCube(self.grid, self.level + 1, 2 * self.index),
            DyadicCube(self.grid, self.level + 1, 2 * self.index + 1),
        )

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise GridError("coarsest cube has no parent")
        return DyadicCube(self.grid, self.level - 1, self.index // 2)

    def contains(self, other: "DyadicCube") -> bool:
        if self.grid != other.grid:
            return False
        return self.left_cell <= other.left_cell and other.right_cell <= self.right_cell

    def contains_cell(self, cell: int) -> bool:
        return self.left_cell <= cell < self.right_cell

    def cell_mask(self) -> np.ndarray:
        mask = np.zeros(self.grid.domain.n_cells, dtype=bool)
        mask[self.cell_slice] = True
        return mask


def shifted_grids(domain: Domain) -> tuple[DyadicGrid, DyadicGrid, DyadicGrid]:
    """The three shifted dyadic grids of the domain; shift 0 is the standard lattice."""
    return (DyadicGrid(domain, 0), DyadicGrid(domain, 1), DyadicGrid(domain, 2))


def _check_compatible(f: GridFunction, cube: DyadicCube) -> None:
    if cube.grid.domain != f.domain:
        raise GridError("cube and grid function live on different domains")


def average(f: GridFunction, cube: DyadicCube) -> float:
    """Mean of f over the cube, with f extended by zero outside the domain.

    The denominator is the full cube measure, so partially overlapping
    cubes see the missing part as zeros.
    """
    _check_compatible(f, cube)
    return float(f.values[cube.cell_slice].sum()) * f.domain.h / cube.measure


def median(f: GridFunction, cube: DyadicCube) -> float:
    """Median value of f over the cube.

    Largest lambda for which both strict level sets {f > lambda} and
    {f < lambda} within the cube have measure at most half the cube.
    Cells outside the domain enter as zeros.  On step functions the
    supremum is attained at a cell value and is found by a scan of the
    sorted values.
    """
    _check_compatible(f, cube)
    inside = f.values[cube.cell_slice]
    missing = cube.size_cells - inside.size
    vals = np.sort(np.concatenate([inside, np.zeros(missing)]) if missing else inside)
    n = vals.size
    uniq = np.unique(vals)
    below = np.searchsorted(vals, uniq, side="left")
    feasible = uniq[below <= n / 2]
    m = float(feasible[-1])
    # The matching upper level set is small automatically; guard anyway.
    above = n - np.searchsorted(vals, m, side="right")
    if above > n / 2:
        raise AssertionError("median scan violated the level-set bound")
    return m


def smallest_covering_cube(grids: Sequence[DyadicGrid], lo: float, hi: float) -> DyadicCube:
    """Smallest cube among the given grids containing the interval [lo, hi)."""
    best: DyadicCube | None = None
    for grid in grids:
        d = grid.domain
        for level in range(grid.n_levels - 1, -1, -1):
            found = None
            for cube in grid.cubes_at_level(level):
                a, b = cube.interval
                if a <= lo and hi <= b:
                    found = cube
                    break
            if found is not None:
                if best is None or found.size_cells < best.size_cells:
                    best = found
                break  # coarser levels of this grid are only larger
    if best is None:
        raise GridError(f"no cube of the given grids contains [{lo}, {hi})")
    return best
