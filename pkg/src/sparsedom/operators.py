"""Singular integral and maximal operators on grid functions.

The maximal truncated operator takes, at each cell midpoint, the supremum
over all annular truncations of the kernel integral.  On a cell grid the
truncation radii that matter are the integer multiples of the cell width,
so the supremum is exact and costs O(N) per point after a prefix pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .grid import Domain, DyadicCube, DyadicGrid, GridError, GridFunction, average, shifted_grids

if TYPE_CHECKING:  # pragma: no cover
    from .sparse import SparseFamily
    from .weights import Weight

__all__ = [
    "KernelSpec",
    "KernelError",
    "hilbert_kernel",
    "validate_kernel",
    "maximal_truncated",
    "truncated_integral",
    "dyadic_maximal",
    "best_maximal",
    "weighted_dyadic_maximal",
    "sparse_operator",
    "shifted_sparse_operator",
]


class KernelError(ValueError):
    """Kernel failed its size or smoothness sample checks."""


@dataclass(frozen=True)
class KernelSpec:
    """Singular kernel with size constant and smoothness exponent.

    evaluate must be vectorized in both arguments and is never called on
    the diagonal.  size_constant bounds |K(x, y)| * |x - y|; the smoothness
    quotient |K(x,y) - K(x',y)| * |x-y|**(1+delta) / |x-x'|**delta is
    bounded by twice the size constant (the factor 2 is sharp on the
    sampled set |x-x'| <= |x-y| / 2, attained by the Cauchy kernel).
    """

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    size_constant: float
    smoothness_exponent: float


def hilbert_kernel() -> KernelSpec:
    """Cauchy kernel 1 / (x - y): size constant 1, smoothness exponent 1."""
    return KernelSpec("hilbert", lambda x, y: 1.0 / (x - y), 1.0, 1.0)


def validate_kernel(kernel: KernelSpec, domain: Domain, samples: int = 512, seed: int = 0) -> None:
    """Spot-check the size and smoothness bounds on random point pairs."""
    rng = np.random.default_rng(seed)
    span = domain.length
    x = domain.lo + span * rng.random(samples)
    y = domain.lo + span * rng.random(samples)
    keep = np.abs(x - y) > span * 1e-9
    x, y = x[keep], y[keep]
    size_q = np.abs(kernel.evaluate(x, y)) * np.abs(x - y)
    if size_q.max() > kernel.size_constant * (1 + 1e-9):
        raise KernelError(f"size bound violated: quotient {size_q.max():.6g} > c = {kernel.size_constant}")
    # x' within half the distance to the singularity
    xp = x + (np.abs(x - y) / 2) * (2 * rng.random(x.size) - 1)
    d = kernel.smoothness_exponent
    smooth_q = np.abs(kernel.evaluate(x, y) - kernel.evaluate(xp, y))
    with np.errstate(invalid="ignore"):
        smooth_q = smooth_q * np.abs(x - y) ** (1 + d) / np.abs(x - xp) ** d
    smooth_q = smooth_q[np.isfinite(smooth_q)]
    if smooth_q.size and smooth_q.max() > 2 * kernel.size_constant * (1 + 1e-9):
        raise KernelError(f"smoothness bound violated: quotient {smooth_q.max():.6g} > 2c")


def maximal_truncated(f: GridFunction, kernel: KernelSpec) -> GridFunction:
    """Supremum over annular truncations of the kernel integral of f.

    At the midpoint x of cell i, with G(eps) the integral over |x - y| >= eps,
    the sup over truncation pairs of |G(eps1) - G(eps2)| equals
    max_k G(k h) - min_k G(k h) for k = 1 .. N.  The diagonal cell is always
    excluded; prefix sums accumulate cells left to right.
    """
    d = f.domain
    n = d.n_cells
    h = d.h
    mids = d.midpoints()
    out = np.empty(n)
    k = np.arange(1, n + 1)
    left_idx = np.empty(n, dtype=int)
    right_idx = np.empty(n, dtype=int)
    ys = mids.copy()
    for i in range(n):
        ys[i] = mids[i] + h  # dodge the singular diagonal; the entry is zeroed below
        coeff = kernel.evaluate(mids[i], ys) * f.values * h
        coeff[i] = 0.0
        ys[i] = mids[i]
        prefix = np.cumsum(coeff)
        total = prefix[-1]
        np.subtract(i, k, out=left_idx)
        np.add(i, k - 1, out=right_idx)
        left = np.where(left_idx >= 0, prefix[np.clip(left_idx, 0, n - 1)], 0.0)
        right = np.where(right_idx <= n - 1, total - prefix[np.clip(right_idx, 0, n - 1)], 0.0)
        g = left + right
        out[i] = g.max() - g.min()
    return GridFunction(d, out)


def truncated_integral(f: GridFunction, kernel: KernelSpec, eps1: float, eps2: float) -> GridFunction:
    """Single annular truncation: integral over eps1 <= |x - y| < eps2."""
    if not 0 < eps1 < eps2:
        raise GridError(f"need 0 < eps1 < eps2, got ({eps1}, {eps2})")
    d = f.domain
    mids = d.midpoints()
    out = np.empty(d.n_cells)
    for i in range(d.n_cells):
        dist = np.abs(mids[i] - mids)
        mask = (dist >= eps1) & (dist < eps2)
        mask[i] = False
        out[i] = np.sum(kernel.evaluate(mids[i], mids[mask]) * f.values[mask]) * d.h
    return GridFunction(d, out)


def _level_average_arrays(f_abs: np.ndarray, grid: DyadicGrid) -> list[np.ndarray]:
    """Per level, the zero-extension average over each cell's cube."""
    per_level = []
    for level in range(grid.n_levels):
        sums = grid.level_cell_sums(f_abs, level)
        size = grid.sidelength_cells(level)
        per_level.append(sums[grid.cell_cube_indices(level)] / size)
    return per_level


def dyadic_maximal(f: GridFunction, grid: DyadicGrid) -> GridFunction:
    """Dyadic Hardy-Littlewood maximal function over one grid's cubes."""
    if grid.domain != f.domain:
        raise GridError("grid and function domains differ")
    acc = np.zeros(f.domain.n_cells)
    for avg in _level_average_arrays(np.abs(f.values), grid):
        np.maximum(acc, avg, out=acc)
    return GridFunction(f.domain, acc)


def best_maximal(f: GridFunction) -> GridFunction:
    """Cellwise maximum of the dyadic maximal over the three shifted grids."""
    acc = np.zeros(f.domain.n_cells)
    for grid in shifted_grids(f.domain):
        np.maximum(acc, dyadic_maximal(f, grid).values, out=acc)
    return GridFunction(f.domain, acc)


def weighted_dyadic_maximal(f: GridFunction, w: "Weight", grid: DyadicGrid) -> GridFunction:
    """Dyadic maximal with averages taken in the weight's measure."""
    if grid.domain != f.domain:
        raise GridError("grid and function domains differ")
    h = f.domain.h
    fw = np.abs(f.values) * w.cell_values * h
    wmass = w.cell_values * h
    acc = np.zeros(f.domain.n_cells)
    for level in range(grid.n_levels):
        idx = grid.cell_cube_indices(level)
        num = grid.level_cell_sums(fw, level)[idx]
        den = grid.level_cell_sums(wmass, level)[idx]
        np.maximum(acc, num / den, out=acc)
    return GridFunction(f.domain, acc)


def sparse_operator(f: GridFunction, family: "SparseFamily") -> GridFunction:
    """Sum over family cubes of the cube average of f times the cube indicator."""
    d = f.domain
    if family.root.grid.domain != d:
        raise GridError("family and function domains differ")
    out = np.zeros(d.n_cells)
    for cube in family.cubes:
        out[cube.cell_slice] += average(f, cube)
    return GridFunction(d, out)


def _dilate_average(f: GridFunction, cube: DyadicCube, m: int) -> float:
    """Average of f over the concentric 2**m dilate, zero outside the domain.

    Dilate endpoints may fall on half-cells; the piecewise-constant integral
    is exact.  The denominator is the full dilate measure.
    """
    d = f.domain
    factor = 1 << m
    size = cube.size_cells
    left = cube.left_cell - size * (factor - 1) / 2
    right = left + size * factor
    a = max(left, 0.0)
    b = min(right, float(d.n_cells))
    mass = 0.0
    if a < b:
        lo = int(np.floor(a))
        hi = int(np.ceil(b))
        cover = np.minimum(np.arange(lo + 1, hi + 1), b) - np.maximum(np.arange(lo, hi), a)
        mass = float(np.sum(f.values[lo:hi] * cover)) * d.h
    return mass / (size * factor * d.h)


def shifted_sparse_operator(f: GridFunction, family: "SparseFamily", m: int) -> GridFunction:
    """Like sparse_operator but averaging each cube's concentric 2**m dilate."""
    if m < 0:
        raise GridError(f"dilation exponent must be >= 0, got {m}")
    d = f.domain
    if family.root.grid.domain != d:
        raise GridError("family and function domains differ")
    out = np.zeros(d.n_cells)
    for cube in family.cubes:
        out[cube.cell_slice] += _dilate_average(f, cube, m)
    return GridFunction(d, out)
