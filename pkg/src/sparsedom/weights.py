"""Muckenhoupt weights and their characteristics on the shifted dyadic grids.

All characteristic suprema range over the cubes of the three shifted grids.
Averages inside the A_p product are taken over the part of the cube that
meets the domain (the dual weight cannot be extended by zero), while the
Fujii-Wilson characteristic uses the zero-extension dyadic maximal of the
same grid as the outer cube, which keeps the Carleson embedding constant
exactly 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Domain, DyadicCube, DyadicGrid, GridError, GridFunction, shifted_grids
from .operators import best_maximal

__all__ = [
    "Weight",
    "WeightError",
    "unit_weight",
    "power_weight",
    "dual_weight",
    "ap_characteristic",
    "a1_characteristic",
    "ainf_characteristic",
    "ainf_best",
    "openness_step",
    "OpennessStep",
]


class WeightError(ValueError):
    """Non-positive weight values or out-of-range parameters."""


class Weight:
    """Strictly positive grid function with cached characteristics.

    The cache maps characteristic keys to floats; entries are computed once
    and then only read, so concurrent readers may duplicate work but never
    see a partial value.
    """

    def __init__(self, values: GridFunction):
        if values.values.min() <= 0:
            raise WeightError("weight values must be strictly positive")
        self.values = values
        self._cache: dict = {}

    @property
    def domain(self) -> Domain:
        return self.values.domain

    @property
    def cell_values(self) -> np.ndarray:
        return self.values.values

    def mass(self, cube: DyadicCube) -> float:
        """w(Q): weight mass of the cube's domain cells."""
        if cube.grid.domain != self.domain:
            raise GridError("cube and weight domains differ")
        return float(self.cell_values[cube.cell_slice].sum()) * self.domain.h

    def total_mass(self) -> float:
        return float(self.cell_values.sum()) * self.domain.h

    def _cached(self, key, compute):
        value = self._cache.get(key)
        if value is None:
            value = compute()
            self._cache[key] = value
        return value


def unit_weight(domain: Domain) -> Weight:
    return Weight(GridFunction(domain, np.ones(domain.n_cells)))


def power_weight(a: float, domain: Domain) -> Weight:
    """Weight |x|**a with exact cell averages.

    Cells straddling the origin get the exact integral of |x|**a divided by
    the cell width; midpoint sampling would misstate the mass there badly.
    Requires a > -1 so the integral is finite.
    """
    if a <= -1:
        raise WeightError(f"exponent must be > -1 for integrability, got {a}")
    edges = domain.lo + np.arange(domain.n_cells + 1) * domain.h
    left, right = edges[:-1], edges[1:]

    def antideriv(x: np.ndarray) -> np.ndarray:
        # integral of |t|**a from 0 to x, odd in x
        return np.sign(x) * np.abs(x) ** (a + 1) / (a + 1)

    cells = (antideriv(right) - antideriv(left)) / domain.h
    return Weight(GridFunction(domain, cells))


def dual_weight(w: Weight, p: float) -> Weight:
    """sigma = w**(1 - p'), the dual weight for exponent p > 1."""
    if p <= 1:
        raise WeightError(f"dual weight needs p > 1, got {p}")
    pprime = p / (p - 1)
    return Weight(GridFunction(w.domain, w.cell_values ** (1 - pprime)))


def _ap_over_grid(w: Weight, sigma: Weight, p: float, grid: DyadicGrid) -> float:
    h = w.domain.h
    wmass = w.cell_values * h
    smass = sigma.cell_values * h
    best = 0.0
    for level in range(grid.n_levels):
        wsum = grid.level_cell_sums(wmass, level)
        ssum = grid.level_cell_sums(smass, level)
        meas = grid.level_cell_counts(level) * h
        keep = meas > 0
        prod = (wsum[keep] / meas[keep]) * (ssum[keep] / meas[keep]) ** (p - 1)
        best = max(best, float(prod.max()))
    return best


def ap_characteristic(w: Weight, p: float) -> float:
    """[w]_{A_p}: sup over all cubes of all three grids of the A_p product."""
    if p <= 1:
        raise WeightError(f"A_p characteristic needs p > 1, got {p}")

    def compute() -> float:
        sigma = dual_weight(w, p)
        return max(_ap_over_grid(w, sigma, p, g) for g in shifted_grids(w.domain))

    return w._cached(("ap", p), compute)


def a1_characteristic(w: Weight) -> float:
    """[w]_{A_1}: sup over cells of (best maximal of w) / w."""

    def compute() -> float:
        m = best_maximal(w.values).values
        return float((m / w.cell_values).max())

    return w._cached(("a1",), compute)


def _suffix_cummax_averages(w: Weight, grid: DyadicGrid) -> list[np.ndarray]:
    """cm[k][cell] = max over levels >= k of the cell's cube average of w."""
    h = w.domain.h
    wmass = w.cell_values * h
    cm: list[np.ndarray] = [np.empty(0)] * grid.n_levels
    running = np.full(w.domain.n_cells, -np.inf)
    for level in range(grid.n_levels - 1, -1, -1):
        sums = grid.level_cell_sums(wmass, level)
        avg = sums[grid.cell_cube_indices(level)] / (grid.sidelength_cells(level) * h)
        running = np.maximum(running, avg)
        cm[level] = running
    return cm


def ainf_characteristic(w: Weight, grid: DyadicGrid) -> float:
    """Fujii-Wilson [w]_{A_inf} over one grid.

    For each cube Q the integrand M(w chi_Q) at a cell x in Q is the largest
    average of w over the cubes between x's cell and Q, which is a suffix
    cummax over levels; one pass serves every Q at once.
    """
    if grid.domain != w.domain:
        raise GridError("grid and weight domains differ")

    def compute() -> float:
        h = w.domain.h
        wmass = w.cell_values * h
        cm = _suffix_cummax_averages(w, grid)
        best = 0.0
        for level in range(grid.n_levels):
            num = grid.level_cell_sums(cm[level] * h, level)
            den = grid.level_cell_sums(wmass, level)
            keep = den > 0
            best = max(best, float((num[keep] / den[keep]).max()))
        return best

    return w._cached(("ainf", grid.thirds), compute)


def ainf_best(w: Weight) -> float:
    """Largest Fujii-Wilson characteristic among the three shifted grids."""
    return max(ainf_characteristic(w, g) for g in shifted_grids(w.domain))


@dataclass(frozen=True)
class OpennessStep:
    eps: float
    p_minus_eps: float
    lhs: float
    rhs: float
    ok: bool


def openness_step(w: Weight, p: float, n: int = 1) -> OpennessStep:
    """Self-improvement of the A_p class.

    eps = (p - 1) / (1 + 2**(n+1) [sigma]_{A_inf}) with sigma the dual
    weight, and the characteristic at p - eps is checked against
    2**(p-1) times the characteristic at p.
    """
    if p <= 1:
        raise WeightError(f"openness step needs p > 1, got {p}")
    if n < 1:
        raise WeightError(f"dimension parameter must be >= 1, got {n}")
    sigma = dual_weight(w, p)
    eps = (p - 1) / (1 + 2 ** (n + 1) * ainf_best(sigma))
    lhs = ap_characteristic(w, p - eps)
    rhs = 2 ** (p - 1) * ap_characteristic(w, p)
    return OpennessStep(eps, p - eps, lhs, rhs, lhs <= rhs * (1 + 1e-9))
