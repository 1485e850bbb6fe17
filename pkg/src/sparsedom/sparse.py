"""Sparse families of dyadic cubes: construction, certification, Carleson sums.

A family is sparse when the strict descendants of each member cover at most
half of it; equivalently the leftover pieces E(Q) are pairwise disjoint and
carry at least half of each cube.  The builder uses Calderon-Zygmund
average stopping, which guarantees the half threshold by mass counting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import DyadicCube, DyadicGrid, GridError, GridFunction, average
from .weights import Weight, ainf_characteristic

__all__ = [
    "SparseFamily",
    "SparsityCertificate",
    "CarlesonCheck",
    "build_sparse_family",
    "verify_sparsity",
    "carleson_check",
]


@dataclass(frozen=True, eq=False)
class SparseFamily:
    """Set of nested cubes below a root, with their exceptional-set masks."""

    root: DyadicCube
    cubes: tuple[DyadicCube, ...]
    _masks: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> DyadicGrid:
        return self.root.grid

    def exceptional_masks(self) -> dict[DyadicCube, np.ndarray]:
        """E(Q) = Q minus the union of strictly smaller family cubes, as cell masks."""
        if not self._masks:
            for q in self.cubes:
                mask = q.cell_mask()
                for p in self.cubes:
                    if p is not q and q.contains(p) and p.size_cells < q.size_cells:
                        mask[p.cell_slice] = False
                self._masks[q] = mask
        return self._masks


def build_sparse_family(f: GridFunction, root: DyadicCube, threshold: float = 2.0) -> SparseFamily:
    """Average-stopping family below `root`.

    The children of a selected cube are the maximal dyadic subcubes whose
    |f|-average exceeds threshold times the cube's own |f|-average; the
    recursion stops at cell level.  threshold >= 2 makes the union of
    children at most half the parent.  A zero function yields the singleton
    family {root}.
    """
    if threshold < 2:
        raise GridError(f"stopping threshold must be >= 2, got {threshold}")
    if root.grid.domain != f.domain:
        raise GridError("root cube and function domains differ")
    if not root.is_inside:
        raise GridError("root cube must lie inside the domain")
    f_abs = f.with_values(np.abs(f.values))
    selected = [root]
    frontier = [root]
    while frontier:
        cube = frontier.pop()
        base = average(f_abs, cube)
        if base == 0.0 or cube.level == cube.grid.domain.level:
            continue
        stack = list(cube.children())
        while stack:
            cand = stack.pop()
            if average(f_abs, cand) > threshold * base:
                selected.append(cand)
                frontier.append(cand)
            elif cand.level < cand.grid.domain.level:
                stack.extend(cand.children())
    selected.sort(key=lambda q: (q.level, q.left_cell))
    return SparseFamily(root, tuple(selected))


@dataclass(frozen=True)
class SparsityCertificate:
    eta: float
    ok: bool
    disjoint: bool
    min_retained: float

    def __bool__(self) -> bool:  # pragma: no cover - convenience
        return self.ok


def verify_sparsity(family: SparseFamily) -> SparsityCertificate:
    """Exact certificate on cell masks.

    eta is the worst covered fraction max_Q |union of strict subcubes| / |Q|;
    the certificate also requires pairwise disjoint E(Q) with
    |E(Q)| >= |Q| / 2, counted in whole cells.
    """
    masks = family.exceptional_masks()
    eta = 0.0
    min_retained = 1.0
    counts = np.zeros(family.grid.domain.n_cells, dtype=int)
    half_ok = True
    for q in family.cubes:
        e_cells = int(masks[q].sum())
        covered = q.size_cells - e_cells
        eta = max(eta, covered / q.size_cells)
        min_retained = min(min_retained, e_cells / q.size_cells)
        if 2 * e_cells < q.size_cells:
            half_ok = False
        counts += masks[q]
    disjoint = bool(counts.max() <= 1) if family.cubes else True
    ok = eta <= 0.5 and disjoint and half_ok
    return SparsityCertificate(eta, ok, disjoint, min_retained)


@dataclass(frozen=True)
class CarlesonCheck:
    lhs: float
    rhs: float
    ok: bool


def carleson_check(family: SparseFamily, w: Weight, top: DyadicCube) -> CarlesonCheck:
    """Carleson condition for the family below `top`.

    lhs sums w(Q) over family cubes contained in `top`; the bound is twice
    the Fujii-Wilson characteristic of the family's own grid times w(top).
    """
    if top.grid != family.grid:
        raise GridError("reference cube must come from the family's grid")
    lhs = sum(w.mass(q) for q in family.cubes if top.contains(q))
    rhs = 2.0 * ainf_characteristic(w, family.grid) * w.mass(top)
    return CarlesonCheck(lhs, rhs, lhs <= rhs * (1 + 1e-9))
