"""Dyadic sparse domination toolkit for maximal truncated singular integrals."""

from .grid import (
    Domain,
    DyadicCube,
    DyadicGrid,
    GridError,
    GridFunction,
    average,
    grid_function_from_values,
    make_grid_function,
    median,
    shifted_grids,
    smallest_covering_cube,
)
from .operators import (
    KernelSpec,
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
from .sparse import SparseFamily, build_sparse_family, carleson_check, verify_sparsity
from .spaces import (
    Rearrangement,
    SpaceSpec,
    boyd_indices,
    dilate_rearrangement,
    distribution,
    modular,
    rearrangement,
    rearrangement_norm,
    space_norm,
)
from .weights import (
    Weight,
    a1_characteristic,
    ainf_best,
    ainf_characteristic,
    ap_characteristic,
    dual_weight,
    openness_step,
    power_weight,
    unit_weight,
)
from .young import (
    NFunction,
    complementary,
    delta2_data,
    dilation_indices,
    inequality_kit,
    n_function_from_callable,
    piecewise_power,
    power_function,
)

__version__ = "0.1.0"
