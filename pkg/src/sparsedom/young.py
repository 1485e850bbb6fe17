"""Young and N-function calculus: conjugates, dilation indices, doubling data.

Power and piecewise-power functions get closed forms; anything else falls
back to sampled numerics on a fixed log grid (1e-8 to 1e8, 64 points per
decade) with local refinement at the argmax, good to about 1e-8 relative
for power-like functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NFunction",
    "YoungFunctionError",
    "power_function",
    "piecewise_power",
    "n_function_from_callable",
    "complementary",
    "dilation_indices",
    "delta2_data",
    "Delta2Data",
    "inequality_kit",
    "KitCheck",
    "KitReport",
]

_GRID_LO, _GRID_HI = 1e-8, 1e8
_T_GRID = np.logspace(math.log10(_GRID_LO), math.log10(_GRID_HI), 16 * 64 + 1)


class YoungFunctionError(ValueError):
    """Raised when a function fails N-function requirements or a sup leaves the grid."""


class NFunction:
    """Increasing convex function with phi(0+) = 0, phi(t)/t -> 0 at 0 and -> inf at inf.

    `kind` selects analytic shortcuts: "power" is scale * t**p,
    "piecewise-power" glues two powers continuously at a knee.  Derived
    quantities are cached after first computation and then read-only.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], kind: str, params: tuple, label: str):
        self._fn = fn
        self.kind = kind
        self.params = params
        self.label = label
        self._cache: dict = {}

    def __call__(self, t):
        return self._fn(np.asarray(t, dtype=np.float64))

    def __repr__(self) -> str:  # pragma: no cover
        return f"NFunction({self.label})"

    def inverse(self, y):
        """Monotone bisection inverse, vectorized, relative tolerance ~1e-13."""
        y = np.asarray(y, dtype=np.float64)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        for _ in range(200):
            under = self(hi) < y
            if not under.any():
                break
            hi[under] *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            small = self(mid) < y
            lo = np.where(small, mid, lo)
            hi = np.where(small, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out


def power_function(p: float, scale: float = 1.0) -> NFunction:
    if p <= 1 or scale <= 0:
        raise YoungFunctionError(f"power N-function needs p > 1 and scale > 0, got p={p}, scale={scale}")
    return NFunction(lambda t: scale * t**p, "power", (p, scale), f"{scale:g}*t^{p:g}")


def piecewise_power(p_small: float, p_large: float, knee: float = 1.0) -> NFunction:
    """t**p_small below the knee, matched power p_large above it."""
    if not 1 < p_small <= p_large:
        raise YoungFunctionError(f"need 1 < p_small <= p_large, got ({p_small}, {p_large})")
    if knee <= 0:
        raise YoungFunctionError(f"knee must be positive, got {knee}")
    c_hi = knee ** (p_small - p_large)

    def fn(t: np.ndarray) -> np.ndarray:
        return np.where(t <= knee, t**p_small, c_hi * t**p_large)

    return NFunction(fn, "piecewise-power", (p_small, p_large, knee), f"t^{p_small:g}|t^{p_large:g}@{knee:g}")


def n_function_from_callable(fn: Callable[[np.ndarray], np.ndarray], label: str = "custom") -> NFunction:
    return NFunction(fn, "generic", (), label)


def _conjugate_numeric(phi: NFunction) -> NFunction:
    grid = _T_GRID
    phi_grid = phi(grid)

    def fn(s: np.ndarray) -> np.ndarray:
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        vals = s[:, None] * grid[None, :] - phi_grid[None, :]
        arg = np.argmax(vals, axis=1)
        top = (arg == grid.size - 1) & (s > 0)
        if np.any(top):
            # a max at the top point may still be bracketable; if one decade
            # beyond the grid beats it, the sup has truly escaped
            probe_t = grid[-1] * 10.0
            beats = s * probe_t - float(phi(probe_t)) > vals[:, -1]
            if np.any(top & beats):
                i = int(np.flatnonzero(top & beats)[0])
                raise YoungFunctionError(
                    f"conjugate sup not attained inside the sample grid at s={s[i]:g} (boundary index {arg[i]})"
                )
        # ternary refinement between the bracketing neighbours of the argmax;
        # at the lower edge the bracket extends to 0, where s*t - phi(t) -> 0
        lo = np.where(arg > 0, grid[np.maximum(arg - 1, 0)], 0.0)
        hi = np.where(arg < grid.size - 1, grid[np.minimum(arg + 1, grid.size - 1)], grid[-1] * 10.0)
        for _ in range(60):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            f1 = s * m1 - phi(m1)
            f2 = s * m2 - phi(m2)
            left = f1 > f2
            hi = np.where(left, m2, hi)
            lo = np.where(left, lo, m1)
        t_star = 0.5 * (lo + hi)
        refined = s * t_star - phi(t_star)
        best = np.maximum(vals[np.arange(s.size), arg], refined)
        best = np.maximum(best, 0.0)
        return best[0] if scalar else best

    return NFunction(fn, "conjugate-numeric", (), f"conj[{phi.label}]")


def complementary(phi: NFunction) -> NFunction:
    """Convex conjugate sup_t (s t - phi(t)); closed form for pure powers."""
    if "conjugate" not in phi._cache:
        if phi.kind == "power":
            p, scale = phi.params
            q = p / (p - 1)
            cq = (scale * p) ** (-q / p) / q
            conj = NFunction(lambda s: cq * s**q, "power", (q, cq), f"{cq:g}*s^{q:g}")
        else:
            conj = _conjugate_numeric(phi)
        phi._cache["conjugate"] = conj
    return phi._cache["conjugate"]


_DILATION_T = 2.0 ** np.arange(1, 17)


def dilation_indices(phi: NFunction) -> tuple[float, float]:
    """Lower and upper dilation indices from h(t) = sup_s phi(s t) / phi(s).

    Closed form for (piecewise) powers; otherwise h is sampled over a log
    grid of s and the defining sup/inf are taken over t = 2**(+-1 .. +-16),
    which brackets the limits from inside the sampled range.
    """
    if "dilation" in phi._cache:
        return phi._cache["dilation"]
    if phi.kind == "power":
        p = phi.params[0]
        result = (p, p)
    elif phi.kind == "piecewise-power":
        p_small, p_large, _ = phi.params
        result = (p_small, p_large)
    else:
        s = _T_GRID
        phi_s = phi(s)

        def h(t: float) -> float:
            return float(np.max(phi(s * t) / phi_s))

        lower = max(math.log(h(1.0 / t)) / math.log(1.0 / t) for t in _DILATION_T)
        upper = min(math.log(h(t)) / math.log(t) for t in _DILATION_T)
        result = (lower, upper)
    phi._cache["dilation"] = result
    return result


@dataclass(frozen=True)
class Delta2Data:
    C: float
    Cprime: float
    in_delta2: bool


def delta2_data(phi: NFunction) -> Delta2Data:
    """Doubling constant C = sup phi(2t)/phi(t), growth exponent C' = log2 C."""
    if "delta2" in phi._cache:
        return phi._cache["delta2"]
    if phi.kind == "power":
        c = 2.0 ** phi.params[0]
    elif phi.kind == "piecewise-power":
        c = 2.0 ** phi.params[1]
    else:
        c = float(np.max(phi(2 * _T_GRID) / phi(_T_GRID)))
    upper = dilation_indices(phi)[1]
    data = Delta2Data(c, math.log2(c), bool(math.isfinite(c) and math.isfinite(upper)))
    phi._cache["delta2"] = data
    return data


@dataclass(frozen=True)
class KitCheck:
    name: str
    ok: bool
    worst: float
    bound: float


@dataclass(frozen=True)
class KitReport:
    checks: tuple[KitCheck, ...]

    @property
    def all_ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> KitCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def inequality_kit(phi: NFunction, rel_tol: float | None = None) -> KitReport:
    """Verify the conjugate-pair inequalities on log-sampled grids.

    Checks, each recorded with its worst observed quotient:
      young:            s t <= phi(s) + conj(t)           (100 x 100 grid)
      inverse-product:  t <= phi^{-1}(t) conj^{-1}(t) <= 2 t
      doubling-power:   phi(l t) <= 2**C' l**C' phi(t) for l in {2, 4, 8}
      conjugate-ratio:  conj(phi(t) / t) <= phi(t)
    Default slack is 1e-12 for analytic conjugates and 1e-8 for numeric ones.
    """
    bar = complementary(phi)
    if rel_tol is None:
        rel_tol = 1e-12 if bar.kind == "power" else 1e-8
    checks = []

    st = np.logspace(-4, 4, 100)
    lhs = st[:, None] * st[None, :]
    rhs = phi(st)[:, None] + bar(st)[None, :]
    worst = float(np.max(lhs / rhs))
    checks.append(KitCheck("young", worst <= 1 + rel_tol, worst, 1.0))

    t = np.logspace(-6, 6, 241)
    prod = phi.inverse(t) * bar.inverse(t)
    low = float(np.min(prod / t))
    high = float(np.max(prod / t))
    ok = low >= 1 - 1e-9 - rel_tol and high <= 2 * (1 + rel_tol)
    checks.append(KitCheck("inverse-product", ok, high, 2.0))

    c_prime = delta2_data(phi).Cprime
    worst = 0.0
    for lam in (2.0, 4.0, 8.0):
        q = phi(lam * t) / (2.0**c_prime * lam**c_prime * phi(t))
        worst = max(worst, float(np.max(q)))
    checks.append(KitCheck("doubling-power", worst <= 1 + rel_tol, worst, 1.0))

    phit = phi(t)
    worst = float(np.max(bar(phit / t) / phit))
    checks.append(KitCheck("conjugate-ratio", worst <= 1 + rel_tol, worst, 1.0))

    return KitReport(tuple(checks))
