"""Experiment drivers that check the domination inequalities numerically.

Each runner consumes an ExperimentConfig, executes a deterministic trial
corpus (per-trial sub-seeds derived from the seed and trial index), and
returns a Report whose rows land in rows.csv and whose summary lands in
report.json.  Implicit constants in the inequalities are estimated
empirically and reported, never asserted against fixed values.

Config keys (flat `key = value` text):
  kind                 experiment name, must match the CLI subcommand
  domain.lo/len/J      interval and refinement level (J <= 14)
  kernel               `hilbert`
  weight.kind          unit | power | step | random
  weight.a             single power exponent (> -1)
  weight.a_values      comma list for sweeps (default 0,0.3,0.6,0.9)
  weight.values        comma list of block values for step weights
  weight.bound         log-uniform bound for random weights
  space.family/p/q     lebesgue | lorentz | orlicz
  phi.kind/p/p2        power | piecewise
  trials seed mmax alpha threads stability out
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .grid import Domain, GridFunction, make_grid_function, median, shifted_grids
from .operators import (
    KernelSpec,
    best_maximal,
    hilbert_kernel,
    maximal_truncated,
    shifted_sparse_operator,
    weighted_dyadic_maximal,
)
from .sparse import build_sparse_family
from .spaces import SpaceSpec, modular, space_norm
from .weights import (
    Weight,
    ainf_best,
    ap_characteristic,
    power_weight,
    unit_weight,
)
from .young import NFunction, delta2_data, dilation_indices, inequality_kit, piecewise_power, power_function

__all__ = [
    "ConfigError",
    "TrialError",
    "ExperimentConfig",
    "Row",
    "Report",
    "TrialSpec",
    "parse_config_text",
    "load_config_file",
    "make_trial_specs",
    "write_report",
    "rerun_trial",
    "run_domination",
    "run_norm_bound",
    "run_modular_bound",
    "run_median_bound",
    "run_hp_comparison",
    "run_weights_table",
    "run_young_kit",
    "RUNNERS",
]

EXPERIMENTS = ("domination", "norm", "modular", "median", "hp-compare", "weights", "young")


class ConfigError(ValueError):
    """Bad config input; carries the offending key for the CLI message."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


class TrialError(RuntimeError):
    """Non-finite value inside a trial; carries a digest for the CLI message."""

    def __init__(self, digest: str):
        super().__init__(f"numerical failure in trial {digest}")
        self.digest = digest


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = ""
    lo: float = 0.0
    length: float = 1.0
    level: int = 8
    kernel: str = "hilbert"
    weight_kind: str = "power"
    weight_a: float | None = None
    weight_a_values: tuple[float, ...] = ()
    weight_values: tuple[float, ...] = ()
    weight_bound: float = 8.0
    space_family: str = "lebesgue"
    space_p: float = 2.0
    space_q: float = 2.0
    phi_kind: str = "power"
    phi_p: float = 2.0
    phi_p2: float = 3.0
    trials: int = 6
    seed: int = 1234
    mmax: int = -1
    alpha: float = 1.0
    threads: int = 1
    stability: bool = True
    out: str = ""

    def domain(self, level: int | None = None) -> Domain:
        return Domain(self.lo, self.length, self.level if level is None else level)

    def kernel_spec(self) -> KernelSpec:
        if self.kernel != "hilbert":
            raise ConfigError("kernel", f"unknown kernel {self.kernel!r}")
        return hilbert_kernel()

    def space(self) -> SpaceSpec:
        if self.space_family == "lebesgue":
            return SpaceSpec.lebesgue(self.space_p)
        if self.space_family == "lorentz":
            return SpaceSpec.lorentz(self.space_p, self.space_q)
        if self.space_family == "orlicz":
            return SpaceSpec.orlicz(self.phi())
        raise ConfigError("space.family", f"unknown family {self.space_family!r}")

    def phi(self) -> NFunction:
        if self.phi_kind == "power":
            return power_function(self.phi_p)
        if self.phi_kind == "piecewise":
            return piecewise_power(self.phi_p, self.phi_p2)
        raise ConfigError("phi.kind", f"unknown kind {self.phi_kind!r}")

    def a_sweep(self) -> tuple[float, ...]:
        if self.weight_a is not None:
            return (self.weight_a,)
        if self.weight_a_values:
            return self.weight_a_values
        return (0.0, 0.3, 0.6, 0.9)

    def flat(self) -> dict:
        out = {}
        for key, (attr, _) in _KEYS.items():
            value = getattr(self, attr)
            if isinstance(value, tuple):
                value = ",".join(f"{v:g}" for v in value)
            out[key] = value
        return out

    def digest(self) -> str:
        blob = json.dumps(self.flat(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes", "on"):
        return True
    if text.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    if isinstance(text, tuple):
        return text
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _checked(parser: Callable, check: Callable[[object], bool], expect: str) -> Callable:
    def inner(text):
        value = parser(text)
        if not check(value):
            raise ValueError(f"expected {expect}, got {value!r}")
        return value

    return inner


_KEYS: dict[str, tuple[str, Callable]] = {
    "kind": ("kind", _checked(str, lambda v: v in EXPERIMENTS, f"one of {EXPERIMENTS}")),
    "domain.lo": ("lo", float),
    "domain.len": ("length", _checked(float, lambda v: v > 0, "a positive length")),
    "domain.J": ("level", _checked(int, lambda v: 1 <= v <= 14, "an integer in [1, 14]")),
    "kernel": ("kernel", _checked(str, lambda v: v == "hilbert", "'hilbert'")),
    "weight.kind": (
        "weight_kind",
        _checked(str, lambda v: v in ("unit", "power", "step", "random"), "unit|power|step|random"),
    ),
    "weight.a": ("weight_a", _checked(float, lambda v: v > -1, "an exponent > -1")),
    "weight.a_values": ("weight_a_values", _checked(_float_list, lambda v: all(a > -1 for a in v), "exponents > -1")),
    "weight.values": ("weight_values", _checked(_float_list, lambda v: len(v) > 0 and all(x > 0 for x in v), "positive values")),
    "weight.bound": ("weight_bound", _checked(float, lambda v: v > 1, "a bound > 1")),
    "space.family": (
        "space_family",
        _checked(str, lambda v: v in ("lebesgue", "lorentz", "orlicz"), "lebesgue|lorentz|orlicz"),
    ),
    "space.p": ("space_p", _checked(float, lambda v: v > 0, "a positive exponent")),
    "space.q": ("space_q", _checked(float, lambda v: v > 0, "a positive exponent")),
    "phi.kind": ("phi_kind", _checked(str, lambda v: v in ("power", "piecewise"), "power|piecewise")),
    "phi.p": ("phi_p", _checked(float, lambda v: v > 1, "an exponent > 1")),
    "phi.p2": ("phi_p2", _checked(float, lambda v: v > 1, "an exponent > 1")),
    "trials": ("trials", _checked(int, lambda v: v >= 1, "at least 1 trial")),
    "seed": ("seed", _checked(int, lambda v: 0 <= v < 2**64, "a u64 seed")),
    "mmax": ("mmax", _checked(int, lambda v: v >= -1, "-1 (auto) or a depth >= 0")),
    "alpha": ("alpha", _checked(float, lambda v: 0 < v <= 1, "a value in (0, 1]")),
    "threads": ("threads", _checked(int, lambda v: v >= 1, "at least 1 thread")),
    "stability": ("stability", _parse_bool),
    "out": ("out", str),
}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno} is not 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip().strip('"')
    return out


def config_from_mapping(mapping: dict[str, object], base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    updates = {}
    for key, raw in mapping.items():
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        attr, parser = _KEYS[key]
        try:
            updates[attr] = parser(raw) if not isinstance(raw, bool) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc)) from exc
    return replace(cfg, **updates)


def load_config_file(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path!r}: {exc}") from exc
    return config_from_mapping(parse_config_text(text), base)


# ---------------------------------------------------------------------------
# Trial corpus


FULL_KINDS = ("dyadic-indicator", "interval-indicator", "sign-steps", "bump", "pinned-indicator", "pinned-bump")
SMOOTH_KINDS = tuple(k for k in FULL_KINDS if k != "sign-steps")


@dataclass(frozen=True)
class TrialSpec:
    """Resolution-free description of one trial function.

    Parameters are fractions of the domain, so the same spec re-renders
    consistently at any refinement level.
    """

    kind: str
    params: tuple[float, ...]

    def render(self, domain: Domain) -> GridFunction:
        lo, length = domain.lo, domain.length
        kind, params = self.kind, self.params
        if kind in ("dyadic-indicator", "interval-indicator", "pinned-indicator"):
            a = lo + params[0] * length
            b = lo + params[1] * length
            return make_grid_function(domain, lambda x: 1.0 if a <= x < b else 0.0)
        if kind == "sign-steps":
            a = lo + params[0] * length
            b = lo + params[1] * length
            blocks = params[2:]
            nblocks = len(blocks)

            def steps(x: float) -> float:
                if not a <= x < b:
                    return 0.0
                return blocks[min(int((x - lo) / length * nblocks), nblocks - 1)]

            return make_grid_function(domain, steps)
        if kind in ("bump", "pinned-bump"):
            center = lo + params[0] * length
            width = params[1] * length

            def bump(x: float) -> float:
                u = (x - center) / width
                return math.exp(-1.0 / (1.0 - u * u)) if abs(u) < 1 else 0.0

            return make_grid_function(domain, bump)
        raise ConfigError("trials", f"unknown trial kind {kind!r}")


def _anchor_fraction(cfg: ExperimentConfig) -> float:
    """Fraction of the domain where the weight is singular (0 for power weights)."""
    if cfg.weight_kind == "power":
        frac = (0.0 - cfg.lo) / cfg.length
        return min(max(frac, 0.02), 0.98)
    return 0.5


def make_trial_specs(cfg: ExperimentConfig, kinds: tuple[str, ...] = FULL_KINDS) -> list[TrialSpec]:
    anchor = _anchor_fraction(cfg)
    specs = []
    for index in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, index])
        kind = kinds[index % len(kinds)]
        if kind == "dyadic-indicator":
            k = int(rng.integers(1, 6))
            m = int(rng.integers(0, 2**k))
            params = (m / 2**k, (m + 1) / 2**k)
        elif kind == "interval-indicator":
            u = np.sort(rng.uniform(0.02, 0.98, 2))
            params = (float(u[0]), float(max(u[1], u[0] + 0.02)))
        elif kind == "sign-steps":
            u = rng.uniform(0.15, 0.45, 2)
            blocks = rng.choice([-1.0, 1.0], 64)
            params = (max(anchor - u[0], 0.0), min(anchor + u[1], 1.0), *map(float, blocks))
        elif kind == "bump":
            params = (float(rng.uniform(0.3, 0.7)), float(rng.uniform(0.1, 0.3)))
        elif kind == "pinned-indicator":
            u = rng.uniform(0.02, 0.08, 2)
            params = (max(anchor - u[0], 0.0), min(anchor + u[1], 1.0))
        else:  # pinned-bump
            params = (anchor, float(rng.uniform(0.15, 0.4)))
        specs.append(TrialSpec(kind, params))
    return specs


@lru_cache(maxsize=256)
def _tstar_values(domain: Domain, spec: TrialSpec, kernel_name: str) -> np.ndarray:
    kern = hilbert_kernel() if kernel_name == "hilbert" else None
    if kern is None:
        raise ConfigError("kernel", f"unknown kernel {kernel_name!r}")
    values = maximal_truncated(spec.render(domain), kern).values
    values.setflags(write=False)
    return values


def _tstar(domain: Domain, spec: TrialSpec, cfg: ExperimentConfig) -> GridFunction:
    return GridFunction(domain, _tstar_values(domain, spec, cfg.kernel))


# ---------------------------------------------------------------------------
# Weights for the experiments


def _block_weight(domain: Domain, blocks: Iterable[float]) -> Weight:
    blocks = list(blocks)
    n = len(blocks)
    values = [blocks[min(int((i + 0.5) / domain.n_cells * n), n - 1)] for i in range(domain.n_cells)]
    return Weight(GridFunction(domain, np.asarray(values)))


def make_weights(cfg: ExperimentConfig, domain: Domain, scale: float = 1.0) -> list[tuple[str, Weight, float]]:
    """Labelled weight sweep; `scale` shrinks power exponents into an A_p range."""
    kind = cfg.weight_kind
    if kind == "unit":
        return [("unit", unit_weight(domain), 0.0)]
    if kind == "power":
        out = []
        for a in cfg.a_sweep():
            a_eff = a * scale
            w = power_weight(a_eff, domain) if a_eff != 0 else unit_weight(domain)
            out.append((f"|x|^{a_eff:g}", w, a_eff))
        return out
    if kind == "step":
        blocks = cfg.weight_values or (1.0, 4.0)
        return [("step", _block_weight(domain, blocks), 0.0)]
    if kind == "random":
        out = []
        for i in range(max(len(cfg.a_sweep()), 1)):
            rng = np.random.default_rng([cfg.seed, 10_000 + i])
            blocks = np.exp(rng.uniform(-math.log(cfg.weight_bound), math.log(cfg.weight_bound), 64))
            out.append((f"random{i}", _block_weight(domain, blocks), 0.0))
        return out
    raise ConfigError("weight.kind", f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class Row:
    trial: int
    lhs: float
    rhs: float
    ratio: float
    notes: str = ""


@dataclass
class Report:
    experiment: str
    config_digest: str
    rows: list[Row] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.summary.get("ok", False))

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_digest": self.config_digest,
            "rows": [
                {"trial": r.trial, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio, "notes": r.notes}
                for r in self.rows
            ],
            "summary": self.summary,
        }


def _check_rows(rows: list[Row], context: str) -> None:
    for row in rows:
        if not (math.isfinite(row.lhs) and math.isfinite(row.rhs) and math.isfinite(row.ratio)):
            raise TrialError(f"{context}/trial={row.trial}/notes={row.notes}")


def write_report(report: Report, out_dir: str) -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, "report.json")
    csv_path = os.path.join(out_dir, "rows.csv")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "lhs", "rhs", "ratio", "notes"])
        for r in report.rows:
            writer.writerow([r.trial, repr(r.lhs), repr(r.rhs), repr(r.ratio), r.notes])
    return json_path, csv_path


def _map_trials(cfg: ExperimentConfig, indices: Iterable[int], fn: Callable[[int], list[Row]]) -> list[Row]:
    indices = list(indices)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(fn, indices))
    else:
        chunks = [fn(i) for i in indices]
    return [row for chunk in chunks for row in chunk]


def _stability(main: float, refined: float) -> dict:
    rel = abs(refined - main) / max(abs(main), 1e-300)
    return {"value": main, "value_next_level": refined, "rel_change": rel, "stable": rel < 0.25}


# ---------------------------------------------------------------------------
# Experiment: pointwise sparse domination


def _auto_mmax(cfg: ExperimentConfig, smallest_cube_cells: int, domain: Domain) -> int:
    if cfg.mmax >= 0:
        return cfg.mmax
    m = 0
    while (1 << m) * smallest_cube_cells < domain.n_cells:
        m += 1
    return m + 2


def _domination_trial(cfg: ExperimentConfig, domain: Domain, specs: list[TrialSpec], index: int) -> list[Row]:
    kern = cfg.kernel_spec()
    spec = specs[index]
    f = spec.render(domain)
    tstar = _tstar(domain, spec, cfg)
    f_abs = f.with_values(np.abs(f.values))
    mbest = best_maximal(f).values
    delta = kern.smoothness_exponent
    best = None
    for grid in shifted_grids(domain):
        root = grid.largest_inside_cube()
        family = build_sparse_family(f, root)
        med = median(tstar, root)
        sl = root.cell_slice
        numer = np.abs(tstar.values[sl] - med)
        mmax = _auto_mmax(cfg, min(q.size_cells for q in family.cubes), domain)
        denom = mbest[sl] + 1e-12
        for m in range(mmax + 1):
            denom = denom + 2.0 ** (-m * delta) * shifted_sparse_operator(f_abs, family, m).values[sl]
        ratios = numer / denom
        at = int(np.argmax(ratios))
        cand = (float(ratios[at]), float(numer[at]), float(denom[at]), grid.thirds, len(family.cubes), mmax)
        if best is None or cand[0] < best[0]:
            best = cand
    ratio, lhs, rhs, thirds, ncubes, mmax = best
    return [Row(index, lhs, rhs, ratio, f"grid={thirds};cubes={ncubes};mmax={mmax}")]


def _domination_max_ratio(cfg: ExperimentConfig, level: int) -> float:
    domain = cfg.domain(level)
    specs = make_trial_specs(cfg)
    rows = _map_trials(cfg, range(cfg.trials), lambda i: _domination_trial(cfg, domain, specs, i))
    return max(r.ratio for r in rows)


def run_domination(cfg: ExperimentConfig) -> Report:
    domain = cfg.domain()
    specs = make_trial_specs(cfg)
    rows = _map_trials(cfg, range(cfg.trials), lambda i: _domination_trial(cfg, domain, specs, i))
    _check_rows(rows, "domination")
    max_ratio = max(r.ratio for r in rows)
    summary: dict = {"max_ratio": max_ratio, "empirical_C": max_ratio, "characteristics": {}}
    if cfg.stability:
        refined = _domination_max_ratio(cfg, cfg.level + 1)
        summary["stability"] = _stability(max_ratio, refined)
        summary["ok"] = summary["stability"]["stable"]
    else:
        summary["ok"] = True
    return Report("domination", cfg.digest(), rows, summary)


# ---------------------------------------------------------------------------
# Experiment: weighted norm bounds


def _norm_context(cfg: ExperimentConfig, level: int):
    domain = cfg.domain(level)
    space = cfg.space()
    p_lo, p_hi = space.boyd
    if not (1 < p_lo <= p_hi < math.inf):
        raise ConfigError("space.p", f"Boyd indices ({p_lo:g}, {p_hi:g}) outside (1, inf)")
    sweep_scale = min(1.0, p_lo - 1.0)
    weights = make_weights(cfg, domain, scale=sweep_scale)
    chars = {}
    for label, w, a in weights:
        chars[label] = {
            "a": a,
            "ap": ap_characteristic(w, p_lo),
            "ainf": ainf_best(w),
        }
    return domain, space, weights, chars


def _norm_bound_factor(space: SpaceSpec, chars: dict) -> float:
    p_lo = space.boyd[0]
    r = space.convexity
    return chars["ainf"] ** (1.0 / r) * chars["ap"] ** (1.0 / p_lo)


def _norm_trial(cfg, domain, space, weights, chars, specs, index) -> list[Row]:
    spec = specs[index]
    f = spec.render(domain)
    tstar = _tstar(domain, spec, cfg)
    mf = best_maximal(f)
    p_lo = space.boyd[0]
    rows = []
    grid0 = shifted_grids(domain)[0]
    for label, w, _a in weights:
        denom = space_norm(f, space, w)
        if denom == 0.0:
            rows.append(Row(index, 0.0, 0.0, 0.0, f"tstar;w={label};skipped=zero-norm"))
            continue
        bound = _norm_bound_factor(space, chars[label])
        ratio = space_norm(tstar, space, w) / denom
        rows.append(Row(index, ratio, bound, ratio / bound, f"tstar;w={label}"))
        m_ratio = space_norm(mf, space, w) / denom
        m_bound = chars[label]["ap"] ** (1.0 / p_lo)
        rows.append(Row(index, m_ratio, m_bound, m_ratio / m_bound, f"maximal;w={label}"))
        mw_ratio = space_norm(weighted_dyadic_maximal(f, w, grid0), space, w) / denom
        rows.append(Row(index, mw_ratio, 1.0, mw_ratio, f"weighted-maximal;w={label}"))
    return rows


def _norm_empirical(rows: list[Row], weights) -> dict:
    per_weight = {}
    for label, _w, _a in weights:
        vals = [r.ratio for r in rows if r.notes == f"tstar;w={label}"]
        if vals:
            per_weight[label] = max(vals)
    values = list(per_weight.values())
    return {
        "per_weight_C": per_weight,
        "empirical_C": max(values),
        "sweep_spread": max(values) / min(values),
    }


def run_norm_bound(cfg: ExperimentConfig) -> Report:
    domain, space, weights, chars = _norm_context(cfg, cfg.level)
    specs = make_trial_specs(cfg)
    rows = _map_trials(
        cfg, range(cfg.trials), lambda i: _norm_trial(cfg, domain, space, weights, chars, specs, i)
    )
    _check_rows(rows, "norm")
    emp = _norm_empirical(rows, weights)
    summary: dict = {
        "space": space.label,
        "boyd": space.boyd,
        "convexity": space.convexity,
        "characteristics": chars,
        "max_ratio": max(r.lhs for r in rows if r.notes.startswith("tstar")),
        "empirical_C_maximal": max(r.ratio for r in rows if r.notes.startswith("maximal")),
        "empirical_C_weighted_maximal": max(r.ratio for r in rows if r.notes.startswith("weighted-maximal")),
        **emp,
    }
    ok = emp["sweep_spread"] <= 2.0
    if cfg.stability:
        domain2, space2, weights2, chars2 = _norm_context(cfg, cfg.level + 1)
        rows2 = _map_trials(
            cfg,
            range(cfg.trials),
            lambda i: _norm_trial(cfg, domain2, space2, weights2, chars2, specs, i),
        )
        emp2 = _norm_empirical(rows2, weights2)
        summary["stability"] = _stability(emp["empirical_C"], emp2["empirical_C"])
        ok = ok and summary["stability"]["stable"]
    summary["ok"] = ok
    return Report("norm", cfg.digest(), rows, summary)


# ---------------------------------------------------------------------------
# Experiment: modular bounds


def _fit_maximal_modular_constant(f, mf, phi, w, ap_root: float) -> float:
    """Smallest c with modular(Mf) <= c * modular(c * ap_root * |f|)."""
    lhs = modular(mf, phi, w)
    if lhs == 0.0:
        return 1.0

    def rhs(c: float) -> float:
        scaled = f.with_values(c * ap_root * np.abs(f.values))
        return c * modular(scaled, phi, w)

    lo, hi = 1e-3, 1.0
    for _ in range(200):
        if rhs(hi) >= lhs:
            break
        hi *= 2.0
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if rhs(mid) >= lhs:
            hi = mid
        else:
            lo = mid
    return hi


def _modular_context(cfg: ExperimentConfig, level: int):
    domain = cfg.domain(level)
    phi = cfg.phi()
    i_phi, upper = dilation_indices(phi)
    if not (1 < i_phi <= upper < math.inf):
        raise ConfigError("phi.p", f"dilation indices ({i_phi:g}, {upper:g}) outside (1, inf)")
    weights = make_weights(cfg, domain)
    chars = {
        label: {"a": a, "ap_i": ap_characteristic(w, i_phi), "ainf": ainf_best(w)}
        for label, w, a in weights
    }
    return domain, phi, i_phi, weights, chars


def _modular_trial(cfg, domain, phi, i_phi, weights, chars, specs, index) -> list[Row]:
    spec = specs[index]
    f = spec.render(domain)
    tstar = _tstar(domain, spec, cfg)
    mf = best_maximal(f)
    f_abs = f.with_values(np.abs(f.values))
    cprime = delta2_data(phi).Cprime
    kern = cfg.kernel_spec()
    grid0 = shifted_grids(domain)[0]
    family = build_sparse_family(f, grid0.largest_inside_cube())
    mmax = _auto_mmax(cfg, min(q.size_cells for q in family.cubes), domain)
    rows = []
    for label, w, _a in weights:
        denom = modular(f, phi, w)
        if denom == 0.0:
            rows.append(Row(index, 0.0, 0.0, 0.0, f"c1;w={label};skipped=zero-modular"))
            continue
        ainf_pow = chars[label]["ainf"] ** (1.0 + cfg.alpha * cprime)
        c1 = modular(tstar, phi, w) / denom
        rows.append(Row(index, c1, ainf_pow, c1 / ainf_pow, f"c1;w={label}"))
        c0 = _fit_maximal_modular_constant(f, mf, phi, w, chars[label]["ap_i"] ** (1.0 / i_phi))
        rows.append(Row(index, c0, 2.0, c0 / 2.0, f"c0;w={label}"))
        rho_m = modular(mf, phi, w)
        if rho_m > 0:
            for m in range(0, mmax + 1, 2):
                shifted = shifted_sparse_operator(f_abs, family, m)
                cm = modular(shifted, phi, w) / (ainf_pow * rho_m)
                rows.append(Row(index, modular(shifted, phi, w), ainf_pow * rho_m, cm, f"tsm;m={m};w={label}"))
    return rows


def _modular_empirical(rows, weights, chars, phi, i_phi, alpha) -> dict:
    cprime = delta2_data(phi).Cprime
    c0_emp = max((r.lhs for r in rows if r.notes.startswith("c0;")), default=1.0)
    per_weight = {}
    for label, _w, _a in weights:
        vals = [r.lhs for r in rows if r.notes == f"c1;w={label}"]
        if vals:
            per_weight[label] = max(vals)
    bounds = {}
    branches = {}
    for label, _w, _a in weights:
        ap_root = chars[label]["ap_i"] ** (1.0 / i_phi)
        base = chars[label]["ainf"] ** (1.0 + alpha * cprime)
        case_two = c0_emp * ap_root >= 2.0
        bounds[label] = base * (ap_root**cprime if case_two else 1.0)
        branches[label] = "II" if case_two else "I"
    emp_c = max(per_weight[label] / bounds[label] for label in per_weight)
    return {
        "per_weight_c1": per_weight,
        "bounds": bounds,
        "branches": branches,
        "C0_empirical": c0_emp,
        "empirical_c1": max(per_weight.values()),
        "empirical_C": emp_c,
    }


def run_modular_bound(cfg: ExperimentConfig) -> Report:
    domain, phi, i_phi, weights, chars = _modular_context(cfg, cfg.level)
    specs = make_trial_specs(cfg, SMOOTH_KINDS)
    rows = _map_trials(
        cfg, range(cfg.trials), lambda i: _modular_trial(cfg, domain, phi, i_phi, weights, chars, specs, i)
    )
    _check_rows(rows, "modular")
    emp = _modular_empirical(rows, weights, chars, phi, i_phi, cfg.alpha)
    sweep = [emp["per_weight_c1"][label] for label, _w, _a in weights if label in emp["per_weight_c1"]]
    monotone = all(b >= a * (1 - 1e-9) for a, b in zip(sweep, sweep[1:]))
    tsm = [r.ratio for r in rows if r.notes.startswith("tsm")]
    summary: dict = {
        "phi": phi.label,
        "dilation_indices": (i_phi, dilation_indices(phi)[1]),
        "Cprime": delta2_data(phi).Cprime,
        "alpha": cfg.alpha,
        "characteristics": chars,
        "max_ratio": emp["empirical_c1"],
        "shifted_operator_C_max": max(tsm) if tsm else 0.0,
        "sweep_monotone": monotone,
        **emp,
    }
    ok = monotone if (cfg.weight_kind == "power" and len(weights) > 1) else True
    if cfg.stability:
        domain2, phi2, _i2, weights2, chars2 = _modular_context(cfg, cfg.level + 1)
        rows2 = _map_trials(
            cfg,
            range(cfg.trials),
            lambda i: _modular_trial(cfg, domain2, phi2, i_phi, weights2, chars2, specs, i),
        )
        emp2 = _modular_empirical(rows2, weights2, chars2, phi2, i_phi, cfg.alpha)
        summary["stability"] = _stability(emp["empirical_c1"], emp2["empirical_c1"])
        ok = ok and summary["stability"]["stable"]
    summary["ok"] = ok
    return Report("modular", cfg.digest(), rows, summary)


# ---------------------------------------------------------------------------
# Experiment: median bound


def _median_context(cfg: ExperimentConfig, level: int):
    domain = cfg.domain(level)
    p = cfg.space_p
    if p <= 1:
        raise ConfigError("space.p", f"median bound needs p > 1, got {p}")
    weights = make_weights(cfg, domain)
    chars = {label: {"a": a, "ap": ap_characteristic(w, p)} for label, w, a in weights}
    return domain, p, weights, chars


def _median_trial(cfg, domain, p, weights, chars, specs, index) -> list[Row]:
    spec = specs[index]
    f = spec.render(domain)
    tstar = _tstar(domain, spec, cfg)
    grid0 = shifted_grids(domain)[0]
    peak = int(np.argmax(np.abs(f.values)))
    l1 = float(np.sum(np.abs(f.values))) * domain.h
    rows = []
    for label, w, _a in weights:
        fnorm = space_norm(f, SpaceSpec.lebesgue(p), w)
        for level in range(domain.level + 1):
            cube = grid0.cube_containing_cell(peak, level)
            med = median(tstar, cube)
            lhs = abs(med) * w.mass(cube) ** (1.0 / p)
            rhs = chars[label]["ap"] ** (1.0 / p) * fnorm
            ratio = lhs / rhs if rhs > 0 else 0.0
            decay = abs(med) * cube.measure / l1 if l1 > 0 else 0.0
            rows.append(Row(index, lhs, rhs, ratio, f"median;w={label};level={level};decay={decay!r}"))
    return rows


def _weak_11_constant(cfg, domain, specs) -> float:
    """Empirical weak (1,1) constant sup_v v * |{T** f >= v}| / |f|_1."""
    worst = 0.0
    for spec in specs:
        f = spec.render(domain)
        l1 = float(np.sum(np.abs(f.values))) * domain.h
        if l1 == 0:
            continue
        t = np.sort(_tstar(domain, spec, cfg).values)
        n = t.size
        counts = n - np.arange(n)  # cells with value >= t[i]
        worst = max(worst, float(np.max(t * counts * domain.h)) / l1)
    return worst


def run_median_bound(cfg: ExperimentConfig) -> Report:
    domain, p, weights, chars = _median_context(cfg, cfg.level)
    specs = make_trial_specs(cfg)
    rows = _map_trials(
        cfg, range(cfg.trials), lambda i: _median_trial(cfg, domain, p, weights, chars, specs, i)
    )
    _check_rows(rows, "median")
    weak = _weak_11_constant(cfg, domain, specs)
    decay_ok = True
    for row in rows:
        decay = float(row.notes.rsplit("decay=", 1)[1])
        if decay > 2.0 * weak * (1 + 1e-9):
            decay_ok = False
    max_ratio = max(r.ratio for r in rows)
    summary: dict = {
        "p": p,
        "characteristics": chars,
        "max_ratio": max_ratio,
        "empirical_C": max_ratio,
        "weak_11_empirical": weak,
        "median_decay_ok": decay_ok,
    }
    ok = decay_ok
    if cfg.stability:
        domain2, p2, weights2, chars2 = _median_context(cfg, cfg.level + 1)
        rows2 = _map_trials(
            cfg, range(cfg.trials), lambda i: _median_trial(cfg, domain2, p2, weights2, chars2, specs, i)
        )
        refined = max(r.ratio for r in rows2)
        summary["stability"] = _stability(max_ratio, refined)
        ok = ok and summary["stability"]["stable"]
    summary["ok"] = ok
    return Report("median", cfg.digest(), rows, summary)


# ---------------------------------------------------------------------------
# Experiment: power-weight constant comparison


def run_hp_comparison(cfg: ExperimentConfig) -> Report:
    domain = cfg.domain()
    if not domain.lo < 0 < domain.lo + domain.length:
        raise ConfigError("domain.lo", "power-weight comparison needs 0 inside the domain")
    a_values = cfg.a_sweep()
    if cfg.weight_a is None and not cfg.weight_a_values:
        a_values = tuple(round(0.1 * k, 1) for k in range(1, 10))
    rows = []
    curves = {}
    for i, a in enumerate(a_values):
        if not 0 < a < 1:
            raise ConfigError("weight.a_values", f"comparison exponents must lie in (0, 1), got {a}")
        w = power_weight(a, domain)
        winv = power_weight(-a, domain)
        a2 = ap_characteristic(w, 2.0)
        ainf = ainf_best(w)
        ainf_inv = ainf_best(winv)
        ours = math.sqrt(a2) * ainf
        theirs = math.sqrt(a2) * math.sqrt(ainf + ainf_inv)
        curves[f"{a:g}"] = {"a2": a2, "ainf": ainf, "ainf_inv": ainf_inv, "ours": ours, "comparison": theirs}
        rows.append(Row(i, ours, theirs, ours / theirs, f"a={a:g}"))
    _check_rows(rows, "hp-compare")
    ordering_ok = all(r.ratio < 1.0 for r in rows)
    fit_pairs = [(a, curves[f"{a:g}"]["a2"]) for a in a_values if 0.1 - 1e-9 <= a <= 0.8 + 1e-9]
    fit = {}
    if len(fit_pairs) >= 3:
        g = np.array([1.0 / (1.0 - a * a) for a, _ in fit_pairs])
        y = np.array([v for _, v in fit_pairs])
        c = float(np.sum(y * g) / np.sum(g * g))
        fit = {"coefficient": c, "max_rel_dev": float(np.max(np.abs(c * g - y) / y))}
    summary = {
        "curves": curves,
        "ordering_ok": ordering_ok,
        "a2_fit": fit,
        "max_ratio": max(r.ratio for r in rows),
        "empirical_C": max(r.ratio for r in rows),
        "characteristics": curves,
        "ok": ordering_ok,
    }
    return Report("hp-compare", cfg.digest(), rows, summary)


# ---------------------------------------------------------------------------
# Experiment: weight characteristic table


def run_weights_table(cfg: ExperimentConfig) -> Report:
    from .weights import a1_characteristic, ainf_characteristic, openness_step

    domain = cfg.domain()
    weights = make_weights(cfg, domain)
    rows = []
    table = {}
    all_ok = True
    for i, (label, w, a) in enumerate(weights):
        per_grid = [ainf_characteristic(w, g) for g in shifted_grids(domain)]
        entry = {
            "a": a,
            "a1": a1_characteristic(w),
            "ainf_per_grid": per_grid,
            "ainf_best": max(per_grid),
            "ap": {},
            "openness": {},
        }
        for p in (1.5, 2.0, 3.0):
            step = openness_step(w, p)
            entry["ap"][f"{p:g}"] = ap_characteristic(w, p)
            entry["openness"][f"{p:g}"] = {"eps": step.eps, "ok": step.ok}
            all_ok = all_ok and step.ok
            rows.append(Row(i, step.lhs, step.rhs, step.lhs / step.rhs, f"openness;w={label};p={p:g}"))
        table[label] = entry
    _check_rows(rows, "weights")
    summary = {
        "characteristics": table,
        "max_ratio": max(r.ratio for r in rows),
        "empirical_C": max(r.ratio for r in rows),
        "ok": all_ok,
    }
    return Report("weights", cfg.digest(), rows, summary)


# ---------------------------------------------------------------------------
# Experiment: Young-function inequality kit


def run_young_kit(cfg: ExperimentConfig) -> Report:
    phi = cfg.phi()
    report = inequality_kit(phi)
    rows = [
        Row(i, check.worst, check.bound, check.worst / check.bound, check.name)
        for i, check in enumerate(report.checks)
    ]
    _check_rows(rows, "young")
    lo, hi = dilation_indices(phi)
    d2 = delta2_data(phi)
    summary = {
        "phi": phi.label,
        "dilation_indices": (lo, hi),
        "delta2": {"C": d2.C, "Cprime": d2.Cprime, "in_delta2": d2.in_delta2},
        "checks": {c.name: c.ok for c in report.checks},
        "max_ratio": max(r.ratio for r in rows),
        "empirical_C": max(r.ratio for r in rows),
        "characteristics": {},
        "ok": report.all_ok,
    }
    return Report("young", cfg.digest(), rows, summary)


RUNNERS: dict[str, Callable[[ExperimentConfig], Report]] = {
    "domination": run_domination,
    "norm": run_norm_bound,
    "modular": run_modular_bound,
    "median": run_median_bound,
    "hp-compare": run_hp_comparison,
    "weights": run_weights_table,
    "young": run_young_kit,
}


def rerun_trial(cfg: ExperimentConfig, index: int) -> list[Row]:
    """Recompute the rows of one trial; bit-identical to the full run's rows."""
    if cfg.kind == "domination":
        domain = cfg.domain()
        specs = make_trial_specs(cfg)
        return _domination_trial(cfg, domain, specs, index)
    if cfg.kind == "norm":
        domain, space, weights, chars = _norm_context(cfg, cfg.level)
        specs = make_trial_specs(cfg)
        return _norm_trial(cfg, domain, space, weights, chars, specs, index)
    if cfg.kind == "modular":
        domain, phi, i_phi, weights, chars = _modular_context(cfg, cfg.level)
        specs = make_trial_specs(cfg, SMOOTH_KINDS)
        return _modular_trial(cfg, domain, phi, i_phi, weights, chars, specs, index)
    if cfg.kind == "median":
        domain, p, weights, chars = _median_context(cfg, cfg.level)
        specs = make_trial_specs(cfg)
        return _median_trial(cfg, domain, p, weights, chars, specs, index)
    raise ConfigError("kind", f"per-trial rerun not defined for {cfg.kind!r}")
