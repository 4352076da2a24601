"""Maximization over detuning, parameter planes and power studies.

Every cooling rate reported here is the optical part Gamma_opt: the
single-Lorentzian closed form for ``sl`` and Gamma_eff - Gamma_m for ``dl``
and ``exact``.  Many detunings and grid cells are evaluated in lockstep so
each step is a single batched call into ``cooling``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cooling import dl_rate_many, gamma_eff_exact_points, gamma_opt_sl_many, joint_optimum
from .errors import AllUnstable, InvalidParam, NoConvergence, NoJointOptimum, UnstableSystem
from .model import Direct, SystemParams, validate
from .points import PointSet, direct_points, max_real_eigen
from .steadystate import solve_equilibrium

METHODS = ("sl", "dl", "exact")
PLANES = ("mu_d", "delta_mu", "delta_d")
DEFAULT_SEEDS = 64
DETUNING_RTOL = 1e-6
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def default_detuning_range(params: SystemParams) -> tuple[float, float]:
    return (-3.0 * params.omega_trap, -0.01 * params.omega_trap)


def default_axis(params: SystemParams, name: str, n: int = 50) -> np.ndarray:
    """Default grid for ``name`` in {"mu", "d", "delta_tilde1"}, in rad/s."""
    w = params.omega_trap
    if name == "mu":
        return np.linspace(0.0, 1.0, n) * w
    if name == "d":
        return np.linspace(-2.0, 2.0, n) * w
    if name == "delta_tilde1":
        lo, hi = default_detuning_range(params)
        return np.linspace(lo, hi, n)
    raise ValueError(f"no default axis for {name!r}")


# --- point evaluation -----------------------------------------------------------

def operating_points(params: SystemParams, delta_tilde1, mu, d) -> PointSet:
    """Linearized operating points for broadcast arrays of (Delta~_1, mu, d).

    Direct mode is fully vectorized.  In SelfConsistent mode each point is
    solved separately; points whose equilibrium fails are returned with
    omega_m = nan and therefore count as unstable.
    """
    if isinstance(params.position_mode, Direct):
        return direct_points(params, delta_tilde1, mu, d)[0]
    dt1, mu, d = (a.ravel() for a in np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (delta_tilde1, mu, d))))
    rows = []
    for x, m, off in zip(dt1, mu, d):
        q = params.with_(delta_tilde1=float(x), mu=float(m), d=float(off))
        try:
            eq = solve_equilibrium(q)
            rows.append((eq.omega_m, eq.g, eq.delta_tilde1, eq.delta2))
        except (NoConvergence, UnstableSystem):
            rows.append((math.nan, math.nan, x, x + off))
    table = np.array(rows, dtype=float).reshape(-1, 4)
    return PointSet.from_columns(
        omega_m=table[:, 0], g=table[:, 1], delta_tilde1=table[:, 2], delta2=table[:, 3],
        kappa1=params.kappa1, kappa2=params.kappa2, mu=mu, gamma_m=params.gamma_m,
        mass=params.mass, temperature=params.temperature,
    )


def _check_method(method: str) -> str:
    method = method.lower()
    if method not in METHODS:
        raise InvalidParam("method", f"must be one of {METHODS}, got {method!r}")
    return method


def optical_rates(pts: PointSet, methods=METHODS) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """({method: Gamma_opt}, stable) for every point; unstable points carry -inf."""
    stable = max_real_eigen(pts) < 0
    sub = pts.take(stable)
    out = {}
    for method in methods:
        method = _check_method(method)
        values = np.full(len(pts), -np.inf)
        if len(sub):
            if method == "sl":
                values[stable] = gamma_opt_sl_many(sub)
            elif method == "dl":
                values[stable] = dl_rate_many(sub).gamma_eff - sub.gamma_m
            else:
                values[stable] = gamma_eff_exact_points(sub) - sub.gamma_m
        out[method] = values
    return out, stable


def _score(params, method, delta_tilde1, mu, d) -> np.ndarray:
    return optical_rates(operating_points(params, delta_tilde1, mu, d), (method,))[0][method]


# --- maximization over detuning -------------------------------------------------

@dataclass(frozen=True)
class DetuningOptimum:
    """Row-wise result of maximize_many; rows with all_unstable carry nan."""

    delta_star: np.ndarray
    gamma_star: np.ndarray
    all_unstable: np.ndarray


def _check_range(detuning_range, n_seed):
    lo, hi = (float(v) for v in detuning_range)
    if not lo < hi:
        raise InvalidParam("detuning_range", f"need lo < hi, got ({lo}, {hi})")
    if hi > 0:
        raise InvalidParam("detuning_range", "upper end must be <= 0 (red side)")
    if n_seed < 32:
        raise InvalidParam("n_seed", f"must be >= 32, got {n_seed}")
    return lo, hi


def maximize_many(
    params: SystemParams,
    method: str,
    mu,
    d,
    detuning_range: tuple[float, float] | None = None,
    n_seed: int = DEFAULT_SEEDS,
    rtol: float = DETUNING_RTOL,
) -> DetuningOptimum:
    """Maximize Gamma_opt over Delta~_1 independently for each (mu, d) row.

    A uniform grid of ``n_seed`` detunings is scored first; golden-section
    search then refines the bracket around the best seed until its width is
    below ``rtol`` |Delta~_1|.  All rows advance in lockstep so that every
    step is one batched evaluation.  Unstable points score -inf.
    """
    method = _check_method(method)
    lo, hi = _check_range(detuning_range or default_detuning_range(params), n_seed)
    mu, d = (np.atleast_1d(np.asarray(v, dtype=float)) for v in np.broadcast_arrays(mu, d))
    rows = len(mu)
    seeds = np.linspace(lo, hi, n_seed)
    scores = _score(params, method, seeds[None, :], mu[:, None], d[:, None]).reshape(rows, n_seed)

    best = np.argmax(scores, axis=1)
    best_f = scores[np.arange(rows), best]
    best_x = seeds[best]
    all_unstable = ~np.isfinite(best_f)
    a = seeds[np.maximum(best - 1, 0)]
    b = seeds[np.minimum(best + 1, n_seed - 1)]
    live = ~all_unstable

    def evaluate(x, mask):
        f = np.full(rows, -np.inf)
        if mask.any():
            f[mask] = _score(params, method, x[mask], mu[mask], d[mask])
        return f

    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = evaluate(x1, live), evaluate(x2, live)
    for _ in range(200):
        todo = live & ((b - a) > rtol * np.maximum(np.abs(a), np.abs(b)))
        if not todo.any():
            break
        right = todo & (f1 < f2)
        left = todo & ~right
        a = np.where(right, x1, a)
        b = np.where(left, x2, b)
        x1_new = np.where(right, x2, np.where(left, b - _GOLDEN * (b - a), x1))
        x2_new = np.where(left, x1, np.where(right, a + _GOLDEN * (b - a), x2))
        f1_new = np.where(right, f2, f1)
        f2_new = np.where(left, f1, f2)
        x1, x2 = x1_new, x2_new
        f1_new[left] = evaluate(x1, left)[left]
        f2_new[right] = evaluate(x2, right)[right]
        f1, f2 = f1_new, f2_new

    for x, f in ((x1, f1), (x2, f2)):
        better = live & (f > best_f)
        best_x = np.where(better, x, best_x)
        best_f = np.where(better, f, best_f)
    return DetuningOptimum(
        delta_star=np.where(all_unstable, np.nan, best_x),
        gamma_star=np.where(all_unstable, np.nan, best_f),
        all_unstable=all_unstable,
    )


def maximize_over_detuning(
    params: SystemParams,
    method: str = "exact",
    detuning_range: tuple[float, float] | None = None,
    n_seed: int = DEFAULT_SEEDS,
) -> tuple[float, float]:
    """(Delta~_1*, Gamma_opt*) at the params' own mu and d; raises AllUnstable."""
    validate(params)
    result = maximize_many(params, method, params.mu, params.d, detuning_range, n_seed)
    if result.all_unstable[0]:
        raise AllUnstable("every seed detuning is unstable", method=method, mu=params.mu, d=params.d)
    return float(result.delta_star[0]), float(result.gamma_star[0])


def single_cavity_reference(
    params: SystemParams,
    method: str = "exact",
    detuning_range: tuple[float, float] | None = None,
    n_seed: int = DEFAULT_SEEDS,
) -> float:
    """Best optical cooling rate with cavity 2 decoupled (mu = 0)."""
    return maximize_over_detuning(params.with_(mu=0.0), method, detuning_range, n_seed)[1]


# --- planes -----------------------------------------------------------------------

_PLANE_AXES = {
    "mu_d": ("mu", "d"),
    "delta_mu": ("delta_tilde1", "mu"),
    "delta_d": ("delta_tilde1", "d"),
}


@dataclass(frozen=True)
class SweepGrid:
    """Result of plane_sweep.

    ``values[method]`` has shape (len(axis1), len(axis2)) and holds nan where
    the cell is unstable (see ``stable``).  ``normalized`` divides the
    ``norm_method`` values by ``reference``, the single-cavity optimum of the
    same method.  For the mu_d plane ``delta_star`` is the optimal detuning
    of ``norm_method``; for the other planes it is the cell's own detuning.
    """

    plane: str
    axis1_name: str
    axis2_name: str
    axis1: np.ndarray
    axis2: np.ndarray
    methods: tuple[str, ...]
    values: dict[str, np.ndarray]
    delta_star: np.ndarray
    stable: np.ndarray
    reference: float
    norm_method: str
    params: SystemParams
    settings: dict = field(default_factory=dict)

    @property
    def normalized(self) -> np.ndarray:
        return self.values[self.norm_method] / self.reference

    def rows(self):
        """(axis1, axis2, gamma_sl, gamma_dl, gamma_exact, gamma_norm, delta_star, stable)
        per cell in row-major order; methods not computed are None."""
        norm = self.normalized
        for i, x in enumerate(self.axis1):
            for j, y in enumerate(self.axis2):
                ok = bool(self.stable[i, j])
                vals = [
                    float(self.values[m][i, j]) if (m in self.values and ok) else None
                    for m in METHODS
                ]
                yield (
                    float(x), float(y), *vals,
                    float(norm[i, j]) if ok else None,
                    float(self.delta_star[i, j]) if ok else None,
                    ok,
                )


def _plane_chunk(task):
    params, plane, first, second, methods, norm_method, detuning_range, n_seed = task
    if plane == "mu_d":
        values, delta_star, stable = {}, None, None
        for method in methods:
            opt = maximize_many(params, method, first, second, detuning_range, n_seed)
            values[method] = opt.gamma_star
            if method == norm_method:
                delta_star, stable = opt.delta_star, ~opt.all_unstable
        return values, delta_star, stable
    if plane == "delta_mu":
        pts = operating_points(params, first, second, params.d)
    else:
        pts = operating_points(params, first, params.mu, second)
    values, stable = optical_rates(pts, methods)
    values = {m: np.where(stable, v, np.nan) for m, v in values.items()}
    return values, np.asarray(first, dtype=float), stable


def effective_workers(requested: int) -> int:
    """Processes actually started: more than the available CPUs only adds overhead."""
    return max(1, min(int(requested), os.cpu_count() or 1))


def _chunks(n_cells: int, workers: int) -> list[slice]:
    n_chunks = max(1, min(n_cells, 4 * workers)) if workers > 1 else 1
    bounds = np.linspace(0, n_cells, n_chunks + 1).round().astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def plane_sweep(
    params: SystemParams,
    plane: str = "mu_d",
    axis1=None,
    axis2=None,
    methods=METHODS,
    detuning_range: tuple[float, float] | None = None,
    n_seed: int = DEFAULT_SEEDS,
    workers: int = 1,
    reference: float | None = None,
) -> SweepGrid:
    """Cooling rates over one of the planes mu_d, delta_mu, delta_d.

    In the mu_d plane every cell is maximized over Delta~_1; in the other two
    planes the cell's own detuning is used and the remaining coupling (d or
    mu) is taken from ``params``.  Cells are split into contiguous chunks;
    with ``workers`` > 1 the chunks run in separate processes and are merged
    by cell index, so the result does not depend on the worker count.  No
    more processes than available CPUs are started.
    """
    validate(params)
    if plane not in _PLANE_AXES:
        raise InvalidParam("plane", f"must be one of {PLANES}, got {plane!r}")
    if workers < 1:
        raise InvalidParam("workers", "must be >= 1")
    methods = tuple(_check_method(m) for m in methods)
    if not methods:
        raise InvalidParam("methods", "at least one method is required")
    norm_method = "exact" if "exact" in methods else methods[-1]
    name1, name2 = _PLANE_AXES[plane]
    axis1 = default_axis(params, name1) if axis1 is None else np.asarray(axis1, dtype=float)
    axis2 = default_axis(params, name2) if axis2 is None else np.asarray(axis2, dtype=float)
    detuning_range = tuple(detuning_range or default_detuning_range(params))
    if plane == "mu_d":
        _check_range(detuning_range, n_seed)
    if reference is None:
        reference = single_cavity_reference(params, norm_method, detuning_range, n_seed)
    if not reference > 0:
        raise InvalidParam("reference", f"single-cavity reference must be > 0, got {reference}")

    grid1, grid2 = np.meshgrid(axis1, axis2, indexing="ij")
    flat1, flat2 = grid1.ravel(), grid2.ravel()
    procs = effective_workers(workers)
    pieces = _chunks(len(flat1), procs)
    tasks = [
        (params, plane, flat1[s], flat2[s], methods, norm_method, detuning_range, n_seed)
        for s in pieces
    ]
    if procs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=procs) as pool:
            results = list(pool.map(_plane_chunk, tasks))
    else:
        results = [_plane_chunk(t) for t in tasks]

    shape = grid1.shape
    values = {m: np.empty(len(flat1)) for m in methods}
    delta_star = np.empty(len(flat1))
    stable = np.empty(len(flat1), dtype=bool)
    for s, (vals, dstar, ok) in zip(pieces, results):
        for m in methods:
            values[m][s] = vals[m]
        delta_star[s] = dstar
        stable[s] = ok
    return SweepGrid(
        plane=plane,
        axis1_name=name1,
        axis2_name=name2,
        axis1=axis1,
        axis2=axis2,
        methods=methods,
        values={m: v.reshape(shape) for m, v in values.items()},
        delta_star=delta_star.reshape(shape),
        stable=stable.reshape(shape),
        reference=float(reference),
        norm_method=norm_method,
        params=params,
        settings={"detuning_range": detuning_range, "n_seed": n_seed},
    )


# --- power study --------------------------------------------------------------------

@dataclass(frozen=True)
class PowerRow:
    power: float
    mu: float
    d: float
    gamma_max: float
    delta_star: float
    g_over_kappa1: float
    status: str


def power_sweep(
    params: SystemParams,
    powers,
    mu_values,
    detuning_range: tuple[float, float] | None = None,
    n_seed: int = DEFAULT_SEEDS,
    method: str = "exact",
) -> list[PowerRow]:
    """Best cooling rate and g/kappa1 versus laser power for each mu.

    d sits on the cooling branch d* = +sqrt(omega_t^2 - 4 mu^2) of the joint
    detuning optimum (omega_m is taken as omega_t there).  ``status`` is
    "ok", "all_unstable" or "no_joint_optimum"; failed rows carry nan.
    """
    validate(params)
    mu_values = np.atleast_1d(np.asarray(mu_values, dtype=float))
    offsets = []
    for mu in mu_values:
        try:
            offsets.append(joint_optimum(float(mu), params.omega_trap, +1)[0])
        except NoJointOptimum:
            offsets.append(math.nan)
    offsets = np.array(offsets)
    has_optimum = np.isfinite(offsets)
    rows = []
    for power in np.atleast_1d(np.asarray(powers, dtype=float)):
        at_power = params.with_(power=float(power))
        validate(at_power)
        opt = None
        if has_optimum.any():
            opt = maximize_many(
                at_power, method, mu_values[has_optimum], offsets[has_optimum], detuning_range, n_seed
            )
        k = 0
        for mu, d in zip(mu_values, offsets):
            if not np.isfinite(d):
                rows.append(PowerRow(float(power), float(mu), math.nan, math.nan, math.nan, math.nan,
                                     "no_joint_optimum"))
                continue
            dstar, gstar, bad = opt.delta_star[k], opt.gamma_star[k], opt.all_unstable[k]
            k += 1
            if bad:
                rows.append(PowerRow(float(power), float(mu), float(d), math.nan, math.nan, math.nan,
                                     "all_unstable"))
                continue
            eq = solve_equilibrium(at_power.with_(mu=float(mu), d=float(d), delta_tilde1=float(dstar)))
            rows.append(PowerRow(float(power), float(mu), float(d), float(gstar), float(dstar),
                                 eq.g / params.kappa1, "ok"))
    return rows
