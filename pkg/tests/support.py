"""Shared parameter points for the test suite."""

from __future__ import annotations

import math

import numpy as np

from coupledcool.model import reference_params
from coupledcool.response import drift_matrix, stability_check
from coupledcool.steadystate import solve_equilibrium

OMEGA_T = 2e6
MU_QUARTER = 0.25 * OMEGA_T
D_STAR = math.sqrt(OMEGA_T**2 - 4 * MU_QUARTER**2)
DELTA_STAR = -(OMEGA_T + D_STAR) / 2


def coupled_params(**overrides):
    """Two-cavity point at the joint detuning optimum, 5 mW (strong coupling)."""
    base = dict(mu=MU_QUARTER, d=D_STAR, delta_tilde1=DELTA_STAR)
    base.update(overrides)
    return reference_params(**base)


def single_params(**overrides):
    """Single cavity (mu = 0) on the red sideband."""
    base = dict(mu=0.0, d=0.0, delta_tilde1=-OMEGA_T)
    base.update(overrides)
    return reference_params(**base)


def perturbed(base, rng, spread=0.5):
    """Every continuous parameter scaled by an independent factor in [1 - spread, 1 + spread]."""

    def f(value):
        return value * rng.uniform(1 - spread, 1 + spread)

    return base.with_(
        mass=f(base.mass), kappa1=f(base.kappa1), kappa2=f(base.kappa2),
        omega_trap=f(base.omega_trap), shift_amplitude=f(base.shift_amplitude), k1=f(base.k1),
        gamma_m=f(base.gamma_m), power=f(base.power), mu=f(base.mu), d=f(base.d),
        delta_tilde1=f(base.delta_tilde1),
    )


def random_stable_points(n=100, seed=1):
    """n stable (Equilibrium, SystemParams) pairs within +-50% of the coupled point."""
    rng = np.random.default_rng(seed)
    base = coupled_params()
    points = []
    while len(points) < n:
        params = perturbed(base, rng)
        eq = solve_equilibrium(params)
        if stability_check(drift_matrix(eq, params)).stable:
            points.append((eq, params))
    return points


def random_points(n=100, seed=2):
    """n pairs within +-50% of the coupled point with the detuning sign randomized."""
    rng = np.random.default_rng(seed)
    base = coupled_params()
    points = []
    for _ in range(n):
        params = perturbed(base, rng)
        if rng.random() < 0.3:
            params = params.with_(delta_tilde1=-params.delta_tilde1)
        points.append((solve_equilibrium(params), params))
    return points


def rel(a, b):
    return abs(a - b) / abs(b)
