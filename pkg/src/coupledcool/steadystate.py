"""Steady-state fields and nanosphere position, and photon-number scans."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParam, NoConvergence, UnstableSystem
from .model import HBAR, Direct, SelfConsistent, SystemParams, drive_strength, validate


@dataclass(frozen=True)
class Equilibrium:
    alpha1: complex
    alpha2: complex
    x0: float
    delta_tilde1: float
    delta2: float
    omega_m: float
    g0: float
    g: float
    n1: float
    n2: float
    cos2k1x0: float
    iterations: int = 0


def cavity_fields(E: float, delta_tilde1, delta2, params: SystemParams):
    """Steady-state (alpha1, alpha2) for drive E; detunings may be arrays.

    alpha2 solves 0 = (i Delta2 - kappa2/2) alpha2 - i mu alpha1, the fixed
    point of the cavity-2 equation of motion.
    """
    cavity1 = params.kappa1 / 2 - 1j * np.asarray(delta_tilde1)
    if params.mu == 0:
        return E / cavity1, np.zeros_like(cavity1)
    # common denominator stays finite when cavity 2 is lossless and resonant
    cavity2 = params.kappa2 / 2 - 1j * np.asarray(delta2)
    denominator = cavity1 * cavity2 + params.mu**2
    return E * cavity2 / denominator, -1j * params.mu * E / denominator


def _mechanics(params: SystemParams, n1: float, cos2: float, sin2: float):
    omega_m_sq = params.omega_trap**2 + 2 * HBAR * params.k1**2 * params.shift_amplitude / params.mass * n1 * cos2
    if omega_m_sq <= 0:
        raise UnstableSystem(
            "optical force overturns the trap: omega_m^2 <= 0",
            omega_m_sq=omega_m_sq,
        )
    omega_m = math.sqrt(omega_m_sq)
    g0 = params.k1 * params.shift_amplitude * sin2
    g = g0 * math.sqrt(n1) * math.sqrt(HBAR / (2 * params.mass * omega_m))
    return omega_m, g0, g


def solve_equilibrium(
    params: SystemParams,
    damping: float = 0.5,
    max_iterations: int = 1000,
) -> Equilibrium:
    """Solve the equilibrium for the cavity fields and nanosphere position.

    In ``Direct`` mode the position enters only through the given
    cos(2 k1 x0).  In ``SelfConsistent`` mode the bare detuning
    Delta_1 = Delta~_1 - A cos^2(k1 x_t) and Delta_2 = Delta~_1 + d are those
    set at the trap position; x0 is found by damped fixed-point iteration and
    Delta~_1 is recomputed from Delta_1 on every pass.

    Raises NoConvergence when the iteration stalls (bistable landscape or a
    drive strong enough to pull the particle out of the trap).  Retrying with
    a smaller ``damping`` sometimes helps.
    """
    validate(params)
    E = drive_strength(params).E
    mode = params.position_mode
    k1, A = params.k1, params.shift_amplitude

    if isinstance(mode, Direct):
        cos2 = mode.cos2k1x0
        sin2 = math.sqrt(max(0.0, 1.0 - cos2 * cos2))
        x0 = math.acos(cos2) / (2 * k1)
        alpha1, alpha2 = cavity_fields(E, params.delta_tilde1, params.delta2, params)
        delta_tilde1, delta2, iterations = params.delta_tilde1, params.delta2, 0
    elif isinstance(mode, SelfConsistent):
        if not 0 < damping <= 1:
            raise InvalidParam("damping", f"must lie in (0, 1], got {damping!r}")
        x_t = mode.x_trap
        delta1 = params.delta_tilde1 - A * math.cos(k1 * x_t) ** 2
        delta2 = params.delta2
        stiffness = HBAR * k1 * A / (params.mass * params.omega_trap**2)
        tol = 1e-12 * abs(x_t) + 1e-18
        x0 = x_t
        residual = math.inf
        for iterations in range(1, max_iterations + 1):
            delta_tilde1 = delta1 + A * math.cos(k1 * x0) ** 2
            alpha1, alpha2 = cavity_fields(E, delta_tilde1, delta2, params)
            target = x_t - stiffness * abs(alpha1) ** 2 * math.sin(2 * k1 * x0)
            residual = x0 - target
            if abs(residual) <= tol:
                break
            x0 = (1 - damping) * x0 + damping * target
        else:
            raise NoConvergence(max_iterations, abs(residual))
        cos2, sin2 = math.cos(2 * k1 * x0), math.sin(2 * k1 * x0)
    else:
        raise InvalidParam("position_mode", f"unknown mode {mode!r}")

    alpha1, alpha2 = complex(alpha1), complex(alpha2)
    n1 = abs(alpha1) ** 2
    omega_m, g0, g = _mechanics(params, n1, cos2, sin2)
    return Equilibrium(
        alpha1=alpha1,
        alpha2=alpha2,
        x0=x0,
        delta_tilde1=float(delta_tilde1),
        delta2=float(delta2),
        omega_m=omega_m,
        g0=g0,
        g=g,
        n1=n1,
        n2=abs(alpha2) ** 2,
        cos2k1x0=cos2,
        iterations=iterations,
    )


def photon_number_scan(params: SystemParams, delta_grid) -> np.ndarray:
    """Rows of (Delta~_1, n1, n2) over ``delta_grid`` at fixed offset d (Direct mode only)."""
    validate(params)
    if not isinstance(params.position_mode, Direct):
        raise InvalidParam("position_mode", "photon_number_scan requires Direct mode")
    delta = np.asarray(delta_grid, dtype=float)
    E = drive_strength(params).E
    alpha1, alpha2 = cavity_fields(E, delta, delta + params.d, params)
    return np.column_stack([delta, np.abs(alpha1) ** 2, np.abs(alpha2) ** 2])
