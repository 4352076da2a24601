"""Independent references for the cooling rate.

The stationary covariance of the linear Langevin system solves a Lyapunov
equation; with thermal forcing of the momentum only, it gives the mechanical
energy and hence Gamma_eff = Gamma_m k_B T / E_m without any frequency
integral.  A seeded Euler-Maruyama ensemble gives a stochastic sanity check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularSolve, StepTooLarge, UnstableSystem
from .model import K_B, SystemParams
from .response import DriftMatrix, drift_matrix, stability_check
from .steadystate import Equilibrium


@dataclass(frozen=True)
class Covariance:
    """Stationary covariance in state order (Re a1, Im a1, Re a2, Im a2, x, p), SI units."""

    sigma: np.ndarray
    omega_m: float
    mass: float

    @property
    def x2(self) -> float:
        return float(self.sigma[4, 4])

    @property
    def p2(self) -> float:
        return float(self.sigma[5, 5])

    @property
    def mechanical_energy(self) -> float:
        return self.p2 / (2 * self.mass) + 0.5 * self.mass * self.omega_m**2 * self.x2


def _omega_m_from(drift: DriftMatrix, params: SystemParams) -> float:
    # a[5, 4] = -m omega_m^2
    return math.sqrt(-drift.a[5, 4] / params.mass)


def lyapunov_covariance(drift: DriftMatrix, params: SystemParams) -> Covariance:
    """Solve A S + S A^T + D = 0 with D = 2 m Gamma_m k_B T in the (p, p) slot only.

    The 36-unknown linear system is solved in natural units (see
    DriftMatrix.scale) with one step of iterative refinement.
    """
    verdict = stability_check(drift)
    if not verdict.stable:
        raise UnstableSystem("no stationary covariance for an unstable system", max_re=verdict.max_re)
    scale = drift.scale
    a = drift.scaled()
    d = np.zeros((6, 6))
    d[5, 5] = 2 * params.mass * params.gamma_m * K_B * params.temperature / scale[5] ** 2
    eye = np.eye(6)
    # row-major vec: vec(A S) = (A kron I) vec S, vec(S A^T) = (I kron A) vec S
    op = np.kron(a, eye) + np.kron(eye, a)
    rhs = -d.ravel()
    try:
        vec = np.linalg.solve(op, rhs)
        vec += np.linalg.solve(op, rhs - op @ vec)
    except np.linalg.LinAlgError as exc:
        raise SingularSolve(f"Lyapunov system is singular: {exc}") from None
    sigma_scaled = vec.reshape(6, 6)
    sigma_scaled = 0.5 * (sigma_scaled + sigma_scaled.T)
    residual = np.linalg.norm(a @ sigma_scaled + sigma_scaled @ a.T + d)
    # normwise backward error; |D| alone is unreachable in double precision when Q is high
    bound = 1e-10 * (np.linalg.norm(d) + 2 * np.linalg.norm(a) * np.linalg.norm(sigma_scaled))
    if not np.isfinite(residual) or residual > bound:
        raise SingularSolve("Lyapunov residual too large", residual=float(residual))
    sigma = sigma_scaled * np.outer(scale, scale)
    return Covariance(sigma=sigma, omega_m=_omega_m_from(drift, params), mass=params.mass)


def gamma_eff_lyapunov(covariance: Covariance, params: SystemParams) -> float:
    """Gamma_eff = Gamma_m k_B T / E_m."""
    return params.gamma_m * K_B * params.temperature / covariance.mechanical_energy


@dataclass(frozen=True)
class LangevinEstimate:
    mean_Em: float
    stderr: float
    n_trajectories: int
    burn_in_steps: int


def langevin_trajectory(
    params: SystemParams,
    eq: Equilibrium,
    seed: int,
    dt: float,
    n_steps: int,
    n_trajectories: int = 256,
) -> LangevinEstimate:
    """Time-averaged mechanical energy from an Euler-Maruyama ensemble.

    Each trajectory starts at rest, discards 10 relaxation times (the slowest
    energy decay rate of the drift matrix), then averages E_m over
    ``n_steps`` steps.  The standard error is taken across the independent
    trajectories.  Output is a deterministic function of ``seed``.
    """
    drift = drift_matrix(eq, params)
    eigen = drift.eigenvalues()
    if np.max(eigen.real) >= 0:
        raise UnstableSystem("Langevin ensemble has no stationary state", max_re=float(np.max(eigen.real)))
    dt_max = 0.01 / max(eq.omega_m, params.kappa1)
    if dt > dt_max:
        raise StepTooLarge(f"dt = {dt:.3e} s exceeds {dt_max:.3e} s", dt=dt, dt_max=dt_max)
    a = drift.scaled()
    step = np.eye(6) + a * dt
    if np.max(np.abs(np.linalg.eigvals(step))) >= 1:
        raise StepTooLarge("Euler-Maruyama map is not contractive at this dt", dt=dt)

    slowest = 2 * float(np.min(-eigen.real))
    burn_in = int(math.ceil(10 / (slowest * dt)))
    scale = drift.scale
    noise_sd = math.sqrt(2 * params.mass * params.gamma_m * K_B * params.temperature * dt) / scale[5]
    rng = np.random.default_rng(seed)

    state = np.zeros((n_trajectories, 6))
    step_t = step.T
    for _ in range(burn_in):
        state = state @ step_t
        state[:, 5] += noise_sd * rng.standard_normal(n_trajectories)

    # energy in units of hbar omega_m / 4 per quadrature: E = hbar w_m (X^2 + P^2) / 4
    acc = np.zeros(n_trajectories)
    for _ in range(n_steps):
        state = state @ step_t
        state[:, 5] += noise_sd * rng.standard_normal(n_trajectories)
        acc += state[:, 4] ** 2 + state[:, 5] ** 2
    unit = 0.5 * params.mass * eq.omega_m**2 * scale[4] ** 2
    per_trajectory = unit * acc / n_steps
    return LangevinEstimate(
        mean_Em=float(per_trajectory.mean()),
        stderr=float(per_trajectory.std(ddof=1) / math.sqrt(n_trajectories)),
        n_trajectories=n_trajectories,
        burn_in_steps=burn_in,
    )
