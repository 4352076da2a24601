"""Linear response around the equilibrium.

Frequency-domain quantities follow x(t) = int x(omega) exp(-i omega t) d omega,
so a decaying mode exp(s t) with s = -Gamma/2 - i Omega shows up as a peak at
omega = Omega.  All functions accept scalar or array ``omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnstableSystem
from .model import HBAR, K_B, SystemParams
from .steadystate import Equilibrium

STATE_LABELS = ("re_a1", "im_a1", "re_a2", "im_a2", "x", "p")


def chi_o(eq: Equilibrium, params: SystemParams, omega):
    """Optical response of the cavity-1 field to displacement."""
    omega = np.asarray(omega, dtype=float)
    cavity1 = params.kappa1 / 2 - 1j * (omega + eq.delta_tilde1)
    if params.mu == 0:
        return 1.0 / cavity1
    cavity2 = params.kappa2 / 2 - 1j * (omega + eq.delta2)
    return cavity2 / (cavity1 * cavity2 + params.mu**2)


def inverse_chi_kernel(omega, omega_m, g, delta_tilde1, delta2, kappa1, kappa2, mu, gamma_m, offset=0.0):
    """1 / (m chi(omega + offset)) from plain numbers; every argument broadcasts.

    The two optical terms are combined over one denominator,

        chi_o(w) - chi_o*(-w) = 2i (Dt1 b(w) b'(w) - mu^2 D2) / (D(w) D'(w)),

    with b = k2/2 - i(w + D2), b' = k2/2 - i(w - D2), D = (k1/2 - i(w + Dt1)) b + mu^2
    and D' likewise with the detunings negated; for mu = 0 the cavity-2
    factors cancel and b = b' = 1 is used.  Resonant differences are
    formed as (anchor +- detuning) + offset, so a small ``offset`` keeps full
    precision next to a sharp line.
    """
    omega = np.asarray(omega, dtype=float)
    k1h, k2h = 0.5 * kappa1, 0.5 * kappa2
    mu2 = mu * mu
    b_plus = k2h - 1j * ((omega + delta2) + offset)
    b_minus = k2h - 1j * ((omega - delta2) + offset)
    decoupled = mu2 == 0
    b_plus = np.where(decoupled, 1.0, b_plus)
    b_minus = np.where(decoupled, 1.0, b_minus)
    den_plus = (k1h - 1j * ((omega + delta_tilde1) + offset)) * b_plus + mu2
    den_minus = (k1h - 1j * ((omega - delta_tilde1) + offset)) * b_minus + mu2
    feedback = (4 * omega_m * g * g) * (delta_tilde1 * b_plus * b_minus - mu2 * delta2) / (den_plus * den_minus)
    # (w_m - w)(w_m + w) keeps the resonant difference exact near w = w_m
    w = omega + offset
    bare = ((omega_m - omega) - offset) * (omega_m + w) - 1j * w * gamma_m
    return bare + feedback


def _inverse_chi_over_m(eq: Equilibrium, params: SystemParams, omega):
    return inverse_chi_kernel(
        omega, eq.omega_m, eq.g, eq.delta_tilde1, eq.delta2,
        params.kappa1, params.kappa2, params.mu, params.gamma_m,
    )


def chi(eq: Equilibrium, params: SystemParams, omega):
    """Mechanical susceptibility x(omega) / xi(omega), in s^2/kg."""
    return 1.0 / (params.mass * _inverse_chi_over_m(eq, params, omega))


def m2_abs_chi_sq(eq: Equilibrium, params: SystemParams, omega):
    """m^2 |chi(omega)|^2, the mass-free form used by the quadrature."""
    return 1.0 / np.abs(_inverse_chi_over_m(eq, params, omega)) ** 2


def s_xx(eq: Equilibrium, params: SystemParams, omega, *, check_stability: bool = True):
    """Displacement spectral density 2 m Gamma_m k_B T |chi|^2 (m^2 s)."""
    if check_stability:
        verdict = stability_check(drift_matrix(eq, params))
        if not verdict.stable:
            raise UnstableSystem("S_xx is undefined for an unstable system", max_re=verdict.max_re)
    return 2 * params.mass * params.gamma_m * K_B * params.temperature * np.abs(chi(eq, params, omega)) ** 2


def single_lorentzian(omega, omega_m: float, gamma: float, params: SystemParams):
    """Single-Lorentzian PSD with centre omega_m and linewidth gamma."""
    omega = np.asarray(omega, dtype=float)
    numerator = 2 * params.gamma_m * K_B * params.temperature / params.mass
    return numerator / (((omega - omega_m) * (omega + omega_m)) ** 2 + (omega * gamma) ** 2)


def double_lorentzian(omega, omega_1: float, gamma_1: float, omega_2: float, gamma_2: float, c1: float, c2: float):
    omega = np.asarray(omega, dtype=float)
    first = c1 / (((omega - omega_1) * (omega + omega_1)) ** 2 + (omega * gamma_1) ** 2)
    second = c2 / (((omega - omega_2) * (omega + omega_2)) ** 2 + (omega * gamma_2) ** 2)
    return first + second


def approx_psd(eq: Equilibrium, params: SystemParams, omega, form: str = "SL", modes=None, constants=None):
    """Single- ("SL") or double-Lorentzian ("DL") approximation of S_xx.

    SL uses Gamma = Gamma_m + Gamma_opt from the single-Lorentzian rate.  DL
    takes hybrid ``modes`` and ``constants`` = (c1, c2); both are computed
    when omitted, which may raise DegenerateModes.
    """
    from . import cooling

    form = form.upper()
    if form == "SL":
        gamma = params.gamma_m + cooling.gamma_opt_sl(eq, params)
        return single_lorentzian(omega, eq.omega_m, gamma, params)
    if form == "DL":
        if modes is None:
            modes = cooling.taylor_modes(cooling.char_poly(eq, params), eq, params)
        if constants is None:
            constants = cooling.dl_constants(modes, eq, params)
        c1, c2 = constants
        return double_lorentzian(omega, modes.omega_m1, modes.gamma_1, modes.omega_m2, modes.gamma_2, c1, c2)
    raise ValueError(f"form must be 'SL' or 'DL', got {form!r}")


@dataclass(frozen=True)
class DriftMatrix:
    """Real drift matrix of the fluctuations, state (Re a1, Im a1, Re a2, Im a2, x, p).

    ``scale`` holds the natural unit of each state component (1 for the
    optical quadratures, the zero-point amplitude for x, m omega_m x_zpf for
    p); ``scaled()`` returns diag(scale)^-1 a diag(scale), which has entries
    of comparable size and the same spectrum.
    """

    a: np.ndarray
    scale: np.ndarray

    def scaled(self) -> np.ndarray:
        return self.a * self.scale[None, :] / self.scale[:, None]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.scaled())


def drift_matrix(eq: Equilibrium, params: SystemParams) -> DriftMatrix:
    """Drift matrix in the gauge where alpha1 is real and non-negative."""
    alpha = abs(eq.alpha1)
    k1h, k2h = params.kappa1 / 2, params.kappa2 / 2
    dt1, d2, mu = eq.delta_tilde1, eq.delta2, params.mu
    m = params.mass
    coupling = eq.g0 * alpha
    a = np.array(
        [
            [-k1h, -dt1, 0.0, mu, 0.0, 0.0],
            [dt1, -k1h, -mu, 0.0, -coupling, 0.0],
            [0.0, mu, -k2h, -d2, 0.0, 0.0],
            [-mu, 0.0, d2, -k2h, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / m],
            [-2 * HBAR * coupling, 0.0, 0.0, 0.0, -m * eq.omega_m**2, -params.gamma_m],
        ]
    )
    x_unit = math.sqrt(HBAR / (2 * m * eq.omega_m))
    scale = np.array([1.0, 1.0, 1.0, 1.0, x_unit, m * eq.omega_m * x_unit])
    return DriftMatrix(a=a, scale=scale)


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    max_re: float


def stability_check(drift: DriftMatrix) -> StabilityVerdict:
    """Stable iff every eigenvalue of the drift matrix has negative real part."""
    max_re = float(np.max(drift.eigenvalues().real))
    return StabilityVerdict(stable=max_re < 0, max_re=max_re)
