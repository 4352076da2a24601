"""Optical cooling rates.

Three routes to the effective damping Gamma_eff = Gamma_m + Gamma_opt:

* single Lorentzian: closed form from the optical response at omega_m;
* double Lorentzian: hybrid modes from a second-order Taylor expansion of the
  characteristic polynomial around the bare mechanical root, with the two
  Lorentzian weights matched to the exact spectrum at the mode frequencies;
* exact: adaptive quadrature of the energy integral over |chi|^2.

The Lyapunov route in ``oracle`` gives the same number as the exact route by
a different path and is used to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from . import quadrature
from .kernels import energy_integrand, energy_panel_sums
from .errors import DegenerateModes, NoJointOptimum, UnstableSystem
from .model import K_B, SystemParams
from .points import PointSet, char_coeffs, horner_derivatives, optical_coeffs, roots_many
from .response import (
    StabilityVerdict,
    chi_o,
    drift_matrix,
    inverse_chi_kernel,
    s_xx,
    stability_check,
)
from .steadystate import Equilibrium, solve_equilibrium

__all__ = [
    "CoolingResult", "DLBatch", "HybridModes", "OptimalDetunings", "StabilityVerdict",
    "char_poly", "char_poly_roots", "cooling_result", "dl_constants", "dl_rate", "dl_rate_many",
    "gamma_eff_dl", "gamma_eff_exact", "gamma_eff_exact_many", "gamma_eff_exact_points",
    "gamma_opt_sl", "gamma_opt_sl_many",
    "gamma_opt_sl_kappa2_zero", "joint_optimum", "optimal_detunings",
    "optical_poly", "stability_check", "taylor_modes",
]

DEGENERACY_THRESHOLD = 0.01
QUAD_RTOL = 1e-9
TAIL_RTOL = 1e-10


# --- single Lorentzian --------------------------------------------------------

def gamma_opt_sl(eq: Equilibrium, params: SystemParams) -> float:
    """Gamma_opt = 2 g^2 Re[chi_o(w_m) - chi_o*(-w_m)] with the full optical response."""
    w = eq.omega_m
    return float(2 * eq.g**2 * (chi_o(eq, params, w).real - chi_o(eq, params, -w).real))


def gamma_opt_sl_kappa2_zero(eq: Equilibrium, params: SystemParams) -> float:
    """Anti-Stokes minus Stokes rate in the kappa2 -> 0 limit (diagnostic)."""
    w, dt1, d2, mu, k1 = eq.omega_m, eq.delta_tilde1, eq.delta2, params.mu, params.kappa1
    g2k = eq.g**2 * k1
    anti_stokes = g2k / ((k1 / 2) ** 2 + (w + dt1 - mu**2 / (w + d2)) ** 2)
    stokes = g2k / ((k1 / 2) ** 2 + (w - dt1 - mu**2 / (w - d2)) ** 2)
    return float(anti_stokes - stokes)


@dataclass(frozen=True)
class OptimalDetunings:
    """Detuning laws for the anti-Stokes term in the kappa2 -> 0 limit.

    ``denominator_min``: Delta~_1 values that put the anti-Stokes sideband on
    an optical resonance.  ``numerator_max``: Delta~_1 values maximizing the
    cavity-1 photon number (the "+" root is the Lorentzian peak, the "-" root
    the Fano peak).  ``joint``: ((d+, Delta~_1+), (d-, Delta~_1-)) satisfying
    both at once, or None when 2 mu > omega_m.
    """

    denominator_min: tuple[float, float]
    numerator_max: tuple[float, float]
    joint: tuple[tuple[float, float], tuple[float, float]] | None


def joint_optimum(mu: float, omega_m: float, branch: int = 1) -> tuple[float, float]:
    """(d*, Delta~_1*) with omega_m = sqrt(d*^2 + 4 mu^2) and Delta~_1* = -(omega_m + d*)/2."""
    if 2 * mu > omega_m:
        raise NoJointOptimum(
            "omega_m = sqrt(d^2 + 4 mu^2) has no real solution for 2 mu > omega_m",
            mu=mu, omega_m=omega_m,
        )
    d_star = math.copysign(math.sqrt(omega_m**2 - 4 * mu**2), branch)
    return d_star, -(omega_m + d_star) / 2


def optimal_detunings(mu: float, d: float, omega_m: float) -> OptimalDetunings:
    if omega_m <= 0:
        raise ValueError("omega_m must be positive")
    root = math.sqrt(d**2 / 4 + mu**2)
    numerator = (-d / 2 + root, -d / 2 - root)
    denominator = (-omega_m + numerator[0], -omega_m + numerator[1])
    joint = None
    if 2 * mu <= omega_m:
        joint = (joint_optimum(mu, omega_m, +1), joint_optimum(mu, omega_m, -1))
    return OptimalDetunings(denominator, numerator, joint)


# --- characteristic polynomial and hybrid modes -------------------------------

def optical_poly(eq: Equilibrium, params: SystemParams) -> Polynomial:
    """R(s): characteristic polynomial of the two coupled cavities alone."""
    return Polynomial(optical_coeffs(PointSet.from_points([(eq, params)]))[0])


def char_poly(eq: Equilibrium, params: SystemParams) -> Polynomial:
    """P(s) = m (s^2 + Gamma_m s + omega_m^2) R(s) + T(s), degree 6, ascending coefficients."""
    return Polynomial(char_coeffs(PointSet.from_points([(eq, params)]))[0])


def char_poly_roots(poly: Polynomial, scale: float) -> np.ndarray:
    """Roots of ``poly`` via the companion matrix of poly(scale * z)."""
    return roots_many(poly.coef[None, :], scale)[0]


@dataclass(frozen=True)
class HybridModes:
    omega_m1: float
    omega_m2: float
    gamma_1: float
    gamma_2: float
    s0: complex
    s1: complex
    s2: complex


def taylor_roots_many(coeffs: np.ndarray, s0: np.ndarray, scale: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Roots of the second-order Taylor polynomial of each P about s0, lower |Im| first.

    Evaluated on p(scale * z) so that the derivatives stay of order one.
    """
    scale = np.asarray(scale, dtype=float)
    scaled = coeffs * scale[:, None] ** np.arange(coeffs.shape[1])
    z0 = s0 / scale
    p0, p1, p2 = horner_derivatives(scaled, z0)
    disc = np.sqrt(p1 * p1 - 2 * p2 * p0 + 0j)
    plus = (z0 + (-p1 + disc) / p2) * scale
    minus = (z0 + (-p1 - disc) / p2) * scale
    swap = np.abs(minus.imag) < np.abs(plus.imag)
    return np.where(swap, minus, plus), np.where(swap, plus, minus)


def _degenerate(w1, w2, g1, g2):
    return (w2 - w1) < DEGENERACY_THRESHOLD * (g1 + g2)


def taylor_modes(poly: Polynomial, eq: Equilibrium, params: SystemParams) -> HybridModes:
    """Two natural frequencies near the bare mechanical root s0 = -i omega_m - Gamma_m/2.

    Roots of the second-order Taylor polynomial of P about s0; each root s
    gives a frequency |Im s| and a decay rate -2 Re s.  Modes are ordered by
    frequency.  Raises DegenerateModes when the two frequencies are closer
    than 1% of the summed decay rates.
    """
    s0 = complex(-params.gamma_m / 2, -eq.omega_m)
    first, second = taylor_roots_many(poly.coef[None, :], np.array([s0]), np.array([eq.omega_m]))
    s1, s2 = complex(first[0]), complex(second[0])
    modes = HybridModes(
        omega_m1=abs(s1.imag),
        omega_m2=abs(s2.imag),
        gamma_1=-2 * s1.real,
        gamma_2=-2 * s2.real,
        s0=s0,
        s1=s1,
        s2=s2,
    )
    if _degenerate(modes.omega_m1, modes.omega_m2, modes.gamma_1, modes.gamma_2):
        raise DegenerateModes(
            "hybrid modes are not resolved; use the single-Lorentzian rate",
            omega_m1=modes.omega_m1, omega_m2=modes.omega_m2,
            gamma_1=modes.gamma_1, gamma_2=modes.gamma_2,
        )
    return modes


def _s_xx_columns(pts: PointSet, omega):
    inv = inverse_chi_kernel(
        omega, pts.omega_m, pts.g, pts.delta_tilde1, pts.delta2,
        pts.kappa1, pts.kappa2, pts.mu, pts.gamma_m,
    )
    return 2 * pts.gamma_m * K_B * pts.temperature / (pts.mass * (inv.real**2 + inv.imag**2))


def _dl_weights(w1, w2, g1, g2, s1, s2):
    """Solve the 2x2 system matching the double Lorentzian to (s1, s2) at (w1, w2)."""
    split = (w1 - w2) * (w1 + w2)
    a11 = 1 / (w1 * g1) ** 2
    a12 = 1 / (split**2 + (w1 * g2) ** 2)
    a21 = 1 / (split**2 + (w2 * g1) ** 2)
    a22 = 1 / (w2 * g2) ** 2
    det = a11 * a22 - a12 * a21
    c1 = (a22 * s1 - a12 * s2) / det
    c2 = (a11 * s2 - a21 * s1) / det
    well_posed = (det > 0) & (det >= 1e-12 * a11 * a22)
    return c1, c2, well_posed


def _dl_gamma(w1, w2, g1, g2, c1, c2, omega_m, gamma_m, mass, temperature):
    total = c1 * (omega_m**2 + w1**2) / (2 * w1**2 * g1) + c2 * (omega_m**2 + w2**2) / (2 * w2**2 * g2)
    return 2 * gamma_m * K_B * temperature / (mass * total)


def dl_constants(modes: HybridModes, eq: Equilibrium, params: SystemParams) -> tuple[float, float]:
    """Weights (C1, C2) making the double Lorentzian equal S_xx at omega_m1 and omega_m2."""
    w1, w2, g1, g2 = modes.omega_m1, modes.omega_m2, modes.gamma_1, modes.gamma_2
    if g1 <= 0 or g2 <= 0:
        raise UnstableSystem("hybrid modes are not damped", gamma_1=g1, gamma_2=g2)
    s1, s2 = s_xx(eq, params, np.array([w1, w2]), check_stability=False)
    c1, c2, well_posed = _dl_weights(w1, w2, g1, g2, s1, s2)
    if not well_posed:
        raise DegenerateModes("double-Lorentzian weights are ill-determined")
    return float(c1), float(c2)


def gamma_eff_dl(modes: HybridModes, c1: float, c2: float, eq: Equilibrium, params: SystemParams) -> float:
    """Gamma_eff from the energy integral of the double-Lorentzian spectrum.

    C1 and C2 carry S_xx units, so the sum is normalized by 2 Gamma_m k_B T / m.
    """
    if modes.gamma_1 <= 0 or modes.gamma_2 <= 0:
        raise UnstableSystem("hybrid modes are not damped", gamma_1=modes.gamma_1, gamma_2=modes.gamma_2)
    return float(_dl_gamma(
        modes.omega_m1, modes.omega_m2, modes.gamma_1, modes.gamma_2, c1, c2,
        eq.omega_m, params.gamma_m, params.mass, params.temperature,
    ))


@dataclass(frozen=True)
class DLBatch:
    """Double-Lorentzian rates for a PointSet; ``fallback`` marks SL substitutes."""

    gamma_eff: np.ndarray
    fallback: np.ndarray
    omega_m1: np.ndarray
    omega_m2: np.ndarray
    gamma_1: np.ndarray
    gamma_2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray


def gamma_opt_sl_many(pts: PointSet) -> np.ndarray:
    def optical(w):
        cavity2 = pts.kappa2 / 2 - 1j * (w + pts.delta2)
        return 1.0 / (pts.kappa1 / 2 - 1j * (w + pts.delta_tilde1) + pts.mu**2 / cavity2)

    return 2 * pts.g**2 * (optical(pts.omega_m).real - optical(-pts.omega_m).real)


def dl_rate_many(pts: PointSet) -> DLBatch:
    """Batched dl_rate: the double-Lorentzian Gamma_eff, or Gamma_m + SL where the
    hybrid modes are absent (g = 0), degenerate, undamped, or their weights are
    ill-determined."""
    s0 = -pts.gamma_m / 2 - 1j * pts.omega_m
    first, second = taylor_roots_many(char_coeffs(pts), s0, pts.omega_m)
    w1, w2 = np.abs(first.imag), np.abs(second.imag)
    g1, g2 = -2 * first.real, -2 * second.real
    with np.errstate(divide="ignore", invalid="ignore"):
        c1, c2, well_posed = _dl_weights(w1, w2, g1, g2, _s_xx_columns(pts, w1), _s_xx_columns(pts, w2))
        dl = _dl_gamma(w1, w2, g1, g2, c1, c2, pts.omega_m, pts.gamma_m, pts.mass, pts.temperature)
    fallback = _degenerate(w1, w2, g1, g2) | (g1 <= 0) | (g2 <= 0) | ~well_posed | ~(pts.g > 0)
    gamma = np.where(fallback, pts.gamma_m + gamma_opt_sl_many(pts), dl)
    return DLBatch(gamma, fallback, w1, w2, g1, g2, c1, c2)


# --- exact quadrature ---------------------------------------------------------

_GRADING = 4.0
_TAIL_RATIO = 8.0
_CHUNK = 64


def _panels(pts: PointSet):
    """Flat panel arrays (anchor, lo, hi, owner) and the cut-off W of each point.

    Breakpoints are graded geometrically towards every pole of chi and every
    zero of the optical polynomial (their |Im| parts, half-width |Re|), up to
    four times the outermost feature; beyond that a geometric tail runs to W.
    """
    w = pts.omega_m
    poles = roots_many(char_coeffs(pts), w)
    zeros = roots_many(optical_coeffs(pts), w)
    features = np.concatenate([poles, zeros], axis=1)
    centers = np.abs(features.imag)
    widths = np.maximum(np.abs(features.real), 1e-12 * w[:, None])
    reach = 4 * np.max(centers + widths, axis=1)
    # |chi|^2 (w_m^2 + w^2) m^2 -> 1/w^2, so the tail beyond W is 1/W per side.
    # Gamma_eff <= sum of all decay rates bounds the total integral from below.
    gamma_bound = 2 * np.sum(np.abs(poles.real), axis=1)
    upper = np.maximum(64 * reach, gamma_bound / (math.pi * TAIL_RTOL))

    n_grade = int(np.ceil(np.max(np.log(reach[:, None] / widths)) / np.log(_GRADING))) + 1
    offsets = widths[..., None] * _GRADING ** np.arange(n_grade)
    c = centers[..., None]
    graded = np.concatenate([c, c - offsets, c + offsets], axis=-1).reshape(len(pts), -1)
    graded = np.where((graded >= 0) & (graded <= reach[:, None]), graded, reach[:, None])
    # per-point tail length, padded with W, so each point's panels do not
    # depend on which other points share the batch
    n_tail = np.maximum(1, np.ceil(np.log(upper / reach) / np.log(_TAIL_RATIO))).astype(int)
    k = np.minimum(np.arange(n_tail.max() + 1)[None, :], n_tail[:, None])
    tail = reach[:, None] * (upper / reach)[:, None] ** (k / n_tail[:, None])
    tail[k == n_tail[:, None]] = np.broadcast_to(upper[:, None], tail.shape)[k == n_tail[:, None]]
    edges = np.sort(np.concatenate([np.zeros((len(pts), 1)), graded, tail], axis=1), axis=1)

    lo, hi = edges[:, :-1], edges[:, 1:]
    anchors = np.concatenate([np.zeros((len(pts), 1)), w[:, None], centers], axis=1)
    mid = 0.5 * (lo + hi)
    nearest = np.argmin(np.abs(mid[:, :, None] - anchors[:, None, :]), axis=2)
    anchor = np.take_along_axis(anchors, nearest, axis=1)
    keep = hi > lo
    owner = np.broadcast_to(np.arange(len(pts))[:, None], lo.shape)
    return anchor[keep], (lo - anchor)[keep], (hi - anchor)[keep], owner[keep], upper


def gamma_eff_exact_points(pts: PointSet, rtol: float = QUAD_RTOL) -> np.ndarray:
    """Exact Gamma_eff for every point of ``pts``; the caller guarantees stability."""
    out = np.empty(len(pts))
    names = ("omega_m", "g", "delta_tilde1", "delta2", "kappa1", "kappa2", "mu", "gamma_m")
    for start in range(0, len(pts), _CHUNK):
        chunk = pts.take(slice(start, start + _CHUNK))
        cols = [getattr(chunk, name) for name in names]

        def integrand(anchor, offset, owner, cols=cols):
            return energy_integrand(anchor, offset, *(col[owner] for col in cols))

        def sums(anchor, lo, hi, owner, cols=cols):
            return energy_panel_sums(anchor, lo, hi, *(col[owner] for col in cols))

        anchor, lo, hi, owner, upper = _panels(chunk)
        half_line, _ = quadrature.integrate_flat(
            integrand, anchor, lo, hi, owner, len(chunk), rtol=rtol,
            sums=sums if energy_panel_sums is not None else None,
        )
        out[start:start + len(chunk)] = 2 * math.pi / (2 * (half_line + 1.0 / upper))
    return out


def gamma_eff_exact_many(points: list[tuple[Equilibrium, SystemParams]], rtol: float = QUAD_RTOL) -> np.ndarray:
    """Exact Gamma_eff for several (equilibrium, params) pairs in one batched quadrature.

    The caller is responsible for stability; see gamma_eff_exact.
    """
    if not points:
        return np.empty(0)
    return gamma_eff_exact_points(PointSet.from_points(points), rtol=rtol)


def gamma_eff_exact(eq: Equilibrium, params: SystemParams, rtol: float = QUAD_RTOL) -> float:
    """Gamma_eff = 2 pi / (m^2 int (omega_m^2 + omega^2) |chi|^2 d omega) over the real line.

    The integrand is even in omega; the half line [0, W] is integrated
    adaptively with breakpoints graded around every pole and optical zero,
    and the 1/omega^2 tail beyond W is added in closed form.
    """
    verdict = stability_check(drift_matrix(eq, params))
    if not verdict.stable:
        raise UnstableSystem("energy integral diverges for an unstable system", max_re=verdict.max_re)
    return float(gamma_eff_exact_many([(eq, params)], rtol=rtol)[0])


# --- combined result ----------------------------------------------------------

@dataclass(frozen=True)
class CoolingResult:
    gamma_opt_sl: float
    gamma_eff_dl: float
    gamma_eff_exact: float
    gamma_eff_lyapunov: float
    c1: float | None
    c2: float | None
    stable: bool
    modes: HybridModes | None
    dl_fallback: bool = False
    max_re: float = field(default=float("nan"))


def dl_rate(eq: Equilibrium, params: SystemParams) -> tuple[float, HybridModes | None, float | None, float | None, bool]:
    """(Gamma_eff, modes, c1, c2, fell_back): the double-Lorentzian rate, or the
    single-Lorentzian Gamma_m + Gamma_opt when the hybrid modes are degenerate.

    The Taylor estimate can also yield a non-positive decay rate for a system
    whose drift matrix is stable; that is a failure of the approximation, not
    an instability, and takes the same fallback.
    """
    try:
        if not eq.g > 0:
            raise DegenerateModes("no optomechanical coupling, so no hybrid modes")
        modes = taylor_modes(char_poly(eq, params), eq, params)
        if modes.gamma_1 <= 0 or modes.gamma_2 <= 0:
            raise DegenerateModes("Taylor estimate gives an undamped hybrid mode")
        c1, c2 = dl_constants(modes, eq, params)
        return gamma_eff_dl(modes, c1, c2, eq, params), modes, c1, c2, False
    except DegenerateModes:
        return params.gamma_m + gamma_opt_sl(eq, params), None, None, None, True


def cooling_result(params: SystemParams, eq: Equilibrium | None = None) -> CoolingResult:
    """Evaluate every route at one parameter point; raises UnstableSystem when unstable."""
    from .oracle import gamma_eff_lyapunov, lyapunov_covariance

    if eq is None:
        eq = solve_equilibrium(params)
    drift = drift_matrix(eq, params)
    verdict = stability_check(drift)
    if not verdict.stable:
        raise UnstableSystem("linearized dynamics are unstable", max_re=verdict.max_re)
    gamma_dl, modes, c1, c2, fallback = dl_rate(eq, params)
    covariance = lyapunov_covariance(drift, params)
    return CoolingResult(
        gamma_opt_sl=gamma_opt_sl(eq, params),
        gamma_eff_dl=gamma_dl,
        gamma_eff_exact=gamma_eff_exact(eq, params),
        gamma_eff_lyapunov=gamma_eff_lyapunov(covariance, params),
        c1=c1,
        c2=c2,
        stable=True,
        modes=modes,
        dl_fallback=fallback,
        max_re=verdict.max_re,
    )

