"""Column-array view of many linearized operating points.

Sweeps evaluate thousands of (equilibrium, params) pairs.  ``PointSet`` holds
one array per quantity so that polynomials, drift matrices and spectra can
be built for all points at once.  The scalar functions elsewhere in the
package are thin wrappers over these batched kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import InvalidParam
from .model import HBAR, Direct, SystemParams, drive_strength, validate
from .steadystate import Equilibrium


@dataclass(frozen=True)
class PointSet:
    """N operating points; every field is a float array of shape (N,)."""

    omega_m: np.ndarray
    g: np.ndarray
    delta_tilde1: np.ndarray
    delta2: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    mu: np.ndarray
    gamma_m: np.ndarray
    mass: np.ndarray
    temperature: np.ndarray

    @classmethod
    def from_columns(cls, **columns) -> "PointSet":
        names = [f.name for f in fields(cls)]
        missing = set(names) - set(columns)
        if missing:
            raise TypeError(f"missing columns: {sorted(missing)}")
        arrays = np.broadcast_arrays(*(np.asarray(columns[n], dtype=float) for n in names))
        return cls(**{n: np.ascontiguousarray(a).ravel() for n, a in zip(names, arrays)})

    @classmethod
    def from_points(cls, points) -> "PointSet":
        rows = [
            (eq.omega_m, eq.g, eq.delta_tilde1, eq.delta2, p.kappa1, p.kappa2, p.mu,
             p.gamma_m, p.mass, p.temperature)
            for eq, p in points
        ]
        table = np.array(rows, dtype=float).reshape(-1, 10)
        return cls(*table.T.copy())

    def __len__(self) -> int:
        return len(self.omega_m)

    def take(self, index) -> "PointSet":
        return PointSet(*(getattr(self, f.name)[index] for f in fields(self)))


def direct_points(params: SystemParams, delta_tilde1, mu=None, d=None) -> tuple[PointSet, np.ndarray]:
    """Vectorized Direct-mode equilibria; returns (points, n1).

    ``delta_tilde1``, ``mu`` and ``d`` broadcast against each other; omitted
    values come from ``params``.  Points where the optical spring overturns
    the trap get omega_m = nan.
    """
    validate(params)
    mode = params.position_mode
    if not isinstance(mode, Direct):
        raise InvalidParam("position_mode", "direct_points requires Direct mode")
    mu = params.mu if mu is None else mu
    d = params.d if d is None else d
    dt1, mu, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (delta_tilde1, mu, d)))
    if np.any(mu < 0):
        raise InvalidParam("mu", "must be >= 0")
    delta2 = dt1 + d
    E = drive_strength(params).E
    cavity1 = params.kappa1 / 2 - 1j * dt1
    cavity2 = params.kappa2 / 2 - 1j * delta2
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha1 = np.where(mu == 0, E / cavity1, E * cavity2 / (cavity1 * cavity2 + mu**2))
    n1 = np.abs(alpha1) ** 2
    cos2 = mode.cos2k1x0
    sin2 = math.sqrt(max(0.0, 1.0 - cos2 * cos2))
    k1, A, m = params.k1, params.shift_amplitude, params.mass
    omega_m_sq = params.omega_trap**2 + 2 * HBAR * k1**2 * A / m * n1 * cos2
    omega_m = np.sqrt(np.where(omega_m_sq > 0, omega_m_sq, np.nan))
    g = k1 * A * sin2 * np.sqrt(n1) * np.sqrt(HBAR / (2 * m * omega_m))
    points = PointSet.from_columns(
        omega_m=omega_m, g=g, delta_tilde1=dt1, delta2=delta2,
        kappa1=params.kappa1, kappa2=params.kappa2, mu=mu, gamma_m=params.gamma_m,
        mass=m, temperature=params.temperature,
    )
    return points, n1.ravel()


# --- polynomials ----------------------------------------------------------------

def _polymul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise product of ascending coefficient arrays (..., la) and (..., lb)."""
    la, lb = a.shape[-1], b.shape[-1]
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (la + lb - 1,)
    out = np.zeros(shape, dtype=np.result_type(a, b))
    for i in range(la):
        out[..., i:i + lb] += a[..., i:i + 1] * b
    return out


def _polyadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] < b.shape[-1]:
        a, b = b, a
    out = a.copy()
    out[..., : b.shape[-1]] += b
    return out


def optical_coeffs(pts: PointSet) -> np.ndarray:
    """Ascending coefficients (N, 5) of R(s), the two-cavity polynomial."""
    k1h, k2h = pts.kappa1 / 2, pts.kappa2 / 2
    dt1, d2, mu2 = pts.delta_tilde1, pts.delta2, pts.mu**2
    one = np.ones_like(k1h)
    # R = (a b - dt1 d2 + mu^2)^2 + (dt1 b + d2 a)^2 with a = s + k1/2, b = s + k2/2
    x = np.stack([k1h * k2h - dt1 * d2 + mu2, k1h + k2h, one], axis=-1)
    y = np.stack([dt1 * k2h + d2 * k1h, dt1 + d2], axis=-1)
    return _polyadd(_polymul(x, x), _polymul(y, y))


def char_coeffs(pts: PointSet) -> np.ndarray:
    """Ascending coefficients (N, 7) of P(s) = m (s^2 + Gamma_m s + omega_m^2) R(s) + T(s)."""
    m, w, g = pts.mass, pts.omega_m, pts.g
    k2h = pts.kappa2 / 2
    dt1, d2, mu2 = pts.delta_tilde1, pts.delta2, pts.mu**2
    mechanical = m[:, None] * np.stack([w**2, pts.gamma_m, np.ones_like(w)], axis=-1)
    # T = 4 m w_m g^2 (dt1 b^2 + dt1 d2^2 - d2 mu^2), b = s + k2/2
    scale = 4 * m * w * g**2
    feedback = scale[:, None] * np.stack(
        [dt1 * k2h**2 + dt1 * d2**2 - d2 * mu2, 2 * dt1 * k2h, dt1], axis=-1
    )
    return _polyadd(_polymul(mechanical, optical_coeffs(pts)), feedback)


def roots_many(coeffs: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Roots of each row of ``coeffs`` via companion matrices of p(scale * z)."""
    coeffs = np.atleast_2d(coeffs)
    n = coeffs.shape[-1] - 1
    scale = np.broadcast_to(np.asarray(scale, dtype=float), coeffs.shape[:1])
    scaled = coeffs * scale[:, None] ** np.arange(n + 1)
    monic = scaled[:, :-1] / scaled[:, -1:]
    companion = np.zeros((len(coeffs), n, n))
    companion[:, np.arange(1, n), np.arange(n - 1)] = 1.0
    companion[:, :, -1] = -monic
    return np.linalg.eigvals(companion) * scale[:, None]


def horner_derivatives(coeffs: np.ndarray, s: np.ndarray):
    """(p(s), p'(s), p''(s)) for each row of ascending ``coeffs``."""
    p = np.zeros_like(s, dtype=complex)
    dp = np.zeros_like(p)
    half_ddp = np.zeros_like(p)
    for c in coeffs[:, ::-1].T:
        half_ddp = half_ddp * s + dp
        dp = dp * s + p
        p = p * s + c
    return p, dp, 2 * half_ddp


# --- drift matrix -----------------------------------------------------------------

def scaled_drift_many(pts: PointSet) -> np.ndarray:
    """Drift matrices (N, 6, 6) in natural units (x in x_zpf, p in m omega_m x_zpf).

    Same spectrum as response.drift_matrix; in these units the optomechanical
    entries are -g (field from x) and -4 g (force from Re a1).
    """
    n = len(pts)
    a = np.zeros((n, 6, 6))
    k1h, k2h = pts.kappa1 / 2, pts.kappa2 / 2
    a[:, 0, 0] = a[:, 1, 1] = -k1h
    a[:, 2, 2] = a[:, 3, 3] = -k2h
    a[:, 0, 1], a[:, 1, 0] = -pts.delta_tilde1, pts.delta_tilde1
    a[:, 2, 3], a[:, 3, 2] = -pts.delta2, pts.delta2
    a[:, 0, 3], a[:, 1, 2] = pts.mu, -pts.mu
    a[:, 2, 1], a[:, 3, 0] = pts.mu, -pts.mu
    a[:, 1, 4] = -pts.g
    a[:, 4, 5] = pts.omega_m
    a[:, 5, 0] = -4 * pts.g
    a[:, 5, 4] = -pts.omega_m
    a[:, 5, 5] = -pts.gamma_m
    return a


def max_real_eigen(pts: PointSet) -> np.ndarray:
    """Largest real part of the drift eigenvalues; nan where omega_m is undefined."""
    out = np.full(len(pts), np.nan)
    ok = np.isfinite(pts.omega_m) & np.isfinite(pts.g)
    if ok.any():
        eig = np.linalg.eigvals(scaled_drift_many(pts.take(ok)))
        out[ok] = eig.real.max(axis=1)
    return out
