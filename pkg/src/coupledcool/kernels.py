"""Compiled energy integrand used by the exact quadrature.

The integrand (omega_m^2 + omega^2) m^2 |chi(omega)|^2 is evaluated at
hundreds of thousands of nodes per sweep, so it is compiled with numba when
available: as a numpy ufunc, and fused with the Gauss-Kronrod panel sums so
that no (panels x nodes) temporaries are built.  The numpy expression built
on ``response.inverse_chi_kernel`` is the reference and the fallback.
"""

from __future__ import annotations

import numpy as np

from .quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES
from .response import inverse_chi_kernel

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def energy_integrand_numpy(anchor, offset, omega_m, g, delta_tilde1, delta2, kappa1, kappa2, mu, gamma_m):
    inv = inverse_chi_kernel(anchor, omega_m, g, delta_tilde1, delta2, kappa1, kappa2, mu, gamma_m, offset=offset)
    w = anchor + offset
    return (omega_m**2 + w**2) / (inv.real**2 + inv.imag**2)


def _energy_integrand_scalar(anchor, offset, omega_m, g, delta_tilde1, delta2, kappa1, kappa2, mu, gamma_m):
    # same algebra as inverse_chi_kernel, one node at a time
    k1h = 0.5 * kappa1
    k2h = 0.5 * kappa2
    mu2 = mu * mu
    b_plus = complex(k2h, -((anchor + delta2) + offset))
    b_minus = complex(k2h, -((anchor - delta2) + offset))
    if mu2 == 0.0:
        b_plus = b_minus = 1.0 + 0.0j
    den_plus = complex(k1h, -((anchor + delta_tilde1) + offset)) * b_plus + mu2
    den_minus = complex(k1h, -((anchor - delta_tilde1) + offset)) * b_minus + mu2
    feedback = (4.0 * omega_m * g * g) * (delta_tilde1 * b_plus * b_minus - mu2 * delta2) / (den_plus * den_minus)
    w = anchor + offset
    inv = complex(((omega_m - anchor) - offset) * (omega_m + w), -w * gamma_m) + feedback
    return (omega_m * omega_m + w * w) / (inv.real * inv.real + inv.imag * inv.imag)


def _energy_panel_sums(anchor, lo, hi, omega_m, g, delta_tilde1, delta2, kappa1, kappa2, mu, gamma_m):
    # same sums as quadrature.panel_sums, one panel at a time
    n = anchor.shape[0]
    kron = np.empty(n)
    gauss = np.empty(n)
    resasc = np.empty(n)
    resabs = np.empty(n)
    fx = np.empty(15)
    for i in range(n):
        mid = 0.5 * (lo[i] + hi[i])
        half = 0.5 * (hi[i] - lo[i])
        k = 0.0
        gs = 0.0
        for j in range(15):
            fx[j] = _integrand(anchor[i], mid + half * NODES[j], omega_m[i], g[i], delta_tilde1[i], delta2[i],
                               kappa1[i], kappa2[i], mu[i], gamma_m[i])
            k += fx[j] * KRONROD_WEIGHTS[j]
            gs += fx[j] * GAUSS_WEIGHTS[j]
        k *= half
        mean = k / (2 * half) if half > 0 else k
        asc = 0.0
        absolute = 0.0
        for j in range(15):
            asc += abs(fx[j] - mean) * KRONROD_WEIGHTS[j]
            absolute += abs(fx[j]) * KRONROD_WEIGHTS[j]
        kron[i] = k
        gauss[i] = half * gs
        resasc[i] = half * asc
        resabs[i] = half * absolute
    return kron, gauss, resasc, resabs


if numba is not None:
    energy_integrand = numba.vectorize(["float64(" + ",".join(["float64"] * 10) + ")"], cache=True)(
        _energy_integrand_scalar
    )
    _integrand = numba.njit(cache=True)(_energy_integrand_scalar)
    energy_panel_sums = numba.njit(cache=True)(_energy_panel_sums)
    COMPILED = True
else:  # pragma: no cover
    energy_integrand = energy_integrand_numpy
    energy_panel_sums = None
    COMPILED = False
