import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from coupledcool import cooling, oracle
from coupledcool.errors import DegenerateModes, NoJointOptimum, QuadratureFailure, UnstableSystem
from coupledcool.model import K_B, reference_params
from coupledcool.points import PointSet, direct_points
from coupledcool.response import drift_matrix, s_xx, stability_check
from coupledcool.steadystate import solve_equilibrium

from support import (
    D_STAR, DELTA_STAR, MU_QUARTER, OMEGA_T, coupled_params, random_points, random_stable_points, rel,
    single_params,
)


def routh_stable(coefficients_ascending):
    """Routh-Hurwitz test in exact rational arithmetic."""
    desc = [Fraction(float(c)) for c in coefficients_ascending[::-1]]
    rows = [desc[0::2], desc[1::2]]
    width = len(rows[0])
    rows = [r + [Fraction(0)] * (width - len(r)) for r in rows]
    for _ in range(len(desc) - 2):
        upper, lower = rows[-2], rows[-1]
        if lower[0] == 0:
            return False
        new = [(lower[0] * upper[j + 1] - upper[0] * lower[j + 1]) / lower[0] for j in range(width - 1)]
        rows.append(new + [Fraction(0)])
    first = [r[0] for r in rows]
    return all(v > 0 for v in first) or all(v < 0 for v in first)


# --- single-Lorentzian rate ----------------------------------------------------------

def test_sl_rate_vanishes_without_coupling():
    params = coupled_params(power=0.0)
    assert cooling.gamma_opt_sl(solve_equilibrium(params), params) == 0.0


def test_sl_rate_on_red_sideband():
    params = single_params(kappa2=0.0)
    eq = solve_equilibrium(params)
    k, w = params.kappa1, eq.omega_m
    expected = 4 * eq.g**2 / k * (1 - k**2 / (16 * w**2 + k**2))
    assert cooling.gamma_opt_sl(eq, params) == pytest.approx(expected, rel=1e-12)
    assert cooling.gamma_opt_sl(eq, params) == pytest.approx(4 * eq.g**2 / k, rel=k**2 / (16 * w**2))


def test_lossless_second_cavity_form_agrees():
    params = coupled_params(kappa2=0.0)
    eq = solve_equilibrium(params)
    assert cooling.gamma_opt_sl_kappa2_zero(eq, params) == pytest.approx(cooling.gamma_opt_sl(eq, params), rel=1e-12)


def test_coupled_optimum_beats_single_cavity_by_ten():
    single = cooling.gamma_opt_sl(solve_equilibrium(single_params()), single_params())
    params = coupled_params()
    assert cooling.gamma_opt_sl(solve_equilibrium(params), params) > 10 * single


# --- detuning laws -----------------------------------------------------------------------

def test_detuning_laws_single_cavity():
    laws = cooling.optimal_detunings(0.0, OMEGA_T, OMEGA_T)
    (d_plus, delta_plus), (d_minus, delta_minus) = laws.joint
    assert (d_plus, delta_plus) == (OMEGA_T, -OMEGA_T)
    assert (d_minus, delta_minus) == (-OMEGA_T, 0.0)


def test_detuning_laws_symmetric_offset():
    laws = cooling.optimal_detunings(OMEGA_T / 2, 0.0, OMEGA_T)
    assert laws.joint[0][0] == 0.0
    assert cooling.joint_optimum(OMEGA_T / 2, OMEGA_T) == (0.0, -OMEGA_T / 2)


def test_detuning_laws_quarter_coupling():
    d_star, delta_star = cooling.joint_optimum(MU_QUARTER, OMEGA_T, +1)
    assert d_star / OMEGA_T == pytest.approx(0.8660, abs=5e-5)
    assert delta_star / OMEGA_T == pytest.approx(-0.9330, abs=5e-5)
    assert cooling.joint_optimum(MU_QUARTER, OMEGA_T, -1)[0] == -d_star
    laws = cooling.optimal_detunings(MU_QUARTER, D_STAR, OMEGA_T)
    root = math.sqrt(D_STAR**2 / 4 + MU_QUARTER**2)
    assert laws.numerator_max == (-D_STAR / 2 + root, -D_STAR / 2 - root)
    assert laws.denominator_min == (-OMEGA_T - D_STAR / 2 + root, -OMEGA_T - D_STAR / 2 - root)


def test_joint_optimum_needs_weak_intercavity_coupling():
    with pytest.raises(NoJointOptimum):
        cooling.joint_optimum(0.6 * OMEGA_T, OMEGA_T)
    assert cooling.optimal_detunings(0.6 * OMEGA_T, 0.0, OMEGA_T).joint is None
    with pytest.raises(ValueError):
        cooling.optimal_detunings(0.0, 0.0, 0.0)


def test_joint_optimum_is_grid_maximum_of_sl_rate():
    params = coupled_params(power=1e-5)
    d_axis = np.linspace(0.5e6, 2e6, 301)
    delta_axis = np.linspace(-3e6, -1e6, 401)
    dd, tt = np.meshgrid(d_axis, delta_axis, indexing="ij")
    pts, _ = direct_points(params, tt, d=dd)
    rate = cooling.gamma_opt_sl_many(pts).reshape(dd.shape)
    i, j = np.unravel_index(np.argmax(rate), rate.shape)
    assert d_axis[i] == pytest.approx(D_STAR, rel=0.01)
    assert delta_axis[j] == pytest.approx(DELTA_STAR, rel=0.01)


# --- characteristic polynomial ------------------------------------------------------------

def test_uncoupled_polynomial_has_bare_mechanical_root():
    params = coupled_params(power=0.0)
    eq = solve_equilibrium(params)
    roots = cooling.char_poly_roots(cooling.char_poly(eq, params), eq.omega_m)
    target = complex(-params.gamma_m / 2, eq.omega_m)
    assert np.min(np.abs(roots - target)) <= 1e-12 * eq.omega_m
    assert np.min(np.abs(roots - target.conjugate())) <= 1e-12 * eq.omega_m


def test_optical_polynomial_factorizes_without_intercavity_coupling():
    params = reference_params(kappa2=0.0, mu=0.0, d=3e5)
    eq = solve_equilibrium(params)
    s = sympy.Symbol("s")
    k1h = sympy.Rational(Fraction(params.kappa1 / 2))
    dt1 = sympy.Rational(Fraction(eq.delta_tilde1))
    d2 = sympy.Rational(Fraction(eq.delta2))
    expected = sympy.Poly(sympy.expand(((s + k1h) ** 2 + dt1**2) * (s**2 + d2**2)), s).all_coeffs()[::-1]
    got = cooling.optical_poly(eq, params).coef
    for c_got, c_exp in zip(got, expected):
        assert c_got == pytest.approx(float(c_exp), rel=1e-14, abs=1e-300)


def test_polynomial_roots_match_drift_eigenvalues():
    worst = 0.0
    for eq, params in random_stable_points(100, seed=1):
        roots = np.sort_complex(cooling.char_poly_roots(cooling.char_poly(eq, params), eq.omega_m))
        eig = np.sort_complex(drift_matrix(eq, params).eigenvalues())
        worst = max(worst, np.max(np.abs(roots - eig) / np.abs(eig)))
    assert worst <= 1e-8


def test_routh_hurwitz_agrees_with_eigenvalues():
    points = random_points(100, seed=2)
    verdicts = [stability_check(drift_matrix(eq, params)).stable for eq, params in points]
    assert any(verdicts) and not all(verdicts)
    for (eq, params), stable in zip(points, verdicts):
        assert routh_stable(cooling.char_poly(eq, params).coef) == stable


# --- hybrid modes ------------------------------------------------------------------------

def test_taylor_modes_reduce_to_bare_oscillator():
    params = coupled_params(power=0.0)
    eq = solve_equilibrium(params)
    s0 = complex(-params.gamma_m / 2, -eq.omega_m)
    first, second = cooling.taylor_roots_many(
        cooling.char_poly(eq, params).coef[None, :], np.array([s0]), np.array([eq.omega_m])
    )
    # the unperturbed root is returned exactly; which slot it lands in depends on the optics
    hit = min(abs(first[0] - s0), abs(second[0] - s0))
    assert hit <= 1e-15 * eq.omega_m


@pytest.mark.parametrize("power", [1e-3, 5e-3])
def test_taylor_roots_near_exact_roots_single_cavity(power):
    params = single_params(power=power)
    eq = solve_equilibrium(params)
    assert eq.g <= params.kappa1
    poly = cooling.char_poly(eq, params)
    modes = cooling.taylor_modes(poly, eq, params)
    roots = cooling.char_poly_roots(poly, eq.omega_m)
    for s in (modes.s1, modes.s2):
        assert np.min(np.abs(roots - s)) / abs(s) <= 0.01


@pytest.mark.xfail(strict=True, reason="second-order expansion misses the hybridized cavity root by ~5% with two cavities")
def test_taylor_roots_near_exact_roots_coupled():
    params = coupled_params(power=1e-3)
    eq = solve_equilibrium(params)
    poly = cooling.char_poly(eq, params)
    modes = cooling.taylor_modes(poly, eq, params)
    roots = cooling.char_poly_roots(poly, eq.omega_m)
    for s in (modes.s1, modes.s2):
        assert np.min(np.abs(roots - s)) / abs(s) <= 0.01


def test_strong_coupling_splitting_tracks_exact_roots():
    params = coupled_params()
    eq = solve_equilibrium(params)
    poly = cooling.char_poly(eq, params)
    modes = cooling.taylor_modes(poly, eq, params)
    roots = cooling.char_poly_roots(poly, eq.omega_m)
    lower = roots[roots.imag < 0]
    nearest = lower[np.argsort(np.abs(lower - modes.s0))[:2]]
    exact_split = abs(abs(nearest[0].imag) - abs(nearest[1].imag))
    assert modes.omega_m1 < eq.omega_m < modes.omega_m2
    assert modes.omega_m2 - modes.omega_m1 == pytest.approx(exact_split, rel=0.10)


def test_unresolved_modes_raise():
    params = single_params(power=1e-5)
    eq = solve_equilibrium(params)
    with pytest.raises(DegenerateModes):
        cooling.taylor_modes(cooling.char_poly(eq, params), eq, params)
    rate, modes, c1, c2, fell_back = cooling.dl_rate(eq, params)
    assert fell_back and modes is None and c1 is None
    assert rate == params.gamma_m + cooling.gamma_opt_sl(eq, params)


# --- double-Lorentzian constants and rate -----------------------------------------------------

def test_dl_weights_interpolate_exact_spectrum():
    params = coupled_params()
    eq = solve_equilibrium(params)
    modes = cooling.taylor_modes(cooling.char_poly(eq, params), eq, params)
    c1, c2 = cooling.dl_constants(modes, eq, params)
    from coupledcool.response import approx_psd

    at = np.array([modes.omega_m1, modes.omega_m2])
    np.testing.assert_allclose(approx_psd(eq, params, at, "DL", modes=modes, constants=(c1, c2)),
                               s_xx(eq, params, at), rtol=1e-10)


def test_dl_weights_far_second_peak():
    params = coupled_params()
    eq = solve_equilibrium(params)
    modes = cooling.taylor_modes(cooling.char_poly(eq, params), eq, params)
    far = dataclasses.replace(modes, omega_m2=100 * modes.omega_m1)
    c1, _ = cooling.dl_constants(far, eq, params)
    single_match = s_xx(eq, params, modes.omega_m1) * (modes.omega_m1 * modes.gamma_1) ** 2
    assert c1 == pytest.approx(single_match, rel=1e-6)


@pytest.mark.parametrize("power", [2e-3, 3e-3, 5e-3, 1e-2])
def test_dl_weights_positive_at_strongly_coupled_joint_optimum(power):
    params = coupled_params(power=power)
    eq = solve_equilibrium(params)
    assert eq.g >= 0.2 * params.kappa1
    _, _, c1, c2, fell_back = cooling.dl_rate(eq, params)
    assert not fell_back
    assert c1 > 0 and c2 > 0


@pytest.mark.xfail(strict=True, reason="interpolation weights turn negative near the avoided crossing, confirmed at 50 digits")
def test_dl_weights_non_negative_across_red_scan():
    base = coupled_params()
    checked = 0
    for delta in np.linspace(-3, -0.05, 60) * OMEGA_T:
        params = base.with_(delta_tilde1=delta)
        eq = solve_equilibrium(params)
        if not stability_check(drift_matrix(eq, params)).stable:
            continue
        _, modes, c1, c2, fell_back = cooling.dl_rate(eq, params)
        if fell_back:
            continue
        checked += 1
        assert c1 >= 0 and c2 >= 0
    assert checked >= 10


def test_dl_rate_single_peak_reduction():
    params = reference_params()
    eq = solve_equilibrium(params)
    gamma = 4321.0
    modes = cooling.HybridModes(eq.omega_m, 3 * eq.omega_m, gamma, 1.0, 0j, 0j, 0j)
    weight = 2 * params.gamma_m * K_B * params.temperature / params.mass
    assert cooling.gamma_eff_dl(modes, weight, 0.0, eq, params) == pytest.approx(gamma, rel=1e-12)


def test_dl_rate_without_coupling():
    params = coupled_params(power=0.0)
    rate, _, _, _, fell_back = cooling.dl_rate(solve_equilibrium(params), params)
    assert fell_back
    assert rate == pytest.approx(params.gamma_m, rel=1e-9)


def test_dl_rejects_undamped_modes():
    params = coupled_params()
    eq = solve_equilibrium(params)
    modes = cooling.HybridModes(1.9e6, 2.1e6, -1.0, 5.0, 0j, 0j, 0j)
    with pytest.raises(UnstableSystem):
        cooling.dl_constants(modes, eq, params)
    with pytest.raises(UnstableSystem):
        cooling.gamma_eff_dl(modes, 1.0, 1.0, eq, params)


def test_dl_batch_matches_scalar():
    points = random_stable_points(20, seed=5)
    batch = cooling.dl_rate_many(PointSet.from_points(points))
    for k, (eq, params) in enumerate(points):
        rate, _, _, _, fell_back = cooling.dl_rate(eq, params)
        assert bool(batch.fallback[k]) == fell_back
        assert batch.gamma_eff[k] == pytest.approx(rate, rel=1e-10)


# --- exact rate ---------------------------------------------------------------------------------

def test_exact_rate_without_coupling_is_intrinsic_damping():
    params = coupled_params(power=0.0)
    assert cooling.gamma_eff_exact(solve_equilibrium(params), params) == pytest.approx(params.gamma_m, rel=1e-8)


def test_exact_rate_matches_covariance_route():
    points = random_stable_points(30, seed=7)
    exact = cooling.gamma_eff_exact_many(points)
    for value, (eq, params) in zip(exact, points):
        lyap = oracle.gamma_eff_lyapunov(oracle.lyapunov_covariance(drift_matrix(eq, params), params), params)
        assert rel(value, lyap) <= 1e-6


def test_exact_rate_weak_single_cavity_close_to_sl():
    params = single_params(power=1e-4)
    eq = solve_equilibrium(params)
    exact = cooling.gamma_eff_exact(eq, params)
    assert rel(params.gamma_m + cooling.gamma_opt_sl(eq, params), exact) <= 0.02


def test_red_detuning_cools():
    for eq, params in random_stable_points(30, seed=9):
        assert params.delta_tilde1 < 0
        assert cooling.gamma_eff_exact(eq, params) > params.gamma_m


def test_exact_rate_refuses_unstable_point():
    params = coupled_params(delta_tilde1=OMEGA_T)
    with pytest.raises(UnstableSystem):
        cooling.gamma_eff_exact(solve_equilibrium(params), params)
    with pytest.raises(UnstableSystem):
        cooling.cooling_result(params)


def test_exact_rate_reports_unreachable_tolerance():
    params = coupled_params()
    with pytest.raises(QuadratureFailure) as info:
        cooling.gamma_eff_exact(solve_equilibrium(params), params, rtol=1e-20)
    assert info.value.tolerance_achieved > 1e-20


def test_exact_rate_independent_of_batch_composition():
    points = random_stable_points(10, seed=13)
    together = cooling.gamma_eff_exact_many(points)
    alone = np.array([cooling.gamma_eff_exact_many([p])[0] for p in points])
    np.testing.assert_array_equal(together, alone)


def test_cooling_result_collects_every_route():
    params = coupled_params()
    result = cooling.cooling_result(params)
    assert result.stable and not result.dl_fallback and result.max_re < 0
    assert rel(result.gamma_eff_exact, result.gamma_eff_lyapunov) <= 1e-6
    assert rel(result.gamma_eff_dl, result.gamma_eff_exact) <= 0.10
    assert result.modes is not None and result.c1 > 0 and result.c2 > 0
