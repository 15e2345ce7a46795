import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from adelim.cp_analysis import diagonal_map, diagonal_map_positivity, is_completely_positive, is_lindbladian
from adelim.dispersive import (
    CoefficientZeroCrossing,
    DispersiveParams,
    composite_model,
    d_scan,
    d_value,
    diagonal_gauge_umax,
    exact_maps,
    exact_master_equation,
    exact_taylor_coefficients,
    fourth_order_coefficients,
    fourth_order_generator,
    lindblad_criterion,
    s_matrix,
    sample_pure_states,
    slow_spectrum,
    tau_basis,
    total_generator,
)
from adelim.elimination import CompositeModel, eliminate
from adelim.spectral import NearDegenerate
from adelim.superop_core import partial_trace_superop

QUTRIT = DispersiveParams.ladder(3, 0.1, 0.5, 0.5)


@st.composite
def dispersive_params(draw, d_min=2, d_max=4):
    d = draw(st.integers(d_min, d_max))
    chis = draw(st.lists(st.floats(-1.5, 1.5), min_size=d, max_size=d))
    omega = draw(st.floats(0.1, 2.0))
    delta = draw(st.floats(-2.0, 2.0))
    kappa = draw(st.floats(0.5, 2.0))
    return DispersiveParams(tuple(chis), omega, delta, kappa)


def lambdas_from(Ls, d):
    # L_s is diagonal on matrix units; vec(E_mn) sits at n*d + m
    return np.diag(Ls).reshape(d, d).T


def test_params_validation():
    with pytest.raises(ValueError):
        DispersiveParams((0.0, 1.0), 1.0, 0.0, kappa=0.0)
    with pytest.raises(ValueError):
        DispersiveParams((1.0,), 1.0, 0.0)
    p = DispersiveParams.ladder(4, 0.2, 1.0, 0.0)
    assert p.d == 4
    assert p.chis == (0.0, 0.2, 0.4, 0.6000000000000001)


def test_zero_coupling_gives_zero_spectrum():
    s = slow_spectrum(DispersiveParams((0.0, 0.0, 0.0), 0.7, -0.3))
    assert_allclose(s.lambdas, 0, atol=1e-12)


@given(dispersive_params())
def test_slow_spectrum_properties(p):
    try:
        s = slow_spectrum(p)
    except NearDegenerate:
        return
    lam = s.lambdas / p.kappa
    assert_allclose(np.diag(lam), 0, atol=1e-10)
    assert_allclose(lam.conj(), lam.T, atol=1e-10)
    assert lam.real.max() <= 1e-10
    for m in range(p.d):
        for n in range(p.d):
            assert abs(np.trace(s.Qs[m, n]) - 1) < 1e-12
            assert_allclose(s.Qs[m, n].conj().T, s.Qs[n, m], atol=1e-10)


def test_qutrit_point_has_gap():
    assert slow_spectrum(QUTRIT).gap_ok


def test_rotating_frame_shift():
    p = DispersiveParams((0.0, 0.3, -0.2), 0.8, 0.4)
    omegas = np.array([0.0, 1.3, -0.7])
    s = slow_spectrum(p)
    K, _ = exact_maps(s)
    shifted = s.lambdas - 1j * (omegas[:, None] - omegas[None, :])
    # K still intertwines, with eigenvalues moved by the qudit frequencies
    L = total_generator(p, omegas)
    R = K @ diagonal_map(shifted) - L @ K
    assert np.abs(R).max() < 1e-9
    # and the shifted value is what a direct eigen-solve returns
    for m in range(3):
        for n in range(3):
            col = K[:, n * 3 + m]
            assert_allclose(L @ col, shifted[m, n] * col, atol=1e-9)


@given(dispersive_params(d_max=3))
def test_exact_maps_intertwine(p):
    try:
        s = slow_spectrum(p)
    except NearDegenerate:
        return
    K, Ls = exact_maps(s)
    assert np.abs(K @ Ls - total_generator(p) @ K).max() < 1e-9 * max(1.0, p.kappa)
    trA = partial_trace_superop(2, p.d, over="A")
    assert_allclose(trA @ K, np.eye(p.d**2), atol=1e-12)


def test_reduced_semigroup_is_diagonal():
    s = slow_spectrum(QUTRIT)
    _, Ls = exact_maps(s)
    t = 3.0
    E = sla.expm(Ls * t)
    assert_allclose(E, diagonal_map(np.exp(s.lambdas * t)), atol=1e-12)


def test_engine_matches_exact_taylor_series():
    base = DispersiveParams.ladder(3, 1.0, 0.5, 0.5)
    model, _ = composite_model(base, chi=1.0)
    exp = eliminate(model, 4)
    taylor = exact_taylor_coefficients(base, order=4, chi=1.0)
    for n in range(1, 5):
        assert_allclose(lambdas_from(exp.Ls[n], 3), taylor[n], atol=1e-7)


def test_engine_sum_close_to_exact_at_small_coupling():
    eps = 1e-3
    base = DispersiveParams.ladder(3, 1.0, 0.5, 0.5)
    model, _ = composite_model(base, chi=1.0)
    exp = eliminate(model, 4)
    exact = slow_spectrum(DispersiveParams.ladder(3, eps, 0.5, 0.5)).lambdas
    assert_allclose(lambdas_from(exp.Ls_sum(eps), 3), exact, atol=1e-13)


def test_s_matrix_maps_projectors_to_tau():
    for d in (2, 3, 5):
        S = s_matrix(d)
        taus = tau_basis(d)
        # columns of S give tau_k-weighted traceless combinations
        for k, tau in enumerate(taus):
            col = S[:, k]
            assert abs(col.sum()) < 1e-14
            assert_allclose(col, np.diag(tau) / np.dot(np.diag(tau), np.diag(tau)), atol=1e-14)
    with pytest.raises(ValueError):
        s_matrix(1)


def test_two_level_always_lindblad():
    for omega, delta in [(0.5, 0.5), (2.0, -1.0), (0.2, 3.0)]:
        s = slow_spectrum(DispersiveParams((0.0, 0.7), omega, delta))
        crit = lindblad_criterion(s)
        assert crit.is_lindblad
        assert_allclose(crit.StlS[0, 0], -s.lambdas[0, 1].real / 2, rtol=1e-12)


def test_d_for_equal_real_rates():
    g = 0.37
    lam = -g * (np.ones((3, 3)) - np.eye(3))
    assert_allclose(d_value(lam), 3 * g**2, rtol=1e-14)


def test_qutrit_point_not_lindblad():
    crit = lindblad_criterion(slow_spectrum(QUTRIT))
    assert crit.D < 0
    assert not crit.is_lindblad


@given(dispersive_params(d_min=3, d_max=3))
def test_criterion_agrees_with_generic_test(p):
    try:
        s = slow_spectrum(p)
    except NearDegenerate:
        return
    crit = lindblad_criterion(s, tol=1e-9)
    lam = s.lambdas / p.kappa
    if abs(crit.D) / p.kappa**2 > 1e-8:
        assert crit.is_lindblad == (crit.D > 0)
    if crit.eigenvalues.min() / p.kappa < -1e-8 or crit.eigenvalues.min() / p.kappa > 1e-8:
        assert bool(is_lindbladian(diagonal_map(lam), tol=1e-9)) == crit.is_lindblad


def test_d_scan_matches_pointwise_values():
    omegas = [0.3, 0.5, 1.7]
    deltas = [-1.0, 0.5]
    scan = d_scan(QUTRIT.chis, omegas, deltas)
    for i, om in enumerate(omegas):
        for j, de in enumerate(deltas):
            s = slow_spectrum(DispersiveParams(QUTRIT.chis, om, de))
            assert_allclose(scan.D[i, j], d_value(s.lambdas), atol=1e-12)
            assert scan.gap_ok[i, j] == s.gap_ok
    with pytest.raises(ValueError):
        d_scan((0.0, 0.1), omegas, deltas)
    with pytest.raises(ValueError):
        d_scan(QUTRIT.chis, [], deltas)


@pytest.mark.parametrize("omega,delta", [(0.5, 0.5), (1.2, -0.4), (0.3, 2.0)])
def test_closed_form_generator_matches_engine(omega, delta):
    b = (0.0, 1.0, 2.0)
    coeffs = fourth_order_coefficients(omega, delta)
    closed = fourth_order_generator(coeffs, b)
    model, _ = composite_model(DispersiveParams(b, omega, delta), chi=1.0)
    exp = eliminate(model, 4)
    for n in range(1, 5):
        assert_allclose(closed[n - 1], exp.Ls[n], atol=1e-9)


def test_closed_form_as_written_matches_reversed_coupling():
    b = (0.0, 0.6, -1.0)
    coeffs = fourth_order_coefficients(0.9, -0.3)
    closed = fourth_order_generator(coeffs, b, coupling_sign=-1)
    model, _ = composite_model(DispersiveParams(b, 0.9, -0.3), chi=1.0)
    flipped = CompositeModel(2, 3, model.L_A, -model.H_int)
    exp = eliminate(flipped, 4)
    for n in range(1, 5):
        assert_allclose(closed[n - 1], exp.Ls[n], atol=1e-9)
    with pytest.raises(ValueError):
        fourth_order_generator(coeffs, b, coupling_sign=2)


def test_coefficients_carry_rate_units():
    a = fourth_order_coefficients(0.5, 0.5, kappa=1.0)
    b = fourth_order_coefficients(1.0, 1.0, kappa=2.0)
    for name in ("x1", "x2", "x3", "y3", "x4", "y4"):
        assert_allclose(getattr(b, name), 2 * getattr(a, name), rtol=1e-10)
    assert_allclose(b.c_B, a.c_B, rtol=1e-10)


def test_fourth_order_sign_at_qutrit_point():
    assert fourth_order_coefficients(0.5, 0.5).c_B < 0
    assert fourth_order_coefficients(0.5, 0.5, as_printed=True).c_B > 0


def test_exact_master_equation_properties():
    res = exact_master_equation(QUTRIT, t_max=20.0)
    for m in range(3):
        assert_allclose(res.T[:, m, m], 1.0, atol=1e-12)
    assert res.min_eig_T.min() >= -1e-10
    i15 = int(round(15.0 / 1e-2))
    assert np.abs(res.StlS_eigs[i15] - res.StlS_eigs[-1]).max() < 1e-6
    assert res.StlS_eigs[-1, 0] < 0
    assert np.abs(res.lambdas[-1] - slow_spectrum(QUTRIT).lambdas).max() < 1e-5


def test_exact_master_equation_zero_crossing():
    with pytest.raises(CoefficientZeroCrossing):
        exact_master_equation(QUTRIT, t_max=1.0, zero_tol=2.0)


def test_sample_pure_states():
    a = sample_pure_states(3, 500, seed=5)
    b = sample_pure_states(3, 500, seed=5)
    assert a.shape == (500, 3)
    assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12)
    assert_allclose(a, b)


def test_positivity_and_cp_coincide_for_diagonal_semigroups():
    for om, de in [(0.5, 0.5), (1.5, -1.0), (0.3, 0.0)]:
        s = slow_spectrum(DispersiveParams.ladder(3, 0.4, om, de))
        for t in (0.1, 1.0, 10.0):
            p = np.exp(s.lambdas * t)
            assert diagonal_map_positivity(p).is_cp == bool(is_completely_positive(diagonal_map(p)))


def test_umax_two_level_is_one():
    s = slow_spectrum(DispersiveParams((0.0, 0.8), 0.5, -0.5))
    assert diagonal_gauge_umax(s, n_samples=400) == 1.0


def test_umax_weak_coupling_limit_is_one():
    s = slow_spectrum(DispersiveParams.ladder(3, 1e-6, 0.5, -0.5))
    assert diagonal_gauge_umax(s, ctilde=np.ones((3, 3)), n_samples=400, tol=1e-9) == 1.0


def test_umax_qutrit_below_one():
    for chi in (0.5, 1.0, 2.0):
        s = slow_spectrum(DispersiveParams.ladder(3, chi, 0.5, -0.5))
        u = diagonal_gauge_umax(s, n_samples=2000)
        assert 0 < u < 1


def test_c_b_matches_exact_eigenvalue_fit():
    # S^T lambda S = eps^2 u u^dag + eps^4 c_B w w^dag + O(eps^5) with u = S^T l, w = S^T l^2;
    # c_B is fitted from exact eigenvalues and extrapolated to eps -> 0
    omega, delta = 0.5, 0.5
    c = fourth_order_coefficients(omega, delta)
    b = np.array([0.0, 1.0, 2.0])
    S = s_matrix(3)
    fits = []
    for eps in (4e-3, 2e-3, 1e-3):
        lam = slow_spectrum(DispersiveParams(tuple(eps * b), omega, delta)).lambdas
        M = S.T @ lam @ S
        M = (M + M.conj().T) / 2
        # odd orders flip for this model's coupling sign
        l = c.c1 * b - eps * c.c2 * b**2 + eps**2 * c.c3 * b**3
        u, w = S.T @ l, S.T @ (l * l)
        R = M - eps**2 * np.outer(u, u.conj())
        W = np.outer(w, w.conj())
        fits.append(np.vdot(W, R).real / np.vdot(W, W).real / eps**4)
    r = [2 * fits[i + 1] - fits[i] for i in range(2)]
    assert abs((4 * r[1] - r[0]) / 3 - c.c_B) < 1e-3
