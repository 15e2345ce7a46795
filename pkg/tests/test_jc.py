import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from adelim.elimination import eliminate, gauge_transform
from adelim.jc import (
    JCParams,
    StabilityViolated,
    TruncationTooSmall,
    UnstableReducedDynamics,
    FourthOrderCoeffs,
    appc_recursion,
    bloch_analysis,
    cp_impossibility,
    engine_J,
    engine_coefficients,
    engine_model,
    fit_qubit_generator,
    fourth_order_coeffs,
    gamma_phi_threshold,
    ladder,
    lindblad_second_order,
    oscillator_lindbladian,
    physical_orders,
    qubit_generator,
    reduced_generator,
    second_order_assignment,
    second_order_engine_maps,
    thermal_state,
    toy_similarity_example,
    w_apply,
    w_eigen_residual,
    w_inverse_apply,
    w_supermatrix,
    w_transform,
)
from adelim.superop_core import SIGMA_MINUS, SIGMA_X, SIGMA_Z, devectorize, hamiltonian_superop, vectorize


def test_params_validation():
    with pytest.raises(ValueError):
        JCParams(0.1, 0.0)
    with pytest.raises(ValueError):
        JCParams(0.1, 1.0, n_th=-0.1)
    with pytest.raises(ValueError):
        JCParams(0.1, 1.0, n_max=1)
    p = JCParams(-0.2, 2.0, 0.5, 0.3)
    assert p.eps == 0.1
    assert p.gbar == 2.0 + 1.0j
    assert (p.n_plus, p.n_minus) == (0.3, 1.3)


def test_thermal_state_occupation():
    rho = thermal_state(60, 0.5)
    a = ladder(60)
    assert_allclose(np.trace(a.conj().T @ a @ rho).real, 0.5, atol=1e-8)
    L = oscillator_lindbladian(JCParams(0.1, 1.0, 0.3, 0.5, 59)).supermatrix()
    assert np.abs(L @ vectorize(rho)).max() < 1e-8


def test_closed_forms_zero_temperature_and_resonance():
    c = fourth_order_coeffs(JCParams(0.05, 1.0, 0.7, 0.0))
    assert c.gamma_phi4 == 0.0
    assert c.gamma_plus4 == 0.0
    assert fourth_order_coeffs(JCParams(0.05, 1.0, 0.0, 0.8)).omega_B2 == 0.0


@given(st.floats(0.001, 0.05), st.floats(-1.0, 1.0), st.floats(0.0, 2.0))
def test_closed_form_invariants(g, delta, n_th):
    c = fourth_order_coeffs(JCParams(g, 1.0, delta, n_th))
    assert_allclose(c.omega_B4, (c.b_minus + c.b_plus).imag, rtol=1e-14)
    assert_allclose(c.gamma_minus4, 2 * c.b_minus.real, rtol=1e-14)
    assert c.gamma_minus4 > 0
    assert c.gamma_plus4 >= 0
    assert_allclose(c.gamma_minus2, 4 * g**2 * (1 + n_th) / (1 + 4 * delta**2), rtol=1e-12)


def test_dephasing_sign_threshold():
    thr = gamma_phi_threshold()
    assert_allclose(thr, 0.3406, atol=1e-4)

    def gphi(x):
        return fourth_order_coeffs(JCParams(0.05, 1.0, x, 1.0)).gamma_phi4

    assert gphi(0.0) < 0
    assert gphi(thr - 1e-4) < 0 < gphi(thr + 1e-4)
    assert gphi(-thr + 1e-4) < 0 < gphi(-thr - 1e-4)


@pytest.mark.parametrize("g,n_th,delta", [(0.02, 0.5, 0.0), (0.05, 1.0, 0.3), (0.03, 0.0, -0.4)])
def test_engine_reproduces_closed_forms(g, n_th, delta):
    p = JCParams(g, 1.0, delta, n_th)
    e = engine_coefficients(p)
    c = fourth_order_coeffs(p)
    assert e.fit_residual < 1e-10
    floor = g**4
    for name in ("omega_B4", "gamma_minus4", "gamma_plus4", "gamma_phi4"):
        a, b = getattr(e.totals, name), getattr(c, name)
        assert abs(a - b) <= 1e-6 * max(abs(b), floor)
    for name in ("omega_B2", "gamma_minus2", "gamma_plus2"):
        assert_allclose(getattr(e.totals, name), getattr(c, name), rtol=1e-9, atol=1e-14)


def test_engine_rescales_with_gamma():
    a = engine_coefficients(JCParams(0.04, 1.0, 0.2, 0.5, 25)).totals
    b = engine_coefficients(JCParams(0.08, 2.0, 0.4, 0.5, 25)).totals
    for name in ("omega_B4", "gamma_minus4", "gamma_plus4", "gamma_phi4"):
        assert_allclose(getattr(b, name), 2 * getattr(a, name), rtol=1e-9)


def test_reduced_generator_fit_roundtrip():
    S = qubit_generator(0.3, 0.2, 0.05, -0.01)
    coef, res = fit_qubit_generator(S)
    assert_allclose(coef, [0.3, 0.2, 0.05, -0.01], atol=1e-14)
    assert res < 1e-14


def test_w_transform_zero_temperature():
    p = JCParams(0.1, 1.0, 0.0, 0.0, 10)
    wt = w_transform(p)
    a = ladder(p.dim)
    W, _ = w_supermatrix(p.dim, 0.0)
    import scipy.linalg as sla

    assert_allclose(W, sla.expm(np.kron(a.conj(), a)), atol=1e-12)
    assert_allclose(wt.steady, thermal_state(p.dim, 0.0), atol=1e-14)


def test_w_transform_steady_state_and_eigenvalues():
    p = JCParams(0.1, 1.0, 0.4, 0.2, 40)
    wt = w_transform(p)
    a = ladder(p.dim)
    assert_allclose(np.trace(a.conj().T @ a @ wt.steady).real, 0.2, atol=1e-8)
    assert_allclose(wt.steady, thermal_state(p.dim, 0.2), atol=1e-10)
    assert_allclose(wt.eigenvalue(1, 0), -p.gbar / 2, atol=1e-8)
    for m, n in [(0, 0), (1, 0), (2, 1), (1, 3)]:
        assert w_eigen_residual(p, m, n) < 1e-9


def test_w_apply_inverse():
    rng = np.random.default_rng(3)
    O = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    assert_allclose(w_apply(w_inverse_apply(O, 0.4), 0.4), O, atol=1e-9)
    W, Wi = w_supermatrix(12, 0.4)
    assert_allclose(devectorize(W @ vectorize(O)), w_apply(O, 0.4), atol=1e-9)


def test_w_transform_truncation_guard():
    with pytest.raises(TruncationTooSmall):
        w_transform(JCParams(0.1, 1.0, 0.0, 2.0, 10))


def test_recursion_vanishing_odd_orders():
    r = appc_recursion(JCParams(0.05, 1.0, 0.3, 0.4))
    assert np.abs(r.Ls[1]).max() == 0
    assert np.abs(r.Ls[3]).max() < 1e-15


@given(st.floats(-1.0, 1.0), st.floats(0.0, 1.5))
def test_recursion_second_order_rates(delta, n_th):
    p = JCParams(1.0, 1.0, delta, n_th)
    coef, res = fit_qubit_generator(appc_recursion(p).Ls[2])
    c = fourth_order_coeffs(p)
    assert res < 1e-12
    assert_allclose(coef[1:3], [c.gamma_minus2, c.gamma_plus2], atol=1e-12)
    assert_allclose(coef[3], 0, atol=1e-12)


def _engine_vs_recursion(p, B, LB):
    exp = eliminate(engine_model(p, L_B=LB, B=B), 4)
    r = appc_recursion(p, B=B, L_B=LB)
    phys = physical_orders(p, exp)
    return max(
        float(np.abs(phys[n] - r.Ls[n]).max() / max(np.abs(r.Ls[n]).max(), 1e-300))
        for n in (2, 4)
    ), phys, r, exp


def test_recursion_matches_engine_sigma_minus():
    p = JCParams(0.05, 1.0, 0.3, 0.5, 20)
    rel20, *_ = _engine_vs_recursion(p, SIGMA_MINUS, None)
    rel40, *_ = _engine_vs_recursion(JCParams(0.05, 1.0, 0.3, 0.5, 40), SIGMA_MINUS, None)
    assert rel40 < 1e-6
    assert rel40 <= rel20 + 1e-12


def test_recursion_matches_engine_with_slow_dynamics():
    p = JCParams(0.05, 1.3, -0.2, 0.3, 25)
    B = np.array([[0.2, 0.7], [-0.1j, 0.4]])
    LB = hamiltonian_superop(0.6 * SIGMA_Z + 0.2 * SIGMA_X)
    _, phys, r, exp = _engine_vs_recursion(p, B, LB)
    for n in range(1, 5):
        assert_allclose(phys[n], r.Ls[n], atol=1e-7 * np.abs(r.Ls[n]).max() + 1e-14)
    # retained components of the assignment corrections
    for n, comps in ((1, [(1, 0), (0, 1)]), (2, [(1, 0), (2, 0), (1, 1)]), (3, [(1, 0), (0, 1)])):
        got = engine_J(p, exp, n, comps)
        for k in comps:
            assert_allclose(got[k], r.J[n][k], atol=1e-7 * max(np.abs(r.J[n][k]).max(), 1.0))


def test_bloch_analysis_without_dephasing():
    c = fourth_order_coeffs(JCParams(0.05, 1.0, 0.2, 0.0))
    ba = bloch_analysis(c)
    assert_allclose(1 / ba.summary.T2, 1 / (2 * ba.summary.T1), rtol=1e-12)
    assert ba.contraction_ok
    assert ba.wpg(0.1).feasible


def test_bloch_analysis_negative_dephasing_still_contracts():
    c = fourth_order_coeffs(JCParams(0.05, 1.0, 0.0, 1.0))
    assert c.gamma_phi4 < 0
    ba = bloch_analysis(c)
    s = ba.summary
    assert 1 / s.T1 > 1 / s.T2
    assert ba.contraction_ok
    assert_allclose(s.Rz, -(c.gamma_minus4 - c.gamma_plus4) * s.T1)
    assert not ba.wpg(1e-3 * s.T2).feasible


def test_bloch_spectrum_matches_generator():
    import scipy.linalg as sla

    c = fourth_order_coeffs(JCParams(0.05, 1.0, 0.2, 0.6))
    ba = bloch_analysis(c)
    t = 40.0
    ev = np.linalg.eigvals(sla.expm(reduced_generator(c) * t))
    ref = ba.spectrum(t)
    assert_allclose(np.sort_complex(ev), np.sort_complex(ref), atol=1e-12)


def test_unstable_dynamics_rejected():
    bad = FourthOrderCoeffs(0.0, -1.0, 0.0, 0.0, 0j, 0j, 0.0, 0.0, 0.0)
    with pytest.raises(UnstableReducedDynamics):
        bloch_analysis(bad)
    bad = FourthOrderCoeffs(0.0, 1.0, 0.0, -1.0, 0j, 0j, 0.0, 0.0, 0.0)
    with pytest.raises(UnstableReducedDynamics):
        bloch_analysis(bad)


def test_cp_impossibility_pipeline():
    r = cp_impossibility(JCParams(0.05, 1.0, 0.0, 1.0))
    assert not r.lindblad
    assert not r.small_t_ok
    assert r.crossing_time > 0
    assert not r.wpg_small_t.feasible
    assert r.bloch.contraction_ok
    ok = cp_impossibility(JCParams(0.05, 1.0, 0.6, 1.0))
    assert ok.lindblad and ok.small_t_ok and ok.wpg_small_t.feasible


def test_gauges_keep_the_spectrum_infeasible():
    # similarity keeps the spectrum, so no gauge can make the small-time map Kraus
    p = JCParams(0.05, 1.0, 0.0, 1.0, 20)
    exp = eliminate(engine_model(p), 4)
    rng = np.random.default_rng(7)
    eps = p.g / p.gamma
    base = np.sort_complex(np.linalg.eigvals(exp.Ls_sum(eps)))
    for _ in range(5):
        G = [np.zeros((4, 4), complex)] + [0.3 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
                                           for _ in range(4)]
        # the exact similarity shares the spectrum; the truncated series agrees to O(eps^5)
        _, LsG = gauge_transform(exp, G, eps=eps)
        ev = np.sort_complex(np.linalg.eigvals(sum(eps**n * L for n, L in enumerate(LsG))))
        assert np.abs(ev - base).max() < eps**5


def test_toy_similarity():
    r = toy_similarity_example(1.0, 0.25)
    assert_allclose(r.omega0_prime, np.sqrt(0.75), rtol=1e-14)
    ev = np.linalg.eigvals(r.transformed)
    assert_allclose(sorted(ev.imag), [-np.sqrt(0.75), 0, 0, np.sqrt(0.75)], atol=1e-12)
    assert r.residual < 1e-9
    assert not r.lindblad_before and r.lindblad_after
    assert_allclose(np.sort_complex(np.linalg.eigvals(r.L0)), np.sort_complex(ev), atol=1e-10)


def test_toy_similarity_identity_and_guard():
    r = toy_similarity_example(1.0, 0.0)
    assert r.q0 == 0.0
    assert_allclose(r.transformed, r.L0, atol=1e-15)
    with pytest.raises(StabilityViolated):
        toy_similarity_example(1.0, 0.5)


def test_second_order_assignment():
    a = second_order_assignment(JCParams(0.1, 1.0, 0.0, 0.5, 30))
    assert a.witness < 0
    assert a.min_choi_G0 < 0
    assert a.min_choi_G >= -1e-10
    with pytest.raises(ValueError):
        second_order_assignment(JCParams(0.1, 1.0, 0.2, 0.5, 30))


def test_second_order_assignment_matches_engine():
    p = JCParams(0.01, 1.0, 0.0, 0.4, 20)
    a = second_order_assignment(p)
    eps = p.g / p.gamma
    # the closed forms drop O(eps^3) terms
    assert np.abs(second_order_engine_maps(p) - a.K_G0).max() < 50 * eps**3
    assert np.abs(second_order_engine_maps(p, "sandwich") - a.K_G).max() < 50 * eps**3
    with pytest.raises(ValueError):
        second_order_engine_maps(p, "other")


def test_second_order_lindblad_form():
    for eps in (0.01, 0.05, 0.1):
        assert lindblad_second_order(JCParams(eps, 1.0, 0.3, 0.7, 20))
