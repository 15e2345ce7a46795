import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from adelim.cp_analysis import (
    NoUnitEigenvalue,
    NonHermitianInput,
    NotConjugationClosed,
    NotHermitianPreserving,
    NotTraceAnnihilating,
    cp_inequality_check,
    cp_inequality_crossing,
    cp_inequality_small_t,
    diagonal_map,
    diagonal_map_positivity,
    is_completely_positive,
    is_lindbladian,
    wpg_sorted_feasible,
    wpg_spectrum_feasible,
)
from adelim.superop_core import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    apply_superop,
    dissipator_superop,
    hamiltonian_superop,
    kraus_superop,
    random_lindbladian,
    transpose_superop,
)
from conftest import random_matrix

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_kraus_maps_are_cp(seed, d_in, d_out):
    rng = np.random.default_rng(seed)
    S = kraus_superop([random_matrix(rng, d_out, d_in) for _ in range(3)])
    v = is_completely_positive(S)
    assert v and v.min_choi_eig > -1e-10


def test_transpose_is_not_cp():
    v = is_completely_positive(transpose_superop(2))
    assert not v
    assert v.min_choi_eig == pytest.approx(-1.0)


@given(seeds, st.integers(2, 4), st.integers(0, 3))
def test_random_lindbladians_pass_and_decomposition_rebuilds(seed, d, n_jumps):
    L = random_lindbladian(d, np.random.default_rng(seed), n_jumps=n_jumps)
    S = L.supermatrix()
    v = is_lindbladian(S)
    assert v
    assert_allclose(v.reconstruct(), S, atol=1e-9)


def test_negative_rate_fails_lindblad_test():
    S = hamiltonian_superop(SIGMA_Z) + dissipator_superop(SIGMA_MINUS) - 0.1 * dissipator_superop(SIGMA_Z)
    v = is_lindbladian(S)
    assert not v
    assert v.min_eig < 0
    with pytest.raises(ValueError):
        v.reconstruct()


def test_lindblad_test_preconditions():
    with pytest.raises(NotTraceAnnihilating):
        is_lindbladian(np.eye(4))
    with pytest.raises(NotHermitianPreserving):
        is_lindbladian(1j * dissipator_superop(SIGMA_MINUS))


@given(seeds, st.integers(2, 5))
def test_diagonal_map_witness_certifies_violation(seed, d):
    rng = np.random.default_rng(seed)
    G = random_matrix(rng, d)
    P = (G + G.conj().T) / 2
    w = np.linalg.eigvalsh(P)
    P = P - (w[0] + 0.05) * np.eye(d)
    res = diagonal_map_positivity(P)
    assert not res.is_cp
    out = apply_superop(diagonal_map(P), np.outer(res.witness_psi, res.witness_psi.conj()))
    value = np.real(res.witness_phi.conj() @ out @ res.witness_phi)
    assert value == pytest.approx(res.witness_value, abs=1e-12)
    assert value < -1e-12
    assert value == pytest.approx(res.min_eig, rel=1e-9)


@given(seeds, st.integers(2, 5))
def test_diagonal_map_positivity_agrees_with_choi(seed, d):
    rng = np.random.default_rng(seed)
    G = random_matrix(rng, d)
    P = G @ G.conj().T
    assert diagonal_map_positivity(P).is_cp
    assert is_completely_positive(diagonal_map(P))


def test_diagonal_map_rejects_non_hermitian():
    with pytest.raises(NonHermitianInput):
        diagonal_map_positivity(np.array([[1, 2], [0, 1]]))


def test_wpg_corners_and_examples():
    assert wpg_spectrum_feasible([1, 1, 1, 1]).feasible
    for s in [(1, -1, -1), (-1, 1, -1), (-1, -1, 1), (0, 0, 0)]:
        assert wpg_spectrum_feasible([1, *s]).feasible
    assert not wpg_spectrum_feasible([1, 0.9, 0.9, 0.7]).feasible
    assert not wpg_sorted_feasible((0.9, 0.9, 0.7))
    with pytest.raises(NoUnitEigenvalue):
        wpg_spectrum_feasible([0.5, 0.5, 0.5, 0.5])
    with pytest.raises(NotConjugationClosed):
        wpg_spectrum_feasible([1, 0.5 + 0.1j, 0.5 + 0.1j, 0.2])


@given(seeds)
def test_wpg_accepts_spectra_of_random_channels(seed):
    rng = np.random.default_rng(seed)
    # random unital qubit channel: Pauli mixture
    p = rng.dirichlet(np.ones(4))
    S = kraus_superop([np.sqrt(p[0]) * np.eye(2), np.sqrt(p[1]) * SIGMA_X,
                       np.sqrt(p[2]) * SIGMA_Y, np.sqrt(p[3]) * SIGMA_Z])
    assert wpg_spectrum_feasible(np.linalg.eigvals(S), tol=1e-9).feasible


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_wpg_sorted_form_matches_tetrahedron(a, b, c):
    assert wpg_sorted_feasible((a, b, c), tol=1e-12) == wpg_spectrum_feasible([1, a, b, c], tol=1e-12).feasible


def test_cp_inequality_and_crossing():
    # 1/T2 < 1/(2 T1) violates the condition at small t
    T1, T2 = 1.0, 3.0
    assert not cp_inequality_small_t(T1, T2)
    t_star = cp_inequality_crossing(T1, T2)
    assert t_star > 0
    assert not cp_inequality_check(T1, T2, 0.5 * t_star)
    assert cp_inequality_check(T1, T2, 1.5 * t_star)
    assert cp_inequality_crossing(1.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        cp_inequality_check(1.0, 1.0, 0.0)


def test_amplitude_damping_semigroup_spectrum_is_kraus_feasible():
    S = dissipator_superop(SIGMA_MINUS) + 0.3 * dissipator_superop(SIGMA_PLUS)
    ev = np.exp(np.linalg.eigvals(S) * 0.4)
    assert wpg_spectrum_feasible(ev).feasible
