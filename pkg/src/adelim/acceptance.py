"""Reproduction checks with fixed tolerances.

Each ``check_*`` function computes the quantities behind one criterion and
returns a :class:`Criterion` with a pass flag and the measured values, so the
same numbers feed the test suite and the ``verify`` command.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .cp_analysis import diagonal_map_positivity, is_completely_positive, is_lindbladian
from .dispersive import (
    DispersiveParams,
    composite_model,
    d_scan,
    diagonal_gauge_umax,
    exact_invariance_residual,
    exact_master_equation,
    exact_taylor_coefficients,
    slow_spectrum,
)
from .elimination import (
    eliminate,
    random_composite_model,
    second_order_kraus_form,
)
from .jc import (
    JCParams,
    cp_impossibility,
    engine_coefficients,
    fourth_order_coeffs,
    gamma_phi_threshold,
    second_order_assignment,
    toy_similarity_example,
)
from .spectral import NearDegenerate, pseudo_inverse, pseudo_inverse_integral
from .superop_core import devectorize, random_lindbladian, vectorize


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        return f"[{tag}] {self.number:2d} {self.title}: {vals}"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{v:.3g}"
    return str(v)


# -- dispersive qudit -------------------------------------------------------

QUTRIT_POINT = DispersiveParams.ladder(3, 0.1, 0.5, 0.5)


def check_d_sign(n_grid: int = 121) -> Criterion:
    D0 = float(d_scan(QUTRIT_POINT.chis, [0.5], [0.5]).D[0, 0])
    omegas = np.linspace(0.05, 3.05, n_grid)
    deltas = np.linspace(-3.0, 3.0, n_grid)
    t0 = time.perf_counter()
    scan = d_scan(QUTRIT_POINT.chis, omegas, deltas)
    runtime = time.perf_counter() - t0
    n_pos = int((scan.D > 0).sum())
    ok = D0 < 0 and n_pos > 0 and runtime < 10.0
    return Criterion(1, "qutrit D sign", ok, {"D(0.5,0.5)": D0, "grid_points_D_pos": n_pos,
                                               "grid_points_D_neg": int((scan.D < 0).sum()),
                                               "runtime_s": runtime})


def _random_dispersive(rng: np.random.Generator) -> DispersiveParams:
    d = int(rng.integers(2, 5))
    kappa = float(rng.uniform(0.5, 2.0))
    chis = tuple(rng.uniform(-1.0, 1.0, size=d) * kappa)
    return DispersiveParams(chis, float(rng.uniform(0.1, 2.0) * kappa),
                            float(rng.uniform(-2.0, 2.0) * kappa), kappa)


def _random_spectra(n: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = _random_dispersive(rng)
        try:
            out.append((p, slow_spectrum(p)))
        except NearDegenerate:
            continue
    return out


def check_lambda_properties(n: int = 100, seed: int = 2) -> Criterion:
    diag = herm = neg = 0.0
    for p, s in _random_spectra(n, seed):
        lam = s.lambdas / p.kappa
        diag = max(diag, float(np.abs(np.diag(lam)).max()))
        herm = max(herm, float(np.abs(lam.conj() - lam.T).max()))
        neg = max(neg, float(lam.real.max()))
    ok = diag < 1e-10 and herm < 1e-10 and neg < 1e-10
    return Criterion(2, "slow eigenvalue properties", ok,
                     {"max|lam_mm|": diag, "max|lam_mn*-lam_nm|": herm, "max Re lam": neg})


def check_exact_invariance(n: int = 20, seed: int = 3) -> Criterion:
    worst = max(exact_invariance_residual(p, s) / p.kappa for p, s in _random_spectra(n, seed))
    return Criterion(3, "exact-map invariance", worst < 1e-9, {"max_residual": worst})


def _engine_lambdas(exp, eps: float, d: int, order: int) -> np.ndarray:
    Ls = exp.Ls_sum(eps, order)
    return np.diag(Ls).reshape(d, d, order="F")


def check_engine_vs_exact(eps: float = 1e-3) -> Criterion:
    base = DispersiveParams.ladder(3, 1.0, 0.5, 0.5)
    model, _ = composite_model(base, chi=1.0)
    exp = eliminate(model, 5)
    # coefficients against the contour-integral Taylor series of the exact eigenvalue
    taylor = exact_taylor_coefficients(base, order=4, chi=1.0)
    lam_taylor = sum(eps**k * taylor[k] for k in range(5))
    lam_engine = _engine_lambdas(exp, eps, 3, 4)
    off = ~np.eye(3, dtype=bool)
    rel = float((np.abs(lam_engine - lam_taylor)[off] / np.abs(lam_taylor)[off]).max())
    # truncation error of the order-4 series against the exact eigenvalue
    errs = []
    for e in (0.04, 0.02, 0.01):
        exact = slow_spectrum(DispersiveParams.ladder(3, e, 0.5, 0.5)).lambdas
        errs.append(float(np.abs(_engine_lambdas(exp, e, 3, 4) - exact)[off].max()))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    target = 2.0**5
    scaling_ok = all(target / 2 <= r <= target * 2 for r in ratios)
    ok = rel < 1e-7 and scaling_ok
    return Criterion(4, "engine vs exact eigenvalues", ok,
                     {"rel_diff_eps1e-3": rel, "halving_ratios": tuple(round(r, 2) for r in ratios)})


# -- oscillator-qubit -------------------------------------------------------

JC_POINTS = ((0.02, 0.5, 0.0), (0.05, 1.0, 0.0), (0.05, 1.0, 0.2))


def _jc_rel(engine, closed, g: float, gamma: float) -> float:
    # omega_B vanishes at zero detuning, so relative errors use g^4/gamma^3 as floor
    floor = g**4 / gamma**3
    pairs = [(engine.omega_B4, closed.omega_B4), (engine.gamma_minus4, closed.gamma_minus4),
             (engine.gamma_plus4, closed.gamma_plus4), (engine.gamma_phi4, closed.gamma_phi4)]
    return max(abs(a - b) / max(abs(b), floor) for a, b in pairs)


def check_jc_closed_forms(n_max: int = 40) -> Criterion:
    rel = drift = 0.0
    for g, n_th, delta in JC_POINTS:
        p = JCParams(g, 1.0, delta, n_th, n_max)
        closed = fourth_order_coeffs(p)
        e1 = engine_coefficients(p).totals
        e2 = engine_coefficients(JCParams(g, 1.0, delta, n_th, 2 * n_max)).totals
        rel = max(rel, _jc_rel(e1, closed, g, 1.0))
        drift = max(drift, _jc_rel(e2, e1, g, 1.0))
    return Criterion(5, "oscillator-qubit closed forms", rel < 1e-6 and drift < 1e-7,
                     {"max_rel_err": rel, "n_max_doubling_drift": drift})


def check_gamma_phi_threshold() -> Criterion:
    thr = gamma_phi_threshold()

    def gphi(x, n_th=1.0):
        return fourth_order_coeffs(JCParams(0.05, 1.0, x, n_th)).gamma_phi4

    flips = gphi(thr - 1e-6) < 0 < gphi(thr + 1e-6)
    root = brentq(gphi, 0.2, 0.5, xtol=1e-14)
    zero_at_zero_T = all(gphi(x, 0.0) == 0.0 for x in (0.0, 0.1, thr, 0.7))
    ok = flips and abs(root - thr) < 1e-6 and zero_at_zero_T
    return Criterion(6, "dephasing-rate sign threshold", ok,
                     {"root": root, "analytic": thr, "sign_flip": flips, "zero_at_n_th_0": zero_at_zero_T})


def check_cp_impossibility() -> Criterion:
    p = JCParams(0.05, 1.0, 0.0, 1.0)
    r = cp_impossibility(p)
    ok = (not r.lindblad) and (not r.small_t_ok) and r.crossing_time > 0 \
        and (not r.wpg_small_t.feasible) and r.bloch.contraction_ok
    return Criterion(7, "CP impossibility pipeline", ok,
                     {"gamma_phi4": fourth_order_coeffs(p).gamma_phi4, "lindblad": r.lindblad,
                      "t_star": r.crossing_time, "wpg_feasible": r.wpg_small_t.feasible,
                      "bloch_contraction": r.bloch.contraction_ok})


# -- generic lemmas ---------------------------------------------------------

def check_lemma_suite(n: int = 1000, seed: int = 8) -> Criterion:
    rng = np.random.default_rng(seed)
    n_lindblad = 0
    for _ in range(n):
        d = int(rng.integers(2, 5))
        L = random_lindbladian(d, rng, n_jumps=int(rng.integers(0, 4)))
        n_lindblad += bool(is_lindbladian(L.supermatrix()))
    worst_witness = -np.inf
    for _ in range(n):
        d = int(rng.integers(2, 6))
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        P = (G + G.conj().T) / 2
        w, U = np.linalg.eigh(P)
        if w[0] >= 0:
            P = P - (w[0] + 0.1) * np.eye(d)
        res = diagonal_map_positivity(P)
        worst_witness = max(worst_witness, res.witness_value if res.witness_value is not None else np.inf)
    mp_err = integral_err = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 4))
        S = random_lindbladian(d, rng).supermatrix()
        Sp = pseudo_inverse(S)
        mp_err = max(mp_err, float(np.abs(S @ Sp @ S - S).max()), float(np.abs(Sp @ S @ Sp - Sp).max()))
        A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        gap = float(np.sort(-np.linalg.eigvals(S).real)[1])
        ref = pseudo_inverse_integral(S, A, t_max=40.0 / gap)
        integral_err = max(integral_err, float(np.abs(devectorize(Sp @ vectorize(A)) - ref).max()))
    ok = n_lindblad == n and worst_witness < -1e-12 and mp_err < 1e-9 and integral_err < 1e-6
    return Criterion(8, "Lindblad and pseudoinverse lemmas", ok,
                     {"lindblad_pass": f"{n_lindblad}/{n}", "max_witness": worst_witness,
                      "mp_identity_err": mp_err, "integral_err": integral_err})


def check_second_order_gauge(n_models: int = 10, eps: float = 0.05, seed: int = 9) -> Criterion:
    a = second_order_assignment(JCParams(0.1, 1.0, 0.0, 0.5))
    jc_ok = a.min_choi_G0 < 0 and a.min_choi_G >= -1e-10
    rng = np.random.default_rng(seed)
    worst_g0, worst_g = -np.inf, np.inf
    for _ in range(n_models):
        m = random_composite_model(3, 2, rng)
        worst_g0 = max(worst_g0, is_completely_positive(eliminate(m, 2).K_sum(eps)).min_choi_eig)
        worst_g = min(worst_g, is_completely_positive(second_order_kraus_form(m, eps, 1.0)).min_choi_eig)
    rand_ok = worst_g0 < 0 and worst_g >= -1e-10
    return Criterion(9, "second-order CP gauge (z=1)", jc_ok and rand_ok,
                     {"jc_min_choi_G0": a.min_choi_G0, "jc_min_choi_G": a.min_choi_G,
                      "random_max_min_choi_G0": worst_g0, "random_min_choi_G_z1": worst_g})


def check_exact_master() -> Criterion:
    t0 = time.perf_counter()
    r = exact_master_equation(QUTRIT_POINT)
    runtime = time.perf_counter() - t0
    min_T = float(r.min_eig_T.min())
    late = r.t[:-1] >= 12.0 - 1e-9
    neg_late = bool((r.StlS_eigs[late, 0] < 0).all())
    lam_err = float(np.abs(r.lambdas[-1] - slow_spectrum(QUTRIT_POINT).lambdas).max())
    ok = min_T >= -1e-10 and neg_late and lam_err < 1e-5 and runtime < 5.0
    return Criterion(10, "exact master equation", ok,
                     {"min_eig_T": min_T, "StlS_negative_after_12": neg_late,
                      "lambda_err_t20": lam_err, "runtime_s": runtime})


def check_toy_similarity() -> Criterion:
    r = toy_similarity_example(1.0, 0.25)
    ok = r.residual < 1e-9 and (not r.lindblad_before) and r.lindblad_after
    return Criterion(11, "toy similarity", ok, {"omega0_prime": r.omega0_prime, "residual": r.residual,
                                               "lindblad_before": r.lindblad_before,
                                               "lindblad_after": r.lindblad_after})


def check_diagonal_gauge(n_samples: int = 2000, seed: int = 0) -> Criterion:
    umax = {chi: diagonal_gauge_umax(slow_spectrum(DispersiveParams.ladder(3, chi, 0.5, -0.5)),
                                     n_samples=n_samples, seed=seed) for chi in (0.25, 0.5, 1.0, 2.0)}
    u2 = diagonal_gauge_umax(slow_spectrum(DispersiveParams.ladder(2, 0.5, 0.5, -0.5)),
                             n_samples=n_samples, seed=seed)
    ok = all(u < 1 for u in umax.values()) and u2 == 1.0
    vals = {f"u_max(chi={c})": u for c, u in umax.items()}
    vals["u_max(d=2)"] = u2
    return Criterion(12, "diagonal gauge u_max", ok, vals)


CHECKS = (
    check_d_sign,
    check_lambda_properties,
    check_exact_invariance,
    check_engine_vs_exact,
    check_jc_closed_forms,
    check_gamma_phi_threshold,
    check_cp_impossibility,
    check_lemma_suite,
    check_second_order_gauge,
    check_exact_master,
    check_toy_similarity,
    check_diagonal_gauge,
)


def run_all() -> list[Criterion]:
    return [check() for check in CHECKS]
