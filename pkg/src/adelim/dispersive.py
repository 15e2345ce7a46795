"""Qudit dispersively coupled to a driven, damped qubit.

The fast qubit has ``L_A = -i(Omega/2 sx + Delta/2 sz)^x + kappa D[s-]`` and
the coupling is ``eps L_int = i sum_m chi_m (V_A (x) Pi_m)^x`` with
``V_A = sz``. In the frame rotating with the qudit Hamiltonian ``L_B = 0``.
Because ``L_tot(A (x) Pi_mn) = L_A^(m,n)(A) (x) Pi_mn``, the reduction can be
done exactly, block by block.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .cp_analysis import diagonal_map
from .elimination import CompositeModel
from .spectral import NearDegenerate, diagonalize, steady_state
from .superop_core import (
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Z,
    Lindbladian,
    devectorize,
    dissipator_superop,
    hamiltonian_superop,
    hc_superop,
    superkron,
    sandwich_supermatrix,
    trace_row,
    vectorize,
)


class TraceNormalizationFailure(ValueError):
    pass


class AssumptionViolated(ValueError):
    pass


class CoefficientZeroCrossing(ValueError):
    pass


@dataclass(frozen=True)
class DispersiveParams:
    chis: tuple
    omega: float
    delta: float
    kappa: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        chis = tuple(float(c) for c in self.chis)
        if len(chis) < 2:
            raise ValueError("qudit dimension must be at least 2")
        object.__setattr__(self, "chis", chis)

    @property
    def d(self) -> int:
        return len(self.chis)

    @classmethod
    def ladder(cls, d: int, chi: float, omega: float, delta: float, kappa: float = 1.0):
        """Couplings ``(0, chi, 2 chi, ...)``."""
        return cls(tuple(chi * m for m in range(d)), omega, delta, kappa)


V_A = SIGMA_Z


def qubit_lindbladian(omega: float, delta: float, kappa: float = 1.0) -> Lindbladian:
    H = omega / 2 * SIGMA_X + delta / 2 * SIGMA_Z
    return Lindbladian(H, ((kappa, SIGMA_MINUS),))


def block_generator(p: DispersiveParams, m: int, n: int) -> np.ndarray:
    """Supermatrix of ``L_A^(m,n)(A) = L_A(A) + i(chi_m V A - chi_n A V)``."""
    LA = qubit_lindbladian(p.omega, p.delta, p.kappa).supermatrix()
    I = np.eye(2)
    return LA + 1j * p.chis[m] * sandwich_supermatrix(V_A, I) - 1j * p.chis[n] * sandwich_supermatrix(I, V_A)


def composite_model(p: DispersiveParams, chi: float | None = None) -> tuple[CompositeModel, float]:
    """Engine model in units of ``kappa`` and its expansion parameter ``chi/kappa``.

    ``chi`` sets the scale of the couplings (default: largest ``|chi_m|``).
    """
    if chi is None:
        chi = max(abs(c) for c in p.chis)
    if chi == 0:
        raise ValueError("couplings are all zero")
    d = p.d
    b = np.array(p.chis) / chi
    LA = qubit_lindbladian(p.omega / p.kappa, p.delta / p.kappa, 1.0)
    Bop = np.diag(b).astype(complex)
    H = -np.kron(V_A, Bop)
    model = CompositeModel(2, d, LA, H, decomposition=((-V_A, Bop),))
    return model, chi / p.kappa


# -- exact slow spectrum ----------------------------------------------------

@dataclass(frozen=True)
class SlowSpectrum:
    lambdas: np.ndarray
    Qs: np.ndarray  # shape (d, d, 2, 2)
    gap_ok: bool
    fast_rate: float  # smallest decay rate among the discarded modes


def slow_spectrum(p: DispersiveParams) -> SlowSpectrum:
    d = p.d
    lam = np.zeros((d, d), dtype=complex)
    Q = np.zeros((d, d, 2, 2), dtype=complex)
    slow_max = -np.inf
    fast_min = np.inf
    for m in range(d):
        for n in range(d):
            ev, R = sla.eig(block_generator(p, m, n))
            order = np.argsort(-ev.real)
            k = order[0]
            if abs(ev[order[0]].real - ev[order[1]].real) < 1e-8 * p.kappa:
                raise NearDegenerate(f"slow mode of block ({m}, {n}) is not isolated")
            X = devectorize(R[:, k])
            tr = np.trace(X)
            if abs(tr) < 1e-10:
                raise TraceNormalizationFailure(f"slow eigenoperator of block ({m}, {n}) is traceless")
            lam[m, n] = ev[k]
            Q[m, n] = X / tr
            slow_max = max(slow_max, -ev[k].real)
            fast_min = min(fast_min, -ev[order[1]].real)
    # Q_mm is the fast steady state; remove the rounding-level anti-Hermitian part
    for m in range(d):
        Q[m, m] = (Q[m, m] + Q[m, m].conj().T) / 2
    return SlowSpectrum(lam, Q, bool(slow_max < fast_min), float(fast_min))


def exact_maps(s: SlowSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Assignment ``K(rho) = sum Q_mn (x) Pi_m rho Pi_n`` and ``L_s(rho) = sum lambda_mn Pi_m rho Pi_n``.

    ``K`` is a ``((2d)**2, d**2)`` matrix, ``L_s`` a diagonal ``d**2`` supermatrix.
    """
    d = s.lambdas.shape[0]
    D = 2 * d
    K = np.zeros((D * D, d * d), dtype=complex)
    for m in range(d):
        for n in range(d):
            E = np.zeros((d, d))
            E[m, n] = 1.0
            K[:, n * d + m] = vectorize(np.kron(s.Qs[m, n], E))
    Ls = diagonal_map(s.lambdas)
    return K, Ls


def total_generator(p: DispersiveParams, omegas: Sequence[float] | None = None) -> np.ndarray:
    """Full generator on qubit (x) qudit in physical units."""
    d = p.d
    LA = qubit_lindbladian(p.omega, p.delta, p.kappa).supermatrix()
    H = -sum(c * np.kron(V_A, np.diag(np.eye(d)[m])) for m, c in enumerate(p.chis))
    if omegas is not None:
        H = H + np.kron(np.eye(2), np.diag(omegas))
    return superkron(LA, np.eye(d * d)) + hamiltonian_superop(H)


def exact_invariance_residual(p: DispersiveParams, s: SlowSpectrum | None = None) -> float:
    """Largest residual of ``K(L_s(E_ij)) - L_tot(K(E_ij))`` over matrix units."""
    if s is None:
        s = slow_spectrum(p)
    K, Ls = exact_maps(s)
    R = K @ Ls - total_generator(p) @ K
    return float(np.max(np.linalg.norm(R, axis=0)))


def exact_taylor_coefficients(p: DispersiveParams, order: int = 4, chi: float | None = None,
                              radius: float = 0.05, n_points: int = 64) -> np.ndarray:
    """Taylor coefficients of ``lambda_mn`` in ``eps = chi/kappa`` (units of ``kappa``).

    The slow eigenvalue is continued to complex ``eps`` on a circle and the
    coefficients are read off with a discrete Cauchy integral. Returns an
    array ``c[k, m, n]`` for ``k = 0..order``.
    """
    if chi is None:
        chi = max(abs(c) for c in p.chis)
    b = np.array(p.chis) / chi
    d = p.d
    LA = qubit_lindbladian(p.omega / p.kappa, p.delta / p.kappa, 1.0).supermatrix()
    I = np.eye(2)
    left = sandwich_supermatrix(V_A, I)
    right = sandwich_supermatrix(I, V_A)
    theta = 2 * np.pi * np.arange(n_points) / n_points
    z = radius * np.exp(1j * theta)
    out = np.zeros((order + 1, d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            vals = np.empty(n_points, dtype=complex)
            for j, e in enumerate(z):
                ev = np.linalg.eigvals(LA + 1j * e * (b[m] * left - b[n] * right))
                vals[j] = ev[np.argmin(np.abs(ev))]
            coeffs = np.fft.fft(vals) / n_points
            out[:, m, n] = coeffs[: order + 1] / radius ** np.arange(order + 1)
    return out


# -- Lindblad criterion -----------------------------------------------------

def s_matrix(d: int) -> np.ndarray:
    """Map from diagonal projectors to the traceless basis ``tau_k`` (``d x (d-1)``)."""
    if d < 2:
        raise ValueError("d must be at least 2")
    S = np.zeros((d, d - 1))
    for k in range(1, d):  # column k-1 corresponds to tau_k
        q = 1.0 / ((k + 1) * k)
        S[:k, k - 1] = q
        S[k, k - 1] = -1.0 / (k + 1)
    return S


def tau_basis(d: int) -> list[np.ndarray]:
    return [np.diag([1.0] * k + [-float(k)] + [0.0] * (d - k - 1)) for k in range(1, d)]


def d_value(lam: np.ndarray) -> float:
    """Sign-deciding discriminant for ``d = 3``; Lindblad form iff ``D >= 0``."""
    l12, l13, l23 = lam[0, 1], lam[0, 2], lam[1, 2]
    return float(
        abs(l12 + l13 + l23) ** 2
        - 2 * (abs(l12) ** 2 + abs(l13) ** 2 + abs(l23) ** 2)
        - 4 * l12.imag * l23.imag
    )


@dataclass(frozen=True)
class LindbladCriterion:
    StlS: np.ndarray
    eigenvalues: np.ndarray
    is_lindblad: bool
    D: float | None


def lindblad_criterion(lam, tol: float = 1e-12) -> LindbladCriterion:
    """``L_s`` is a Lindbladian iff ``S^T lambda S`` is PSD."""
    lam = lam.lambdas if isinstance(lam, SlowSpectrum) else np.asarray(lam)
    d = lam.shape[0]
    S = s_matrix(d)
    M = S.T @ lam @ S
    M = (M + M.conj().T) / 2
    ev = np.linalg.eigvalsh(M)
    scale = max(1.0, float(np.abs(ev).max()))
    return LindbladCriterion(M, ev, bool(ev[0] >= -tol * scale), d_value(lam) if d == 3 else None)


@dataclass(frozen=True)
class DScan:
    omegas: np.ndarray
    deltas: np.ndarray
    D: np.ndarray  # (len(omegas), len(deltas))
    gap_ok: np.ndarray


def d_scan(chis: Sequence[float], omegas: Sequence[float], deltas: Sequence[float],
           kappa: float = 1.0) -> DScan:
    """``D`` on an ``(Omega, Delta)`` grid for a qutrit, with batched 4x4 eigensolves."""
    chis = tuple(float(c) for c in chis)
    if len(chis) != 3:
        raise ValueError("the D discriminant is defined for d = 3")
    om = np.asarray(omegas, dtype=float)
    de = np.asarray(deltas, dtype=float)
    if om.ndim != 1 or de.ndim != 1 or om.size == 0 or de.size == 0:
        raise ValueError("grid axes must be non-empty 1-d sequences")
    I = np.eye(2)
    Hx = hamiltonian_superop(SIGMA_X / 2)
    Hz = hamiltonian_superop(SIGMA_Z / 2)
    diss = kappa * dissipator_superop(SIGMA_MINUS)
    base = om[:, None, None, None] * Hx + de[None, :, None, None] * Hz + diss
    left = sandwich_supermatrix(V_A, I)
    right = sandwich_supermatrix(I, V_A)
    pairs = [(0, 1), (0, 2), (1, 2)]
    lam = {}
    slow = np.full(base.shape[:2], -np.inf)
    fast = np.full(base.shape[:2], np.inf)
    for m, n in pairs + [(0, 0)]:
        ev = np.linalg.eigvals(base + 1j * (chis[m] * left - chis[n] * right))
        ev = np.take_along_axis(ev, np.argsort(-ev.real, axis=-1), axis=-1)
        lam[m, n] = ev[..., 0]
        slow = np.maximum(slow, -ev[..., 0].real)
        fast = np.minimum(fast, -ev[..., 1].real)
    # lambda_nm = conj(lambda_mn), so three blocks fix D
    L = np.zeros(base.shape[:2] + (3, 3), dtype=complex)
    for m, n in pairs:
        L[..., m, n] = lam[m, n]
        L[..., n, m] = np.conj(lam[m, n])
    l12, l13, l23 = L[..., 0, 1], L[..., 0, 2], L[..., 1, 2]
    D = (np.abs(l12 + l13 + l23) ** 2 - 2 * (np.abs(l12) ** 2 + np.abs(l13) ** 2 + np.abs(l23) ** 2)
         - 4 * l12.imag * l23.imag)
    return DScan(om, de, D, slow < fast)


# -- fourth-order coefficients ----------------------------------------------

@dataclass(frozen=True)
class FourthOrderCoefficients:
    x1: complex
    x2: complex
    x3: complex
    y3: complex
    x4: complex
    y4: complex
    c1: complex
    c2: complex
    c3: complex
    c_B: float


def _fast_eigendata(omega: float, delta: float):
    """Eigen-data of ``L_A/kappa`` with the steady state first and ``<<I|`` as its left partner."""
    LA = qubit_lindbladian(omega, delta, 1.0).supermatrix()
    sd = diagonalize(LA)
    k0 = int(np.argmin(np.abs(sd.eigenvalues)))
    order = [k0] + [k for k in range(4) if k != k0]
    nu = sd.eigenvalues[order]
    X = [devectorize(sd.right[:, k]) for k in order]
    Xb = [devectorize(sd.left[:, k]) for k in order]
    t = np.trace(X[0])
    X[0] = X[0] / t
    Xb[0] = Xb[0] * np.conj(t)
    nu[0] = 0.0
    return nu, X, Xb


def fourth_order_coefficients(omega: float, delta: float, kappa: float = 1.0,
                              as_printed: bool = False) -> FourthOrderCoefficients:
    """Coefficients of the fourth-order reduced generator, built from fast eigen-data.

    With ``B = sum_m (chi_m/chi) Pi_m`` and ``eps = chi/kappa`` the reduced
    generator reads ``-i eps x1 B rho + eps^2 x2 [B rho, B] + i eps^3 [x3 B rho B
    - y3 rho B^2, B] + eps^4 [x4 B^2 rho B - y4 B^3 rho, B] + h.c.``, written for
    the coupling ``-i chi (V_A (x) B)^x``; see :func:`fourth_order_generator` for
    the sign used by this module's model. Inputs are in units of ``kappa``; the
    returned ``x``/``y`` carry one power of ``kappa``.

    The widely quoted form of the ``x4`` and ``y4`` sums has the opposite sign
    on the terms proportional to ``x2``; ``as_printed=True`` reproduces it. The
    default agrees with the generic recursion and with Rayleigh-Schroedinger
    perturbation theory of the block eigenvalues.
    """
    nu, X, Xb = _fast_eigendata(omega / kappa, delta / kappa)
    V = V_A

    def el(*ops):
        P = ops[0]
        for o in ops[1:]:
            P = P @ o
        return np.vdot(P, V)  # tr(P^dag V)

    a = range(1, 4)
    V0 = el(X[0])
    V0a = {i: el(X[0], Xb[i]) for i in a}
    Va0 = {i: el(Xb[i], X[0]) for i in a}
    Va = {i: el(X[i]) for i in a}
    Vab = {(i, j): el(X[i], Xb[j]) for i in a for j in a}  # (V)_{alpha, beta-bar}
    Vba = {(i, j): el(Xb[j], X[i]) for i in a for j in a}  # (V)_{beta-bar, alpha}
    c = np.conj

    x1 = V0
    x2 = -sum(c(V0a[i]) * Va[i] / c(nu[i]) for i in a)
    x3 = -V0 * sum(c(V0a[i]) * Va[i] / c(nu[i] ** 2) for i in a) + sum(
        V0a[i] * c(Vab[i, j]) * Va[j] / (nu[i] * c(nu[j])) for i in a for j in a
    )
    y3 = -V0 * sum(c(Va0[i]) * Va[i] / c(nu[i] ** 2) for i in a) + sum(
        V0a[i] * c(Vba[i, j]) * Va[j] / (nu[i] * c(nu[j])) for i in a for j in a
    )
    # sign of the terms proportional to x2 in x4 and y4
    s2 = 1.0 if as_printed else -1.0
    x4 = 0j
    for i in a:
        t = V0a[i] * c(Va[i]) * x2 / nu[i] ** 2
        x4 += s2 * (2 * t.real + Va0[i] * c(Va[i]) * x2 / nu[i] ** 2)
    x4 -= V0**2 * sum(2 * c(V0a[i]) * Va[i] / c(nu[i]) ** 3 + V0a[i] * c(Va[i]) / nu[i] ** 3 for i in a)
    for i in a:
        for j in a:
            w = (c(nu[i]) + nu[j]) / (c(nu[i]) * nu[j]) ** 2
            t = V0 * c(V0a[i]) * Vab[i, j] * c(Va[j]) * w
            x4 += 2 * t.real + V0 * c(V0a[i]) * Vba[i, j] * c(Va[j]) * w
    for i in a:
        for j in a:
            for k in a:
                den = c(nu[i]) * nu[j] * c(nu[k])
                x4 -= c(V0a[i]) * Va[k] * (Vab[i, j] * c(Vab[j, k]) + Vba[i, j] * c(Vba[j, k])) / den
                x4 -= c(c(V0a[i]) * Vab[i, j] * c(Vba[j, k]) * Va[k] / den)
    y4 = s2 * sum(Va0[i] * c(Va[i]) * x2 / nu[i] ** 2 for i in a)
    y4 -= V0**2 * sum(c(V0a[i]) * Va[i] / c(nu[i]) ** 3 for i in a)
    y4 += sum(
        V0 * c(V0a[i]) * Vba[i, j] * c(Va[j]) * (c(nu[i]) + nu[j]) / (c(nu[i]) * nu[j]) ** 2
        for i in a for j in a
    )
    y4 -= sum(
        c(V0a[i]) * Vba[i, j] * c(Vab[j, k]) * Va[k] / (c(nu[i]) * nu[j] * c(nu[k]))
        for i in a for j in a for k in a
    )
    if x2.real <= 0:
        raise AssumptionViolated(f"Re(x2) = {x2.real:.3g} is not positive")
    c1 = np.sqrt(2 * x2.real)
    c2 = -1j * (np.conj(y3) + 2 * x3.real) / np.conj(c1)
    c3 = -(x4 + y4) / np.conj(c1)
    cB = float((2 * x4.real - abs(c2) ** 2) / abs(c1) ** 4)
    k = kappa
    return FourthOrderCoefficients(x1 * k, x2 * k, x3 * k, y3 * k, x4 * k, y4 * k, c1, c2, c3, cB)


def fourth_order_generator(coeffs: FourthOrderCoefficients, b: Sequence[float], kappa: float = 1.0,
                           coupling_sign: int = 1) -> list[np.ndarray]:
    """Per-order supermatrices ``[L_1, .., L_4]`` of the closed-form reduced generator.

    Units of ``kappa``, so that ``L_s / kappa = sum eps^n L_n``. With
    ``coupling_sign=1`` the coupling is ``+i chi (V_A (x) B)^x`` as in
    :func:`composite_model`, which flips the odd orders of the closed form;
    ``-1`` returns the closed form as written.
    """
    if coupling_sign not in (1, -1):
        raise ValueError("coupling_sign must be +1 or -1")
    B = np.diag(np.asarray(b, dtype=complex))
    I = np.eye(len(b))
    x1, x2, x3, y3, x4, y4 = (v / kappa for v in (coeffs.x1, coeffs.x2, coeffs.x3, coeffs.y3, coeffs.x4, coeffs.y4))
    sw = sandwich_supermatrix

    def bracket(P, Q):
        # X -> [P X Q, B]
        return sw(P, Q @ B) - sw(B @ P, Q)

    B2 = B @ B
    L1 = -1j * x1 * sw(B, I)
    L2 = x2 * bracket(B, I)
    L3 = 1j * (x3 * bracket(B, B) - y3 * bracket(I, B2))
    L4 = x4 * bracket(B2, B) - y4 * bracket(B2 @ B, I)
    odd = -coupling_sign
    return [(odd if n % 2 else 1) * (L + hc_superop(L)) for n, L in enumerate((L1, L2, L3, L4), start=1)]


# -- exact master equation for separable initial states ---------------------

@dataclass(frozen=True)
class ExactMasterResult:
    t: np.ndarray
    T: np.ndarray  # (nt, d, d)
    lambdas: np.ndarray  # (nt - 1, d, d), forward differences at t[:-1]
    StlS_eigs: np.ndarray  # (nt - 1, d - 1)
    min_eig_T: np.ndarray  # (nt,)


def exact_master_equation(p: DispersiveParams, rhoA=None, t_max: float = 20.0, dt: float = 1e-2,
                          zero_tol: float = 1e-12) -> ExactMasterResult:
    """Coefficients of the exact time-local equation for the partial trace.

    ``[T_t]_mn = tr(exp(L_A^(m,n) t) rho_A)`` and ``lambda_mn(t)`` is the forward
    difference of ``log [T_t]_mn`` accumulated through increment ratios so the
    complex phase is unwrapped. Times are in units of ``1/kappa``.
    """
    d = p.d
    if rhoA is None:
        rhoA = steady_state(qubit_lindbladian(p.omega, p.delta, p.kappa)).rho
    nt = int(round(t_max / dt)) + 1
    t = np.arange(nt) * dt / p.kappa
    v0 = vectorize(np.asarray(rhoA, dtype=complex))
    tr = trace_row(2)
    T = np.zeros((nt, d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            step = sla.expm(block_generator(p, m, n) * (dt / p.kappa))
            v = v0.copy()
            for i in range(nt):
                T[i, m, n] = tr @ v
                v = step @ v
    small = np.abs(T) < zero_tol
    if small.any():
        i, m, n = np.argwhere(small)[0]
        raise CoefficientZeroCrossing(f"[T]_{m}{n} vanishes at t = {t[i]:.6g}")
    lam = np.log(T[1:] / T[:-1]) / (dt / p.kappa)
    S = s_matrix(d)
    eigs = np.array([np.linalg.eigvalsh((lambda M: (M + M.conj().T) / 2)(S.T @ L @ S)) for L in lam])
    mins = np.array([np.linalg.eigvalsh((M + M.conj().T) / 2)[0] for M in T])
    return ExactMasterResult(t, T, lam, eigs, mins)


# -- diagonal gauge positivity (u_max) --------------------------------------

def pairwise_optimal_coefficients(s: SlowSpectrum) -> np.ndarray:
    """Largest real ``c_mn`` keeping the assignment positive on two-level superpositions.

    For ``psi = a|m> + b|n>`` positivity of the block matrix
    ``[[|a|^2 Q_mm, c a b^* Q_mn], [c^* a^* b Q_nm, |b|^2 Q_nn]]`` for all ``a, b``
    is ``|c| <= 1/||Q_mm^{-1/2} Q_mn Q_nn^{-1/2}||``.
    """
    d = s.lambdas.shape[0]
    ct = np.ones((d, d))
    isq = []
    for m in range(d):
        w, U = np.linalg.eigh(s.Qs[m, m])
        if w[0] <= 0:
            raise ValueError(f"Q_{m}{m} is not positive definite")
        isq.append(U @ np.diag(w**-0.5) @ U.conj().T)
    for m in range(d):
        for n in range(d):
            if m != n:
                ct[m, n] = 1.0 / np.linalg.norm(isq[m] @ s.Qs[m, n] @ isq[n], 2)
    return ct


def sample_pure_states(d: int, n_samples: int, seed: int = 0, n_phases: int = 12) -> np.ndarray:
    """Structured two/three-level superpositions on a phase grid, topped up with random states."""
    rng = np.random.default_rng(seed)
    states = []
    phases = 2 * np.pi * np.arange(n_phases) / n_phases
    amps = np.linspace(0.1, 0.9, 5)
    for m in range(d):
        for n in range(m + 1, d):
            for a in amps:
                for ph in phases:
                    v = np.zeros(d, complex)
                    v[m] = np.sqrt(a)
                    v[n] = np.sqrt(1 - a) * np.exp(1j * ph)
                    states.append(v)
    if d >= 3:
        for p1 in phases:
            for p2 in phases:
                v = np.zeros(d, complex)
                v[:3] = np.array([1, np.exp(1j * p1), np.exp(1j * p2)]) / np.sqrt(3)
                states.append(v)
    states = states[:n_samples]
    while len(states) < n_samples:
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        states.append(v / np.linalg.norm(v))
    return np.array(states)


def _assignment_min_eigs(s: SlowSpectrum, C: np.ndarray, psis: np.ndarray) -> np.ndarray:
    d = s.lambdas.shape[0]
    # K(psi psi^dag) = sum_mn C_mn psi_m psi_n^* Q_mn (x) Pi_mn, as a (2d x 2d) matrix per sample
    blocks = np.einsum("mn,smn,mnab->smanb", C, psis[:, :, None] * psis[:, None, :].conj(), s.Qs)
    mats = blocks.reshape(len(psis), d * 2, d * 2)
    return np.linalg.eigvalsh(mats)[:, 0]


def diagonal_gauge_umax(s: SlowSpectrum, ctilde: np.ndarray | None = None, n_samples: int = 2000,
                        seed: int = 0, u_tol: float = 1e-6, tol: float = 1e-12) -> float:
    """Largest ``u`` in ``(0, 1]`` keeping ``sum u c_mn Q_mn (x) Pi_m rho Pi_n`` positive.

    ``c_mm = 1`` always; off-diagonal coefficients are ``u * ctilde``. Positivity
    is checked on sampled pure states, so the result bounds the true value from
    above. The feasible set of ``u`` is an interval, so bisection applies.
    """
    if ctilde is None:
        ctilde = pairwise_optimal_coefficients(s)
    d = s.lambdas.shape[0]
    psis = sample_pure_states(d, n_samples, seed)
    off = ~np.eye(d, dtype=bool)

    def ok(u):
        C = np.where(off, u * ctilde, 1.0)
        return bool(_assignment_min_eigs(s, C, psis).min() >= -tol)

    if ok(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > u_tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
