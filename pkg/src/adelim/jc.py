"""Qubit coupled to a damped thermal oscillator (Jaynes-Cummings coupling).

Fast system: ``L_A = -i Delta_A (a^dag a)^x + gamma (1 + n_th) D[a] + gamma n_th D[a^dag]``.
Slow system: a qubit with no dynamics of its own, coupled through
``eps L_int = -i g (a^dag (x) s- + a (x) s+)^x``. Qubit basis is ``(|e>, |g>)``.

The reduced generator to fourth order is

    L_s = -i (omega_B/2) sz^x + gamma_- D[s-] + gamma_+ D[s+] + gamma_phi D[sz]

and ``gamma_phi`` turns negative at low detuning when ``n_th > 0``, which
breaks the Lindblad form in every gauge.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .cp_analysis import (
    WpgResult,
    cp_inequality_crossing,
    cp_inequality_small_t,
    is_completely_positive,
    is_lindbladian,
    wpg_spectrum_feasible,
)
from .elimination import CompositeModel, Expansion, eliminate
from .superop_core import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    Lindbladian,
    devectorize,
    dissipator_superop,
    hamiltonian_superop,
    hc_superop,
    sandwich_supermatrix,
    tensor_state_superop,
    vectorize,
)


class TruncationTooSmall(ValueError):
    pass


class UnstableReducedDynamics(ValueError):
    pass


class StabilityViolated(ValueError):
    pass


@dataclass(frozen=True)
class JCParams:
    g: float
    gamma: float
    delta_a: float = 0.0
    n_th: float = 0.0
    n_max: int = 40

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.n_th < 0:
            raise ValueError("n_th must be nonnegative")
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")

    @property
    def eps(self) -> float:
        return abs(self.g) / self.gamma

    @property
    def gbar(self) -> complex:
        return self.gamma + 2j * self.delta_a

    @property
    def n_plus(self) -> float:
        return self.n_th

    @property
    def n_minus(self) -> float:
        return 1.0 + self.n_th

    @property
    def dim(self) -> int:
        return self.n_max + 1


def ladder(dim: int) -> np.ndarray:
    """Truncated annihilation operator on ``dim`` Fock levels."""
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def thermal_state(dim: int, n_th: float) -> np.ndarray:
    if n_th == 0:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    w = (n_th / (1 + n_th)) ** np.arange(dim)
    return np.diag(w / w.sum()).astype(complex)


def oscillator_lindbladian(p: JCParams, scale: float = 1.0) -> Lindbladian:
    """``L_A / scale`` on the truncated Fock space."""
    a = ladder(p.dim)
    ad = a.conj().T
    H = p.delta_a / scale * (ad @ a)
    jumps = [(p.gamma * (1 + p.n_th) / scale, a)]
    if p.n_th > 0:
        jumps.append((p.gamma * p.n_th / scale, ad))
    return Lindbladian(H, tuple(jumps))


# -- closed-form fourth-order coefficients ----------------------------------

@dataclass(frozen=True)
class FourthOrderCoeffs:
    omega_B4: float
    gamma_minus4: float
    gamma_plus4: float
    gamma_phi4: float
    b_minus: complex
    b_plus: complex
    omega_B2: float
    gamma_minus2: float
    gamma_plus2: float


def fourth_order_coeffs(p: JCParams) -> FourthOrderCoeffs:
    g, gam, gb = p.g, p.gamma, p.gbar
    npl, nmi = p.n_plus, p.n_minus
    ag2 = abs(gb) ** 2
    cross = 8 * g**4 * npl * nmi * (1 + 8j * gam * p.delta_a / ag2) / (np.conj(gb) * ag2)

    def b(n):
        return 2 * g**2 * n / gb + 8 * g**4 * n**2 / gb**3 + cross

    bm, bp = b(nmi), b(npl)
    x = 2 * p.delta_a / gam
    gphi = -8 * g**4 * npl * nmi * (3 - 6 * x**2 - x**4) / (gam**3 * (1 + x**2) ** 3)
    return FourthOrderCoeffs(
        omega_B4=float((bm + bp).imag),
        gamma_minus4=float(2 * bm.real),
        gamma_plus4=float(2 * bp.real),
        gamma_phi4=float(gphi),
        b_minus=complex(bm),
        b_plus=complex(bp),
        omega_B2=float(-4 * p.delta_a * g**2 * (nmi + npl) / ag2),
        gamma_minus2=float(4 * g**2 * gam * nmi / ag2),
        gamma_plus2=float(4 * g**2 * gam * npl / ag2),
    )


def gamma_phi_threshold() -> float:
    """``|Delta_A|/gamma`` where ``gamma_phi`` changes sign: ``sqrt(2 sqrt(3) - 3)/2``."""
    return float(np.sqrt(2 * np.sqrt(3) - 3) / 2)


def qubit_generator(omega: float, gamma_minus: float, gamma_plus: float, gamma_phi: float) -> np.ndarray:
    """Supermatrix of ``-i(omega/2) sz^x + gamma_- D[s-] + gamma_+ D[s+] + gamma_phi D[sz]``."""
    return (
        hamiltonian_superop(omega / 2 * SIGMA_Z)
        + gamma_minus * dissipator_superop(SIGMA_MINUS)
        + gamma_plus * dissipator_superop(SIGMA_PLUS)
        + gamma_phi * dissipator_superop(SIGMA_Z)
    )


def reduced_generator(c: FourthOrderCoeffs) -> np.ndarray:
    return qubit_generator(c.omega_B4, c.gamma_minus4, c.gamma_plus4, c.gamma_phi4)


_PAULI = (np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z)


def pauli_representation(S: np.ndarray) -> np.ndarray:
    """Real 4x4 matrix of a qubit superoperator in the basis ``{I, sx, sy, sz}/sqrt(2)``."""
    basis = np.array([vectorize(P) / np.sqrt(2) for P in _PAULI]).T
    return basis.conj().T @ S @ basis


def fit_qubit_generator(S: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares ``(omega, gamma_-, gamma_+, gamma_phi)`` of a qubit generator and the residual."""
    cols = [
        hamiltonian_superop(SIGMA_Z / 2),
        dissipator_superop(SIGMA_MINUS),
        dissipator_superop(SIGMA_PLUS),
        dissipator_superop(SIGMA_Z),
    ]
    A = np.array([c.ravel() for c in cols]).T
    y = np.asarray(S, dtype=complex).ravel()
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.abs(A @ coef - y).max())
    return coef.real, resid


# -- Bloch-vector analysis --------------------------------------------------

@dataclass(frozen=True)
class BlochSummary:
    T1: float
    T2: float
    Rz: float
    DeltaT: float


@dataclass(frozen=True)
class BlochAnalysis:
    summary: BlochSummary
    omega: float
    contraction_ok: bool
    rate_condition: bool
    max_dr2_on_sphere: float

    def spectrum(self, t: float) -> np.ndarray:
        """Eigenvalues of ``exp(L_s t)``: ``1, exp(-t/T2 +- i omega t), exp(-t/T1)``."""
        s = self.summary
        z = np.exp(-t / s.T2 + 1j * self.omega * t)
        return np.array([1.0, z, np.conj(z), np.exp(-t / s.T1)])

    def wpg(self, t: float, tol: float = 1e-12) -> WpgResult:
        return wpg_spectrum_feasible(self.spectrum(t), tol=tol)


def _sphere_points(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    r = np.sqrt(1 - z * z)
    phi = np.pi * (1 + np.sqrt(5)) * k
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def bloch_analysis(c: FourthOrderCoeffs, n_points: int = 2000) -> BlochAnalysis:
    """T1, T2, Rz and a certificate that the dynamics keeps the Bloch ball invariant."""
    inv_T1 = c.gamma_minus4 + c.gamma_plus4
    if inv_T1 <= 0:
        raise UnstableReducedDynamics(f"1/T1 = {inv_T1:.3g}")
    inv_T2 = inv_T1 / 2 + 2 * c.gamma_phi4
    if inv_T2 <= 0:
        raise UnstableReducedDynamics(f"1/T2 = {inv_T2:.3g}")
    T1, T2 = 1 / inv_T1, 1 / inv_T2
    Rz = -(c.gamma_minus4 - c.gamma_plus4) * T1
    inv_dT = inv_T1 - inv_T2
    DeltaT = 1 / inv_dT if inv_dT != 0 else np.inf
    rates = c.gamma_minus4 * c.gamma_plus4 >= 4 * c.gamma_phi4**2
    r = _sphere_points(n_points)
    rz = r[:, 2]
    dr2 = -2 * ((1 - rz**2) / T2 + rz * (rz - Rz) / T1)
    mx = float(dr2.max())
    ok = bool(inv_dT > 0 and rates and mx < 0)
    return BlochAnalysis(BlochSummary(T1, T2, Rz, DeltaT), c.omega_B4, ok, bool(rates), mx)


@dataclass(frozen=True)
class CpImpossibility:
    lindblad: bool
    small_t_ok: bool
    crossing_time: float
    wpg_small_t: WpgResult
    bloch: BlochAnalysis


def cp_impossibility(p: JCParams, t_small: float | None = None) -> CpImpossibility:
    """Lindblad verdict, the CP inequality and the spectral Kraus test for the reduced qubit."""
    c = fourth_order_coeffs(p)
    verdict = is_lindbladian(reduced_generator(c))
    ba = bloch_analysis(c)
    T1, T2 = ba.summary.T1, ba.summary.T2
    if t_small is None:
        t_small = 1e-3 * min(T1, T2)
    return CpImpossibility(
        lindblad=verdict.is_lindbladian,
        small_t_ok=cp_inequality_small_t(T1, T2),
        crossing_time=cp_inequality_crossing(T1, T2),
        wpg_small_t=ba.wpg(t_small),
        bloch=ba,
    )


# -- generic engine run -----------------------------------------------------

def engine_model(p: JCParams, L_B: np.ndarray | None = None, B: np.ndarray = SIGMA_MINUS) -> CompositeModel:
    """Dimensionless model: ``L_A/gamma``, ``L_int = -i(a^dag (x) B + a (x) B^dag)^x``, ``eps = g/gamma``.

    ``L_B`` (a 4x4 supermatrix or ``None``) enters at the same order as the coupling.
    """
    a = ladder(p.dim)
    B = np.asarray(B, dtype=complex)
    dB = B.shape[0]
    H = np.kron(a.conj().T, B) + np.kron(a, B.conj().T)
    LA = oscillator_lindbladian(p, scale=p.gamma)
    return CompositeModel(p.dim, dB, LA, H, L_B=L_B, decomposition=((a, B), (a.conj().T, B.conj().T)))


@dataclass(frozen=True)
class EngineCoefficients:
    per_order: np.ndarray  # (N+1, 4): omega, gamma_-, gamma_+, gamma_phi of each g^n term
    fit_residual: float
    totals: FourthOrderCoeffs
    expansion: Expansion


def physical_orders(p: JCParams, exp: Expansion) -> list[np.ndarray]:
    """``g^n`` coefficients of ``L_s`` from the dimensionless expansion: ``gamma^(1-n) Ls_n``."""
    return [p.gamma ** (1 - n) * exp.Ls[n] for n in range(exp.order + 1)]


def engine_coefficients(p: JCParams, N: int = 4, exp: Expansion | None = None) -> EngineCoefficients:
    if exp is None:
        exp = eliminate(engine_model(p), N)
    per, res = [], 0.0
    for n, S in enumerate(physical_orders(p, exp)):
        coef, r = fit_qubit_generator(S)
        per.append(coef)
        res = max(res, r / max(1.0, float(np.abs(S).max())))
    per = np.array(per)
    gn = p.g ** np.arange(len(per))
    tot = gn @ per
    g2 = p.g**2 * per[2] if len(per) > 2 else np.zeros(4)
    totals = FourthOrderCoeffs(
        omega_B4=float(tot[0]),
        gamma_minus4=float(tot[1]),
        gamma_plus4=float(tot[2]),
        gamma_phi4=float(tot[3]),
        b_minus=complex(np.nan),
        b_plus=complex(np.nan),
        omega_B2=float(g2[0]),
        gamma_minus2=float(g2[1]),
        gamma_plus2=float(g2[2]),
    )
    return EngineCoefficients(per, res, totals, exp)


# -- similarity map W_A ------------------------------------------------------

def w_apply(O: np.ndarray, n_th: float) -> np.ndarray:
    """``W_A(O) = sum_pq (-n)^p/(p! q!) (a^dag)^p a^q O (a^dag)^q a^p`` on the truncated space.

    Both sums terminate because the truncated ladder operators are nilpotent.
    """
    a = ladder(O.shape[0])
    ad = a.conj().T
    Y = _nilpotent_series(O, lambda T, q: a @ T @ ad / q)
    return _nilpotent_series(Y, lambda T, p: -n_th * ad @ T @ a / p)


def w_inverse_apply(O: np.ndarray, n_th: float) -> np.ndarray:
    a = ladder(O.shape[0])
    ad = a.conj().T
    Y = _nilpotent_series(O, lambda T, p: n_th * ad @ T @ a / p)
    return _nilpotent_series(Y, lambda T, q: -a @ T @ ad / q)


def _nilpotent_series(O, step):
    out = np.array(O, dtype=complex)
    T = out.copy()
    k = 0
    while True:
        k += 1
        T = step(T, k)
        if not T.any():
            return out
        out = out + T


@dataclass(frozen=True)
class WTransform:
    W: np.ndarray
    W_inv: np.ndarray
    M: np.ndarray
    n_th: float
    steady: np.ndarray

    def eigenvalue(self, m: int, n: int) -> complex:
        d = self.steady.shape[0]
        return complex(self.M[m + d * n, m + d * n])


def w_supermatrix(dim: int, n_th: float) -> tuple[np.ndarray, np.ndarray]:
    """``W_A`` and its inverse as ``exp(-n a^T (x) a^dag) exp(a^* (x) a)`` and ``exp(-a^* (x) a) exp(n a^T (x) a^dag)``."""
    a = ladder(dim)
    P = np.kron(a.T, a.conj().T)
    Q = np.kron(a.conj(), a)
    W = sla.expm(-n_th * P) @ sla.expm(Q)
    Wi = sla.expm(-Q) @ sla.expm(n_th * P)
    return W, Wi


def w_transform(p: JCParams, trunc_tol: float = 1e-10) -> WTransform:
    """Similarity map diagonalizing ``L_A``; ``M = W L_A W^-1`` in Fock matrix units.

    Entries of ``W`` grow quickly with the truncation and ``n_th``, so ``M`` is
    reliable only on low Fock levels and moderate ``n_th``.
    """
    d = p.dim
    steady = w_inverse_apply(_unit(d, 0, 0), p.n_th)
    top = abs(steady[-1, -1])
    if top > trunc_tol:
        raise TruncationTooSmall(f"top Fock population {top:.3g} exceeds {trunc_tol:.3g}")
    W, Wi = w_supermatrix(d, p.n_th)
    LA = oscillator_lindbladian(p).supermatrix()
    return WTransform(W, Wi, W @ LA @ Wi, p.n_th, steady)


def _unit(d, m, n):
    E = np.zeros((d, d), dtype=complex)
    E[m, n] = 1.0
    return E


def w_eigen_residual(p: JCParams, m: int, n: int, levels: int = 4) -> float:
    """Deviation of ``W L_A W^-1 |m><n|`` from ``lambda_mn |m><n|`` on the lowest Fock levels."""
    d = p.dim
    L = oscillator_lindbladian(p)
    R = w_apply(L(w_inverse_apply(_unit(d, m, n), p.n_th)), p.n_th)
    R[m, n] -= -(p.gbar * m + np.conj(p.gbar) * n) / 2
    return float(np.abs(R[:levels, :levels]).max())


# -- closed-form recursion for a generic slow operator B ---------------------

@dataclass(frozen=True)
class AppCResult:
    Ls: list  # Ls[0..4], coefficients of g^n
    J: dict  # J[n][(m, k)] = supermatrix on B of the |m><k| component of J_n
    BL: np.ndarray
    BD: np.ndarray
    BR: np.ndarray
    BU: np.ndarray


def ladder_superops(B: np.ndarray, n_th: float):
    """``B_L(O) = i[O, B^dag]``, ``B_D(O) = i[O, B]``, ``B_R(O) = i(n O B - (1+n) B O)``, ``B_U(O) = -i(n B^dag O - (1+n) O B^dag)``."""
    B = np.asarray(B, dtype=complex)
    Bd = B.conj().T
    I = np.eye(B.shape[0])
    sw = sandwich_supermatrix
    BL = 1j * (sw(I, Bd) - sw(Bd, I))
    BD = 1j * (sw(I, B) - sw(B, I))
    BR = 1j * (n_th * sw(I, B) - (1 + n_th) * sw(B, I))
    BU = -1j * (n_th * sw(Bd, I) - (1 + n_th) * sw(I, Bd))
    return BL, BD, BR, BU


def appc_recursion(p: JCParams, B: np.ndarray = SIGMA_MINUS, L_B: np.ndarray | None = None) -> AppCResult:
    """Fourth-order reduction in the frame where ``L_A`` is diagonal.

    Uses ``y_mn = 2/(gbar m + gbar^* n)``. ``L_B`` is the slow generator per
    unit ``g``, i.e. the full slow dynamics is ``g L_B``.
    """
    B = np.asarray(B, dtype=complex)
    dB = B.shape[0]
    LB = np.zeros((dB * dB, dB * dB), dtype=complex) if L_B is None else np.asarray(L_B, dtype=complex)
    gb = p.gbar
    gbc = np.conj(gb)

    def y(m, n):
        return 2 / (gb * m + gbc * n)

    BL, BD, BR, BU = ladder_superops(B, p.n_th)
    hc = hc_superop
    y10, y20, y11 = y(1, 0), y(2, 0), y(1, 1)

    def comm(X, Y):
        return X @ Y - Y @ X

    Ls1 = LB
    t2 = y10 * BL @ BR
    Ls2 = t2 + hc(t2)
    t3 = y10**2 * BL @ comm(LB, BR)
    Ls3 = t3 + hc(t3)
    t4 = (
        y10**3 * BL @ comm(LB, comm(LB, BR))
        + 2 * y10**2 * y20 * BL @ BL @ BR @ BR
        + abs(y10) ** 2 * y11 * BD @ BL @ BU @ BR
        + y10**2 * y11 * BL @ BD @ BU @ BR
        - y10**2 * BL @ BR @ Ls2
    )
    Ls4 = t4 + hc(t4)

    def with_hc(terms):
        out: dict = {}
        for (m, k), S in terms:
            out[(m, k)] = out.get((m, k), 0) + S
            out[(k, m)] = out.get((k, m), 0) + hc(S)
        return out

    J1 = with_hc([((1, 0), y10 * BR)])
    J2 = with_hc([
        ((1, 0), y10**2 * comm(LB, BR)),
        ((2, 0), np.sqrt(2) * y10 * y20 * BR @ BR),
        ((1, 1), y10 * y11 * BU @ BR),
    ])
    J3 = with_hc([
        ((1, 0), y10**3 * comm(LB, comm(LB, BR))
                 + 2 * y10**2 * y20 * BL @ BR @ BR
                 + y10**2 * y11 * BD @ BU @ BR
                 - y10**2 * BR @ Ls2),
        ((0, 1), abs(y10) ** 2 * y11 * BL @ BU @ BR),
    ])
    zero = np.zeros_like(LB)
    return AppCResult([zero, Ls1, Ls2, Ls3, Ls4], {1: J1, 2: J2, 3: J3}, BL, BD, BR, BU)


def engine_J(p: JCParams, exp: Expansion, n: int, components: Sequence[tuple[int, int]]) -> dict:
    """``|m><k|`` components of ``J_n = (W_A (x) 1) K_n`` in ``g^n`` units, from an engine expansion."""
    dA, dB = exp.dimA, exp.dimB
    K = exp.K[n] * p.gamma ** (-n)
    blocks = K.reshape(dA, dB, dA, dB, dB * dB)  # [a', b', a, b, col]
    out = {}
    for m, k in components:
        S = np.zeros((dB * dB, dB * dB), dtype=complex)
        for col in range(dB * dB):
            for bp in range(dB):
                for b in range(dB):
                    slab = blocks[:, bp, :, b, col].T  # operator on A: [row a, col a']
                    WA = w_apply(slab, p.n_th)
                    S[bp * dB + b, col] = WA[m, k]
        out[(m, k)] = S
    return out


# -- toy similarity example --------------------------------------------------

@dataclass(frozen=True)
class ToySimilarity:
    q0: float
    L0: np.ndarray
    transformed: np.ndarray
    omega0_prime: float
    residual: float
    lindblad_before: bool
    lindblad_after: bool


def toy_similarity_example(omega0: float, gamma0: float) -> ToySimilarity:
    """``L0 = -i(w0/2) sz^x + g0 D[sx] - g0 D[sy]`` conjugated by ``exp(q0 D[sx + sy])``."""
    if omega0 <= 2 * gamma0:
        raise StabilityViolated("need omega0 > 2 gamma0")
    L0 = hamiltonian_superop(omega0 / 2 * SIGMA_Z) + gamma0 * (
        dissipator_superop(SIGMA_X) - dissipator_superop(SIGMA_Y)
    )
    q0 = float(np.arctanh(2 * gamma0 / omega0) / 4)
    Dxy = dissipator_superop(SIGMA_X + SIGMA_Y)
    L0p = sla.expm(-q0 * Dxy) @ L0 @ sla.expm(q0 * Dxy)
    w = float(np.sqrt(omega0**2 - 4 * gamma0**2))
    target = hamiltonian_superop(w / 2 * SIGMA_Z)
    return ToySimilarity(
        q0=q0,
        L0=L0,
        transformed=L0p,
        omega0_prime=w,
        residual=float(np.abs(L0p - target).max()),
        lindblad_before=is_lindbladian(L0).is_lindbladian,
        lindblad_after=is_lindbladian(L0p).is_lindbladian,
    )


# -- second-order assignment map ---------------------------------------------

@dataclass(frozen=True)
class SecondOrderAssignment:
    W: np.ndarray
    K_G0: np.ndarray  # ((2 dim)^2, 4)
    K_G: np.ndarray
    gauge: np.ndarray  # G on the qubit, physical units
    witness: float
    min_choi_G0: float
    min_choi_G: float


def second_order_assignment(p: JCParams, rho_B: np.ndarray | None = None,
                            psi: np.ndarray | None = None) -> SecondOrderAssignment:
    """Second-order assignment map at zero detuning and its CP-restoring gauge.

    ``K^{G=0}(r) = W (rho_A (x) r) W^dag - (4g^2(1+n)/gamma^2) s- (.) s+ - (4g^2 n/gamma^2) s+ (.) s-``
    with ``W = 1 - (2ig/gamma)(a^dag s- + a s+) - (2g^2/gamma^2)(a^dag a - n)``.
    The witness is ``<0,psi|K^{G=0}(rho_B)|0,psi>``, by default with
    ``rho_B = |g><g|`` and ``psi = |e>``.
    """
    if p.delta_a != 0:
        raise ValueError("the closed form assumes zero detuning")
    d = p.dim
    a = ladder(d)
    ad = a.conj().T
    IA = np.eye(d)
    I2 = np.eye(2)
    r = p.g / p.gamma
    n = p.n_th
    W = (
        np.eye(2 * d)
        - 2j * r * (np.kron(ad, SIGMA_MINUS) + np.kron(a, SIGMA_PLUS))
        - 2 * r**2 * np.kron(ad @ a - n * IA, I2)
    )
    rhoA = thermal_state(d, n)
    K0 = tensor_state_superop(rhoA, 2)
    KG = sandwich_supermatrix(W, W.conj().T) @ K0
    Sm = np.kron(IA, SIGMA_MINUS)
    Sp = np.kron(IA, SIGMA_PLUS)
    KG0 = KG - 4 * r**2 * (
        (1 + n) * sandwich_supermatrix(Sm, Sm.conj().T) + n * sandwich_supermatrix(Sp, Sp.conj().T)
    ) @ K0
    gauge = 4 * r**2 * ((1 + n) * dissipator_superop(SIGMA_MINUS) + n * dissipator_superop(SIGMA_PLUS))
    if rho_B is None:
        rho_B = np.diag([0.0, 1.0]).astype(complex)
    if psi is None:
        psi = np.array([1.0, 0.0], dtype=complex)
    out = devectorize(KG0 @ vectorize(rho_B))
    v = np.kron(np.eye(d)[:, 0], psi)
    witness = float(np.real(v.conj() @ out @ v))
    return SecondOrderAssignment(
        W=W,
        K_G0=KG0,
        K_G=KG,
        gauge=gauge,
        witness=witness,
        min_choi_G0=is_completely_positive(KG0).min_choi_eig,
        min_choi_G=is_completely_positive(KG).min_choi_eig,
    )


def second_order_engine_maps(p: JCParams, gauge: str | None = None) -> np.ndarray:
    """``K_0 + eps K_1 + eps^2 K_2`` from the generic engine.

    ``gauge`` selects ``G_2``: ``None`` (partial trace), ``"sandwich"``
    (``4((1+n) s- . s+ + n s+ . s-)``, which reproduces ``W (rho_A (x) r) W^dag``)
    or ``"dissipator"`` (the trace-keeping ``4((1+n) D[s-] + n D[s+])``).
    """
    model = engine_model(p)
    G = None
    if gauge is not None:
        n = p.n_th
        if gauge == "sandwich":
            G2 = 4 * ((1 + n) * sandwich_supermatrix(SIGMA_MINUS, SIGMA_PLUS)
                      + n * sandwich_supermatrix(SIGMA_PLUS, SIGMA_MINUS))
        elif gauge == "dissipator":
            G2 = 4 * ((1 + n) * dissipator_superop(SIGMA_MINUS) + n * dissipator_superop(SIGMA_PLUS))
        else:
            raise ValueError(f"unknown gauge {gauge!r}")
        G = [np.zeros_like(G2), G2]
    exp = eliminate(model, 2, gauge=G)
    return exp.K_sum(p.g / p.gamma)


def lindblad_second_order(p: JCParams, exp: Expansion | None = None, tol: float = 1e-10) -> bool:
    """Lindblad verdict for ``eps L_s1 + eps^2 L_s2`` from the engine."""
    if exp is None:
        exp = eliminate(engine_model(p), 2)
    eps = p.g / p.gamma
    return is_lindbladian(p.gamma * (eps * exp.Ls[1] + eps**2 * exp.Ls[2]), tol).is_lindbladian


__all__ = [
    "JCParams",
    "FourthOrderCoeffs",
    "BlochSummary",
    "BlochAnalysis",
    "CpImpossibility",
    "TruncationTooSmall",
    "UnstableReducedDynamics",
    "StabilityViolated",
    "ladder",
    "thermal_state",
    "oscillator_lindbladian",
    "fourth_order_coeffs",
    "gamma_phi_threshold",
    "qubit_generator",
    "reduced_generator",
    "pauli_representation",
    "fit_qubit_generator",
    "bloch_analysis",
    "cp_impossibility",
    "engine_model",
    "engine_coefficients",
    "physical_orders",
    "w_apply",
    "w_inverse_apply",
    "w_supermatrix",
    "w_transform",
    "w_eigen_residual",
    "ladder_superops",
    "appc_recursion",
    "engine_J",
    "toy_similarity_example",
    "second_order_assignment",
    "second_order_engine_maps",
    "lindblad_second_order",
]
