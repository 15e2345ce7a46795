"""Order-by-order adiabatic elimination of a fast subsystem.

The total generator is ``L_tot = L_A (x) 1 + eps (1 (x) L_B + L_int)`` with
``L_int = -i[H_int, .]``. We look for an assignment map ``K`` (slow states to
total states) and a reduced generator ``L_s`` with

    K(L_s(rho)) = L_tot(K(rho)),   K = sum eps^n K_n,   L_s = sum eps^n L_{s,n}.

Assignment maps are stored as ``((dA dB)**2, dB**2)`` matrices acting on
vectorized slow operators, so only the fast factor is ever inverted and no
``(dA dB)**2``-square matrix is formed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .spectral import PseudoInverse, _as_solvable, _as_supermatrix, pseudo_inverse, steady_state
from .superop_core import (
    devectorize,
    hamiltonian_superop,
    sandwich_supermatrix,
    superkron,
    vectorize,
)


class OrderTooHigh(RuntimeError):
    pass


class GaugeNotInvertible(np.linalg.LinAlgError):
    pass


class RankDeficientSteadyState(ValueError):
    pass


@dataclass(frozen=True)
class CompositeModel:
    """Fast subsystem A coupled to a slow subsystem B.

    ``L_A`` is a Lindbladian (or its supermatrix) on A, ``L_B`` a supermatrix on
    B (``None`` for no slow dynamics) and ``H_int`` a Hermitian operator on
    ``A (x) B``. ``decomposition`` lists pairs ``(A_k, B_k)`` with
    ``H_int = sum_k A_k^dag (x) B_k``; an operator Schmidt decomposition is
    used when it is omitted.
    """

    dimA: int
    dimB: int
    L_A: object
    H_int: np.ndarray
    L_B: np.ndarray | None = None
    decomposition: tuple | None = None
    L_A_jumps: tuple = ()

    def __post_init__(self):
        D = self.dimA * self.dimB
        H = np.asarray(self.H_int, dtype=complex)
        if H.shape != (D, D):
            raise ValueError(f"H_int must be {D}x{D}")
        if np.linalg.norm(H - H.conj().T) > 1e-12 * max(1.0, np.linalg.norm(H)):
            raise ValueError("H_int is not Hermitian")
        object.__setattr__(self, "H_int", H)
        if self.decomposition is None:
            object.__setattr__(self, "decomposition", tuple(operator_schmidt(H, self.dimA, self.dimB)))
        else:
            pairs = tuple((np.asarray(a, complex), np.asarray(b, complex)) for a, b in self.decomposition)
            rebuilt = sum(np.kron(a.conj().T, b) for a, b in pairs)
            if np.linalg.norm(rebuilt - H) > 1e-12 * max(1.0, np.linalg.norm(H)):
                raise ValueError("decomposition does not reproduce H_int")
            object.__setattr__(self, "decomposition", pairs)
        if not self.L_A_jumps and hasattr(self.L_A, "jump_operators"):
            object.__setattr__(self, "L_A_jumps", tuple(self.L_A.jump_operators()))

    @property
    def L_A_matrix(self) -> np.ndarray:
        return _as_supermatrix(self.L_A)

    @property
    def L_A_solvable(self):
        """``L_A`` in the form handed to the block solver (sparse for a Lindbladian)."""
        return _as_solvable(self.L_A)

    @property
    def L_B_matrix(self) -> np.ndarray:
        if self.L_B is None:
            return np.zeros((self.dimB**2, self.dimB**2), dtype=complex)
        return np.asarray(self.L_B, dtype=complex)

    def total_generator(self, eps: float) -> np.ndarray:
        """Full supermatrix of ``L_tot``; only sensible for small dimensions."""
        IA = np.eye(self.dimA**2)
        IB = np.eye(self.dimB**2)
        return (
            superkron(self.L_A_matrix, IB)
            + eps * superkron(IA, self.L_B_matrix)
            + eps * hamiltonian_superop(self.H_int)
        )


def operator_schmidt(H: np.ndarray, dimA: int, dimB: int, tol: float = 1e-13):
    """Pairs ``(A_k, B_k)`` with ``H = sum_k A_k^dag (x) B_k`` from an SVD."""
    R = H.reshape(dimA, dimB, dimA, dimB).transpose(0, 2, 1, 3).reshape(dimA**2, dimB**2)
    U, s, Vh = np.linalg.svd(R)
    keep = s > tol * max(1.0, s[0] if s.size else 0.0)
    pairs = []
    for k in np.flatnonzero(keep):
        Ak_dag = s[k] * U[:, k].reshape(dimA, dimA)
        Bk = Vh[k].reshape(dimB, dimB)
        pairs.append((Ak_dag.conj().T, Bk))
    return pairs


# -- structured application of superoperators to assignment matrices ---------

class _Ops:
    """Apply factor-local superoperators to columns of vectorized A(x)B operators."""

    def __init__(self, dA: int, dB: int):
        self.dA, self.dB = dA, dB
        self.D = dA * dB

    def _split(self, X):
        m = X.shape[1]
        # composite vec index = (a' dB + b') D + (a dB + b)
        return X.reshape(self.dA, self.dB, self.dA, self.dB, m)

    def on_A(self, S, X):
        dA, dB = self.dA, self.dB
        m = X.shape[1]
        T = self._split(X).transpose(0, 2, 1, 3, 4).reshape(dA * dA, dB * dB * m)
        T = S.apply(T) if hasattr(S, "apply") else S @ T
        return T.reshape(dA, dA, dB, dB, m).transpose(0, 2, 1, 3, 4).reshape(self.D**2, m)

    def on_B(self, S, X):
        dA, dB = self.dA, self.dB
        m = X.shape[1]
        T = self._split(X).transpose(1, 3, 0, 2, 4).reshape(dB * dB, dA * dA * m)
        T = S @ T
        return T.reshape(dB, dB, dA, dA, m).transpose(2, 0, 3, 1, 4).reshape(self.D**2, m)

    def trace_A(self, X):
        m = X.shape[1]
        return np.einsum("abacm->bcm", self._split(X)).reshape(self.dB**2, m)

    def tensor_left(self, rhoA, Y):
        """Columns ``|rhoA (x) y>>`` for columns ``|y>>`` of ``Y``."""
        dB = self.dB
        m = Y.shape[1]
        Yo = Y.reshape(dB, dB, m)  # [b', b]
        r = rhoA.T  # r[a', a] = rhoA[a, a']
        return np.einsum("xa,ybm->xyabm", r, Yo).reshape(self.D**2, m)


def _hamiltonian_apply(H, X, D):
    m = X.shape[1]
    ops = X.reshape(D, D, m).transpose(1, 0, 2)  # [row, col, m]
    comm = np.einsum("ij,jkm->ikm", H, ops) - np.einsum("ijm,jk->ikm", ops, H)
    return (-1j * comm).transpose(1, 0, 2).reshape(D * D, m)


@dataclass(frozen=True)
class Expansion:
    order: int
    K: list
    Ls: list
    gauge: list
    rhoA: np.ndarray
    dimA: int
    dimB: int

    def K_sum(self, eps: float, order: int | None = None) -> np.ndarray:
        N = self.order if order is None else order
        return sum(eps**n * self.K[n] for n in range(N + 1))

    def Ls_sum(self, eps: float, order: int | None = None) -> np.ndarray:
        N = self.order if order is None else order
        return sum(eps**n * self.Ls[n] for n in range(N + 1))


def _zero_gauge(N, dB):
    return [np.zeros((dB * dB, dB * dB), dtype=complex) for _ in range(N + 1)]


def eliminate(
    model: CompositeModel,
    N: int,
    gauge: Sequence[np.ndarray] | None = None,
    pinv: str = "solve",
    growth_max: float = 1e12,
) -> Expansion:
    """Expansion of ``K`` and ``L_s`` to order ``N``.

    ``gauge`` holds ``G_1..G_N`` (supermatrices on B) fixing ``tr_A K_n = G_n``;
    ``None`` selects the partial-trace parametrization ``G = 0``.
    ``pinv`` picks how ``L_A+`` is applied: ``"solve"`` (block LU) or
    ``"spectral"`` (eigen-decomposition, small ``dimA`` only).
    """
    if N < 1:
        raise ValueError("order must be at least 1")
    dA, dB = model.dimA, model.dimB
    D = dA * dB
    if pinv == "solve":
        SA = model.L_A_solvable
        Lp = PseudoInverse(SA)
        rhoA = Lp.steady
    elif pinv == "spectral":
        SA = model.L_A_matrix
        rhoA = steady_state(SA).rho
        Lp = pseudo_inverse(SA)
    else:
        raise ValueError(f"unknown pinv route {pinv!r}")
    rhoA = (rhoA + rhoA.conj().T) / 2
    rhoA = rhoA / np.trace(rhoA).real
    G = _zero_gauge(N, dB)
    if gauge is not None:
        if len(gauge) < N:
            raise ValueError(f"gauge must supply G_1..G_{N}")
        for n in range(1, N + 1):
            G[n] = np.asarray(gauge[n - 1], dtype=complex)
    ops = _Ops(dA, dB)
    LB = model.L_B_matrix
    has_LB = model.L_B is not None and np.any(LB != 0)
    H = model.H_int

    def V(X):
        out = _hamiltonian_apply(H, X, D)
        if has_LB:
            out = out + ops.on_B(LB, X)
        return out

    eyeB = np.eye(dB * dB, dtype=complex)
    K0 = ops.tensor_left(rhoA, eyeB)
    K = [K0]
    Ls = [np.zeros((dB * dB, dB * dB), dtype=complex)]
    scale0 = max(1.0, spla.norm(SA, 1) if sp.issparse(SA) else np.linalg.norm(SA, 1))
    for n in range(1, N + 1):
        Ln = V(K[n - 1])
        for k in range(1, n):
            Ln = Ln - K[k] @ Ls[n - k]
        Lsn = ops.trace_A(Ln)
        Kn = ops.on_A(Lp, K0 @ Lsn - Ln) + K0 @ G[n]
        if not (np.all(np.isfinite(Kn)) and np.linalg.norm(Kn) < growth_max * scale0**n):
            raise OrderTooHigh(f"coefficients blew up at order {n}")
        Ls.append(Lsn)
        K.append(Kn)
    return Expansion(N, K, Ls, G, rhoA, dA, dB)


def invariance_residual(model: CompositeModel, exp: Expansion, eps: float) -> float:
    """Spectral norm of ``K(L_s) - L_tot(K)`` for the truncated series."""
    dA, dB = model.dimA, model.dimB
    D = dA * dB
    ops = _Ops(dA, dB)
    Kt = exp.K_sum(eps)
    Lst = exp.Ls_sum(eps)
    LKt = ops.on_A(model.L_A_solvable, Kt) + eps * _hamiltonian_apply(model.H_int, Kt, D)
    if model.L_B is not None:
        LKt = LKt + eps * ops.on_B(model.L_B_matrix, Kt)
    return float(np.linalg.norm(Kt @ Lst - LKt, 2))


# -- gauge transformations --------------------------------------------------

def _series_mul(a, b, N):
    """Truncated product of two series given as lists indexed by order."""
    out = []
    for n in range(N + 1):
        terms = [a[i] @ b[n - i] for i in range(n + 1) if i < len(a) and n - i < len(b)]
        out.append(sum(terms[1:], terms[0]) if terms else None)
    return out


def gauge_transform(exp0: Expansion, gauge: Sequence[np.ndarray], eps: float | None = None, cond_max: float = 1e12):
    """Series of ``K^G = K o (1 + G)`` and ``L_s^G = (1 + G)^-1 L_s (1 + G)``.

    ``exp0`` should be the ``G = 0`` expansion; ``gauge`` lists ``G_1..G_N``.
    All products are truncated at the expansion order and the inverse is the
    Neumann series. When ``eps`` is given, ``1 + G(eps)`` is checked for
    invertibility.
    """
    N = exp0.order
    dB2 = exp0.dimB**2
    I = np.eye(dB2, dtype=complex)
    g = [I] + [np.asarray(gauge[n - 1], complex) if n - 1 < len(gauge) else np.zeros_like(I) for n in range(1, N + 1)]
    if eps is not None:
        full = sum(eps**n * g[n] for n in range(N + 1))
        c = np.linalg.cond(full)
        if not np.isfinite(c) or c > cond_max:
            raise GaugeNotInvertible(f"1 + G has condition number {c:.3g}")
    # Neumann series of (1 + G)^-1
    minusG = [np.zeros_like(I)] + [-g[n] for n in range(1, N + 1)]
    inv = [I] + [np.zeros_like(I) for _ in range(N)]
    power = [I] + [np.zeros_like(I) for _ in range(N)]
    for _ in range(N):
        power = _series_mul(power, minusG, N)
        inv = [inv[n] + power[n] for n in range(N + 1)]
    KG = _series_mul(exp0.K, g, N)
    LsG = _series_mul(_series_mul(inv, exp0.Ls, N), g, N)
    return KG, LsG


# -- second-order completely positive gauge ---------------------------------

@dataclass(frozen=True)
class SecondOrderData:
    """Operators entering the second-order assignment map for ``G_1 = 0``."""

    rhoA: np.ndarray
    F: list
    V: list
    U: list  # U[k][j]
    gram: np.ndarray  # tr(F_k rho F_j^dag)
    A: list
    B: list
    expect_A: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        """``eta_kj = <A_j^dag F_k> + <A_k^dag F_j>^*``."""
        n = len(self.F)
        c = np.array([[np.trace(self.A[j].conj().T @ self.F[k] @ self.rhoA) for j in range(n)] for k in range(n)])
        return c + c.T.conj()


def second_order_data(model: CompositeModel, rank_tol: float = 1e-10) -> SecondOrderData:
    Lp = PseudoInverse(model.L_A_solvable)
    rho = Lp.steady
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    w = np.linalg.eigvalsh(rho)
    if w[0] <= rank_tol:
        raise RankDeficientSteadyState(f"smallest steady-state eigenvalue {w[0]:.3g}")
    rho_inv = np.linalg.inv(rho)

    def S(X):
        return X - np.trace(X) * rho

    def pinv(X):
        return devectorize(Lp.apply(vectorize(X)))

    A = [a for a, _ in model.decomposition]
    B = [b for _, b in model.decomposition]
    F = [-pinv(S(a @ rho)) @ rho_inv for a in A]
    V = [pinv(S(f @ rho)) @ rho_inv for f in F]
    U = [[pinv(S(a.conj().T @ f @ rho)) @ rho_inv for f in F] for a in A]
    gram = np.array([[np.trace(fk @ rho @ fj.conj().T) for fj in F] for fk in F])
    expect = np.array([np.trace(a @ rho) for a in A])
    return SecondOrderData(rho, F, V, U, gram, A, B, expect)


def second_order_cp_gauge(model: CompositeModel, z: float = 1.0, data: SecondOrderData | None = None):
    """Gauge ``[G_1, G_2]`` with ``G_1 = 0`` making the second-order assignment CP.

    ``G_2(rho) = z sum_kj tr(F_k rho_A F_j^dag) (B_k^dag rho B_j - {B_j B_k^dag, rho}/2)``
    which keeps the trace. Requires a full-rank fast steady state.
    """
    if z < 1:
        raise ValueError("z must be at least 1")
    if data is None:
        data = second_order_data(model)
    dB = model.dimB
    B = data.B
    G2 = np.zeros((dB * dB, dB * dB), dtype=complex)
    I = np.eye(dB)
    for k, Bk in enumerate(B):
        for j, Bj in enumerate(B):
            c = z * data.gram[k, j]
            if c == 0:
                continue
            BjBk = Bj @ Bk.conj().T
            G2 += c * (
                sandwich_supermatrix(Bk.conj().T, Bj)
                - 0.5 * sandwich_supermatrix(BjBk, I)
                - 0.5 * sandwich_supermatrix(I, BjBk)
            )
    return [np.zeros_like(G2), G2]


def mu_matrix(data: SecondOrderData, z: float) -> np.ndarray:
    """``mu_kj = z_kj + z_jk^* - tr(F_k rho F_j^dag)`` with ``z_kj = z/2 tr(F_k rho F_j^dag)``."""
    zkj = 0.5 * z * data.gram
    return zkj + zkj.conj().T - data.gram


def second_order_kraus_form(model: CompositeModel, eps: float, z: float = 1.0,
                            data: SecondOrderData | None = None) -> np.ndarray:
    """Second-order assignment map written as a sum of CP pieces.

    ``K(rho) = W (rho_A (x) rho) W^dag - eps^2 L_A+(sum_mu P_mu (.) P_mu^dag)
    + eps^2 sum_kj mu_kj (1 (x) B_k^dag)(.)(1 (x) B_j)`` with the trace-keeping gauge
    of :func:`second_order_cp_gauge`. Returned as a ``((dA dB)**2, dB**2)`` matrix.
    """
    if data is None:
        data = second_order_data(model)
    dA, dB = model.dimA, model.dimB
    D = dA * dB
    rho = data.rhoA
    IA = np.eye(dA)
    F, Vop, U, B = data.F, data.V, data.U, data.B
    n = len(F)
    zkj = 0.5 * z * data.gram
    LB = model.L_B_matrix
    M = sum(np.kron(F[k], B[k].conj().T) for k in range(n))
    Nop = np.zeros((D, D), dtype=complex)
    for k in range(n):
        for j in range(n):
            # trace-keeping choice u_kj = -z_jk shifts U_kj by -z_jk
            Ukj = U[k][j] - zkj[j, k] * IA
            Nop += np.kron(Ukj, B[k] @ B[j].conj().T)
            Nop -= np.conj(data.expect_A[k]) * np.kron(Vop[j], B[j].conj().T @ B[k])
        LBk = devectorize(LB @ vectorize(B[k].conj().T))
        Nop += 1j * np.kron(Vop[k], LBk)
    W = np.eye(D) - 1j * eps * M + eps**2 * Nop
    ops = _Ops(dA, dB)
    K0 = ops.tensor_left(rho, np.eye(dB * dB, dtype=complex))
    out = sandwich_supermatrix(W, W.conj().T) @ K0
    jumps = model.L_A_jumps
    if jumps:
        Lp = PseudoInverse(model.L_A_solvable)
        acc = np.zeros_like(out)
        for La in jumps:
            P = sum(np.kron(La @ F[k] - F[k] @ La, B[k].conj().T) for k in range(n))
            acc += sandwich_supermatrix(P, P.conj().T) @ K0
        out -= eps**2 * ops.on_A(Lp, acc)
    elif n:
        raise ValueError("fast jump operators are required; pass L_A as a Lindbladian")
    mu = mu_matrix(data, z)
    for k in range(n):
        for j in range(n):
            if mu[k, j] != 0:
                Xk = np.kron(IA, B[k].conj().T)
                Xj = np.kron(IA, B[j])
                out += eps**2 * mu[k, j] * sandwich_supermatrix(Xk, Xj) @ K0
    return out


def assignment_choi(Kmat: np.ndarray) -> np.ndarray:
    """Choi matrix of an assignment map stored as ``((dA dB)**2, dB**2)``."""
    from .superop_core import choi

    return choi(Kmat)



def random_composite_model(dA: int, dB: int, rng: np.random.Generator, n_terms: int = 2,
                           slow_dynamics: bool = True) -> CompositeModel:
    """Random fast Lindbladian, random Hermitian coupling and (optionally) a random slow Hamiltonian.

    The slow dynamics is kept Hamiltonian because the closed second-order
    Kraus form assumes it.
    """
    from .superop_core import random_lindbladian

    LA = random_lindbladian(dA, rng)
    H = np.zeros((dA * dB, dA * dB), dtype=complex)
    for _ in range(n_terms):
        a = rng.normal(size=(dA, dA)) + 1j * rng.normal(size=(dA, dA))
        b = rng.normal(size=(dB, dB)) + 1j * rng.normal(size=(dB, dB))
        a, b = (a + a.conj().T) / 2, (b + b.conj().T) / 2
        H += np.kron(a, b) / np.sqrt(dA * dB)
    LB = random_lindbladian(dB, rng, n_jumps=0).supermatrix() if slow_dynamics else None
    return CompositeModel(dA, dB, LA, H, L_B=LB)
