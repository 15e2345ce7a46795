"""Operators, vectorization and supermatrices.

Conventions used throughout the package:

* ``vec(A)`` stacks columns, ``|A>> = sum_ij A_ij |j> (x) |i>``, so that
  ``vec(A @ B @ C) == kron(C.T, A) @ vec(B)``.
* Composite spaces are ordered fast (A) first, slow (B) second.
* A *supermatrix* of a linear map from operators of size ``n_in`` to operators
  of size ``n_out`` is a ``(n_out**2, n_in**2)`` complex array.
* Qubit basis is ``(|e>, |g>)``: ``sigma_z = diag(1, -1)`` and
  ``sigma_minus = |g><e|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

# Pauli matrices in the (|e>, |g>) basis
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = (SIGMA_X - 1j * SIGMA_Y) / 2
SIGMA_PLUS = (SIGMA_X + 1j * SIGMA_Y) / 2


class DimensionError(ValueError):
    """Raised when operator or supermatrix shapes are incompatible."""


def _side(n: int, what: str = "length") -> int:
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise DimensionError(f"{what} {n} is not a perfect square")
    return d


def vectorize(A: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization ``|A>>``."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionError("operator must be a 2d array")
    return A.ravel(order="F")


def devectorize(v: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize`. Square shape is inferred unless given."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise DimensionError("expected a 1d vector")
    if shape is None:
        d = _side(v.size)
        shape = (d, d)
    elif shape[0] * shape[1] != v.size:
        raise DimensionError(f"cannot reshape length {v.size} into {shape}")
    return v.reshape(shape, order="F")


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    """Hilbert-Schmidt product ``<<A|B>> = tr(A^dag B)``."""
    return complex(np.vdot(vectorize(A), vectorize(B)))


def sandwich_supermatrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Supermatrix of ``B -> A @ B @ C``.

    Rectangular factors are allowed, which is how maps between spaces of
    different dimension (partial traces, embeddings) are built.
    """
    A = np.asarray(A)
    C = np.asarray(C)
    if A.ndim != 2 or C.ndim != 2:
        raise DimensionError("sandwich factors must be 2d")
    return np.kron(C.T, A)


def identity_superop(d: int) -> np.ndarray:
    return np.eye(d * d, dtype=complex)


def commutator_superop(H: np.ndarray) -> np.ndarray:
    """Supermatrix of ``X -> H X - X H``."""
    H = np.asarray(H, dtype=complex)
    _check_square(H)
    eye = np.eye(H.shape[0])
    return sandwich_supermatrix(H, eye) - sandwich_supermatrix(eye, H)


def anticommutator_superop(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    _check_square(H)
    eye = np.eye(H.shape[0])
    return sandwich_supermatrix(H, eye) + sandwich_supermatrix(eye, H)


def dissipator_superop(L: np.ndarray) -> np.ndarray:
    """Supermatrix of ``D[L](X) = L X L^dag - {L^dag L, X}/2``."""
    L = np.asarray(L, dtype=complex)
    _check_square(L)
    LdL = L.conj().T @ L
    return sandwich_supermatrix(L, L.conj().T) - 0.5 * anticommutator_superop(LdL)


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    """Supermatrix of ``X -> -i [H, X]``."""
    return -1j * commutator_superop(H)


def apply_superop(S: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Apply a (possibly rectangular) supermatrix to an operator."""
    v = S @ vectorize(A)
    return devectorize(v)


def superop_compose(*maps: np.ndarray) -> np.ndarray:
    """Composition ``maps[0] o maps[1] o ...`` (rightmost acts first)."""
    out = maps[0]
    for m in maps[1:]:
        out = out @ m
    return out


def hc_superop(S: np.ndarray) -> np.ndarray:
    """Supermatrix of ``X -> (S(X^dag))^dag``.

    A term written ``S(rho) + (h.c.)`` for Hermitian ``rho`` is ``S + hc_superop(S)``.
    """
    n_out = _side(S.shape[0], "row count")
    n_in = _side(S.shape[1], "column count")
    P_out = _dagger_permutation(n_out)
    P_in = _dagger_permutation(n_in)
    return S.conj()[P_out][:, P_in]


def _dagger_permutation(d: int) -> np.ndarray:
    # vec(X^T)[k] = vec(X)[perm[k]]
    idx = np.arange(d * d).reshape(d, d, order="F")
    return idx.T.ravel(order="F")


def is_hermiticity_preserving(S: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, np.linalg.norm(S, 2))
    return bool(np.linalg.norm(S - hc_superop(S), 2) <= tol * scale)


def trace_row(d: int) -> np.ndarray:
    """Row vector ``<<I|`` so that ``trace_row(d) @ vec(X) == tr(X)``."""
    return vectorize(np.eye(d, dtype=complex)).conj()


def is_trace_annihilating(S: np.ndarray, tol: float = 1e-10) -> bool:
    d = _side(S.shape[0], "row count")
    scale = max(1.0, np.linalg.norm(S, 2))
    return bool(np.linalg.norm(trace_row(d) @ S) <= tol * scale)


def is_trace_preserving(S: np.ndarray, tol: float = 1e-10) -> bool:
    d_out = _side(S.shape[0], "row count")
    d_in = _side(S.shape[1], "column count")
    scale = max(1.0, np.linalg.norm(S, 2))
    return bool(np.linalg.norm(trace_row(d_out) @ S - trace_row(d_in)) <= tol * scale)


def _check_square(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")


# -- predicates on operators ------------------------------------------------

def is_hermitian(A: np.ndarray, tol: float = 1e-12) -> bool:
    A = np.asarray(A)
    scale = max(1.0, np.linalg.norm(A, 2))
    return bool(np.linalg.norm(A - A.conj().T, 2) <= tol * scale)


def psd_threshold(M: np.ndarray, tol: float) -> float:
    """Eigenvalue floor ``-tol * max(1, ||M||_2)`` used for PSD decisions."""
    return -tol * max(1.0, float(np.linalg.norm(M, 2)))


def min_hermitian_eig(M: np.ndarray) -> float:
    M = np.asarray(M)
    Mh = (M + M.conj().T) / 2
    return float(np.linalg.eigvalsh(Mh)[0])


def is_psd(M: np.ndarray, tol: float = 1e-10) -> bool:
    return min_hermitian_eig(M) >= psd_threshold(M, tol)


# -- composite spaces -------------------------------------------------------

def superkron(SA: np.ndarray, SB: np.ndarray) -> np.ndarray:
    """Supermatrix of ``S_A (x) S_B`` acting on operators of ``H_A (x) H_B``.

    Both factors may be rectangular (maps between spaces of different size).
    """
    ao, ai = _side(SA.shape[0], "row count"), _side(SA.shape[1], "column count")
    bo, bi = _side(SB.shape[0], "row count"), _side(SB.shape[1], "column count")
    # row index of factor A is (col_out * ao + row_out); same for B and inputs
    A4 = SA.reshape(ao, ao, ai, ai)
    B4 = SB.reshape(bo, bo, bi, bi)
    T = np.einsum("pqrs,tuvw->ptqurvsw", A4, B4)
    return T.reshape(ao * bo * ao * bo, ai * bi * ai * bi)


def partial_trace(rho: np.ndarray, dims: Sequence[int], over: str = "A") -> np.ndarray:
    """Partial trace of an operator on ``H_A (x) H_B`` with ``dims = (dA, dB)``."""
    dA, dB = dims
    rho = np.asarray(rho)
    if rho.shape != (dA * dB, dA * dB):
        raise DimensionError(f"operator of shape {rho.shape} does not factor as {dA}x{dB}")
    r = rho.reshape(dA, dB, dA, dB)
    if over == "A":
        return np.einsum("abad->bd", r)
    if over == "B":
        return np.einsum("abcb->ac", r)
    raise ValueError("over must be 'A' or 'B'")


def partial_trace_superop(dimA: int, dimB: int, over: str = "A") -> np.ndarray:
    """Supermatrix of the partial trace, shape ``(d_kept**2, (dimA*dimB)**2)``."""
    if over == "A":
        return superkron(trace_row(dimA)[None, :], identity_superop(dimB))
    if over == "B":
        return superkron(identity_superop(dimA), trace_row(dimB)[None, :])
    raise ValueError("over must be 'A' or 'B'")


def tensor_state_superop(rhoA: np.ndarray, dimB: int) -> np.ndarray:
    """Supermatrix of ``rho_B -> rhoA (x) rho_B``, shape ``((dA dB)**2, dB**2)``."""
    return superkron(vectorize(rhoA)[:, None], identity_superop(dimB))


# -- Choi matrices ----------------------------------------------------------

def choi(S: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| (x) S(|i><j|)``.

    For a map from ``d_in`` to ``d_out`` operators the result is
    ``(d_in d_out) x (d_in d_out)``; its eigenvectors are vectorized Kraus-like
    operators ``d_out x d_in`` in the column-stacking convention.
    """
    d_out = _side(S.shape[0], "row count")
    d_in = _side(S.shape[1], "column count")
    # S[(l*d_out + k), (j*d_in + i)] = <k| S(|i><j|) |l>
    S4 = S.reshape(d_out, d_out, d_in, d_in)  # [l, k, j, i]
    C = np.einsum("lkji->ikjl", S4)
    return C.reshape(d_in * d_out, d_in * d_out)


def superop_from_choi(C: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Inverse of :func:`choi`."""
    C4 = C.reshape(d_in, d_out, d_in, d_out)  # [i, k, j, l]
    S4 = np.einsum("ikjl->lkji", C4)
    return S4.reshape(d_out * d_out, d_in * d_in)


def kraus_superop(kraus_ops: Sequence[np.ndarray]) -> np.ndarray:
    """Supermatrix of ``X -> sum_k M_k X M_k^dag`` (rectangular ``M_k`` allowed)."""
    return sum(sandwich_supermatrix(M, M.conj().T) for M in kraus_ops)


def transpose_superop(d: int) -> np.ndarray:
    """Supermatrix of the transpose map."""
    return np.eye(d * d, dtype=complex)[_dagger_permutation(d)]


def matrix_unit(d: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((d, d), dtype=complex)
    E[i, j] = 1.0
    return E


# -- Lindbladians -----------------------------------------------------------

@dataclass(frozen=True)
class Lindbladian:
    """Generator ``-i[H, .] + sum_k rate_k D[L_k]``."""

    H: np.ndarray
    jumps: tuple[tuple[float, np.ndarray], ...] = field(default_factory=tuple)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        _check_square(H)
        if not is_hermitian(H, 1e-12):
            raise ValueError("Hamiltonian is not Hermitian")
        jumps = []
        for rate, L in self.jumps:
            L = np.asarray(L, dtype=complex)
            if L.shape != H.shape:
                raise DimensionError("jump operator shape differs from Hamiltonian")
            if rate < 0:
                raise ValueError("jump rates must be nonnegative")
            jumps.append((float(rate), L))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "jumps", tuple(jumps))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def supermatrix(self) -> np.ndarray:
        S = hamiltonian_superop(self.H)
        for rate, L in self.jumps:
            S = S + rate * dissipator_superop(L)
        return S

    def sparse_supermatrix(self):
        """Same as :meth:`supermatrix` in CSR form, for large truncated spaces."""
        d = self.dim
        eye = sp.identity(d, dtype=complex, format="csr")
        H = sp.csr_matrix(self.H)
        S = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
        for rate, L in self.jumps:
            Ls = sp.csr_matrix(L)
            LdL = Ls.conj().T @ Ls
            S = S + rate * (
                sp.kron(Ls.conj(), Ls) - 0.5 * (sp.kron(eye, LdL) + sp.kron(LdL.T, eye))
            )
        return sp.csr_matrix(S)

    def jump_operators(self) -> list[np.ndarray]:
        """Jump operators with their rates absorbed, ``sqrt(rate) * L``."""
        return [np.sqrt(rate) * L for rate, L in self.jumps]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        out = -1j * (self.H @ rho - rho @ self.H)
        for rate, L in self.jumps:
            LdL = L.conj().T @ L
            out = out + rate * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
        return out


def random_lindbladian(d: int, rng: np.random.Generator, n_jumps: int = 2, scale: float = 1.0) -> Lindbladian:
    """Gaussian Hamiltonian and jump operators; generic instances have a unique full-rank steady state."""
    def ginibre():
        return (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2 * d)

    G = ginibre()
    H = scale * (G + G.conj().T) / 2
    return Lindbladian(H, tuple((scale, ginibre()) for _ in range(n_jumps)))
