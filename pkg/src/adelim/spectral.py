"""Eigen-analysis of superoperators, steady states and the pseudoinverse.

The pseudoinverse of a generator with a simple zero eigenvalue is

    L+ = sum_{alpha >= 1} |X_alpha>> <<Xbar_alpha| / lambda_alpha ,

i.e. the inverse on the decaying eigenspaces and zero on the steady state.
Two routes are available: the spectral sum (default for small systems) and a
block-wise linear solve that never diagonalizes, used for large truncations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import roots_legendre

from .superop_core import (
    Lindbladian,
    _side,
    devectorize,
    trace_row,
    vectorize,
)

__all__ = [
    "Lindbladian",
    "NearDegenerate",
    "NonUniqueSteadyState",
    "SpectralData",
    "SteadyState",
    "PseudoInverse",
    "diagonalize",
    "steady_state",
    "pseudo_inverse",
    "pseudo_inverse_integral",
    "propagate",
]


class NearDegenerate(np.linalg.LinAlgError):
    """The eigenvector matrix is too ill-conditioned to biorthonormalize."""


class NonUniqueSteadyState(ValueError):
    """More than one eigenvalue sits at zero."""


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    right: np.ndarray  # columns are |X_alpha>>
    left: np.ndarray  # columns are |Xbar_alpha>>, so left^H @ right = I

    @property
    def dim(self) -> int:
        return _side(self.right.shape[0])

    def right_operator(self, k: int) -> np.ndarray:
        return devectorize(self.right[:, k])

    def left_operator(self, k: int) -> np.ndarray:
        return devectorize(self.left[:, k])

    def biorthonormality_error(self) -> float:
        G = self.left.conj().T @ self.right
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.eigenvalues) @ self.left.conj().T


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    gap: float | None


def _sort_order(ev: np.ndarray, decimals: int = 10) -> np.ndarray:
    # descending real part, ties broken by descending imaginary part
    re = np.round(ev.real, decimals)
    im = np.round(ev.imag, decimals)
    return np.lexsort((-im, -re))


def diagonalize(S: np.ndarray, cond_max: float = 1e10) -> SpectralData:
    """Eigen-decompose a supermatrix into biorthonormal right/left eigenoperators.

    Left vectors come from the inverse of the right eigenvector matrix, which
    also handles degenerate eigenvalues. Raises :class:`NearDegenerate` when
    that matrix is numerically singular.
    """
    S = np.asarray(S, dtype=complex)
    ev, R = sla.eig(S)
    order = _sort_order(ev)
    ev, R = ev[order], R[:, order]
    R = R / np.linalg.norm(R, axis=0)
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > cond_max:
        raise NearDegenerate(f"eigenvector matrix condition number {cond:.3g}")
    Linv = np.linalg.inv(R)
    return SpectralData(eigenvalues=ev, right=R, left=Linv.conj().T)


def _as_supermatrix(L) -> np.ndarray:
    if isinstance(L, Lindbladian):
        return L.supermatrix()
    if sp.issparse(L):
        return L.toarray()
    return np.asarray(L, dtype=complex)


def _as_solvable(L):
    # sparse inputs stay sparse for the block solver
    if isinstance(L, Lindbladian):
        return L.sparse_supermatrix()
    if sp.issparse(L):
        return sp.csr_matrix(L, dtype=complex)
    return np.asarray(L, dtype=complex)


def steady_state(L, gap_tol: float | None = None, compute_gap: bool = True) -> SteadyState:
    """Unique steady state of a generator.

    With ``compute_gap`` the full spectrum is computed and uniqueness is
    checked against ``gap_tol`` (default ``1e-8 * ||L||``). Without it the
    state is obtained from one bordered linear solve.
    """
    S = _as_supermatrix(L)
    d = _side(S.shape[0])
    scale = max(1.0, np.linalg.norm(S, 1))
    if gap_tol is None:
        gap_tol = 1e-8 * scale
    if compute_gap:
        ev = sla.eigvals(S)
        mags = np.abs(ev)
        order = np.argsort(mags)
        if mags[order[1]] < gap_tol:
            raise NonUniqueSteadyState(
                f"second eigenvalue {ev[order[1]]:.3g} within {gap_tol:.3g} of zero"
            )
        gap = float(-np.max(ev[order[1:]].real))
    else:
        gap = None
    rho = _steady_state_solve(S, d)
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    return SteadyState(rho=rho, gap=gap)


def _steady_state_solve(S: np.ndarray, d: int) -> np.ndarray:
    blocks = _Blocks(S, d)
    v = vectorize(np.eye(d, dtype=complex) / d)
    x = blocks.solve_bordered(-v)
    return devectorize(x)


class _Blocks:
    """Connected components of ``M = S - |v>><<I|`` and their LU factors.

    Generators with a conserved quantity (for example excitation difference
    in a damped oscillator) split into many small blocks, which keeps solves
    cheap even when the full supermatrix is large.
    """

    def __init__(self, S, d: int):
        n = S.shape[0]
        diag_idx = np.arange(d) * (d + 1)
        if sp.issparse(S):
            rows = np.repeat(diag_idx, d)
            cols = np.tile(diag_idx, d)
            border = sp.csr_matrix((np.full(d * d, -1.0 / d, dtype=complex), (rows, cols)), shape=(n, n))
            M = sp.csr_matrix(S + border)
            M.eliminate_zeros()
            pattern = (M != 0).astype(np.int8)
            pattern = pattern + pattern.T
        else:
            M = S.copy()
            M[np.ix_(diag_idx, diag_idx)] -= 1.0 / d
            pattern = np.abs(M) > 0
            pattern = csr_matrix(pattern | pattern.T)
        ncomp, labels = connected_components(pattern, directed=False)
        self.n = n
        self.groups = [np.flatnonzero(labels == c) for c in range(ncomp)]
        if sp.issparse(M):
            self.lu = [sla.lu_factor(M[g][:, g].toarray()) for g in self.groups]
        else:
            self.lu = [sla.lu_factor(M[np.ix_(g, g)]) for g in self.groups]

    def solve_bordered(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(y.shape, dtype=complex)
        for g, lu in zip(self.groups, self.lu):
            out[g] = sla.lu_solve(lu, y[g])
        return out


class PseudoInverse:
    """Pseudoinverse of a generator with a simple zero eigenvalue, applied by solves.

    Accepts a dense or sparse supermatrix or a :class:`Lindbladian` (kept
    sparse). Uses ``M = L - |I/d>><<I|``: then ``rho = M^{-1}(-I/d)`` is the steady
    state and ``L+ y = M^{-1}(y - rho tr y)``.
    """

    def __init__(self, L):
        S = _as_solvable(L)
        self.d = _side(S.shape[0])
        self._blocks = _Blocks(S, self.d)
        v = vectorize(np.eye(self.d, dtype=complex) / self.d)
        self.rho_vec = self._blocks.solve_bordered(-v)
        self._trace = trace_row(self.d)

    @property
    def steady(self) -> np.ndarray:
        return devectorize(self.rho_vec)

    def apply(self, Y: np.ndarray) -> np.ndarray:
        """Apply to vectorized operators stored as columns (or a single vector)."""
        Y = np.asarray(Y, dtype=complex)
        tr = self._trace @ Y
        rhs = Y - np.multiply.outer(self.rho_vec, tr) if Y.ndim > 1 else Y - self.rho_vec * tr
        return self._blocks.solve_bordered(rhs)

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(self.d * self.d, dtype=complex))


def pseudo_inverse(S, spectral: SpectralData | None = None, method: str = "spectral") -> np.ndarray:
    """Pseudoinverse ``L+`` as a dense supermatrix.

    ``method="spectral"`` sums over biorthonormal eigenpairs, skipping the
    eigenvalue closest to zero; ``method="solve"`` uses :class:`PseudoInverse`.
    """
    S = _as_supermatrix(S)
    if method == "solve":
        return PseudoInverse(S).matrix()
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    if spectral is None:
        spectral = diagonalize(S)
    ev = spectral.eigenvalues
    k0 = int(np.argmin(np.abs(ev)))
    scale = max(1.0, np.linalg.norm(S, 1))
    others = np.delete(np.abs(ev), k0)
    if others.size and others.min() < 1e-8 * scale:
        raise NonUniqueSteadyState("zero eigenvalue is not simple")
    inv = np.zeros(ev.size, dtype=complex)
    keep = np.arange(ev.size) != k0
    inv[keep] = 1.0 / ev[keep]
    return (spectral.right * inv) @ spectral.left.conj().T


@lru_cache(maxsize=4)
def _gauss_legendre(n: int):
    return roots_legendre(n)


def pseudo_inverse_integral(S, A: np.ndarray, t_max: float, n_points: int = 4001) -> np.ndarray:
    """Reference value ``-int_0^t_max exp(L s)(A - rho tr A) ds`` by quadrature.

    Meant for cross-checks only; the integrand is evaluated at Gauss-Legendre
    nodes by eigen-propagation.
    """
    S = _as_supermatrix(S)
    d = _side(S.shape[0])
    rho = steady_state(S, compute_gap=False).rho
    a = vectorize(np.asarray(A, dtype=complex))
    y = a - vectorize(rho) * (trace_row(d) @ a)
    sd = diagonalize(S)
    coeff = sd.left.conj().T @ y
    nodes, weights = _gauss_legendre(n_points)
    s = 0.5 * t_max * (nodes + 1)
    w = 0.5 * t_max * weights
    # sum_s w_s exp(lambda s) for each eigenvalue
    factors = np.exp(np.outer(sd.eigenvalues, s)) @ w
    return devectorize(-(sd.right @ (factors * coeff)))


def propagate(S, t: float, v: np.ndarray) -> np.ndarray:
    """``exp(S t) v`` by scaling and squaring."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    S = _as_supermatrix(S)
    v = np.asarray(v, dtype=complex)
    if t == 0:
        return v.copy()
    return sla.expm(S * t) @ v
