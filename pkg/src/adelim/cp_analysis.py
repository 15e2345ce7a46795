"""Complete positivity, Lindblad form and qubit Kraus-spectrum feasibility."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .superop_core import (
    _side,
    choi,
    devectorize,
    dissipator_superop,
    hamiltonian_superop,
    is_hermiticity_preserving,
    is_trace_annihilating,
    psd_threshold,
    vectorize,
)


class NotHermitianPreserving(ValueError):
    pass


class NotTraceAnnihilating(ValueError):
    pass


class NonHermitianInput(ValueError):
    pass


class NoUnitEigenvalue(ValueError):
    pass


class NotConjugationClosed(ValueError):
    pass


@dataclass(frozen=True)
class CpVerdict:
    is_cp: bool
    min_choi_eig: float
    tol_used: float
    hermiticity_broken: bool = False

    def __bool__(self) -> bool:
        return self.is_cp


def is_completely_positive(S: np.ndarray, tol: float = 1e-10) -> CpVerdict:
    """Choi test. Works for maps between spaces of different dimension."""
    C = choi(np.asarray(S, dtype=complex))
    scale = max(1.0, float(np.linalg.norm(C, 2)))
    herm_err = float(np.linalg.norm(C - C.conj().T, 2))
    Ch = (C + C.conj().T) / 2
    mineig = float(np.linalg.eigvalsh(Ch)[0])
    if herm_err > tol * scale:
        return CpVerdict(False, mineig, tol, hermiticity_broken=True)
    return CpVerdict(mineig >= -tol * scale, mineig, tol)


@dataclass(frozen=True)
class LindbladVerdict:
    is_lindbladian: bool
    min_eig: float
    tol_used: float
    hamiltonian: np.ndarray | None = None
    jumps: list[np.ndarray] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.is_lindbladian

    def reconstruct(self) -> np.ndarray:
        """Supermatrix rebuilt from the extracted Hamiltonian and jump operators."""
        if self.hamiltonian is None:
            raise ValueError("no Lindblad decomposition available")
        S = hamiltonian_superop(self.hamiltonian)
        for L in self.jumps:
            S = S + dissipator_superop(L)
        return S


def projected_choi(S: np.ndarray) -> np.ndarray:
    """``P C P`` with ``P = 1 - |I>><<I|/d``, removing the identity direction."""
    d = _side(S.shape[0])
    C = choi(S)
    w = vectorize(np.eye(d, dtype=complex)) / np.sqrt(d)
    P = np.eye(d * d) - np.outer(w, w.conj())
    return P @ C @ P


def is_lindbladian(S: np.ndarray, tol: float = 1e-10) -> LindbladVerdict:
    """Decide whether a generator has Lindblad form.

    The generator must preserve Hermiticity and annihilate the trace. It is a
    Lindbladian iff its Choi matrix projected off the identity direction is
    PSD. On success the Hamiltonian and jump operators are extracted.
    """
    S = np.asarray(S, dtype=complex)
    if not is_hermiticity_preserving(S, tol):
        raise NotHermitianPreserving("generator does not preserve Hermiticity")
    if not is_trace_annihilating(S, tol):
        raise NotTraceAnnihilating("generator does not annihilate the trace")
    d = _side(S.shape[0])
    Cp = projected_choi(S)
    Cp = (Cp + Cp.conj().T) / 2
    ev, vecs = np.linalg.eigh(Cp)
    floor = psd_threshold(Cp, tol)
    ok = bool(ev[0] >= floor)
    if not ok:
        return LindbladVerdict(False, float(ev[0]), tol)
    cut = -floor
    jumps = [np.sqrt(e) * devectorize(vecs[:, k]) for k, e in enumerate(ev) if e > cut]
    # Choi |I>> = |u>> with u = d K + tr(K) I + sum_mu tr(L_mu^dag) L_mu, where the
    # generator is S(X) = K X + X K^dag + sum L X L^dag and the L_mu are traceless.
    u = devectorize(choi(S) @ vectorize(np.eye(d, dtype=complex)))
    u = u - sum((np.trace(L.conj().T) * L for L in jumps), np.zeros((d, d), complex))
    K = (u - np.trace(u) / (2 * d) * np.eye(d)) / d
    H = 1j * (K - K.conj().T) / 2
    H = (H + H.conj().T) / 2
    return LindbladVerdict(True, float(ev[0]), tol, hamiltonian=H, jumps=jumps)


@dataclass(frozen=True)
class DiagonalPositivity:
    is_cp: bool
    min_eig: float
    witness_psi: np.ndarray | None = None
    witness_phi: np.ndarray | None = None
    witness_value: float | None = None


def diagonal_map(p: np.ndarray) -> np.ndarray:
    """Supermatrix of ``X -> p * X`` (elementwise), ``X_mn -> p_mn X_mn``."""
    return np.diag(vectorize(np.asarray(p, dtype=complex)))


def diagonal_map_positivity(p: np.ndarray, tol: float = 1e-12) -> DiagonalPositivity:
    """Positivity of ``X_mn -> p_mn X_mn``, which is equivalent to complete positivity.

    When ``p`` has a negative eigenvalue ``p_n`` with eigenvector ``u``, the pure
    state ``psi = conj(u)`` and the all-ones vector ``phi`` give
    ``<phi|T(|psi><psi|)|phi> = p_n``.
    """
    p = np.asarray(p, dtype=complex)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise NonHermitianInput("coefficient matrix must be square")
    if np.linalg.norm(p - p.conj().T, 2) > 1e-10 * max(1.0, np.linalg.norm(p, 2)):
        raise NonHermitianInput("coefficient matrix is not Hermitian")
    ev, U = np.linalg.eigh((p + p.conj().T) / 2)
    if ev[0] >= -tol * max(1.0, float(np.abs(ev).max())):
        return DiagonalPositivity(True, float(ev[0]))
    psi = U[:, 0].conj()
    phi = np.ones(p.shape[0], dtype=complex)
    out = p * np.outer(psi, psi.conj())
    value = float(np.real(phi.conj() @ out @ phi))
    return DiagonalPositivity(False, float(ev[0]), psi, phi, value)


# -- qubit channel spectra --------------------------------------------------

@dataclass(frozen=True)
class WpgResult:
    feasible: bool
    s: tuple[float, float, float]
    margins: tuple[float, float, float, float]


def _pair_conjugates(lams: list[complex], tol: float) -> list[float]:
    remaining = list(lams)
    s = []
    while remaining:
        lam = remaining.pop(0)
        if abs(lam.imag) <= tol:
            s.append(float(lam.real))
            continue
        j = int(np.argmin([abs(mu - np.conj(lam)) for mu in remaining])) if remaining else -1
        if j < 0 or abs(remaining[j] - np.conj(lam)) > tol:
            raise NotConjugationClosed(f"{lam} has no conjugate partner")
        remaining.pop(j)
        s.extend([abs(lam), abs(lam)])
    return s


def wpg_spectrum_feasible(spectrum, tol: float = 1e-9) -> WpgResult:
    """Whether some qubit Kraus map has the given four eigenvalues.

    One eigenvalue must equal 1. The other three are mapped to ``s`` (real
    values kept, conjugate pairs replaced by their modulus) and must lie in the
    tetrahedron spanned by (1,1,1), (1,-1,-1), (-1,1,-1), (-1,-1,1).
    """
    lam = [complex(x) for x in np.asarray(spectrum).ravel()]
    if len(lam) != 4:
        raise ValueError("expected four eigenvalues")
    k = int(np.argmin([abs(x - 1) for x in lam]))
    if abs(lam[k] - 1) > tol:
        raise NoUnitEigenvalue("no eigenvalue equals 1")
    rest = lam[:k] + lam[k + 1:]
    s1, s2, s3 = _pair_conjugates(rest, tol)
    margins = (
        1 - s1 - s2 + s3,
        1 - s1 + s2 - s3,
        1 + s1 - s2 - s3,
        1 + s1 + s2 + s3,
    )
    feasible = all(m >= -tol for m in margins)
    return WpgResult(feasible, (s1, s2, s3), margins)


def wpg_sorted_feasible(s, tol: float = 1e-9) -> bool:
    """Sorted-form test ``s1 <= 1`` and ``s1 + s2 <= 1 + s3`` for nonnegative ``s``."""
    a, b, c = sorted((float(x) for x in s), reverse=True)
    if c < 0:
        raise ValueError("sorted form is only valid for nonnegative s")
    return a <= 1 + tol and a + b <= 1 + c + tol


# -- the 2 exp(-t/T2) <= 1 + exp(-t/T1) condition ---------------------------

def cp_inequality_check(T1: float, T2: float, t: float) -> bool:
    if min(T1, T2, t) <= 0:
        raise ValueError("T1, T2 and t must be positive")
    return bool(2 * np.exp(-t / T2) <= 1 + np.exp(-t / T1))


def cp_inequality_small_t(T1: float, T2: float) -> bool:
    """Small-t limit of :func:`cp_inequality_check`: holds iff ``2/T2 >= 1/T1``."""
    if min(T1, T2) <= 0:
        raise ValueError("T1 and T2 must be positive")
    return bool(2 / T2 >= 1 / T1)


def cp_inequality_crossing(T1: float, T2: float) -> float:
    """Positive time where a small-t violation ends (``inf`` if it never does, 0 if no violation)."""
    if cp_inequality_small_t(T1, T2):
        return 0.0

    def f(t):
        return 1 + np.exp(-t / T1) - 2 * np.exp(-t / T2)

    if T2 <= T1:
        # violated near 0 with 2/T2 < 1/T1 needs T2 > 2 T1, so this branch is unreachable
        return np.inf
    # f < 0 near 0 and f -> 1 as t -> inf
    hi = T2
    while f(hi) < 0:
        hi *= 2
    lo = hi * 1e-12
    return float(brentq(f, lo, hi, xtol=1e-14 * hi, rtol=1e-14))
