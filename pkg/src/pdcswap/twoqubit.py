"""Entanglement and Bell-nonlocality measures of two-qubit states.

Basis order is |00>, |01>, |10>, |11>; sigma_z is diagonal in it, so for the
path qubits |0> and |1> are the two output beams of the first source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import entr

from .chain import MaximallyCorrelatedState
from .errors import DimensionMismatchError, DomainError, InvalidStateError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
AXES = ("x", "y", "z")

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2)
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """Validated 4x4 density matrix."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise DimensionMismatchError(f"two-qubit density matrix must be 4x4, got {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise InvalidStateError("density matrix has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise InvalidStateError(f"trace is {np.trace(rho).real}, expected 1")
        rho = 0.5 * (rho + rho.conj().T)
        lo = np.linalg.eigvalsh(rho)[0]
        if lo < -PSD_TOL:
            raise InvalidStateError(f"density matrix has negative eigenvalue {lo:.3g}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_ket(cls, psi) -> "TwoQubitState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.rho)


def to_density_matrix(s: MaximallyCorrelatedState) -> TwoQubitState:
    """p00 |00><00| + p11 |11><11| + r (|00><11| + |11><00|)."""
    if s.r > np.sqrt(max(s.p00 * s.p11, 0.0)) + PSD_TOL:
        raise InvalidStateError(f"coherence {s.r} exceeds sqrt(p00 p11)")
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = s.p00
    rho[3, 3] = s.p11
    rho[0, 3] = rho[3, 0] = s.r
    return TwoQubitState(rho)


def bell_mixture(w_plus: float, w_minus: float) -> TwoQubitState:
    """w+ |phi+><phi+| + w- |phi-><phi-|."""
    return TwoQubitState(w_plus * np.outer(PHI_PLUS, PHI_PLUS.conj()) + w_minus * np.outer(PHI_MINUS, PHI_MINUS.conj()))


def correlation_tensor(state: TwoQubitState) -> np.ndarray:
    """T[i, j] = tr(sigma_i (x) sigma_j rho) over axes x, y, z."""
    T = np.empty((3, 3))
    for i, a in enumerate(AXES):
        for j, b in enumerate(AXES):
            T[i, j] = np.trace(np.kron(PAULI[a], PAULI[b]) @ state.rho).real
    return T


def plane_criterion(T: np.ndarray, plane: str) -> float:
    """Sum of squared correlations in one measurement plane; above 1 the plane violates CHSH."""
    plane = plane.lower()
    if len(plane) != 2 or plane[0] == plane[1] or any(c not in AXES for c in plane):
        raise DomainError(f"plane must be two distinct axes among x, y, z, got {plane!r}")
    idx = [AXES.index(c) for c in plane]
    T = np.asarray(T, dtype=float)
    return float(np.sum(T[np.ix_(idx, idx)] ** 2))


def max_bell_violation(state: TwoQubitState) -> float:
    """Largest CHSH value over all measurement settings, 2 sqrt(s1^2 + s2^2).

    s1 >= s2 are the two largest singular values of the correlation tensor.
    """
    s = np.linalg.svd(correlation_tensor(state), compute_uv=False)
    return float(2 * np.sqrt(s[0] ** 2 + s[1] ** 2))


def concurrence(state: TwoQubitState) -> float:
    """Wootters concurrence.

    With rho = L L^H the spin-flip eigenvalues sqrt(eig(rho rho~)) are the
    singular values of L^H (sigma_y x sigma_y) conj(L), which avoids square
    roots of round-off sized eigenvalues.  Eigenvalues of rho below round-off
    are dropped so pure states keep full precision.
    """
    yy = np.kron(PAULI["y"], PAULI["y"])
    w, v = np.linalg.eigh(state.rho)
    keep = w > 16 * np.finfo(float).eps * max(w.max(), 0.0)
    L = v[:, keep] * np.sqrt(w[keep])
    lam = np.zeros(4)
    sv = np.linalg.svd(L.conj().T @ yy @ L.conj(), compute_uv=False)
    lam[:sv.size] = sv
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def binary_entropy(p) -> np.ndarray | float:
    """H(p) in bits."""
    p = np.asarray(p, dtype=float)
    out = (entr(p) + entr(1 - p)) / np.log(2)
    return out if out.ndim else float(out)


def entanglement_of_formation(c) -> np.ndarray | float:
    """H((1 + sqrt(1 - C^2)) / 2) for concurrence C in [0, 1]."""
    c = np.asarray(c, dtype=float)
    if np.any((c < 0) | (c > 1)) or not np.all(np.isfinite(c)):
        raise DomainError("concurrence must lie in [0, 1]")
    return binary_entropy(0.5 * (1 + np.sqrt(1 - c**2)))


def partial_transpose(state: TwoQubitState) -> np.ndarray:
    """Transpose on the second qubit."""
    r = state.rho.reshape(2, 2, 2, 2)
    return r.transpose(0, 3, 2, 1).reshape(4, 4)


def partial_transpose_test(state: TwoQubitState, tol: float = PSD_TOL) -> tuple[float, bool]:
    """(smallest eigenvalue of the partial transpose, whether it is below -tol)."""
    lo = float(np.linalg.eigvalsh(partial_transpose(state))[0])
    return lo, lo < -tol


def bell_mixture_weights(state: TwoQubitState, tol: float = 1e-10) -> tuple[float, float] | None:
    """Weights ((1+V)/2, (1-V)/2) on phi+ and phi- for an equal-weight maximally correlated state.

    Returns ``None`` when the |00> and |11> populations differ by more than
    ``tol``, the coherence is not real, or the state has weight outside the
    {|00>, |11>} block.
    """
    rho = state.rho
    p00, p11 = rho[0, 0].real, rho[3, 3].real
    outside = np.delete(np.delete(rho, [0, 3], axis=0), [0, 3], axis=1)
    if abs(p00 - p11) >= tol or np.max(np.abs(outside)) > tol or abs(rho[0, 3].imag) > tol:
        return None
    v = 2 * rho[0, 3].real / (p00 + p11)
    return float(0.5 * (1 + v)), float(0.5 * (1 - v))
