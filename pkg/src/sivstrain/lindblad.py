"""
Lindblad generators in Liouville space and their stationary states.

Density matrices are vectorised column-major, so that
vec(A rho B) = (B^T kron A) vec(rho).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, null_space


class DegenerateSteadyStateError(RuntimeError):
    """The generator has more than one stationary state."""

    def __init__(self, message, dimension):
        super().__init__(message)
        self.dimension = dimension


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((n, n), order="F")


def lindblad_generator(hamiltonian: np.ndarray, jumps=()) -> np.ndarray:
    """
    Liouvillian of d rho/dt = -i[H, rho] + sum_k D[C_k] rho.

    `jumps` holds collapse operators with their rates already folded in
    (C_k = sqrt(rate) * operator).
    """
    H = np.asarray(hamiltonian, dtype=complex)
    n = H.shape[0]
    eye = np.eye(n)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for C in jumps:
        C = np.asarray(C, dtype=complex)
        CdC = C.conj().T @ C
        L += np.kron(C.conj(), C) - 0.5 * np.kron(eye, CdC) - 0.5 * np.kron(CdC.T, eye)
    return L


def _trace_row(n: int) -> np.ndarray:
    return vec(np.eye(n)).astype(complex)


def kernel_dimension(L: np.ndarray, rtol: float = 1e-10) -> int:
    s = np.linalg.svd(L, compute_uv=False)
    if s[0] == 0:
        return L.shape[0]
    return int(np.sum(s <= rtol * s[0]))


def _physical(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def steady_state(L: np.ndarray, initial=None, rtol: float = 1e-10) -> np.ndarray:
    """
    Stationary density matrix of the Liouvillian `L`.

    For a one-dimensional kernel the trace-normalised null vector is found
    by replacing one population equation with the trace condition and
    solving directly.  If the kernel is degenerate, `initial` selects the
    state reached from that initial density matrix (projection onto the
    kernel along the decaying modes); without it a
    `DegenerateSteadyStateError` is raised.
    """
    L = np.asarray(L, dtype=complex)
    n = int(round(np.sqrt(L.shape[0])))
    dim = kernel_dimension(L, rtol)
    if dim == 1:
        A = L.copy()
        A[0, :] = _trace_row(n)
        b = np.zeros(n * n, dtype=complex)
        b[0] = 1.0
        return _physical(unvec(np.linalg.solve(A, b)))
    if initial is None:
        raise DegenerateSteadyStateError(
            f"generator has a {dim}-dimensional kernel; pass an initial state to select one", dim
        )
    right = null_space(L, rcond=rtol)
    left = null_space(L.conj().T, rcond=rtol)
    proj = right @ np.linalg.solve(left.conj().T @ right, left.conj().T)
    return _physical(unvec(proj @ vec(initial)))


def propagate(L: np.ndarray, rho0: np.ndarray, t: float) -> np.ndarray:
    """rho(t) = exp(L t) rho0."""
    return unvec(expm(np.asarray(L) * t) @ vec(rho0))


def steady_state_by_propagation(L: np.ndarray, rho0: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """
    Long-time limit of exp(L t) rho0, with t set by the slowest decaying mode.

    Independent of `steady_state`; used to cross-check it.
    """
    ev = np.linalg.eigvals(L)
    scale = np.abs(ev).max()
    decaying = -ev.real[-ev.real > rtol * scale]
    t = 60.0 / decaying.min()
    return _physical(propagate(L, rho0, t))


def residual_norm(L: np.ndarray, rho: np.ndarray) -> float:
    return float(np.linalg.norm(L @ vec(rho)))
