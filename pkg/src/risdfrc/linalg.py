"""Dense complex linear-algebra helpers.

Everything in the package stores matrices as 2-D ``complex128`` numpy arrays.
``vec`` stacks columns (Fortran order) so that the identity

    tr(A B C D) = vec(D^T)^T (C^T kron A) vec(B)

holds with the same convention used throughout the phase module.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg as sla


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a matrix expected to be Hermitian positive definite is not."""

    def __init__(self, message: str, min_pivot: float):
        super().__init__(message)
        self.min_pivot = min_pivot


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"hadamard: shape mismatch {a.shape} vs {b.shape}")
    return a * b


def vec(a: np.ndarray) -> np.ndarray:
    """Column-major vectorization, returned as an ``(m*n, 1)`` column."""
    a = np.atleast_2d(a)
    return a.reshape(-1, 1, order="F")


def unvec(q: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`vec` for a square ``n x n`` result."""
    q = np.asarray(q).ravel()
    if q.size != n * n:
        raise ValueError(f"unvec: length {q.size} is not {n}^2")
    return q.reshape(n, n, order="F")


def herm_eig(a: np.ndarray) -> HermitianEig:
    """Eigendecomposition of a (numerically) Hermitian matrix.

    The input is symmetrized as ``(A + A^H) / 2`` first; eigenvalues are
    returned in ascending order.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"herm_eig: matrix must be square, got {a.shape}")
    w, u = np.linalg.eigh(hermitian_part(a))
    return HermitianEig(w, u)


def solve_hpd(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``a X = rhs`` for Hermitian positive definite ``a`` via Cholesky."""
    a = hermitian_part(np.asarray(a, dtype=complex))
    try:
        c = sla.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError:
        min_pivot = float(np.linalg.eigvalsh(a)[0])
        raise NotPositiveDefiniteError(
            f"solve_hpd: matrix is not positive definite (smallest eigenvalue {min_pivot:.3e})",
            min_pivot,
        ) from None
    return sla.cho_solve(c, rhs)


def logdet_hpd(a: np.ndarray) -> float:
    """``log det`` of a Hermitian positive definite matrix through its spectrum."""
    w = np.linalg.eigvalsh(hermitian_part(a))
    if w[0] <= 0:
        raise NotPositiveDefiniteError(
            f"logdet_hpd: non-positive eigenvalue {w[0]:.3e}", float(w[0])
        )
    return float(np.sum(np.log(w)))
