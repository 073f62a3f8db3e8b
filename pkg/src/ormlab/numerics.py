"""Dense complex linear algebra used throughout the package.

Eigendecomposition and QR are delegated to LAPACK through numpy; this
module adds the validation, sign conventions and error types the rest of
the package relies on.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .constants import TOL
from .errors import NumericError, ValidationError


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValidationError(f"expected a matrix, got shape {m.shape}")
    return m


def is_hermitian(a: np.ndarray, tol: float = TOL.hermitian) -> bool:
    return a.shape[0] == a.shape[1] and float(np.max(np.abs(a - a.conj().T), initial=0.0)) <= tol


def require_hermitian(a, tol: float = TOL.hermitian) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"matrix is not square: {m.shape}")
    dev = float(np.max(np.abs(m - m.conj().T), initial=0.0))
    if dev > tol:
        raise ValidationError(f"matrix is not Hermitian (max |A - A^dagger| = {dev:.3e})")
    return m


def hermitian_eig(a) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    m = require_hermitian(a)
    m = 0.5 * (m + m.conj().T)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver did not converge: {exc}") from exc
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def qr_unitary_factor(g) -> np.ndarray:
    """Q factor of G = QR with the diagonal of R made real and positive."""
    m = as_matrix(g)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"QR input must be square, got {m.shape}")
    q, r = np.linalg.qr(m)
    diag = np.diagonal(r)
    mag = np.abs(diag)
    if np.any(mag <= TOL.rank_deficient * max(1.0, float(np.max(np.abs(m), initial=0.0)))):
        raise NumericError("QR input is rank deficient")
    return q * (diag / mag)


def qr_unitary_factor_batch(g: np.ndarray) -> np.ndarray:
    """Batched :func:`qr_unitary_factor` over the leading axis, without rank checks."""
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[..., None, :]


def matexp_hermitian(h, s: float) -> np.ndarray:
    """exp(s H) for Hermitian H via its spectral decomposition."""
    eig = hermitian_eig(h)
    v = eig.eigenvectors
    return (v * np.exp(s * eig.eigenvalues)) @ v.conj().T


def kron_all(factors) -> np.ndarray:
    return reduce(np.kron, factors, np.ones((1, 1), dtype=complex))
