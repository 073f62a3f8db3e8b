"""Eigenspace partition of a dichotomic observable."""

from dataclasses import dataclass

import numpy as np

from .constants import TOL
from .errors import NotDichotomicError, ValidationError
from .numerics import as_matrix, hermitian_eig


@dataclass(frozen=True, eq=False)
class DichotomicPartition:
    """Diagonalizer V_O with V_O O V_O^dagger = diag(+-1) and the two index sets."""

    V_O: np.ndarray
    plus_indices: np.ndarray
    minus_indices: np.ndarray
    tol: float = TOL.dichotomic_eigenvalue

    def __post_init__(self):
        d = self.V_O.shape[0]
        plus = np.asarray(self.plus_indices, dtype=np.intp)
        minus = np.asarray(self.minus_indices, dtype=np.intp)
        both = np.concatenate([plus, minus])
        if both.size != d or not np.array_equal(np.sort(both), np.arange(d)):
            raise ValidationError("index sets must partition range(d)")
        if np.any(np.diff(plus) <= 0) or np.any(np.diff(minus) <= 0):
            raise ValidationError("index sets must be sorted ascending")
        object.__setattr__(self, "plus_indices", plus)
        object.__setattr__(self, "minus_indices", minus)
        labels = np.ones(d, dtype=np.int8)
        labels[minus] = -1
        local = np.empty(d, dtype=np.intp)
        local[plus] = np.arange(plus.size)
        local[minus] = np.arange(minus.size)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "local_index", local)

    @property
    def dim(self) -> int:
        return self.V_O.shape[0]

    @property
    def d_plus(self) -> int:
        return int(self.plus_indices.size)

    @property
    def d_minus(self) -> int:
        return int(self.minus_indices.size)

    def observable_matrix(self) -> np.ndarray:
        v = self.V_O
        return (v.conj().T * self.labels.astype(float)) @ v

    def projector(self, sign: int) -> np.ndarray:
        idx = self.plus_indices if sign > 0 else self.minus_indices
        v = self.V_O[idx]
        return v.conj().T @ v


def identity_partition(d: int) -> DichotomicPartition:
    return DichotomicPartition(np.eye(d, dtype=complex), np.arange(d), np.arange(0))


def frame_partition(V: np.ndarray) -> DichotomicPartition:
    """Partition for a frame V with V O V^dagger = Z_1: first half is +1."""
    d = V.shape[0]
    return DichotomicPartition(V, np.arange(d // 2), np.arange(d // 2, d))


def dichotomic_split(O, tol: float = TOL.dichotomic_eigenvalue) -> DichotomicPartition:
    """Diagonalize a +-1 observable.

    Diagonal inputs keep the computational basis (V_O = I).  Otherwise the
    eigenvectors are ordered with the +1 space first, ties broken by the
    eigensolver's column order.
    """
    m = as_matrix(getattr(O, "matrix", O))
    d = m.shape[0]
    off = m - np.diag(np.diagonal(m))
    if np.max(np.abs(off), initial=0.0) <= tol * 1e-2:
        vals = np.diagonal(m).real
        _check_pm1(vals, tol)
        return DichotomicPartition(np.eye(d, dtype=complex), np.nonzero(vals > 0)[0], np.nonzero(vals < 0)[0], tol)
    eig = hermitian_eig(m)
    vals = eig.eigenvalues
    _check_pm1(vals, tol)
    order = sorted(range(d), key=lambda i: (0 if vals[i] > 0 else 1, i))
    v_o = eig.eigenvectors[:, order].conj().T
    dp = int(np.sum(vals > 0))
    return DichotomicPartition(v_o, np.arange(dp), np.arange(dp, d), tol)


def _check_pm1(vals, tol):
    for lam in vals:
        if abs(abs(lam) - 1.0) > tol:
            raise NotDichotomicError(float(lam))
