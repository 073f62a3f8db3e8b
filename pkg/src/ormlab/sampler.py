"""Born-rule sampling of rotated states."""

from dataclasses import dataclass

import numpy as np

from .constants import TOL
from .ensembles import as_generator, sample_blocks, sample_unitary
from .errors import ValidationError
from .numerics import as_matrix


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    unitary_index: int
    outcomes: np.ndarray
    retained_unitary: np.ndarray | None = None
    partition_labels: np.ndarray | None = None
    repetition: int = 0

    @property
    def n_shots(self) -> int:
        return int(self.outcomes.size)

    def counts(self, d: int) -> np.ndarray:
        return np.bincount(self.outcomes, minlength=d)


def _rho_matrix(rho) -> np.ndarray:
    return as_matrix(getattr(rho, "matrix", rho))


def _normalize(p: np.ndarray) -> np.ndarray:
    total = p.sum()
    if abs(total - 1.0) > TOL.probability_sum or np.min(p, initial=0.0) < -TOL.probability_sum:
        raise ValidationError(f"probabilities do not form a distribution (sum {total!r})")
    p = np.clip(p, 0.0, 1.0)
    return p / p.sum()


def born_distribution(U, rho) -> np.ndarray:
    """p_s = <s| U rho U^dagger |s>."""
    u = as_matrix(U)
    r = _rho_matrix(rho)
    if u.shape != r.shape:
        raise ValidationError(f"unitary {u.shape} and state {r.shape} dimensions differ")
    p = np.einsum("ij,jk,ik->i", u, r, u.conj()).real
    return _normalize(p)


def draw_outcomes(p, N_M: int, rng) -> np.ndarray:
    gen = as_generator(rng)
    p = np.asarray(p, dtype=float)
    return gen.choice(p.size, size=int(N_M), p=p)


def _block_probabilities(rot: np.ndarray, partition, up, um) -> np.ndarray:
    """Born distribution of (U_+ (+) U_-) rot (U_+ (+) U_-)^dagger, block by block."""
    p = np.empty(rot.shape[0])
    for idx, u in ((partition.plus_indices, up), (partition.minus_indices, um)):
        if idx.size == 0:
            continue
        blk = rot[np.ix_(idx, idx)]
        p[idx] = np.einsum("ij,jk,ik->i", u, blk, u.conj()).real
    return _normalize(p)


def _embed(partition, up, um) -> np.ndarray:
    d = partition.dim
    u = np.zeros((d, d), dtype=complex)
    if up is not None:
        u[np.ix_(partition.plus_indices, partition.plus_indices)] = up
    if um is not None:
        u[np.ix_(partition.minus_indices, partition.minus_indices)] = um
    return u


def rotate(rho, V) -> np.ndarray:
    r = _rho_matrix(rho)
    if V is None:
        return r
    v = as_matrix(V)
    return v @ r @ v.conj().T


def run_round(rho, pre_rotation, spec, N_M: int, rng, retain_unitary: bool = False,
              unitary_index: int = 0, repetition: int = 0, rotated=None) -> MeasurementRecord:
    """One ORM/RM round: draw U from ``spec``, measure U V rho V^dagger U^dagger N_M times.

    ``rotated`` may carry a precomputed V rho V^dagger to skip the rotation.
    """
    gen = as_generator(rng)
    rot = rotated if rotated is not None else rotate(rho, pre_rotation)
    if rot.shape[0] != spec.dim:
        raise ValidationError(f"ensemble dimension {spec.dim} does not match state {rot.shape[0]}")
    labels = None
    if spec.kind == "block_diagonal":
        up, um = sample_blocks(spec, gen)
        p = _block_probabilities(rot, spec.partition, up, um)
        u = _embed(spec.partition, up, um) if retain_unitary else None
    else:
        u = sample_unitary(spec, gen)
        p = born_distribution(u, rot)
    outcomes = draw_outcomes(p, N_M, gen)
    if spec.kind == "block_diagonal":
        labels = spec.partition.labels[outcomes]
    kept = None
    if retain_unitary:
        kept = u if pre_rotation is None else u @ as_matrix(pre_rotation)
    return MeasurementRecord(unitary_index, outcomes, kept, labels, repetition)


def pauli_orm_round(rho, V_C, inner_spec, N_M: int, rng, observable=None,
                    unitary_index: int = 0, repetition: int = 0) -> MeasurementRecord:
    """Mid-circuit variant: measure qubit 1, then rotate the rest by U_+ or U_-.

    One (U_+, U_-) pair is drawn per round; each shot branches on its first
    bit.  Outcomes are full n-bit indices, labels are +1 for first bit 0.
    """
    gen = as_generator(rng)
    vc = as_matrix(V_C)
    d = vc.shape[0]
    half = d // 2
    if observable is not None:
        z1 = np.diag(np.where(np.arange(d) < half, 1.0, -1.0))
        o = as_matrix(getattr(observable, "matrix", observable))
        if np.max(np.abs(vc @ o @ vc.conj().T - z1)) > TOL.involution:
            raise ValidationError("V_C does not map the observable to Z_1")
    if inner_spec.dim != half:
        raise ValidationError("inner ensemble must act on the remaining n-1 qubits")
    rot = rotate(rho, vc)
    up = sample_unitary(inner_spec, gen)
    um = sample_unitary(inner_spec, gen)
    p_plus = float(np.clip(np.trace(rot[:half, :half]).real, 0.0, 1.0))
    first = (gen.random(int(N_M)) >= p_plus).astype(np.intp)
    outcomes = np.empty(int(N_M), dtype=np.intp)
    for bit, u in ((0, up), (1, um)):
        shots = np.nonzero(first == bit)[0]
        if shots.size == 0:
            continue
        blk = rot[bit * half:(bit + 1) * half, bit * half:(bit + 1) * half]
        w = np.einsum("ij,jk,ik->i", u, blk, u.conj()).real
        w = np.clip(w, 0.0, None)
        local = gen.choice(half, size=shots.size, p=w / w.sum())
        outcomes[shots] = bit * half + local
    labels = np.where(first == 0, 1, -1).astype(np.int8)
    return MeasurementRecord(unitary_index, outcomes, None, labels, repetition)
