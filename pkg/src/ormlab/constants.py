"""Named numerical tolerances shared by the library and its tests."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    unitary: float = 1e-10
    trace: float = 1e-10
    psd_clamp: float = 1e-9
    eig_reconstruction: float = 1e-9
    probability_sum: float = 1e-9
    dichotomic_eigenvalue: float = 1e-8
    involution: float = 1e-9
    projector: float = 1e-9
    decomposition: float = 1e-9
    full_rank: float = 1e-9
    rank_deficient: float = 1e-12


TOL = Tolerances()

MAX_DENSE_QUBITS = 10
MAX_CLIFFORD_QUBITS = 8
MAX_PERMUTATION_DIM = 4096
MAX_Q_LAMBDA_QUBITS = 4
