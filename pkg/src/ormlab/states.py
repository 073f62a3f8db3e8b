"""States, observables and Hamiltonians on n qubits (dense representation)."""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .constants import MAX_DENSE_QUBITS, TOL
from .errors import ValidationError
from .numerics import as_matrix, hermitian_eig, kron_all, matexp_hermitian, require_hermitian

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def n_qubits_for(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        m = require_hermitian(self.matrix)
        n = n_qubits_for(m.shape[0])
        if n > MAX_DENSE_QUBITS:
            raise ValidationError(f"{n} qubits exceeds the dense bound {MAX_DENSE_QUBITS}")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TOL.trace:
            raise ValidationError(f"trace {tr!r} differs from 1")
        eig = hermitian_eig(m)
        lo = float(eig.eigenvalues[0])
        if lo < -TOL.psd_clamp:
            raise ValidationError(f"state is not PSD (min eigenvalue {lo:.3e})")
        if lo < 0:
            w = np.clip(eig.eigenvalues, 0.0, None)
            m = (eig.eigenvectors * (w / w.sum())) @ eig.eigenvectors.conj().T
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "n_qubits", n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian observable with an optional structure tag.

    ``structure`` is one of ``"dense"``, ``"pauli_string"`` or
    ``"stabilizer_projector"``; ``label`` holds the signed Pauli label or the
    generator list accordingly.
    """

    matrix: np.ndarray
    structure: str = "dense"
    label: object = None
    pauli_decomposition: tuple | None = None
    n_qubits: int = field(init=False)

    def __post_init__(self):
        m = require_hermitian(self.matrix)
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "n_qubits", n_qubits_for(m.shape[0]))
        eye = np.eye(m.shape[0])
        if self.structure == "pauli_string":
            if np.max(np.abs(m @ m - eye)) > TOL.involution:
                raise ValidationError("pauli_string observable is not involutory")
        elif self.structure == "stabilizer_projector":
            if np.max(np.abs(m @ m - m)) > TOL.projector:
                raise ValidationError("stabilizer_projector observable is not idempotent")
        elif self.structure != "dense":
            raise ValidationError(f"unknown structure tag {self.structure!r}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def with_decomposition(self) -> "Observable":
        if self.pauli_decomposition is not None:
            return self
        return Observable(self.matrix, self.structure, self.label, pauli_decompose(self.matrix))


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    n_qubits: int
    terms: tuple
    matrix: np.ndarray


def parse_pauli_label(label: str) -> tuple[int, str]:
    """Split an optionally signed label like ``"-XZ"`` into (sign, body)."""
    if not isinstance(label, str) or not label:
        raise ValidationError(f"invalid Pauli label {label!r}")
    sign = 1
    if label[0] in "+-":
        sign = -1 if label[0] == "-" else 1
        label = label[1:]
    elif label[0] in "ij" or "i" in label:
        raise ValidationError(f"imaginary phase not allowed in {label!r}")
    if not label or any(c not in PAULIS for c in label):
        raise ValidationError(f"invalid Pauli label {label!r}")
    return sign, label


def pauli_dense(label: str) -> np.ndarray:
    sign, body = parse_pauli_label(label)
    return sign * kron_all(PAULIS[c] for c in body)


def pauli_matrix(label: str) -> Observable:
    m = pauli_dense(label)
    return Observable(m, "pauli_string", label)


def pauli_labels(n: int):
    """All 4^n unsigned labels in lexicographic I<X<Y<Z order."""
    return ("".join(p) for p in product("IXYZ", repeat=n))


def pauli_decompose(matrix, tol: float = 1e-12) -> tuple:
    """Coefficients a_P with O = sum_P a_P P, dropping |a_P| <= tol."""
    m = as_matrix(matrix)
    n = n_qubits_for(m.shape[0])
    d = m.shape[0]
    out = []
    for lab in pauli_labels(n):
        a = np.real(np.trace(pauli_dense(lab) @ m)) / d
        if abs(a) > tol:
            out.append((lab, float(a)))
    return tuple(out)


def observable_from_terms(terms, n: int | None = None) -> Observable:
    terms = tuple((lab, float(c)) for lab, c in terms)
    if not terms and n is None:
        raise ValidationError("empty term list needs an explicit qubit count")
    n = n if n is not None else len(parse_pauli_label(terms[0][0])[1])
    m = np.zeros((1 << n, 1 << n), dtype=complex)
    for lab, c in terms:
        p = pauli_dense(lab)
        if p.shape[0] != m.shape[0]:
            raise ValidationError(f"label {lab!r} does not act on {n} qubits")
        m += c * p
    if len(terms) == 1 and abs(abs(terms[0][1]) - 1.0) < 1e-15:
        sign, body = parse_pauli_label(terms[0][0])
        sign *= 1 if terms[0][1] > 0 else -1
        return Observable(m, "pauli_string", ("-" if sign < 0 else "+") + body, terms)
    return Observable(m, "dense", None, terms)


def heisenberg_xx(L: int, J0: float = 420.0, alpha: float = 1.24, Bz: float = 50.0) -> Hamiltonian:
    """Long-range XX chain with transverse field.

    H = sum_{i<j} 2 J_ij (X_i X_j + Y_i Y_j) + Bz J0 sum_i Z_i with
    J_ij = J0 / |i-j|^alpha.  Coefficients are in absolute units (Bz is
    given in units of J0).
    """
    if L < 2:
        raise ValidationError("heisenberg_xx needs L >= 2")
    terms = []
    for i in range(L):
        for j in range(i + 1, L):
            coupling = 2.0 * J0 / (j - i) ** alpha
            for p in "XY":
                lab = ["I"] * L
                lab[i] = lab[j] = p
                terms.append(("".join(lab), coupling))
    if Bz != 0:
        for i in range(L):
            lab = ["I"] * L
            lab[i] = "Z"
            terms.append(("".join(lab), Bz * J0))
    d = 1 << L
    m = np.zeros((d, d), dtype=complex)
    for lab, c in terms:
        m += c * pauli_dense(lab)
    m.setflags(write=False)
    return Hamiltonian(L, tuple(terms), m)


def gibbs_state(h: Hamiltonian, beta: float) -> DensityMatrix:
    if beta < 0:
        raise ValidationError("beta must be non-negative")
    hm = h.matrix if isinstance(h, Hamiltonian) else as_matrix(h)
    # shift by the ground energy so the exponential cannot overflow
    e0 = hermitian_eig(hm).eigenvalues[0]
    rho = matexp_hermitian(hm - e0 * np.eye(hm.shape[0]), -beta)
    return DensityMatrix(rho / np.trace(rho).real)


def _symplectic(body: str) -> np.ndarray:
    x = np.array([c in "XY" for c in body], dtype=np.uint8)
    z = np.array([c in "ZY" for c in body], dtype=np.uint8)
    return np.concatenate([x, z])


def _gf2_rank(rows: np.ndarray) -> int:
    a = rows.copy() % 2
    rank = 0
    for col in range(a.shape[1]):
        piv = np.nonzero(a[rank:, col])[0]
        if piv.size == 0:
            continue
        p = rank + piv[0]
        a[[rank, p]] = a[[p, rank]]
        for r in range(a.shape[0]):
            if r != rank and a[r, col]:
                a[r] ^= a[rank]
        rank += 1
        if rank == a.shape[0]:
            break
    return rank


def stabilizer_projector(generators) -> Observable:
    """Projector 2^-k sum_{g in <generators>} g onto the joint +1 eigenspace."""
    gens = list(generators)
    if not gens:
        raise ValidationError("need at least one generator")
    parsed = [parse_pauli_label(g) for g in gens]
    n = len(parsed[0][1])
    if any(len(b) != n for _, b in parsed):
        raise ValidationError("generators act on different qubit counts")
    if len(gens) > n:
        raise ValidationError("more generators than qubits")
    vecs = np.array([_symplectic(b) for _, b in parsed])
    for a in range(len(vecs)):
        for b in range(a + 1, len(vecs)):
            va, vb = vecs[a], vecs[b]
            if (int(va[:n] @ vb[n:]) + int(va[n:] @ vb[:n])) % 2:
                raise ValidationError(f"generators {gens[a]!r} and {gens[b]!r} anticommute")
    if _gf2_rank(vecs) < len(gens):
        raise ValidationError("generators are not independent")
    d = 1 << n
    proj = np.eye(d, dtype=complex)
    for g in gens:
        proj = proj @ (0.5 * (np.eye(d) + pauli_dense(g)))
    # sign choices like {+Z, -Z}-type conflicts are impossible after the rank check,
    # but -I products can still annihilate the space
    if np.trace(proj).real < 0.5:
        raise ValidationError("generators stabilize only the zero vector")
    return Observable(proj, "stabilizer_projector", tuple(gens))


def basis_state(index: int, n: int) -> DensityMatrix:
    d = 1 << n
    m = np.zeros((d, d), dtype=complex)
    m[index, index] = 1.0
    return DensityMatrix(m)


def pure_state(psi) -> DensityMatrix:
    v = np.asarray(psi, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()))


def maximally_mixed(n: int) -> DensityMatrix:
    d = 1 << n
    return DensityMatrix(np.eye(d, dtype=complex) / d)


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-induced random mixed state of the given rank (full rank by default)."""
    d = 1 << n
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def product_state(single_qubit_states) -> DensityMatrix:
    return DensityMatrix(kron_all(as_matrix(s) for s in single_qubit_states))
