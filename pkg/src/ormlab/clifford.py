"""Symplectic tableaux and dense Clifford unitaries.

A Clifford C is stored as the images of the Pauli generators under
conjugation, P -> C P C^dagger: rows 0..n-1 hold the images of X_1..X_n and
rows n..2n-1 the images of Z_1..Z_n, each as an (x | z) bit vector, plus one
sign bit per row.  Qubit 1 is the most significant bit of a basis index.
"""

import numpy as np

from .errors import ValidationError


def symplectic_form(a: np.ndarray, b: np.ndarray) -> int:
    n = a.shape[-1] // 2
    return int(a[:n] @ b[n:] + a[n:] @ b[:n]) % 2


def _row_basis(rows: np.ndarray) -> np.ndarray:
    """Independent rows spanning the same GF(2) space."""
    a = rows.copy() % 2
    rank = 0
    for col in range(a.shape[1]):
        piv = np.nonzero(a[rank:, col])[0]
        if piv.size == 0:
            continue
        p = rank + piv[0]
        a[[rank, p]] = a[[p, rank]]
        mask = a[:, col].astype(bool)
        mask[rank] = False
        a[mask] ^= a[rank]
        rank += 1
        if rank == a.shape[0]:
            break
    return a[:rank]


def _project_out(basis: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Map the span of ``basis`` onto the symplectic complement of span(v, w)."""
    out = []
    for u in basis:
        u2 = u.copy()
        if symplectic_form(u, w):
            u2 ^= v
        if symplectic_form(u, v):
            u2 ^= w
        out.append(u2)
    return _row_basis(np.array(out, dtype=np.uint8))


def _build_pairs(n: int, pick_first, pick_partner, first=None):
    basis = np.eye(2 * n, dtype=np.uint8)
    xs, zs = [], []
    for j in range(n):
        z = first if (j == 0 and first is not None) else pick_first(basis)
        x = pick_partner(basis, z)
        zs.append(z)
        xs.append(x)
        if j < n - 1:
            basis = _project_out(basis, x, z)
    return np.array(xs + zs, dtype=np.uint8)


def random_symplectic(n: int, gen: np.random.Generator) -> np.ndarray:
    """Uniformly random element of Sp(2n, 2) in the row layout above.

    Pairs are chosen one at a time: a uniform nonzero vector of the current
    subspace, then a uniform partner with symplectic product one; the
    remaining subspace is the symplectic complement.
    """

    def pick_first(basis):
        while True:
            c = gen.integers(0, 2, size=basis.shape[0], dtype=np.uint8)
            if c.any():
                return (c @ basis) % 2

    def pick_partner(basis, z):
        while True:
            c = gen.integers(0, 2, size=basis.shape[0], dtype=np.uint8)
            x = ((c @ basis) % 2).astype(np.uint8)
            if symplectic_form(x, z):
                return x

    return _build_pairs(n, pick_first, pick_partner)


def symplectic_with_first_z(vec: np.ndarray) -> np.ndarray:
    """Deterministic symplectic basis whose image of Z_1 is ``vec``."""
    n = vec.shape[0] // 2

    def pick_first(basis):
        return basis[0].copy()

    def pick_partner(basis, z):
        for u in basis:
            if symplectic_form(u, z):
                return u.copy()
        eye = np.eye(2 * n, dtype=np.uint8)
        for u in eye:
            if symplectic_form(u, z):
                return u.copy()
        raise ValidationError("no symplectic partner found")

    return _build_pairs(n, pick_first, pick_partner, first=np.asarray(vec, dtype=np.uint8) % 2)


def _masks(row: np.ndarray, n: int) -> tuple[int, int]:
    xm = zm = 0
    for q in range(n):
        if row[q]:
            xm |= 1 << (n - 1 - q)
        if row[n + q]:
            zm |= 1 << (n - 1 - q)
    return xm, zm


def _parity(arr: np.ndarray) -> np.ndarray:
    v = arr.copy()
    out = np.zeros_like(v)
    while v.any():
        out ^= v & 1
        v >>= 1
    return out


class _PauliOp:
    """Hermitian Pauli (-1)^sign i^{x.z} X^x Z^z acting on dense vectors."""

    def __init__(self, row: np.ndarray, sign: int, n: int):
        self.xm, self.zm = _masks(row, n)
        idx = np.arange(1 << n)
        self.perm = idx ^ self.xm
        zsign = 1.0 - 2.0 * _parity(idx & self.zm)
        ny = bin(self.xm & self.zm).count("1")
        self.diag = ((-1) ** sign) * (1j ** ny) * zsign

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (self.diag * v)[self.perm]


def tableau_to_unitary(rows: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Dense unitary (up to global phase) realizing a tableau, built column by column."""
    n = rows.shape[0] // 2
    d = 1 << n
    xs = [_PauliOp(rows[j], int(signs[j]), n) for j in range(n)]
    zs = [_PauliOp(rows[n + j], int(signs[n + j]), n) for j in range(n)]

    def project(v):
        for z in zs:
            v = 0.5 * (v + z.apply(v))
        return v

    psi = None
    for k in range(d):
        e = np.zeros(d, dtype=complex)
        e[k] = 1.0
        v = project(e)
        nv = np.linalg.norm(v)
        if nv * nv > 0.5 / d:
            psi = v / nv
            break
    if psi is None:  # pragma: no cover - stabilizer states always have a large amplitude
        raise ValidationError("tableau does not define a stabilizer state")
    u = np.empty((d, d), dtype=complex)
    u[:, 0] = psi
    for col in range(1, d):
        low = col & -col
        q = n - low.bit_length()
        u[:, col] = xs[q].apply(u[:, col ^ low])
    return u


def random_clifford_tableau(n: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    rows = random_symplectic(n, gen)
    signs = gen.integers(0, 2, size=2 * n, dtype=np.uint8)
    return rows, signs


def pauli_vector(body: str) -> np.ndarray:
    x = [c in "XY" for c in body]
    z = [c in "ZY" for c in body]
    return np.array(x + z, dtype=np.uint8)


def pauli_to_z1_frame(sign: int, body: str) -> np.ndarray:
    """Clifford V with V P V^dagger = Z_1 for the signed Pauli P = sign * body."""
    n = len(body)
    vec = pauli_vector(body)
    if not vec.any():
        raise ValidationError("identity has no Z_1 frame")
    rows = symplectic_with_first_z(vec)
    signs = np.zeros(2 * n, dtype=np.uint8)
    # Hermitian form i^{x.z} X^x Z^z equals the plain Pauli string body
    signs[n] = 0 if sign > 0 else 1
    w = tableau_to_unitary(rows, signs)
    return w.conj().T
