"""Exact references: brute-force expectations, Weingarten twirls and variance formulas."""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations

import numpy as np

from .constants import MAX_PERMUTATION_DIM, MAX_Q_LAMBDA_QUBITS
from .errors import ValidationError
from .numerics import as_matrix, hermitian_eig
from .partition import DichotomicPartition
from .states import n_qubits_for, pauli_dense, pauli_labels

# rows: irreps (4), (3,1), (2,2), (2,1,1), (1,1,1,1); columns: classes 1111, 211, 22, 31, 4
S4_CLASSES = ((1, 1, 1, 1), (2, 1, 1), (2, 2), (3, 1), (4,))
S4_CHARACTER_TABLE = {
    (4,): (1, 1, 1, 1, 1),
    (3, 1): (3, 1, -1, 0, -1),
    (2, 2): (2, 0, 2, -1, 0),
    (2, 1, 1): (3, -1, -1, 0, 1),
    (1, 1, 1, 1): (1, -1, 1, 1, -1),
}


def _rho(rho) -> np.ndarray:
    return as_matrix(getattr(rho, "matrix", rho))


def exact_nonlinear(O, rho) -> float:
    o = as_matrix(getattr(O, "matrix", O))
    r = _rho(rho)
    if o.shape != r.shape:
        raise ValidationError(f"observable {o.shape} and state {r.shape} dimensions differ")
    return float(np.real(np.trace(o @ r @ r)))


def exact_moments(rho, k: int) -> float:
    if k < 1:
        raise ValidationError("k must be >= 1")
    lam = np.clip(hermitian_eig(_rho(rho)).eigenvalues, 0, None)
    return float(np.sum(lam**k))


def blocks(rho, partition: DichotomicPartition) -> tuple[np.ndarray, np.ndarray]:
    """Restrictions of V_O rho V_O^dagger to the two eigenspaces (unnormalized)."""
    r = _rho(rho)
    v = partition.V_O
    rot = v @ r @ v.conj().T
    p, m = partition.plus_indices, partition.minus_indices
    return rot[np.ix_(p, p)], rot[np.ix_(m, m)]


def block_purities(rho, partition: DichotomicPartition) -> tuple[float, float]:
    bp, bm = blocks(rho, partition)
    return float(np.real(np.vdot(bp, bp))), float(np.real(np.vdot(bm, bm)))


def _moments(b: np.ndarray, kmax: int = 4) -> list:
    if b.size == 0:
        return [0.0] * (kmax + 1)
    lam = hermitian_eig(b).eigenvalues
    return [float(np.sum(lam**k)) for k in range(kmax + 1)]


# ---------------------------------------------------------------- permutations

@dataclass(frozen=True)
class PermutationSpec:
    """Permutation of t tensor slots, ``mapping[i] = pi(i)`` (0-based)."""

    mapping: tuple
    t: int = field(init=False)
    cycle_type: tuple = field(init=False)

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        if sorted(m) != list(range(len(m))):
            raise ValidationError(f"{m} is not a permutation")
        object.__setattr__(self, "mapping", m)
        object.__setattr__(self, "t", len(m))
        object.__setattr__(self, "cycle_type", tuple(sorted((len(c) for c in self.cycles()), reverse=True)))

    def cycles(self) -> list:
        seen, out = set(), []
        for i in range(len(self.mapping)):
            if i in seen:
                continue
            c, j = [], i
            while j not in seen:
                seen.add(j)
                c.append(j)
                j = self.mapping[j]
            out.append(tuple(c))
        return out

    def inverse(self) -> "PermutationSpec":
        inv = [0] * len(self.mapping)
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return PermutationSpec(tuple(inv))

    def compose(self, other: "PermutationSpec") -> "PermutationSpec":
        """(self o other)(i) = self(other(i))."""
        return PermutationSpec(tuple(self.mapping[other.mapping[i]] for i in range(self.t)))

    @classmethod
    def from_cycles(cls, text: str, t: int) -> "PermutationSpec":
        """Parse 1-based cycle notation such as ``"(12)(34)"`` or ``"()"``."""
        m = list(range(t))
        for chunk in text.replace(" ", "").strip("()").split(")("):
            if not chunk:
                continue
            idx = [int(ch) - 1 for ch in chunk]
            for a, b in zip(idx, idx[1:] + idx[:1]):
                m[a] = b
        return cls(tuple(m))


def all_permutations(t: int) -> list:
    return [PermutationSpec(p) for p in permutations(range(t))]


def _perm_index_map(spec: PermutationSpec, d: int) -> np.ndarray:
    """out[i] = row index hit by basis column i under P_pi."""
    t = spec.t
    idx = np.arange(d**t)
    digits = np.stack([(idx // d ** (t - 1 - k)) % d for k in range(t)], axis=1)
    inv = spec.inverse().mapping
    out_digits = digits[:, list(inv)]
    weights = d ** np.arange(t - 1, -1, -1)
    return out_digits @ weights


def permutation_operator(spec: PermutationSpec, d: int) -> np.ndarray:
    """P_pi |s_1..s_t> = |s_{pi^-1(1)} .. s_{pi^-1(t)}>."""
    dim = d**spec.t
    if dim > MAX_PERMUTATION_DIM:
        raise ValidationError(f"d^t = {dim} exceeds {MAX_PERMUTATION_DIM}")
    p = np.zeros((dim, dim))
    p[_perm_index_map(spec, d), np.arange(dim)] = 1.0
    return p


@lru_cache(maxsize=None)
def weingarten_matrix(d: int, t: int) -> np.ndarray:
    """Pseudo-inverse of G_{pi,sigma} = d^{#cycles(pi^-1 sigma)} over S_t in all_permutations order."""
    perms = all_permutations(t)
    g = np.array([[float(d) ** len(p.inverse().compose(s).cycles()) for s in perms] for p in perms])
    return np.linalg.pinv(g)


def weingarten(pi_inverse_sigma: PermutationSpec, d: int, t: int | None = None) -> float:
    t = t or pi_inverse_sigma.t
    if t > 4:
        raise ValidationError("weingarten supports t <= 4")
    perms = all_permutations(t)
    return float(weingarten_matrix(d, t)[0, perms.index(pi_inverse_sigma)])


def twirl_coefficients(x, d: int, t: int) -> dict:
    """Coefficients b_pi with Phi_t(X) = sum_pi b_pi P_pi."""
    x = as_matrix(x)
    if x.shape != (d**t, d**t):
        raise ValidationError("operator does not act on t copies of dimension d")
    perms = all_permutations(t)
    traces = np.array([x[_perm_index_map(s, d), np.arange(d**t)].sum() for s in perms])
    coef = weingarten_matrix(d, t) @ traces
    return dict(zip(perms, coef))


def analytic_twirl(x, d: int, t: int) -> np.ndarray:
    """Exact Haar twirl sum_{pi,sigma} Wg(pi^-1 sigma) Tr(P_{sigma^-1} X) P_pi."""
    if t > 4:
        raise ValidationError("analytic_twirl supports t <= 4")
    out = np.zeros((d**t, d**t), dtype=complex)
    for p, c in twirl_coefficients(x, d, t).items():
        out += c * permutation_operator(p, d)
    return out


def x2_operator(d: int) -> np.ndarray:
    """Diagonal operator sum_{s1,s2} X_2(s1,s2) |s1 s2><s1 s2|."""
    s1, s2 = np.divmod(np.arange(d * d), d)
    return np.diag(np.where(s1 == s2, float(d), -1.0)).astype(complex)


def x3_operator(d: int) -> np.ndarray:
    idx = np.arange(d**3)
    a, b, c = idx // (d * d), (idx // d) % d, idx % d
    distinct = 1 + (a != b) + ((c != a) & (c != b))
    vals = np.select([distinct == 1, distinct == 2], [(1 + d * d) / 2, (1 - d) / 2], 1.0)
    return np.diag(vals).astype(complex)


def x2_tensor2_operator(d: int) -> np.ndarray:
    return np.kron(x2_operator(d), x2_operator(d))


def haar_x2_tensor2_coefficients(d: int) -> dict:
    """Closed-form 4-copy Haar twirl coefficients of X_2 (x) X_2."""
    w = 2.0 / (d * (d + 2) * (d + 3))
    pair = (d + 1) / (d * (d + 3))
    other = -(d + 1) / (d * (d + 2) * (d + 3))
    table = {"(12)(34)": 1 + w, "()": w, "(12)": w, "(34)": w,
             "(13)(24)": pair, "(14)(23)": pair, "(1324)": pair, "(1423)": pair}
    named = {PermutationSpec.from_cycles(k, 4): v for k, v in table.items()}
    return {p: named.get(p, other) for p in all_permutations(4)}


# ---------------------------------------------------------------- Q quantities

def _q_all(rho: np.ndarray) -> dict:
    d = rho.shape[0]
    n = n_qubits_for(d)
    if n > MAX_Q_LAMBDA_QUBITS:
        raise ValidationError(f"Q sums enumerate 4^n Paulis; n <= {MAX_Q_LAMBDA_QUBITS} required")
    acc = dict.fromkeys(S4_CLASSES, 0.0)
    for lab in pauli_labels(n):
        a = pauli_dense(lab) @ rho
        a2 = a @ a
        t1 = np.trace(a).real
        t2 = np.trace(a2).real
        t3 = np.real(np.sum(a2 * a.T))
        t4 = np.real(np.sum(a2 * a2.T))
        acc[(1, 1, 1, 1)] += t1**4
        acc[(2, 1, 1)] += t2 * t1**2
        acc[(2, 2)] += t2**2
        acc[(3, 1)] += t3 * t1
        acc[(4,)] += t4
    return {k: v / d**2 for k, v in acc.items()}


def q_lambda(rho, cycle_type) -> float:
    key = tuple(sorted(cycle_type, reverse=True))
    if key not in S4_CLASSES:
        raise ValidationError(f"{cycle_type} is not a partition of 4")
    return _q_all(_rho(rho))[key]


# ---------------------------------------------------------------- variance formulas

@dataclass(frozen=True)
class VariancePrediction:
    value: float
    term_breakdown: dict


def _haar_block_terms(r, d_b: int, N: int, tag: str) -> dict:
    if d_b == 0:
        return {}
    D = N * (N - 1)
    a, b = N - 2, (N - 2) * (N - 3)
    r1, r2, r3, r4 = r[1], r[2], r[3], r[4]
    den3 = d_b * (d_b + 2) * (d_b + 3)
    return {
        f"r1sq{tag}": 2 * d_b / D * r1**2,
        f"r2{tag}": 2 * (d_b - 1) / D * r2,
        f"r2r1{tag}": 4 * (d_b - 1) * a / ((d_b + 2) * D) * r2 * r1,
        f"r3{tag}": 8 * (d_b + 1) * a / ((d_b + 2) * D) * r3,
        f"r1cube{tag}": -4 * a / ((d_b + 2) * D) * r1**3,
        f"r1quad{tag}": 2 * b / (den3 * D) * r1**4,
        f"r1sqr2{tag}": -4 * b / ((d_b + 2) * (d_b + 3) * D) * r1**2 * r2,
        f"r1r3{tag}": -8 * (d_b + 1) * b / (den3 * D) * r1 * r3,
        f"r2sq{tag}": (2 * d_b**2 + 6 * d_b + 6) * b / (den3 * D) * r2**2,
        f"r4{tag}": 2 * (d_b + 1) * b / ((d_b + 2) * (d_b + 3) * D) * r4,
    }


def analytic_variance_haar(rho, partition: DichotomicPartition, N_M: int) -> VariancePrediction:
    """Single-round variance of the block-diagonal Haar estimator."""
    if N_M < 4:
        raise ValidationError("N_M must be >= 4")
    bp, bm = blocks(rho, partition)
    rp, rm = _moments(bp), _moments(bm)
    terms = {}
    terms.update(_haar_block_terms(rp, partition.d_plus, N_M, "+"))
    terms.update(_haar_block_terms(rm, partition.d_minus, N_M, "-"))
    terms["cross"] = -(4 * N_M - 6) / (N_M * (N_M - 1)) * (rp[2] - rm[2]) ** 2
    return VariancePrediction(float(sum(terms.values())), terms)


def haar_variance_bound(d_plus: int, d_minus: int, N_M: int) -> float:
    D = N_M * (N_M - 1)
    s1 = sum((3 * x + 1) / (x + 2) for x in (d_plus, d_minus) if x)
    s2 = sum((x * x + 2 * x + 2) / (x * (x + 2) * (x + 3)) for x in (d_plus, d_minus) if x)
    return 4 * (d_plus + d_minus) / D + 4 * (N_M - 2) / D * s1 + 4 * (N_M - 2) * (N_M - 3) / D * s2


@lru_cache(maxsize=None)
def clifford_x2_tensor2_coefficients(d: int) -> tuple:
    """Clifford 4-copy twirl of X_2 (x) X_2 as sum_pi a_pi Q P_pi + b_pi Q_perp P_pi.

    The twirl is the Hilbert-Schmidt projection onto the commutant, which for
    the Clifford group is spanned by {Q P_pi, Q_perp P_pi}; Q = d^-2 sum_P P^(x)4.
    Returns (perms, a, b).
    """
    if d**4 > MAX_PERMUTATION_DIM:
        raise ValidationError(f"block dimension {d} too large for the 4-copy twirl")
    n = n_qubits_for(d)
    perms = all_permutations(4)
    idx = np.arange(d**4)
    s = np.stack([(idx // d ** (3 - k)) % d for k in range(4)], axis=1)
    x = np.where(s[:, 0] == s[:, 1], d, -1.0) * np.where(s[:, 2] == s[:, 3], d, -1.0)
    paulis = [pauli_dense(lab) for lab in pauli_labels(n)]

    def tr_xqp(tau):
        inv = list(tau.inverse().mapping)
        total = 0.0
        for p in paulis:
            v = np.ones(idx.size, dtype=complex)
            for k in range(4):
                v *= p[s[:, k], s[:, inv[k]]]
            total += np.sum(x * v)
        return total / d**2

    def tr_xp(tau):
        return np.sum(x * np.all(s == s[:, list(tau.inverse().mapping)], axis=1))

    def tr_qp(tau):
        cyc = tau.cycles()
        even = all(len(c) % 2 == 0 for c in cyc)
        return (d ** len(cyc) + (d * d - 1) * (d ** len(cyc) if even else 0)) / d**2

    g_all = np.array([[float(d) ** len(p.inverse().compose(q).cycles()) for q in perms] for p in perms])
    g_q = np.array([[tr_qp(p.inverse().compose(q)) for q in perms] for p in perms])
    t_q = np.array([tr_xqp(p.inverse()) for p in perms])
    t_all = np.array([tr_xp(p.inverse()) for p in perms])
    a = np.real(np.linalg.pinv(g_q) @ t_q)
    b = np.real(np.linalg.pinv(g_all - g_q) @ (t_all - t_q))
    return perms, a, b


def clifford_fourth_moment(block: np.ndarray) -> tuple[float, dict]:
    """Exact Clifford average of Tr((X_2 (x) X_2) (U rho_b U^dagger)^(x)4) for one block.

    Every term is degree four in rho_b, so unnormalized blocks are handled directly.
    Breakdown is keyed by cycle type: ``q<type>`` for Q_lambda, ``r<type>`` for moment products.
    """
    d = block.shape[0]
    perms, a, b = clifford_x2_tensor2_coefficients(d)
    q = _q_all(block)
    r = _moments(block)
    terms = {}
    for p, ap, bp in zip(perms, a, b):
        ct = p.cycle_type
        rp = float(np.prod([r[c] for c in ct]))
        tag = "".join(map(str, ct))
        terms[f"q{tag}"] = terms.get(f"q{tag}", 0.0) + (ap - bp) * q[ct]
        terms[f"r{tag}"] = terms.get(f"r{tag}", 0.0) + bp * rp
    return float(sum(terms.values())), terms


def clifford_fourth_moment_printed(block: np.ndarray) -> tuple[float, dict]:
    """Summarized single-block closed form as printed, homogenized in Tr(rho_b).

    Agrees with :func:`clifford_fourth_moment` on pure blocks only.
    """
    d = block.shape[0]
    q = _q_all(block)
    r = _moments(block)
    den = (d - 2) * (d - 1) * (d + 1) * (d + 2)
    terms = {
        "q1111": (5 * d**5 - d**4 - 5 * d**3 - 43 * d**2 + 48) / (24 * den) * q[(1, 1, 1, 1)],
        "q211": (d * d + d + 2) / (2 * (d + 2)) * q[(2, 1, 1)],
        "q22": (5 * d**5 - 9 * d**4 - 21 * d**3 + 29 * d**2 + 16 * d - 16) / (8 * den) * q[(2, 2)],
        "q31": d * d * (d**3 + d * d - d - 5) / (6 * den) * q[(3, 1)],
        "q4": (d - 1) / 2 * q[(4,)],
        "r1": -r[1] ** 4 / (d + 2),
        "r2": -2 * r[2] * r[1] ** 2 / (d + 2),
        "r2sq": (d + 1) / (d + 2) * r[2] ** 2,
    }
    return float(sum(terms.values())), terms


def _z1_partition(d: int) -> DichotomicPartition:
    return DichotomicPartition(np.eye(d, dtype=complex), np.arange(d // 2), np.arange(d // 2, d))


def analytic_variance_clifford(rho, N_M: int, d: int | None = None,
                               partition: DichotomicPartition | None = None) -> VariancePrediction:
    """Single-round variance with Clifford blocks on a balanced partition.

    Second and third moments are those of a unitary 3-design; the fourth
    moment is the exact per-block Clifford average.
    """
    r = _rho(rho)
    d = d or r.shape[0]
    partition = partition or _z1_partition(d)
    if partition.d_plus != d // 2 or partition.d_minus != d // 2 or partition.dim != d:
        raise ValidationError("Clifford variance needs a balanced partition d_+ = d_- = d/2")
    if d < 8:
        raise ValidationError("Clifford variance formula needs n >= 3")
    if N_M < 4:
        raise ValidationError("N_M must be >= 4")
    bp, bm = blocks(r, partition)
    rp, rm = _moments(bp), _moments(bm)
    D = N_M * (N_M - 1)
    w4 = (N_M - 2) * (N_M - 3) / D
    terms = {}
    for tag, b, mom in (("+", bp, rp), ("-", bm, rm)):
        db = b.shape[0]
        full = _haar_block_terms(mom, db, N_M, tag)
        for key in ("r1sq", "r2", "r2r1", "r3", "r1cube"):
            terms[key + tag] = full[key + tag]
        m4, parts = clifford_fourth_moment(b)
        for key, val in parts.items():
            terms[f"c4_{key}{tag}"] = w4 * val
    terms["cross"] = -(4 * N_M - 6) / D * (rp[2] - rm[2]) ** 2
    # disjoint pairs contribute M4^+ + M4^- - 2 R2^+ R2^-; "cross" already carries the (R2^+ - R2^-)^2 part
    terms["cross_r2sq"] = -w4 * (rp[2] ** 2 + rm[2] ** 2)
    return VariancePrediction(float(sum(terms.values())), terms)


def clifford_variance_printed(rho, N_M: int, d: int | None = None,
                              partition: DichotomicPartition | None = None) -> float:
    """The closed form exactly as printed, kept for comparison with :func:`analytic_variance_clifford`."""
    r = _rho(rho)
    d = d or r.shape[0]
    partition = partition or _z1_partition(d)
    bp, bm = blocks(r, partition)
    rp, rm = _moments(bp), _moments(bm)
    qp, qm = _q_all(bp), _q_all(bm)
    N = N_M
    D = N * (N - 1)
    W = (N - 2) * (N - 3)
    poles = (d - 4) * (d - 2) * (d + 2) * (d + 4)
    qs = {k: qp[k] + qm[k] for k in S4_CLASSES}
    return float(
        -2 * W / (D * (d + 4))
        + d / D * (rp[1] ** 2 + rm[1] ** 2)
        - 4 * (N - 2) / (D * (d + 4)) * (rp[1] ** 3 + rm[1] ** 3)
        + 4 * (N - 2) * (d - 2) / (D * (d + 4)) * (rp[1] * rp[2] ** 2 + rm[1] * rm[2] ** 2)
        + ((d - 2) / D - 4 * W / (D * (d + 4))) * (rp[2] + rm[2])
        - (4 * N - 6) / D * (rp[2] - rm[2]) ** 2
        - 2 * W / (D * (d + 4)) * (rp[2] ** 2 + rm[2] ** 2)
        + 8 * (N - 2) * (d + 2) / (D * (d + 4)) * (rp[3] + rm[3])
        + W * (5 * d**5 - 2 * d**4 - 20 * d**3 - 344 * d**2 + 1536) / (48 * D * poles) * qs[(1, 1, 1, 1)]
        + W * (d * d + 2 * d + 8) / (4 * D * (d + 4)) * qs[(2, 1, 1)]
        + W * (5 * d**5 - 18 * d**4 - 84 * d**3 + 232 * d**2 + 256 * d - 512) / (16 * D * poles) * qs[(2, 2)]
        + W * d * d * (d**3 + 2 * d**2 - 4 * d - 40) / (12 * D * poles) * qs[(3, 1)]
        + W * (d - 2) / (4 * D) * qs[(4,)]
    )


def clifford_variance_envelope(d: int, N_M: int) -> float:
    D = N_M * (N_M - 1)
    return 4 * d / D + 24 * (N_M - 2) / D + 4 * (N_M - 2) * (N_M - 3) / D
