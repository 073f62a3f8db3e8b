"""Post-processing and protocol drivers for Tr(O rho^2) estimation."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .constants import TOL
from .ensembles import (SeededRng, as_generator, clifford as clifford_spec, haar as haar_spec, local_haar as local_spec,
                        sample_clifford, sample_clifford_batch, sample_haar_batch, sample_local_haar_factors)
from .errors import ValidationError
from .numerics import as_matrix, hermitian_eig
from .partition import DichotomicPartition, dichotomic_split, frame_partition, identity_partition
from .sampler import MeasurementRecord, born_distribution, draw_outcomes, rotate, run_round
from .states import Observable, n_qubits_for, parse_pauli_label, pauli_decompose, pauli_dense
from .clifford import pauli_to_z1_frame

__all__ = [
    "DichotomicPartition", "dichotomic_split", "EstimateReport", "BinaryDecomposition", "Schedule",
    "coeff_x2", "coeff_x2b", "coeff_x2b_local", "coeff_x3", "estimate_purity", "estimate_dichotomic",
    "balanced_split", "binary_decompose", "estimate_general", "estimate_pauli_sampling", "estimate_brm",
    "rho2_shadow", "estimate_third_moment", "classical_shadow_estimate", "median_of_means", "petz_renyi2",
]


# ---------------------------------------------------------------- reports and schedules

@dataclass
class EstimateReport:
    value: float
    per_repetition_values: np.ndarray
    config: dict
    wall_clock: float
    total_state_copies: int
    round_values: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Schedule:
    """Constant factors of the default (N_U, N_M, T) schedules."""

    nu_const: float = 3.0
    nm_const: float = 3.0
    mom_const: float = 8.0

    def repetitions(self, delta: float) -> int:
        return max(1, math.ceil(self.mom_const * math.log(1.0 / delta)))

    def haar(self, eps: float, d_plus: int, d_minus: int) -> tuple[int, int]:
        dims = [x for x in (d_plus, d_minus) if x > 0]
        d = d_plus + d_minus
        n_u = max(1, math.ceil(self.nu_const / (min(dims) * eps * eps)))
        n_m = max(2, math.ceil(math.sqrt(self.nm_const * d) / (eps * math.sqrt(n_u))))
        return n_u, n_m

    def clifford(self, eps: float, d: int) -> tuple[int, int]:
        return max(1, math.ceil(self.nu_const / (eps * eps))), max(2, math.ceil(math.sqrt(self.nm_const * d)))

    def for_inner(self, kind: str, eps: float, partition: DichotomicPartition) -> tuple[int, int]:
        if kind == "clifford":
            return self.clifford(eps, partition.dim)
        return self.haar(eps, partition.d_plus, partition.d_minus)


DEFAULT_SCHEDULE = Schedule()


def median_of_means(values) -> float:
    """Median of per-batch means; even length averages the two middle values."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValidationError("median_of_means needs at least one value")
    return float(np.median(v))


def as_seeded(rng) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    if rng is None:
        return SeededRng(int(np.random.SeedSequence().entropy % (1 << 63)))
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng))
    return SeededRng(int(as_generator(rng).integers(0, 1 << 63)))


def _rho(rho_source) -> np.ndarray:
    return as_matrix(getattr(rho_source, "matrix", rho_source))


# ---------------------------------------------------------------- coefficients

def coeff_x2(s1: int, s2: int, d: int) -> float:
    return float(d) if s1 == s2 else -1.0


def coeff_x2b(s1: int, s2: int, partition: DichotomicPartition) -> float:
    l1, l2 = partition.labels[s1], partition.labels[s2]
    if l1 != l2:
        return 0.0
    d_l = partition.d_plus if l1 > 0 else partition.d_minus
    return float(l1) * coeff_x2(s1, s2, d_l)


def _bits(s, n: int) -> str:
    return s if isinstance(s, str) else format(int(s), f"0{n}b")


def coeff_x2b_local(s1, s2, n: int) -> float:
    a, b = _bits(s1, n), _bits(s2, n)
    if len(a) != n or len(b) != n:
        raise ValidationError("bitstrings must have length n")
    if a[0] != b[0]:
        return 0.0
    hamming = sum(x != y for x, y in zip(a, b))
    sign = 1.0 if a[0] == "0" else -1.0
    return sign * 2.0 ** (n - 1) * (-2.0) ** (-hamming)


def coeff_x3(size: int, d: int) -> float:
    if size == 1:
        return (1.0 + d * d) / 2.0
    if size == 2:
        return (1.0 - d) / 2.0
    if size == 3:
        return 1.0
    raise ValidationError("size must be 1, 2 or 3")


# ---------------------------------------------------------------- per-round values

def _pairs(c):
    return c * (c - 1) / 2.0


def _local_quadratic(c: np.ndarray) -> np.ndarray:
    """c^T K c with K = (x) [[2,-1],[-1,2]] over log2(c.shape[-1]) qubits, batched over leading axes."""
    m = n_qubits_for(c.shape[-1])
    lead = c.ndim - 1
    k = np.array([[2.0, -1.0], [-1.0, 2.0]])
    t = c.reshape(c.shape[:-1] + (2,) * m)
    for ax in range(lead, lead + m):
        t = np.moveaxis(np.tensordot(k, t, axes=(1, ax)), 0, ax)
    return np.sum(c * t.reshape(c.shape), axis=-1)


def block_pair_sum(c: np.ndarray, local: bool = False):
    """Sum over unordered shot pairs of X_2 restricted to one eigenspace (last axis = outcomes)."""
    c = np.asarray(c, dtype=float)
    n_l = c.sum(axis=-1)
    if local:
        m = n_qubits_for(c.shape[-1])
        return 0.5 * (_local_quadratic(c) - (2.0**m) * n_l)
    return (c.shape[-1] + 1) * _pairs(c).sum(axis=-1) - _pairs(n_l)


def dichotomic_round_value(counts: np.ndarray, partition: DichotomicPartition, local: bool = False):
    """omega_u from outcome counts over all d indices; leading axes index rounds."""
    counts = np.asarray(counts)
    n = counts.sum(axis=-1)
    total = 0.0
    for sign, idx in ((1.0, partition.plus_indices), (-1.0, partition.minus_indices)):
        if idx.size:
            total = total + sign * block_pair_sum(counts[..., idx], local)
    return total / _pairs(n)


def purity_round_value(counts: np.ndarray, local: bool = False):
    counts = np.asarray(counts)
    return block_pair_sum(counts, local) / _pairs(counts.sum(axis=-1))


def third_moment_round_value(counts: np.ndarray, d: int) -> float:
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    same = (c * (c - 1) * (c - 2) / 6.0).sum()
    two = (_pairs(c) * (n - c)).sum()
    triples = n * (n - 1) * (n - 2) / 6.0
    three = triples - same - two
    return (coeff_x3(1, d) * same + coeff_x3(2, d) * two + three) / triples


def brm_round_value(counts: np.ndarray, v: np.ndarray, tr_o: float) -> float:
    """Closed form of the pair-and-virtual-outcome sum for one round.

    ``v`` is diag(U O U^dagger).
    """
    c = np.asarray(counts, dtype=float)
    d = c.size
    x1, x2 = coeff_x3(1, d), coeff_x3(2, d)
    n = c.sum()
    same = _pairs(c)
    s_same = np.sum(same * (x1 * v + x2 * (tr_o - v)))
    n_diff = (n * n - np.sum(c * c)) / 2.0
    cv = np.sum(c * v * (n - c))
    s_diff = x2 * cv + tr_o * n_diff - cv
    return float((s_same + s_diff) / _pairs(n))


def _brm_weights(c: np.ndarray) -> np.ndarray:
    """w_sigma such that the per-round BRM value is sum_sigma w_sigma <sigma|U O U^dagger|sigma>."""
    d = c.size
    x1, x2 = coeff_x3(1, d), coeff_x3(2, d)
    n = c.sum()
    same = _pairs(c)
    s_tot = same.sum()
    n_diff = (n * n - np.sum(c * c)) / 2.0
    w = x1 * same + x2 * (s_tot - same) + x2 * c * (n - c) + (n_diff - c * (n - c))
    return w / _pairs(n)


def rho2_shadow(record: MeasurementRecord, N_M: int | None = None, d: int | None = None) -> np.ndarray:
    """U^dagger diag(w) U: a matrix whose overlap with O is the per-round BRM value."""
    u = record.retained_unitary
    if u is None:
        raise ValidationError("record has no retained unitary")
    d = d or u.shape[0]
    if N_M is not None and record.n_shots != N_M:
        raise ValidationError("record length differs from N_M")
    w = _brm_weights(record.counts(d).astype(float))
    return (u.conj().T * w) @ u


# ---------------------------------------------------------------- ORM drivers

_CHUNK = 4096


def _block_unitaries(kind: str, dim: int, size: int, gen) -> np.ndarray:
    """``size`` independent draws of the inner ensemble on one eigenspace."""
    if kind == "haar":
        return sample_haar_batch(dim, size, gen)
    m = n_qubits_for(dim)
    if m == 0:
        return np.ones((size, 1, 1), dtype=complex)
    if kind in ("local", "local_haar"):
        f = sample_local_haar_factors(m, size, gen)
        u = f[:, 0]
        for q in range(1, m):
            u = np.einsum("rab,rcd->racbd", u, f[:, q]).reshape(size, 2 ** (q + 1), 2 ** (q + 1))
        return u
    if kind == "clifford":
        return sample_clifford_batch(m, size, gen)
    raise ValidationError(f"unknown inner ensemble {kind!r}")


def orm_counts(rot: np.ndarray, partition: DichotomicPartition, inner_kind: str, size: int, N_M: int,
               gen) -> np.ndarray:
    """Outcome counts of ``size`` independent block-diagonal rounds on the rotated state, shape (size, d)."""
    p = np.zeros((size, partition.dim))
    for idx in (partition.plus_indices, partition.minus_indices):
        if idx.size == 0:
            continue
        u = _block_unitaries(inner_kind, idx.size, size, gen)
        v = u @ rot[np.ix_(idx, idx)]
        p[:, idx] = np.einsum("rik,rik->ri", v, u.conj()).real
    p = np.clip(p, 0.0, None)
    p /= p.sum(axis=1, keepdims=True)
    return gen.multinomial(int(N_M), p)


def _orm_values(rot, partition, inner_kind, T, N_U, N_M, rng: SeededRng) -> np.ndarray:
    """Per-round omega values, shape (T, N_U); repetition t draws from stream rng.child(t)."""
    local = inner_kind in ("local", "local_haar")
    out = np.empty((T, N_U))
    for t in range(T):
        gen = rng.child(t).generator()
        for s in range(0, N_U, _CHUNK):
            counts = orm_counts(rot, partition, inner_kind, min(_CHUNK, N_U - s), N_M, gen)
            out[t, s:s + counts.shape[0]] = dichotomic_round_value(counts, partition, local)
    return out


def _report(values, config, start, copies, **extra) -> EstimateReport:
    per_rep = values.mean(axis=1)
    return EstimateReport(median_of_means(per_rep), per_rep, config, time.perf_counter() - start, int(copies),
                          values, dict(extra))


def observable_partition(O) -> DichotomicPartition:
    """Partition used by the ORM drivers.

    Signed Pauli strings use a Clifford frame mapping them to Z_1, which gives
    the eigenspaces a qubit structure; everything else is diagonalized.
    """
    if isinstance(O, DichotomicPartition):
        return O
    if isinstance(O, Observable) and O.structure == "pauli_string":
        sign, body = parse_pauli_label(O.label)
        if set(body) == {"I"}:
            return identity_partition(O.dim) if sign > 0 else DichotomicPartition(np.eye(O.dim, dtype=complex), np.arange(0), np.arange(O.dim))
        return frame_partition(pauli_to_z1_frame(sign, body))
    return dichotomic_split(O)


def estimate_dichotomic(rho_source, O, T: int, N_U: int, N_M: int, inner_ensemble: str = "haar",
                        rng=None) -> EstimateReport:
    """Median over T repetitions of the N_U-averaged block-diagonal estimator."""
    if N_M < 2:
        raise ValidationError("N_M must be >= 2")
    start = time.perf_counter()
    partition = observable_partition(O)
    rot = rotate(rho_source, partition.V_O)
    values = _orm_values(rot, partition, inner_ensemble, T, N_U, N_M, as_seeded(rng))
    config = {"T": T, "N_U": N_U, "N_M": N_M, "ensemble": inner_ensemble, "d_plus": partition.d_plus,
              "d_minus": partition.d_minus}
    return _report(values, config, start, T * N_U * N_M)


def estimate_purity(rho_source, T: int, N_U: int, N_M: int, ensemble: str = "haar", rng=None) -> EstimateReport:
    if N_M < 2:
        raise ValidationError("N_M must be >= 2")
    d = _rho(rho_source).shape[0]
    return estimate_dichotomic(rho_source, identity_partition(d), T, N_U, N_M, ensemble, rng)


# ---------------------------------------------------------------- decompositions

@dataclass(frozen=True, eq=False)
class BinaryDecomposition:
    k: int
    components: tuple
    residual_norm: float
    residual: np.ndarray
    signs: np.ndarray
    eigenvectors: np.ndarray


def binary_decompose(O, k: int) -> BinaryDecomposition:
    """O = sum_l 2^-l O_l + O_Delta with dichotomic O_l from the sign recursion (sgn(0) = +1)."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    m = as_matrix(getattr(O, "matrix", O))
    eig = hermitian_eig(m)
    a = eig.eigenvalues
    if np.max(np.abs(a)) > 1.0 + TOL.decomposition:
        raise ValidationError(f"operator norm {np.max(np.abs(a))!r} exceeds 1")
    w = eig.eigenvectors
    r = a.copy()
    signs = np.empty((k, a.size))
    comps = []
    for level in range(1, k + 1):
        s = np.where(r >= 0, 1.0, -1.0)
        signs[level - 1] = s
        r = r - s * 2.0**-level
        comps.append(Observable((w * s) @ w.conj().T))
    residual = (w * r) @ w.conj().T
    return BinaryDecomposition(k, tuple(comps), float(np.max(np.abs(r))), residual, signs, w)


def balanced_split(O):
    """Write a lopsided dichotomic O as (sign I + O1 + O2 + O3) / 2.

    Needs 0 < min(d_+, d_-) < d/4; each returned O_i has both eigenspaces of
    dimension at least d/3.  O = +-I cannot be split that way and is rejected.
    """
    p = O if isinstance(O, DichotomicPartition) else dichotomic_split(O)
    d = p.dim
    if min(p.d_plus, p.d_minus) == 0:
        raise ValidationError("balanced_split needs both eigenspaces non-empty")
    if not min(p.d_plus, p.d_minus) < d / 4:
        raise ValidationError("balanced_split needs min(d_+, d_-) < d/4")
    sign = 1 if p.d_minus < p.d_plus else -1
    big, small = (p.plus_indices, p.minus_indices) if sign > 0 else (p.minus_indices, p.plus_indices)
    m = small.size
    sizes = [(d - m) // 3 + (1 if i < (d - m) % 3 else 0) for i in range(3)]
    groups = np.split(big, np.cumsum(sizes)[:-1])
    v = p.V_O
    outs = []
    for i in range(3):
        diag = np.empty(d)
        diag[small] = -1.0
        for j, g in enumerate(groups):
            diag[g] = -1.0 if i == j else 1.0
        mat = (v.conj().T * (sign * diag)) @ v
        outs.append(Observable(mat))
    return sign, outs[0], outs[1], outs[2]


def _dichotomic_eps(rho, O, eps, delta, inner, rng, schedule, fixed):
    """Estimate Tr(O rho^2) for a dichotomic O at accuracy eps, routing degenerate and lopsided cases."""
    p = dichotomic_split(O)
    d = p.dim
    if p.d_minus == 0 or p.d_plus == 0:
        sgn = 1.0 if p.d_minus == 0 else -1.0
        part = identity_partition(d)
        T, N_U, N_M = fixed or (schedule.repetitions(delta), *schedule.for_inner(inner, eps, part))
        rep = estimate_dichotomic(rho, part, T, N_U, N_M, inner, rng.child(0))
        return sgn * rep.value, rep.total_state_copies, [rep]
    if min(p.d_plus, p.d_minus) < d / 4 and d >= 8:
        sign, *parts = balanced_split(p)
        val, copies, reps = _dichotomic_eps(rho, np.eye(d), eps / 2, delta, inner, rng.child(1), schedule, fixed)
        total = sign * val
        for i, oi in enumerate(parts):
            v_i, c_i, r_i = _dichotomic_eps(rho, oi, eps / 2, delta, inner, rng.child(2 + i), schedule, fixed)
            total += v_i
            copies += c_i
            reps += r_i
        return 0.5 * total, copies, reps
    T, N_U, N_M = fixed or (schedule.repetitions(delta), *schedule.for_inner(inner, eps, p))
    rep = estimate_dichotomic(rho, p, T, N_U, N_M, inner, rng.child(5))
    return rep.value, rep.total_state_copies, [rep]


def protocol2_levels(epsilon: float) -> int:
    return math.ceil(math.log2(1.0 / epsilon)) + 1


def estimate_general(rho_source, O, epsilon: float, delta: float, inner_ensemble: str = "haar", rng=None,
                     schedule: Schedule = DEFAULT_SCHEDULE, fixed: tuple | None = None) -> EstimateReport:
    """Binary decomposition into dichotomic parts, each estimated to (3/2)^l eps/8.

    ``fixed=(T, N_U, N_M)`` overrides the per-component schedule.
    """
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ValidationError("epsilon and delta must lie in (0, 1)")
    start = time.perf_counter()
    m = as_matrix(getattr(O, "matrix", O))
    rng = as_seeded(rng)
    eig = hermitian_eig(m)
    if np.all(np.abs(np.abs(eig.eigenvalues) - 1.0) <= TOL.dichotomic_eigenvalue):
        v, c, reps = _dichotomic_eps(rho_source, m, epsilon, delta, inner_ensemble, rng, schedule, fixed)
        config = {"epsilon": epsilon, "delta": delta, "k": 0, "ensemble": inner_ensemble}
        return EstimateReport(v, np.array([v]), config, time.perf_counter() - start, c,
                              extra={"components": len(reps)})
    k = protocol2_levels(epsilon)
    dec = binary_decompose(m, k)
    delta_l = delta / k
    value = 0.0
    copies = 0
    levels = []
    for level, comp in enumerate(dec.components, start=1):
        eps_l = (1.5**level) * epsilon / 8.0
        v, c, _ = _dichotomic_eps(rho_source, comp, eps_l, delta_l, inner_ensemble, rng.child(level), schedule, fixed)
        value += 2.0**-level * v
        copies += c
        levels.append(v)
    config = {"epsilon": epsilon, "delta": delta, "k": k, "ensemble": inner_ensemble}
    return EstimateReport(value, np.array([value]), config, time.perf_counter() - start, copies,
                          extra={"level_values": levels, "residual_norm": dec.residual_norm})


# ---------------------------------------------------------------- Pauli sampling

def clifford_variance_envelope(N_M: int, d: int) -> float:
    """Upper bound on the single-round variance with Clifford blocks."""
    D = N_M * (N_M - 1)
    return (4 * d + 24 * (N_M - 2) + 4 * (N_M - 2) * (N_M - 3)) / D


def pauli_terms(O) -> tuple:
    if isinstance(O, Observable):
        return O.pauli_decomposition if O.pauli_decomposition is not None else pauli_decompose(O.matrix)
    return pauli_decompose(O)


def estimate_pauli_sampling(rho_source, O, epsilon: float, delta: float, rng=None, T: int | None = None,
                            l: int | None = None, N_M: int | None = None, N_U: int | None = None) -> EstimateReport:
    """Importance-sample Pauli strings by squared coefficient, estimate each with Clifford-block ORM."""
    start = time.perf_counter()
    terms = pauli_terms(O)
    if not terms:
        raise ValidationError("observable has an empty Pauli decomposition")
    labels = [lab for lab, _ in terms]
    coef = np.array([c for _, c in terms], dtype=float)
    norm_coef = float(np.sum(coef**2))
    if norm_coef == 0:
        raise ValidationError("observable has zero norm")
    d = _rho(rho_source).shape[0]
    K = len(terms)
    probs = coef**2 / norm_coef
    l = l or math.ceil(24 * K * norm_coef / epsilon**2)
    T = T or max(1, math.ceil(8 * math.log(1.0 / delta)))
    n_m = N_M or max(2, math.ceil(math.sqrt(3 * d)))
    env = clifford_variance_envelope(n_m, d) if n_m >= 4 else 4.0 * d
    rng = as_seeded(rng)
    frames = {}
    reps = np.empty(T)
    copies = 0
    for t in range(T):
        gen = rng.child(t).generator()
        picks = gen.choice(K, size=l, p=probs)
        acc = 0.0
        for i, j in enumerate(picks):
            lab = labels[j]
            if lab not in frames:
                frames[lab] = observable_partition(Observable(pauli_dense(lab), "pauli_string", "+" + lab))
            n_u = N_U or max(1, math.ceil(24 * env * norm_coef**2 / (l * epsilon**2 * coef[j] ** 2)))
            rep = estimate_dichotomic(rho_source, frames[lab], 1, n_u, n_m, "clifford", rng.child(t, i + 1))
            acc += norm_coef / coef[j] * rep.value
            copies += rep.total_state_copies
        reps[t] = acc / l
    config = {"epsilon": epsilon, "delta": delta, "T": T, "l": l, "N_M": n_m, "K": K}
    return EstimateReport(median_of_means(reps), reps, config, time.perf_counter() - start, copies,
                          extra={"weights": probs})


# ---------------------------------------------------------------- BRM and third moment

def collect_records(rho_source, T: int, N_U: int, N_M: int, ensemble: str = "haar", rng=None,
                    retain_unitary: bool = True) -> list:
    """Global random-unitary measurement records, one per (repetition, unitary)."""
    rho = _rho(rho_source)
    d = rho.shape[0]
    spec = {"haar": lambda: haar_spec(d), "clifford": lambda: clifford_spec(n_qubits_for(d)),
            "local": lambda: local_spec(n_qubits_for(d))}[ensemble]()
    rng = as_seeded(rng)
    return [run_round(rho, None, spec, N_M, rng.child(t, u), retain_unitary, u, t)
            for t in range(T) for u in range(N_U)]


def _group(records):
    reps: dict[int, list] = {}
    for r in records:
        reps.setdefault(r.repetition, []).append(r)
    return [reps[k] for k in sorted(reps)]


def estimate_brm(records, observables, T: int | None = None, N_U: int | None = None,
                 N_M: int | None = None) -> list:
    """Evaluate every observable on the same record set."""
    start = time.perf_counter()
    records = list(records)
    if not records:
        raise ValidationError("no records")
    for r in records:
        if r.retained_unitary is None:
            raise ValidationError("BRM needs records with retained unitaries")
        if r.n_shots < 2:
            raise ValidationError("N_M must be >= 2")
    groups = _group(records)
    if T is not None and len(groups) != T:
        raise ValidationError(f"expected {T} repetitions, found {len(groups)}")
    d = records[0].retained_unitary.shape[0]
    copies = sum(r.n_shots for r in records)
    counts = [[r.counts(d) for r in g] for g in groups]
    mats = [as_matrix(getattr(o, "matrix", o)) for o in observables]
    out = []
    for o in mats:
        tr_o = float(np.trace(o).real)
        vals = np.array([[brm_round_value(c, np.einsum("ij,jk,ik->i", r.retained_unitary, o,
                                                        r.retained_unitary.conj()).real, tr_o)
                          for c, r in zip(cg, g)] for cg, g in zip(counts, groups)])
        per_rep = vals.mean(axis=1)
        cfg = {"T": len(groups), "N_U": len(groups[0]), "N_M": records[0].n_shots, "M": len(mats)}
        out.append(EstimateReport(median_of_means(per_rep), per_rep, cfg, time.perf_counter() - start, copies, vals))
    return out


def estimate_third_moment(records, d: int, N_M: int | None = None) -> float:
    """Mean over records of the triple-sum estimator of Tr(rho^3)."""
    vals = []
    for r in records:
        if r.n_shots < 3:
            raise ValidationError("N_M must be >= 3")
        vals.append(third_moment_round_value(r.counts(d), d))
    return float(np.mean(vals))


# ---------------------------------------------------------------- classical shadows

def _haar_shadow_vectors(rho: np.ndarray, N: int, gen) -> np.ndarray:
    """Rows phi_j = U_j^dagger |b_j> for Haar U_j and Born outcomes b_j.

    phi has density d <phi|rho|phi> relative to the uniform measure, sampled
    as a mixture over eigenvectors e_k: |<e_k|phi>|^2 ~ Beta(2, d-1) with a
    uniform phase and a uniform direction orthogonal to e_k.
    """
    d = rho.shape[0]
    eig = hermitian_eig(rho)
    lam = np.clip(eig.eigenvalues, 0, None)
    k = gen.choice(d, size=N, p=lam / lam.sum())
    e = eig.eigenvectors[:, k].T
    x = gen.beta(2.0, d - 1.0, size=N)
    phase = np.exp(2j * np.pi * gen.random(N))
    g = gen.standard_normal((N, d)) + 1j * gen.standard_normal((N, d))
    g -= np.sum(e.conj() * g, axis=1)[:, None] * e
    g /= np.linalg.norm(g, axis=1)[:, None]
    return np.sqrt(x)[:, None] * phase[:, None] * e + np.sqrt(1 - x)[:, None] * g


def _clifford_shadow_vectors(rho: np.ndarray, N: int, gen) -> np.ndarray:
    d = rho.shape[0]
    n = n_qubits_for(d)
    out = np.empty((N, d), dtype=complex)
    for j in range(N):
        u = sample_clifford(n, gen)
        b = draw_outcomes(born_distribution(u, rho), 1, gen)[0]
        out[j] = u[b].conj()
    return out


def _local_shadow_vectors(rho: np.ndarray, N: int, gen) -> np.ndarray:
    """Per-qubit vectors phi_{j,q} of shape (N, n, 2), measured qubit by qubit.

    Each shot first draws an eigenvector of rho with its eigenvalue as weight,
    then measures that pure state sequentially in the rotated bases.
    """
    d = rho.shape[0]
    n = n_qubits_for(d)
    eig = hermitian_eig(rho)
    lam = np.clip(eig.eigenvalues, 0, None)
    k = gen.choice(d, size=N, p=lam / lam.sum())
    psi = eig.eigenvectors[:, k].T
    us = sample_haar_batch(2, N * n, gen).reshape(N, n, 2, 2)
    out = np.empty((N, n, 2), dtype=complex)
    idx = np.arange(N)
    for q in range(n):
        amp = np.einsum("abj,ajh->abh", us[:, q], psi.reshape(N, 2, -1))
        w = np.sum(np.abs(amp) ** 2, axis=2)
        b = (gen.random(N) * w.sum(axis=1) >= w[:, 0]).astype(np.intp)
        out[:, q] = us[idx, q, b].conj()
        psi = amp[idx, b] / np.sqrt(w[idx, b])[:, None]
    return out


def _global_mean_shadow(phi: np.ndarray) -> np.ndarray:
    N, d = phi.shape
    return (d + 1) / N * (phi.T @ phi.conj()) - np.eye(d)


def _kron_factors(a: np.ndarray) -> np.ndarray:
    """Batched Kronecker product over axis 1 of (N, k, 2, 2) single-qubit operators."""
    N, k = a.shape[:2]
    m = np.ones((N, 1, 1), dtype=complex)
    for q in range(k):
        s = m.shape[1]
        m = np.einsum("nab,ncd->nacbd", m, a[:, q]).reshape(N, 2 * s, 2 * s)
    return m


def _local_mean_shadow(phi: np.ndarray, chunk: int = 4096) -> np.ndarray:
    # sum_i L_i (x) R_i over a half/half qubit split is a single matrix product
    N, n, _ = phi.shape
    n1 = n // 2
    d1, d2 = 1 << n1, 1 << (n - n1)
    acc = np.zeros((d1 * d1, d2 * d2), dtype=complex)
    for s in range(0, N, chunk):
        f = phi[s:s + chunk]
        a = 3.0 * np.einsum("nqi,nqj->nqij", f, f.conj()) - np.eye(2)
        left = _kron_factors(a[:, :n1]).reshape(f.shape[0], -1)
        right = _kron_factors(a[:, n1:]).reshape(f.shape[0], -1)
        acc += left.T @ right
    total = acc.reshape(d1, d1, d2, d2).transpose(0, 2, 1, 3).reshape(d1 * d2, d1 * d2)
    return total / N


def shadow_vectors(rho: np.ndarray, N: int, ensemble: str, gen):
    if ensemble == "haar":
        return _haar_shadow_vectors(rho, N, gen)
    if ensemble == "clifford":
        return _clifford_shadow_vectors(rho, N, gen)
    if ensemble in ("local", "local_haar"):
        return _local_shadow_vectors(rho, N, gen)
    raise ValidationError(f"unknown shadow ensemble {ensemble!r}")


def mean_shadow(phi: np.ndarray) -> np.ndarray:
    return _local_mean_shadow(phi) if phi.ndim == 3 else _global_mean_shadow(phi)


def single_shadow(phi_j: np.ndarray) -> np.ndarray:
    """The reconstruction (2^n+1) U^dagger|b><b|U - I (global) or its per-qubit product (local)."""
    return mean_shadow(phi_j[None])


def classical_shadow_estimate(rho_source, O, N_s: int, ensemble: str = "haar", rng=None,
                              mode: str = "split", T: int = 1) -> EstimateReport:
    """Shadow estimators.

    ``mode="split"`` draws two groups of N_s shadows and returns
    Tr[O (s1 s2 + s2 s1)/2]; copies are counted as ceil(sqrt(2) N_s) per
    repetition.  ``mode="single"`` draws N_s shadows and reports Tr(O rho_hat)
    statistics, with the mean shadow in ``extra``.
    """
    start = time.perf_counter()
    rho = _rho(rho_source)
    o = as_matrix(getattr(O, "matrix", O))
    rng = as_seeded(rng)
    if mode == "single":
        if N_s < 1:
            raise ValidationError("N_s must be >= 1")
        phi = shadow_vectors(rho, N_s, ensemble, rng.child(0).generator())
        mean = mean_shadow(phi)
        if phi.ndim == 2:
            d = rho.shape[0]
            vals = (d + 1) * np.einsum("ni,ij,nj->n", phi.conj(), o, phi).real - np.trace(o).real
        else:
            vals = np.array([np.trace(o @ mean_shadow(phi[j:j + 1])).real for j in range(N_s)])
        cfg = {"N_s": N_s, "ensemble": ensemble, "mode": mode}
        return EstimateReport(float(vals.mean()), vals, cfg, time.perf_counter() - start, N_s, extra={"mean_shadow": mean})
    if mode != "split" or N_s < 1:
        raise ValidationError("split mode needs N_s >= 1")
    reps = np.empty(T)
    for t in range(T):
        gen = rng.child(t).generator()
        s1 = mean_shadow(shadow_vectors(rho, N_s, ensemble, gen))
        s2 = mean_shadow(shadow_vectors(rho, N_s, ensemble, gen))
        reps[t] = float(np.real(np.sum((o @ s1) * s2.T)))
    cfg = {"N_s": N_s, "ensemble": ensemble, "mode": mode, "T": T}
    eff = math.ceil(math.sqrt(2) * N_s)
    return EstimateReport(median_of_means(reps), reps, cfg, time.perf_counter() - start, eff * T,
                          extra={"physical_copies": 2 * N_s * T})


# ---------------------------------------------------------------- Petz-Renyi-2

def petz_renyi2(rho_source, sigma, epsilon: float, delta: float, rng=None, inner_ensemble: str = "haar",
                schedule: Schedule = DEFAULT_SCHEDULE, fixed: tuple | None = None) -> float:
    """log2 Tr(rho^2 sigma^-1) via Tr(rho^2 O) with O = (kappa d sigma)^-1, in bits."""
    s = as_matrix(getattr(sigma, "matrix", sigma))
    eig = hermitian_eig(s)
    lo, hi = float(eig.eigenvalues[0]), float(eig.eigenvalues[-1])
    if lo <= TOL.full_rank:
        raise ValidationError("sigma must be full rank")
    d = s.shape[0]
    n = n_qubits_for(d)
    kappa = hi / lo
    w = eig.eigenvectors
    o = (w / (kappa * d * eig.eigenvalues)) @ w.conj().T
    rng = as_seeded(rng)
    floor = 2.0**-n / kappa
    coarse = estimate_general(rho_source, o, min(0.5, 0.1 * floor), delta / 2, inner_ensemble, rng.child(0),
                              schedule, fixed).value
    c = n + math.log2(kappa) + math.log2(max(coarse, floor / 2))
    eps_w = min(0.5, math.log(2) * epsilon * 2.0 ** (c - n) / kappa)
    value = estimate_general(rho_source, o, eps_w, delta / 2, inner_ensemble, rng.child(1), schedule, fixed).value
    return n + math.log2(kappa) + math.log2(max(value, floor / 4))
