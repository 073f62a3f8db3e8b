"""Random unitary ensembles, seeded streams and empirical twirling."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .clifford import random_clifford_tableau, tableau_to_unitary
from .constants import MAX_CLIFFORD_QUBITS
from .errors import ValidationError
from .numerics import kron_all, qr_unitary_factor_batch
from .states import n_qubits_for


@dataclass(frozen=True)
class SeededRng:
    """Counter-based stream: (master_seed, stream_index, path) fixes every draw.

    ``child(t, u)`` derives an independent sub-stream so that results do not
    depend on the order in which rounds are executed.
    """

    master_seed: int
    stream_index: int = 0
    path: tuple = ()

    def child(self, *keys: int) -> "SeededRng":
        return SeededRng(self.master_seed, self.stream_index, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,) + self.path)
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise ValidationError(f"unsupported rng {rng!r}")


@dataclass(frozen=True, eq=False)
class UnitaryEnsembleSpec:
    """Which random-unitary family to draw from.

    kind is ``haar`` (dimension ``dim``), ``local_haar`` or ``clifford``
    (``n`` qubits), or ``block_diagonal`` with inner specs for the two
    eigenspaces of ``partition``.
    """

    kind: str
    dim: int
    inner_plus: "UnitaryEnsembleSpec | None" = None
    inner_minus: "UnitaryEnsembleSpec | None" = None
    partition: object = None
    n: int = field(default=0)

    def __post_init__(self):
        if self.kind not in ("haar", "local_haar", "clifford", "block_diagonal"):
            raise ValidationError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "block_diagonal":
            p = self.partition
            dp = self.inner_plus.dim if self.inner_plus is not None else 0
            dm = self.inner_minus.dim if self.inner_minus is not None else 0
            if p is None or dp != p.d_plus or dm != p.d_minus:
                raise ValidationError("inner ensemble dimensions do not match the partition")

    @property
    def finite(self) -> bool:
        if self.kind == "clifford":
            return True
        if self.kind == "block_diagonal":
            return all(s is None or s.finite for s in (self.inner_plus, self.inner_minus))
        return False


def haar(d: int) -> UnitaryEnsembleSpec:
    if d < 1:
        raise ValidationError("Haar dimension must be >= 1")
    return UnitaryEnsembleSpec("haar", d)


def local_haar(n: int) -> UnitaryEnsembleSpec:
    return UnitaryEnsembleSpec("local_haar", 1 << n, n=n)


def clifford(n: int) -> UnitaryEnsembleSpec:
    if not 0 <= n <= MAX_CLIFFORD_QUBITS:
        raise ValidationError(f"Clifford sampling supports 0..{MAX_CLIFFORD_QUBITS} qubits, got {n}")
    return UnitaryEnsembleSpec("clifford", 1 << n, n=n)


def inner_spec(kind: str, dim: int) -> UnitaryEnsembleSpec | None:
    """Ensemble for one eigenspace from a config string ("haar" | "local" | "clifford")."""
    if dim == 0:
        return None
    if kind == "haar":
        return haar(dim)
    if kind in ("local", "local_haar"):
        return local_haar(n_qubits_for(dim))
    if kind == "clifford":
        return clifford(n_qubits_for(dim))
    raise ValidationError(f"unknown inner ensemble {kind!r}")


def block_diagonal(partition, kind_plus: str, kind_minus: str | None = None) -> UnitaryEnsembleSpec:
    return UnitaryEnsembleSpec(
        "block_diagonal",
        partition.d_plus + partition.d_minus,
        inner_spec(kind_plus, partition.d_plus),
        inner_spec(kind_minus or kind_plus, partition.d_minus),
        partition,
    )


def sample_haar_batch(d: int, size: int, rng) -> np.ndarray:
    gen = as_generator(rng)
    g = (gen.standard_normal((size, d, d)) + 1j * gen.standard_normal((size, d, d))) / np.sqrt(2)
    return qr_unitary_factor_batch(g)


def sample_haar(d: int, rng) -> np.ndarray:
    if d < 1:
        raise ValidationError("Haar dimension must be >= 1")
    return sample_haar_batch(d, 1, rng)[0]


def sample_local_haar_factors(n: int, size: int, rng) -> np.ndarray:
    """Array of shape (size, n, 2, 2) of independent single-qubit Haar unitaries."""
    return sample_haar_batch(2, size * n, rng).reshape(size, n, 2, 2)


def sample_local_haar(n: int, rng) -> np.ndarray:
    if n < 1:
        raise ValidationError("local Haar needs n >= 1")
    factors = sample_local_haar_factors(n, 1, rng)[0]
    return kron_all(factors)


# groups up to this size are enumerated once and sampled by index
TABULATED_CLIFFORD_QUBITS = 2


@lru_cache(maxsize=None)
def clifford_group(n: int) -> np.ndarray:
    """Every n-qubit Clifford modulo global phase (24 for n=1, 11520 for n=2), by breadth-first closure."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s = np.diag([1, 1j])
    eye = np.eye(2, dtype=complex)
    gens = []
    for q in range(n):
        for g in (h, s):
            gens.append(kron_all([g if k == q else eye for k in range(n)]))
    for q in range(n - 1):
        d = 1 << n
        cx = np.zeros((d, d), dtype=complex)
        for i in range(d):
            bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
            if bits[q]:
                bits[q + 1] ^= 1
            cx[int("".join(map(str, bits)), 2), i] = 1
        gens.append(cx)
    start = np.eye(1 << n, dtype=complex)
    seen = {_phase_key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                v = g @ u
                k = _phase_key(v)
                if k not in seen:
                    seen[k] = v
                    nxt.append(v)
        frontier = nxt
    out = np.stack(list(seen.values()))
    out.flags.writeable = False
    return out


def sample_clifford(n: int, rng) -> np.ndarray:
    if not 0 <= n <= MAX_CLIFFORD_QUBITS:
        raise ValidationError(f"Clifford sampling supports 0..{MAX_CLIFFORD_QUBITS} qubits, got {n}")
    if n == 0:
        return np.ones((1, 1), dtype=complex)
    gen = as_generator(rng)
    if n <= TABULATED_CLIFFORD_QUBITS:
        group = clifford_group(n)
        return group[gen.integers(len(group))].copy()
    rows, signs = random_clifford_tableau(n, gen)
    return tableau_to_unitary(rows, signs)


def sample_clifford_batch(n: int, size: int, rng) -> np.ndarray:
    gen = as_generator(rng)
    if 1 <= n <= TABULATED_CLIFFORD_QUBITS:
        group = clifford_group(n)
        return group[gen.integers(len(group), size=size)]
    return np.stack([sample_clifford(n, gen) for _ in range(size)])


def _sample_with(spec: UnitaryEnsembleSpec, gen: np.random.Generator) -> np.ndarray:
    if spec.kind == "haar":
        return sample_haar(spec.dim, gen)
    if spec.kind == "local_haar":
        return sample_local_haar(spec.n, gen) if spec.n > 0 else np.ones((1, 1), dtype=complex)
    if spec.kind == "clifford":
        return sample_clifford(spec.n, gen)
    return _sample_block(spec, gen)


def _sample_block(spec: UnitaryEnsembleSpec, gen) -> np.ndarray:
    p = spec.partition
    u = np.zeros((spec.dim, spec.dim), dtype=complex)
    if spec.inner_plus is not None:
        u[np.ix_(p.plus_indices, p.plus_indices)] = _sample_with(spec.inner_plus, gen)
    if spec.inner_minus is not None:
        u[np.ix_(p.minus_indices, p.minus_indices)] = _sample_with(spec.inner_minus, gen)
    return u


def sample_block_diagonal(spec: UnitaryEnsembleSpec, rng) -> np.ndarray:
    """U_+ (+) U_- placed on the partition's index sets."""
    if spec.kind != "block_diagonal":
        raise ValidationError("sample_block_diagonal needs a block_diagonal spec")
    return _sample_block(spec, as_generator(rng))


def sample_unitary(spec: UnitaryEnsembleSpec, rng) -> np.ndarray:
    return _sample_with(spec, as_generator(rng))


def sample_blocks(spec: UnitaryEnsembleSpec, rng) -> tuple:
    """The inner unitaries (U_+, U_-) of a block-diagonal draw, without embedding."""
    gen = as_generator(rng)
    up = _sample_with(spec.inner_plus, gen) if spec.inner_plus is not None else None
    um = _sample_with(spec.inner_minus, gen) if spec.inner_minus is not None else None
    return up, um


def _tensor_power_batch(u: np.ndarray, t: int) -> np.ndarray:
    b, d = u.shape[0], u.shape[1]
    w = u
    for _ in range(t - 1):
        m = w.shape[1]
        w = np.einsum("rab,rcd->racbd", w, u).reshape(b, m * d, m * d)
    return w


def conjugate_tensor_power(u: np.ndarray, x: np.ndarray, t: int) -> np.ndarray:
    """U^{(x)t} X U^{dagger (x)t} by contracting one tensor leg at a time."""
    d = u.shape[0]
    tens = x.reshape((d,) * (2 * t))
    for k in range(t):
        tens = np.moveaxis(np.tensordot(u, tens, axes=(1, k)), 0, k)
    uc = u.conj()
    for k in range(t):
        tens = np.moveaxis(np.tensordot(tens, uc, axes=(t + k, 1)), -1, t + k)
    return tens.reshape(d**t, d**t)


def _phase_key(u: np.ndarray) -> bytes:
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-6))
    v = u * (abs(flat[k]) / flat[k])
    # adding 0.0 folds -0.0 into 0.0 so equal matrices share a key
    return (np.round(v, 8) + 0.0).tobytes()


def empirical_twirl(spec: UnitaryEnsembleSpec, x, t: int, N: int, rng, return_stderr: bool = False):
    """Monte Carlo average of U^{(x)t} X U^{dagger (x)t} over N draws.

    For finite ensembles repeated draws are grouped so each distinct element
    is applied once.  With ``return_stderr`` the entrywise standard errors
    of the real and imaginary parts are returned as well.
    """
    x = np.asarray(x, dtype=complex)
    if t < 1 or t > 4 or N < 1:
        raise ValidationError("need 1 <= t <= 4 and N >= 1")
    if x.shape != (spec.dim**t, spec.dim**t):
        raise ValidationError(f"operator shape {x.shape} does not match d^t = {spec.dim ** t}")
    gen = as_generator(rng)
    groups: dict[bytes, list] = {}
    if spec.finite:
        for _ in range(N):
            u = _sample_with(spec, gen)
            key = _phase_key(u)
            if key in groups:
                groups[key][1] += 1
            else:
                groups[key] = [u, 1]
        items = groups.values()
    else:
        items = ([_sample_with(spec, gen), 1] for _ in range(N))
    s1 = np.zeros_like(x)
    s2r = np.zeros(x.shape)
    s2i = np.zeros(x.shape)
    if spec.kind == "haar":
        items = ()
        chunk = max(1, (1 << 22) // x.size)
        for lo in range(0, N, chunk):
            w = _tensor_power_batch(sample_haar_batch(spec.dim, min(chunk, N - lo), gen), t)
            y = w @ x @ np.conj(np.swapaxes(w, 1, 2))
            s1 += y.sum(axis=0)
            if return_stderr:
                s2r += np.sum(y.real**2, axis=0)
                s2i += np.sum(y.imag**2, axis=0)
    for u, c in items:
        y = conjugate_tensor_power(u, x, t)
        s1 += c * y
        if return_stderr:
            s2r += c * y.real**2
            s2i += c * y.imag**2
    mean = s1 / N
    if not return_stderr:
        return mean
    denom = max(N - 1, 1)
    var_r = np.clip(s2r / N - mean.real**2, 0, None) * N / denom
    var_i = np.clip(s2i / N - mean.imag**2, 0, None) * N / denom
    return mean, np.sqrt(var_r / N), np.sqrt(var_i / N)
