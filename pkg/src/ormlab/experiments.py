"""Experiment drivers behind the command line: estimate, cool, sweep and verify."""

import csv
import hashlib
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimators as est
from . import oracle
from .config import ExperimentConfig
from .constants import MAX_DENSE_QUBITS
from .ensembles import SeededRng, empirical_twirl, haar as haar_spec
from .errors import ValidationError
from .partition import identity_partition
from .states import (DensityMatrix, Observable, basis_state, gibbs_state, heisenberg_xx, maximally_mixed,
                     observable_from_terms, product_state, random_density_matrix)

ORM_INNER = {"gorm": "haar", "lorm": "local", "clifford-orm": "clifford"}
SHADOW_ENSEMBLE = {"gcs": "haar", "lcs": "local"}
_QUBIT_STATES = {
    "0": np.diag([1.0, 0.0]), "1": np.diag([0.0, 1.0]), "m": np.eye(2) / 2,
    "+": np.full((2, 2), 0.5), "-": np.array([[0.5, -0.5], [-0.5, 0.5]]),
}


def beta0(J0: float = 420.0) -> float:
    """Reference inverse temperature 1 / (200 J0)."""
    return 1.0 / (200.0 * J0)


def build_state(spec: dict, n: int) -> DensityMatrix:
    kind = spec["kind"]
    if kind == "basis":
        return basis_state(int(spec.get("index", 0)), n)
    if kind == "maximally_mixed":
        return maximally_mixed(n)
    if kind == "random":
        gen = np.random.default_rng(int(spec.get("seed", 0)))
        return random_density_matrix(n, gen, spec.get("rank"))
    if kind == "product":
        q = spec["qubits"]
        if len(q) != n:
            raise ValidationError(f"product state has {len(q)} qubits, expected {n}")
        return product_state([_QUBIT_STATES[c] for c in q])
    J0 = float(spec.get("J0", 420.0))
    h = heisenberg_xx(n, J0, float(spec.get("alpha", 1.24)), float(spec.get("Bz", 50.0)))
    return gibbs_state(h, float(spec.get("beta_multiple", 1.0)) * beta0(J0))


def build_observable(spec: dict, n: int) -> Observable:
    d = 1 << n
    if "pauli" in spec:
        terms = [(lab, float(c)) for lab, c in spec["pauli"].items()]
        if any(len(lab.lstrip("+-")) != n for lab, _ in terms):
            raise ValidationError(f"Pauli labels must have {n} letters")
        return observable_from_terms(terms, n)
    if "projector" in spec:
        k = spec["projector"]
        if not 0 <= k < d:
            raise ValidationError(f"projector index {k} out of range")
        m = np.zeros((d, d), dtype=complex)
        m[k, k] = 1.0
        return Observable(m, "dense")
    gen = np.random.default_rng(spec["random_projector"])
    v = gen.standard_normal(d) + 1j * gen.standard_normal(d)
    v /= np.linalg.norm(v)
    return Observable(np.outer(v, v.conj()), "dense")


def build_id() -> str:
    """Content hash of the package sources, stable across machines."""
    h = hashlib.sha1()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    from . import __version__
    return f"{__version__}+g{h.hexdigest()[:12]}"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r[h]) for h in header])
    return buf.getvalue()


def pool_map(fn, items, threads: int):
    """Map preserving input order; a process pool when threads > 1."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


@dataclass
class RunResult:
    header: list
    rows: list
    raw: dict = field(default_factory=dict)
    ok: bool = True


def _stderr(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    return float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")


def _is_dichotomic(o: Observable) -> bool:
    lam = np.linalg.eigvalsh(o.matrix)
    return bool(np.all(np.abs(np.abs(lam) - 1.0) < 1e-8))


# ---------------------------------------------------------------- estimate

ESTIMATE_HEADER = ["experiment_id", "protocol", "n_qubits", "observable", "T", "N_U", "N_M", "N_s", "epsilon",
                   "delta", "runs", "estimate", "stderr", "exact", "copies"]


def _one_estimate(cfg: ExperimentConfig, rho, obs, run: int):
    rng = SeededRng(cfg.seed, run)
    p = cfg.protocol
    if p in ORM_INNER:
        inner = ORM_INNER[p]
        if cfg.T is not None and _is_dichotomic(obs):
            rep = est.estimate_dichotomic(rho, obs, cfg.T, cfg.N_U, cfg.N_M, inner, rng)
        elif cfg.T is not None:
            eps = 2.0 ** -(cfg.levels - 1)
            rep = est.estimate_general(rho, obs, eps, 0.5, inner, rng, fixed=(cfg.T, cfg.N_U, cfg.N_M))
        else:
            rep = est.estimate_general(rho, obs, cfg.epsilon, cfg.delta, inner, rng)
        return [rep]
    if p == "pauli-sampling":
        return [est.estimate_pauli_sampling(rho, obs, cfg.epsilon, cfg.delta, rng, T=cfg.T, N_M=cfg.N_M, N_U=cfg.N_U)]
    if p in SHADOW_ENSEMBLE:
        return [est.classical_shadow_estimate(rho, obs, cfg.N_s, SHADOW_ENSEMBLE[p], rng, "split", cfg.T or 1)]
    records = est.collect_records(rho, cfg.T, cfg.N_U, cfg.N_M, "haar", rng)
    return est.estimate_brm(records, obs, cfg.T, cfg.N_U, cfg.N_M)


def run_estimate(cfg: ExperimentConfig) -> RunResult:
    n = cfg.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValidationError(f"n_qubits {n} exceeds {MAX_DENSE_QUBITS}")
    rho = build_state(cfg.state, n)
    if cfg.protocol == "brm":
        specs = cfg.observables
        obs = [build_observable(o, n) for o in specs]
    else:
        specs = [cfg.observable]
        obs = build_observable(cfg.observable, n)
    runs = pool_map(_EstimateTask(cfg, rho, obs), range(cfg.runs), cfg.threads)
    obs_list = obs if isinstance(obs, list) else [obs]
    rows, raw = [], {}
    for i, (spec, o) in enumerate(zip(specs, obs_list)):
        reps = [r[i] for r in runs]
        vals = np.array([r.value for r in reps])
        if len(reps) > 1:
            se = _stderr(vals)
        elif reps[0].per_repetition_values.size > 1:
            se = _stderr(reps[0].per_repetition_values)
        elif reps[0].round_values is not None:
            se = _stderr(reps[0].round_values)
        else:
            se = float("nan")
        rows.append({
            "experiment_id": f"{cfg.protocol}-{i}", "protocol": cfg.protocol, "n_qubits": n,
            "observable": _obs_label(spec), "T": cfg.T, "N_U": cfg.N_U, "N_M": cfg.N_M, "N_s": cfg.N_s,
            "epsilon": cfg.epsilon, "delta": cfg.delta, "runs": cfg.runs, "estimate": float(vals.mean()),
            "stderr": se, "exact": oracle.exact_nonlinear(o, rho), "copies": int(sum(r.total_state_copies for r in reps)),
        })
        raw[f"{cfg.protocol}-{i}"] = {
            "run_values": vals.tolist(),
            "per_repetition_values": [np.asarray(r.per_repetition_values).tolist() for r in reps],
            "config": [_jsonable(r.config) for r in reps],
        }
    return RunResult(ESTIMATE_HEADER, rows, raw)


@dataclass
class _EstimateTask:
    cfg: ExperimentConfig
    rho: DensityMatrix
    obs: object

    def __call__(self, run):
        return _one_estimate(self.cfg, self.rho, self.obs, run)


def _obs_label(spec: dict) -> str:
    if "pauli" in spec:
        return " ".join(f"{c:+g}*{lab}" for lab, c in spec["pauli"].items())
    if "projector" in spec:
        return f"|{spec['projector']}><{spec['projector']}|"
    return f"random_projector({spec['random_projector']})"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# ---------------------------------------------------------------- cool

COOL_HEADER = ["beta_multiple", "protocol", "estimate_mean", "estimate_stderr", "exact_original", "exact_cooled"]


def z1z2(n: int) -> Observable:
    return observable_from_terms([("ZZ" + "I" * (n - 2), 1.0)], n)


def cooling_ratio(rho, n: int, protocol: str, N_U: int, N_M: int, rng: SeededRng) -> tuple[float, int]:
    """Estimate Tr(Z1 Z2 rho^2) / Tr(rho^2) from two independent ORM batches."""
    inner = ORM_INNER[protocol]
    num = est.estimate_dichotomic(rho, z1z2(n), 1, N_U, N_M, inner, rng.child(0))
    den = est.estimate_purity(rho, 1, N_U, N_M, inner, rng.child(1))
    copies = num.total_state_copies + den.total_state_copies
    if den.value == 0.0:
        # only reachable with tiny budgets; the run is excluded from the mean
        return float("nan"), copies
    return num.value / den.value, copies


@dataclass
class _CoolTask:
    cfg: ExperimentConfig

    def __call__(self, key):
        bi, pi = key
        cfg = self.cfg
        n = cfg.n_qubits
        bm = float(cfg.beta_multiples[bi])
        protocol = ("gorm", "lorm")[pi]
        h = heisenberg_xx(n)
        rho = gibbs_state(h, bm * beta0())
        rng = SeededRng(cfg.seed, bi * 2 + pi)
        vals = [cooling_ratio(rho, n, protocol, cfg.N_U, cfg.N_M, rng.child(r))[0] for r in range(cfg.runs)]
        o = z1z2(n)
        finite = np.asarray(vals)[np.isfinite(vals)]
        return {
            "beta_multiple": bm, "protocol": protocol, "estimate_mean": float(np.mean(finite)) if finite.size else float("nan"),
            "estimate_stderr": _stderr(finite), "exact_original": float(np.real(np.trace(o.matrix @ rho.matrix))),
            "exact_cooled": float(np.real(np.trace(o.matrix @ gibbs_state(h, 2 * bm * beta0()).matrix))),
            "_raw": vals,
        }


def run_cool(cfg: ExperimentConfig) -> RunResult:
    keys = [(bi, pi) for bi in range(len(cfg.beta_multiples)) for pi in range(2)]
    out = pool_map(_CoolTask(cfg), keys, cfg.threads)
    out.sort(key=lambda r: (r["beta_multiple"], r["protocol"]))
    raw = {f"{r['protocol']}@{fmt(r['beta_multiple'])}": r.pop("_raw") for r in out}
    return RunResult(COOL_HEADER, out, raw)


# ---------------------------------------------------------------- sweep

SWEEP_HEADER = ["L", "protocol", "copies", "achieved_mse"]


def orm_mse(rho, partition, target: float, inner: str, N_U: int, N_M: int, experiments: int,
            rng: SeededRng) -> float:
    # one repetition per experiment: each repetition mean is an independent N_U-round estimate
    rep = est.estimate_dichotomic(rho, partition, experiments, N_U, N_M, inner, rng)
    return float(np.mean(np.square(rep.per_repetition_values - target)))


def shadow_mse(rho, obs, target: float, ensemble: str, N_s: int, experiments: int, rng: SeededRng) -> float:
    errs = [est.classical_shadow_estimate(rho, obs, N_s, ensemble, rng.child(e), "split").value - target
            for e in range(experiments)]
    return float(np.mean(np.square(errs)))


def minimal_passing(mse_of, lo_fail: int, start: int, cap: int, stop_at=None):
    """Smallest integer x >= start with mse_of(x) <= 0 found by doubling then bisection.

    ``mse_of`` returns (passes, mse). ``stop_at`` aborts once x reaches it.
    Returns (x, mse) or None.
    """
    x = start
    cache = {}

    def check(v):
        if v not in cache:
            cache[v] = mse_of(v)
        return cache[v]

    while True:
        if x > cap or (stop_at is not None and x >= stop_at):
            return None
        ok, _ = check(x)
        if ok:
            break
        lo_fail = x
        x *= 2
    hi = x
    while hi - lo_fail > 1:
        mid = (hi + lo_fail) // 2
        if check(mid)[0]:
            hi = mid
        else:
            lo_fail = mid
    return hi, check(hi)[1]


def sweep_point(cfg: ExperimentConfig, L: int, protocol: str, stream: int) -> dict:
    h = heisenberg_xx(L)
    rho = gibbs_state(h, cfg.beta_multiple * beta0())
    obs = z1z2(L)
    target = oracle.exact_nonlinear(obs, rho)
    rng = SeededRng(cfg.seed, stream)
    tol = cfg.mse_target
    if protocol in SHADOW_ENSEMBLE:
        ens = SHADOW_ENSEMBLE[protocol]

        def f(ns):
            m = shadow_mse(rho, obs, target, ens, ns, cfg.experiments, rng)
            return m <= tol, m

        found = minimal_passing(f, 0, 1, cfg.max_N_s)
        if found is None:
            return {"L": L, "protocol": protocol, "copies": None, "achieved_mse": None, "budget_exceeded": True}
        ns, m = found
        return {"L": L, "protocol": protocol, "copies": math.ceil(math.sqrt(2) * ns), "achieved_mse": m,
                "N_s": ns, "budget_exceeded": False}
    inner = ORM_INNER[protocol]
    part = est.observable_partition(obs)
    best = None
    for N_U in sorted(cfg.N_U_grid):
        if best is not None and 2 * N_U >= best["copies"]:
            break

        def f(nm, N_U=N_U):
            m = orm_mse(rho, part, target, inner, N_U, nm, cfg.experiments, rng.child(N_U))
            return m <= tol, m

        stop = None if best is None else -(-best["copies"] // N_U)
        found = minimal_passing(f, 1, 2, cfg.max_N_M, stop)
        if found is not None:
            nm, m = found
            if best is None or N_U * nm < best["copies"]:
                best = {"L": L, "protocol": protocol, "copies": N_U * nm, "achieved_mse": m, "N_U": N_U, "N_M": nm}
    if best is None:
        return {"L": L, "protocol": protocol, "copies": None, "achieved_mse": None, "budget_exceeded": True}
    best["budget_exceeded"] = False
    return best


@dataclass
class _SweepTask:
    cfg: ExperimentConfig

    def __call__(self, key):
        L, protocol, stream = key
        return sweep_point(self.cfg, L, protocol, stream)


def run_sweep(cfg: ExperimentConfig) -> RunResult:
    keys = [(L, p, i * len(cfg.protocols) + j) for i, L in enumerate(cfg.L_range) for j, p in enumerate(cfg.protocols)]
    out = pool_map(_SweepTask(cfg), keys, cfg.threads)
    order = {p: i for i, p in enumerate(cfg.protocols)}
    out.sort(key=lambda r: (r["L"], order[r["protocol"]]))
    rows = [r for r in out if not r["budget_exceeded"]]
    raw = {"points": out, "budget_exceeded": [f"{r['L']}:{r['protocol']}" for r in out if r["budget_exceeded"]]}
    return RunResult(SWEEP_HEADER, rows, raw)


# ---------------------------------------------------------------- verify

VERIFY_HEADER = ["check", "status", "statistic", "threshold", "mc_sigma"]


def _row(name, passed, stat, thr, sigma=None):
    return {"check": name, "status": "pass" if passed else "fail", "statistic": float(stat),
            "threshold": float(thr), "mc_sigma": None if sigma is None else float(sigma)}


def _check_twirls(rng):
    from .oracle import PermutationSpec, analytic_twirl, permutation_operator, x2_operator, x3_operator
    rows = []
    for d in (2, 4):
        err = np.max(np.abs(analytic_twirl(x2_operator(d), d, 2) - permutation_operator(PermutationSpec((1, 0)), d)))
        rows.append(_row(f"twirl_x2_d{d}", err <= 1e-10, err, 1e-10))
    target = 0.5 * (permutation_operator(PermutationSpec((1, 2, 0)), 2) + permutation_operator(PermutationSpec((2, 0, 1)), 2))
    err = np.max(np.abs(analytic_twirl(x3_operator(2), 2, 3) - target))
    rows.append(_row("twirl_x3_d2", err <= 1e-10, err, 1e-10))
    x = x2_operator(2)
    mean, se_r, se_i = empirical_twirl(haar_spec(2), x, 2, 20000, rng.child(0), return_stderr=True)
    exact = analytic_twirl(x, 2, 2)
    z = np.max(np.abs(mean.real - exact.real) / np.maximum(se_r, 1e-12))
    rows.append(_row("empirical_twirl_haar_t2", z <= 5, z, 5))
    return rows


def _check_weingarten():
    worst = 0.0
    for t, d in ((2, 2), (3, 3), (3, 4)):
        perms = oracle.all_permutations(t)
        g = np.array([[float(d) ** len(p.inverse().compose(s).cycles()) for s in perms] for p in perms])
        wg = np.array([[oracle.weingarten(p.inverse().compose(s), d, t) for s in perms] for p in perms])
        worst = max(worst, np.max(np.abs(wg @ g - np.eye(len(perms)))))
    return [_row("weingarten_gram_inverse", worst <= 1e-10, worst, 1e-10)]


def _check_states(gen):
    rows = []
    worst = -np.inf
    for n in (2, 3):
        for _ in range(10):
            rho = random_density_matrix(n, gen).matrix
            d = rho.shape[0]
            worst = max(worst, max(oracle.q_lambda(rho, lam) for lam in oracle.S4_CLASSES) - 1 / d)
    rows.append(_row("q_lambda_bound", worst <= 1e-10, worst, 1e-10))
    rho = random_density_matrix(3, gen)
    o = observable_from_terms([("ZIX", 1.0)], 3)
    part = est.observable_partition(o)
    bp, bm = oracle.block_purities(rho, part)
    err = abs(bp - bm - oracle.exact_nonlinear(o, rho))
    rows.append(_row("block_purity_difference", err <= 1e-10, err, 1e-10))
    h = heisenberg_xx(4)
    r1, r2 = gibbs_state(h, 3 * beta0()), gibbs_state(h, 6 * beta0())
    o = z1z2(4)
    err = abs(oracle.exact_nonlinear(o, r1) / oracle.exact_moments(r1, 2) - np.trace(o.matrix @ r2.matrix).real)
    rows.append(_row("virtual_cooling_identity", err <= 1e-9, err, 1e-9))
    return rows


def _unbiased(name, rho, partition, inner, rounds, N_M, rng):
    rep = est.estimate_dichotomic(rho, partition, 1, rounds, N_M, inner, rng)
    vals = rep.round_values.ravel()
    exact_val = oracle.exact_nonlinear(partition.observable_matrix(), rho)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    z = abs(vals.mean() - exact_val) / se
    return _row(name, z <= 5, z, 5, se)


def _check_unbiased(gen, rng):
    rho = random_density_matrix(2, gen)
    rows = [_unbiased("unbiased_purity_haar", rho, identity_partition(4), "haar", 4000, 6, rng.child(1))]
    part = est.observable_partition(observable_from_terms([("ZZ", 1.0)], 2))
    rows.append(_unbiased("unbiased_dichotomic_haar", rho, part, "haar", 4000, 6, rng.child(2)))
    rho3 = random_density_matrix(3, gen)
    part3 = est.observable_partition(observable_from_terms([("XIZ", 1.0)], 3))
    rows.append(_unbiased("unbiased_dichotomic_clifford", rho3, part3, "clifford", 3000, 6, rng.child(3)))
    return rows


def variance_check(name, rho, partition, inner, N_M, rounds, rng, predicted):
    rep = est.estimate_dichotomic(rho, partition, 1, rounds, N_M, inner, rng)
    v = rep.round_values.ravel()
    c = v - v.mean()
    var = float(c.var(ddof=1))
    sigma = math.sqrt(max(np.mean(c**4) - var**2, 0.0) / v.size)
    z = abs(var - predicted) / sigma
    return _row(name, z <= 5, z, 5, sigma)


def _check_variance(gen, rng):
    rho = random_density_matrix(2, gen)
    part = est.observable_partition(observable_from_terms([("ZI", 1.0)], 2))
    pred = oracle.analytic_variance_haar(rho, part, 6).value
    return [variance_check("variance_haar_n2", rho, part, "haar", 6, 20000, rng.child(4), pred)]


def _check_decompositions(gen):
    worst_rec, worst_res = 0.0, 0.0
    for _ in range(10):
        a = gen.standard_normal((8, 8)) + 1j * gen.standard_normal((8, 8))
        m = a + a.conj().T
        m /= np.max(np.abs(np.linalg.eigvalsh(m)))
        dec = est.binary_decompose(m, 6)
        rec = sum(2.0**-l * c.matrix for l, c in enumerate(dec.components, 1)) + dec.residual
        worst_rec = max(worst_rec, np.max(np.abs(rec - m)))
        worst_res = max(worst_res, dec.residual_norm * 2**6)
    rows = [_row("binary_decompose_reconstruction", worst_rec <= 1e-9, worst_rec, 1e-9),
            _row("binary_decompose_residual", worst_res <= 1 + 1e-9, worst_res, 1 + 1e-9)]
    d = 16
    diag = np.ones(d)
    diag[:2] = -1
    sign, o1, o2, o3 = est.balanced_split(np.diag(diag).astype(complex))
    err = np.max(np.abs(0.5 * (sign * np.eye(d) + o1.matrix + o2.matrix + o3.matrix) - np.diag(diag)))
    rows.append(_row("balanced_split_reconstruction", err <= 1e-9, err, 1e-9))
    return rows


def _check_median_of_means(gen):
    delta = 0.1
    T = math.ceil(8 * math.log(1 / delta))
    eps = 0.1
    trials = 2000
    samples = gen.normal(0.0, eps / 2, size=(trials, T))
    fails = np.mean(np.abs(np.median(samples, axis=1)) > eps)
    return [_row("median_of_means_failure_rate", fails <= delta, fails, delta)]


class corrupted_x2:
    """Context manager replacing the block pair sum with a wrong coefficient (mutation canary)."""

    def __enter__(self):
        self._orig = est.block_pair_sum

        def wrong(c, local=False):
            c = np.asarray(c, dtype=float)
            n_l = c.sum(axis=-1)
            return (c.shape[-1] + 2) * np.sum(c * (c - 1), axis=-1) / 2 - n_l * (n_l - 1) / 2

        est.block_pair_sum = wrong
        return self

    def __exit__(self, *exc):
        est.block_pair_sum = self._orig
        return False


def _check_canary(gen, rng):
    rho = random_density_matrix(2, gen)
    with corrupted_x2():
        r = _unbiased("canary", rho, identity_partition(4), "haar", 4000, 6, rng.child(9))
    detected = r["status"] == "fail"
    return [_row("mutation_canary_detected", detected, r["statistic"], 5)]


VERIFY_CHECKS = {
    "twirl": lambda g, r: _check_twirls(r),
    "weingarten": lambda g, r: _check_weingarten(),
    "states": lambda g, r: _check_states(g),
    "unbiased": _check_unbiased,
    "variance": _check_variance,
    "decomposition": lambda g, r: _check_decompositions(g),
    "median_of_means": lambda g, r: _check_median_of_means(g),
}


def run_verify(cfg: ExperimentConfig) -> RunResult:
    names = cfg.checks or list(VERIFY_CHECKS)
    unknown = [n for n in names if n not in VERIFY_CHECKS]
    if unknown:
        raise ValidationError(f"unknown checks {unknown}; choose from {sorted(VERIFY_CHECKS)}")
    rows = []
    for i, name in enumerate(names):
        rows += VERIFY_CHECKS[name](np.random.default_rng([cfg.seed, i]), SeededRng(cfg.seed, i))
    if cfg.canary:
        rows += _check_canary(np.random.default_rng([cfg.seed, 99]), SeededRng(cfg.seed, 99))
    ok = all(r["status"] == "pass" for r in rows)
    return RunResult(VERIFY_HEADER, rows, {"checks": rows}, ok)


COMMAND_RUNNERS = {"estimate": run_estimate, "cool": run_cool, "sweep": run_sweep, "verify": run_verify}


def execute(cfg: ExperimentConfig) -> tuple[RunResult, float]:
    start = time.perf_counter()
    res = COMMAND_RUNNERS[cfg.command](cfg)
    return res, time.perf_counter() - start
