"""Experiment configuration: a flat dataclass validated strictly from JSON."""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ValidationError

COMMANDS = ("estimate", "cool", "sweep", "verify")
PROTOCOLS = ("gorm", "lorm", "clifford-orm", "pauli-sampling", "brm", "gcs", "lcs")
STATE_KINDS = ("basis", "maximally_mixed", "gibbs", "random", "product")
SWEEP_PROTOCOLS = ("gorm", "lorm", "gcs", "lcs")


class ConfigError(ValidationError):
    """Schema violation; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    command: str
    seed: int = 0
    n_qubits: int | None = None
    protocol: str | None = None
    T: int | None = None
    N_U: int | None = None
    N_M: int | None = None
    N_s: int | None = None
    epsilon: float | None = None
    delta: float | None = None
    levels: int = 8
    runs: int = 1
    state: dict | None = None
    observable: dict | None = None
    observables: list | None = None
    output: str | None = None
    threads: int = 1
    # cool
    beta_multiples: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    # sweep
    L_range: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    protocols: list = field(default_factory=lambda: list(SWEEP_PROTOCOLS))
    beta_multiple: float = 8.0
    experiments: int = 100
    mse_target: float = 0.01
    N_U_grid: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    max_N_M: int = 8192
    max_N_s: int = 1 << 16
    # verify
    checks: list | None = None
    canary: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


_INT = {"seed", "n_qubits", "T", "N_U", "N_M", "N_s", "levels", "runs", "threads", "experiments", "max_N_M",
        "max_N_s"}
_FLOAT = {"epsilon", "delta", "beta_multiple", "mse_target"}
_LIST = {"beta_multiples", "L_range", "protocols", "N_U_grid", "observables", "checks"}
_DICT = {"state", "observable"}
_STR = {"command", "protocol", "output"}


def _check_type(name, value):
    if value is None:
        return
    if name in _INT and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(name, f"expected integer, got {value!r}")
    if name in _FLOAT and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(name, f"expected number, got {value!r}")
    if name in _LIST and not isinstance(value, list):
        raise ConfigError(name, f"expected list, got {value!r}")
    if name in _DICT and not isinstance(value, dict):
        raise ConfigError(name, f"expected object, got {value!r}")
    if name in _STR and not isinstance(value, str):
        raise ConfigError(name, f"expected string, got {value!r}")
    if name == "canary" and not isinstance(value, bool):
        raise ConfigError(name, f"expected boolean, got {value!r}")


def _positive(cfg, *names):
    for n in names:
        v = getattr(cfg, n)
        if v is not None and v < 1:
            raise ConfigError(n, "must be >= 1")


def _check_state(spec: dict):
    kind = spec.get("kind")
    if kind not in STATE_KINDS:
        raise ConfigError("state.kind", f"must be one of {STATE_KINDS}, got {kind!r}")
    allowed = {"basis": {"kind", "index"}, "maximally_mixed": {"kind"},
               "gibbs": {"kind", "beta_multiple", "J0", "alpha", "Bz"},
               "random": {"kind", "rank", "seed"}, "product": {"kind", "qubits"}}[kind]
    extra = set(spec) - allowed
    if extra:
        raise ConfigError("state", f"unknown keys {sorted(extra)} for kind {kind!r}")
    if kind == "product":
        q = spec.get("qubits")
        if not isinstance(q, str) or not q or set(q) - set("01+-m"):
            raise ConfigError("state.qubits", "string over {0,1,+,-,m} required")


def _check_observable(spec: dict, name: str):
    allowed = {"pauli", "projector", "random_projector"}
    extra = set(spec) - allowed
    if extra:
        raise ConfigError(name, f"unknown keys {sorted(extra)}")
    if len(spec) != 1:
        raise ConfigError(name, "exactly one of 'pauli', 'projector', 'random_projector' required")
    if "pauli" in spec:
        terms = spec["pauli"]
        if not isinstance(terms, dict) or not terms:
            raise ConfigError(f"{name}.pauli", "non-empty object label -> coefficient required")
        for lab, c in terms.items():
            if isinstance(c, bool) or not isinstance(c, (int, float)):
                raise ConfigError(f"{name}.pauli.{lab}", "coefficient must be a number")
    elif "projector" in spec:
        if isinstance(spec["projector"], bool) or not isinstance(spec["projector"], int):
            raise ConfigError(f"{name}.projector", "basis index required")
    elif isinstance(spec["random_projector"], bool) or not isinstance(spec["random_projector"], int):
        raise ConfigError(f"{name}.random_projector", "integer seed required")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    for f in fields(cfg):
        _check_type(f.name, getattr(cfg, f.name))
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"must be one of {COMMANDS}, got {cfg.command!r}")
    if not 0 <= cfg.seed < 1 << 64:
        raise ConfigError("seed", "must fit in 64 bits")
    _positive(cfg, "n_qubits", "T", "N_U", "N_M", "N_s", "levels", "runs", "threads", "experiments")
    if cfg.state is not None:
        _check_state(cfg.state)
    if cfg.observable is not None:
        _check_observable(cfg.observable, "observable")
    for i, o in enumerate(cfg.observables or []):
        if not isinstance(o, dict):
            raise ConfigError(f"observables[{i}]", "expected object")
        _check_observable(o, f"observables[{i}]")
    if cfg.command == "estimate":
        _validate_estimate(cfg)
    elif cfg.command == "sweep":
        bad = [p for p in cfg.protocols if p not in SWEEP_PROTOCOLS]
        if bad:
            raise ConfigError("protocols", f"unsupported {bad}; choose from {SWEEP_PROTOCOLS}")
        if any(isinstance(x, bool) or not isinstance(x, int) or x < 2 for x in cfg.L_range):
            raise ConfigError("L_range", "integers >= 2 required")
        if any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in cfg.N_U_grid):
            raise ConfigError("N_U_grid", "positive integers required")
    elif cfg.command == "cool":
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) or x < 0 for x in cfg.beta_multiples):
            raise ConfigError("beta_multiples", "non-negative numbers required")
        if cfg.N_U is None:
            cfg.N_U = 10
        if cfg.N_M is None:
            cfg.N_M = 1000
        if cfg.n_qubits is None:
            cfg.n_qubits = 6
        if cfg.runs == 1:
            cfg.runs = 10
    return cfg


def _validate_estimate(cfg: ExperimentConfig):
    if cfg.protocol not in PROTOCOLS:
        raise ConfigError("protocol", f"must be one of {PROTOCOLS}, got {cfg.protocol!r}")
    if cfg.n_qubits is None:
        raise ConfigError("n_qubits", "required for estimate")
    if cfg.state is None:
        raise ConfigError("state", "required for estimate")
    triple = [cfg.T, cfg.N_U, cfg.N_M]
    pair = [cfg.epsilon, cfg.delta]
    has_triple = all(v is not None for v in triple)
    has_pair = all(v is not None for v in pair)
    if cfg.protocol in ("gcs", "lcs"):
        if cfg.N_s is None:
            raise ConfigError("N_s", "required for shadow protocols")
        return
    if any(v is not None for v in triple) and not has_triple:
        raise ConfigError("T/N_U/N_M", "supply all three or none")
    if any(v is not None for v in pair) and not has_pair:
        raise ConfigError("epsilon/delta", "supply both or neither")
    if has_triple == has_pair:
        raise ConfigError("T/N_U/N_M|epsilon/delta", "exactly one of (T, N_U, N_M) or (epsilon, delta) required")
    if has_pair and not (0 < cfg.epsilon < 1 and 0 < cfg.delta < 1):
        raise ConfigError("epsilon/delta", "must lie in (0, 1)")
    if cfg.protocol == "brm":
        if not cfg.observables:
            raise ConfigError("observables", "brm needs a non-empty observable list")
        if not has_triple:
            raise ConfigError("T/N_U/N_M", "brm needs an explicit schedule")
    elif cfg.observable is None:
        raise ConfigError("observable", "required for estimate")
    if cfg.protocol == "pauli-sampling" and not has_pair:
        raise ConfigError("epsilon/delta", "pauli-sampling needs (epsilon, delta)")


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if "command" not in data:
        raise ConfigError("command", "required")
    for name, value in data.items():
        _check_type(name, value)
    return validate(ExperimentConfig(**data))


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", str(exc)) from exc
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from exc
    if isinstance(data, dict):
        data.setdefault("command", overrides.pop("command", None))
        data.update({k: v for k, v in overrides.items() if v is not None})
    return from_dict(data)
