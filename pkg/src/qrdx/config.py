"""Pipeline configuration: dataclasses, TOML loading, and validation.

The defaults encode the benchmark protocol: 16 latent features on 8 qubits,
a five-point C grid, 600 kernel-training events scored on 3600 held-out
events split into five subsets. Anything in the file that is not a known
section or key raises ConfigError rather than being ignored.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError

CLASSICAL_METHODS = ("pca", "ica", "lle", "se", "nmf", "rbm")
NEURAL_METHODS = ("vanilla", "vae", "classifier-bce", "classifier-mse",
                  "sinkhorn", "sinkclass-bce", "sinkclass-mse")
ALL_METHODS = CLASSICAL_METHODS + NEURAL_METHODS

DEFAULT_BENCHMARK = ("pca", "ica", "lle", "se", "nmf", "rbm",
                     "vanilla", "vae", "classifier-bce", "sinkhorn", "sinkclass-bce")


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synthetic"          # "synthetic" or a matrix file path
    synthetic_samples: int = 4000
    synthetic_hardness: float = 0.0
    fractions: tuple = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class ReducerConfig:
    method: str = "pca"
    latent_dim: int = 16
    optimise: str = "bce"              # weight operating point where applicable
    max_epochs: int = 100
    patience: int = 10
    batch_size: int | None = None      # None keeps the architecture default
    learning_rate: float | None = None
    n_neighbors: int | None = None     # locally linear / spectral override
    rbm_epochs: int = 10
    rbm_batch_size: int = 100
    rbm_learning_rate: float = 0.05
    nmf_l1_strength: float = 1e-4
    nmf_max_iter: int = 500


@dataclass(frozen=True)
class CircuitConfig:
    n_qubits: int = 8
    angle_scale: float = math.pi
    permutation_shift: int = 1
    shots: int = 0                     # 0 = exact overlaps


@dataclass(frozen=True)
class SvmConfig:
    c_grid: tuple = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
    tolerance: float = 1e-3
    max_passes: int = 10_000


@dataclass(frozen=True)
class EvalConfig:
    qsvm_train: int = 600              # kernel-classifier training events
    qsvm_val: int = 600                # events scored for the C grid search
    qsvm_test: int = 3600              # events scored for the reported AUC
    n_subsets: int = 5
    source: str = "test"               # split that feeds the kernel classifier


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    figures: bool = True
    cache: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 42
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    reducer: ReducerConfig = field(default_factory=ReducerConfig)
    circuit: CircuitConfig = field(default_factory=CircuitConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    benchmark_methods: tuple = DEFAULT_BENCHMARK


_SECTIONS = {
    "dataset": DatasetConfig,
    "reducer": ReducerConfig,
    "circuit": CircuitConfig,
    "svm": SvmConfig,
    "eval": EvalConfig,
    "output": OutputConfig,
}


# field annotations are strings here; optional fields also accept their base type
_SCALAR_TYPES = {
    "int": (int,), "int | None": (int,),
    "float": (int, float), "float | None": (int, float),
    "str": (str,), "bool": (bool,),
}


def _check_scalar(section: str, key: str, value, annotation: str) -> None:
    expected = _SCALAR_TYPES.get(annotation)
    if expected is None:
        return  # tuples: leave to the dataclass
    # bool is an int subclass; reject it for numeric fields explicitly
    if (isinstance(value, bool) and annotation != "bool") or not isinstance(value, expected):
        raise ConfigError(
            f"'{section}.{key}' must be {annotation}, got {type(value).__name__}")


def _build_section(cls, raw: dict, section: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"unknown key '{section}.{key}'")
        if isinstance(value, list):
            value = tuple(value)
        else:
            _check_scalar(section, key, value, fields[key].type)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{section}] section: {exc}") from None


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build and validate a PipelineConfig from a parsed TOML mapping."""
    raw = dict(raw)
    kwargs = {}
    if "seed" in raw:
        _check_scalar("top level", "seed", raw["seed"], "int")
        kwargs["seed"] = raw.pop("seed")
    if "benchmark_methods" in raw:
        kwargs["benchmark_methods"] = tuple(raw.pop("benchmark_methods"))
    for section, cls in _SECTIONS.items():
        if section in raw:
            body = raw.pop(section)
            if not isinstance(body, dict):
                raise ConfigError(f"[{section}] must be a table")
            kwargs[section] = _build_section(cls, body, section)
    if raw:
        raise ConfigError(f"unknown top-level keys: {sorted(raw)}")
    cfg = PipelineConfig(**kwargs)
    validate_config(cfg)
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)


def validate_config(cfg: PipelineConfig) -> None:
    ds, rd, qc, sv, ev = cfg.dataset, cfg.reducer, cfg.circuit, cfg.svm, cfg.eval
    if ds.source == "synthetic":
        if ds.synthetic_samples < 2 or ds.synthetic_samples % 2:
            raise ConfigError("dataset.synthetic_samples must be even and >= 2")
        if not 0.0 <= ds.synthetic_hardness <= 1.0:
            raise ConfigError("dataset.synthetic_hardness must lie in [0, 1]")
    if len(ds.fractions) != 3 or any(f < 0 for f in ds.fractions) \
            or abs(sum(ds.fractions) - 1.0) > 1e-9:
        raise ConfigError("dataset.fractions must be three non-negative values summing to 1")
    if rd.method not in ALL_METHODS:
        raise ConfigError(f"unknown reducer.method '{rd.method}' (choose from {ALL_METHODS})")
    if rd.latent_dim < 1:
        raise ConfigError("reducer.latent_dim must be positive")
    if rd.optimise not in ("bce", "mse"):
        raise ConfigError("reducer.optimise must be 'bce' or 'mse'")
    if qc.n_qubits < 1:
        raise ConfigError("circuit.n_qubits must be positive")
    if rd.latent_dim != 2 * qc.n_qubits:
        raise ConfigError(
            f"latent_dim {rd.latent_dim} must equal two features per qubit "
            f"({2 * qc.n_qubits} for {qc.n_qubits} qubits)")
    if qc.shots < 0:
        raise ConfigError("circuit.shots must be non-negative")
    if not sv.c_grid or any(c <= 0 for c in sv.c_grid):
        raise ConfigError("svm.c_grid must hold positive values")
    if ev.n_subsets < 1:
        raise ConfigError("eval.n_subsets must be positive")
    for name in ("qsvm_train", "qsvm_val", "qsvm_test"):
        if getattr(ev, name) < 2 or getattr(ev, name) % 2:
            raise ConfigError(f"eval.{name} must be even and >= 2")
    if ev.source not in ("test", "train"):
        raise ConfigError("eval.source must be 'test' or 'train'")
    for m in cfg.benchmark_methods:
        if m not in ALL_METHODS:
            raise ConfigError(f"unknown benchmark method '{m}'")
