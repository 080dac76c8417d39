"""Experiment configuration and user settings for gtcnn."""

import json
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from gtcnn.errors import ConfigError, GTCNNError
from gtcnn.models import ProductSpec
from gtcnn.nn.training import TrainConfig
from gtcnn.utils import DEFAULT_FLOAT_DIGITS

CONFIG_FILE = Path.home() / ".config" / "gtcnn" / "gtcnn.toml"

DEFAULT_LOG_LEVEL = "INFO"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

VARIANTS = ("gcnn", "kronecker", "cartesian", "strong", "parametric", "joint")
TEMPORAL_GRAPHS = ("line", "cycle", "path")
POOLINGS = ("community", "mean")
# experiments that are CLI commands on trained checkpoints, not config tasks
COMMAND_TASKS = {"stability_sweep": "stability", "spectral_dump": "spectral"}


class Task(Enum):
    SOURCE_LOCALIZATION = "source_localization"
    FORECASTING = "forecasting"


@dataclass(frozen=True)
class GraphParams:
    """Spatial SBM and the temporal graph kind."""

    n: int = 40
    communities: int = 4
    p_in: float = 0.8
    p_out: float = 0.2
    temporal: str = "line"


@dataclass(frozen=True)
class DiffusionParams:
    """Heat diffusion times; windows start in ``[t_min, t_max − window]``.

    One integer time step lasts ``time_step / λ_max(L)``, so state ``τ`` is
    ``e^{-τ·time_step·L/λ_max(L)}`` applied to the source.
    """

    t_min: int = 15
    t_max: int = 30
    window: int = 5
    time_step: float = 0.1


@dataclass(frozen=True)
class DatasetParams:
    samples: int = 600


@dataclass(frozen=True)
class ModelParams:
    """Architecture shared by every variant of an experiment.

    ``hidden`` lists the feature counts of the filter layers. ``orders`` is
    ``(K̄, K̃)`` for joint filters; product-graph and GCNN variants use
    ``K̄`` as their polynomial order. ``pooling`` picks the source-localization
    readout: ``community`` averages node logits per community, ``mean`` over
    all nodes.
    """

    hidden: tuple[int, ...] = (2, 2)
    orders: tuple[int, int] = (2, 2)
    variants: tuple[str, ...] = ("gcnn", "kronecker", "cartesian", "strong", "parametric")
    l1_weight: float = 0.05
    relu_last: bool = True
    repeats: int = 5
    pooling: str = "community"


@dataclass(frozen=True)
class StabilityParams:
    variant: str = "parametric"
    checkpoint: str | None = None
    snr_db: tuple[float, ...] = (0.0, 5.0, 10.0, 20.0, 40.0)
    trials: int = 20
    probes: int = 20
    epsilons: tuple[float, ...] = (0.01, 0.02, 0.05, 0.1)
    windows: tuple[int, ...] = (2, 3, 4, 5, 6)
    window_snr_db: float = 5.0
    grid: int = 1024
    squared_delta: bool = True


@dataclass(frozen=True)
class SpectralParams:
    checkpoint: str | None = None
    grid: int = 64


@dataclass(frozen=True)
class ExperimentConfig:
    """A complete, validated experiment description."""

    task: Task = Task.SOURCE_LOCALIZATION
    seed: int = 0
    output_dir: str = "out"
    graph: GraphParams = field(default_factory=GraphParams)
    diffusion: DiffusionParams = field(default_factory=DiffusionParams)
    dataset: DatasetParams = field(default_factory=DatasetParams)
    model: ModelParams = field(default_factory=ModelParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    stability: StabilityParams = field(default_factory=StabilityParams)
    spectral: SpectralParams = field(default_factory=SpectralParams)

    def __post_init__(self) -> None:
        _validate(self)

    def with_window(self, window: int) -> "ExperimentConfig":
        return replace(self, diffusion=replace(self.diffusion, window=window))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task.value,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "graph": _plain(self.graph),
            "diffusion": _plain(self.diffusion),
            "dataset": _plain(self.dataset),
            "model": _plain(self.model),
            "train": self.train.to_dict(),
            "stability": _plain(self.stability),
            "spectral": _plain(self.spectral),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """Build a config from parsed JSON or TOML.

        Raises:
            ConfigError: On unknown keys, wrong types or violated constraints.
        """
        return _parse_experiment(data)


def _plain(section) -> dict[str, Any]:
    out = {}
    for name in section.__dataclass_fields__:
        value = getattr(section, name)
        out[name] = list(value) if isinstance(value, tuple) else value
    return out


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _validate(cfg: ExperimentConfig) -> None:
    g, d, m, s = cfg.graph, cfg.diffusion, cfg.model, cfg.stability
    _check(g.n >= g.communities >= 1, f"need n >= communities >= 1, got {g.n} and {g.communities}")
    _check(0.0 <= g.p_out <= g.p_in <= 1.0, "need 0 <= p_out <= p_in <= 1")
    _check(g.temporal in TEMPORAL_GRAPHS, f"temporal graph must be one of {', '.join(TEMPORAL_GRAPHS)}")
    _check(0 <= d.t_min <= d.t_max, f"need 0 <= t_min <= t_max, got {d.t_min} and {d.t_max}")
    _check(d.window >= 1, "window must be at least 1")
    _check(d.window <= d.t_min, f"window {d.window} exceeds t_min {d.t_min}")
    _check(0.0 < d.time_step < float("inf"), f"time_step must be positive and finite, got {d.time_step}")
    _check(cfg.dataset.samples >= 1, "dataset needs at least one sample")
    _check(len(m.hidden) >= 1 and all(f >= 1 for f in m.hidden), "model needs positive hidden sizes")
    _check(len(m.orders) == 2 and min(m.orders) >= 0, "orders must be two non-negative ints")
    _check(m.l1_weight >= 0.0, "l1_weight must be non-negative")
    _check(m.repeats >= 1, "repeats must be at least 1")
    _check(m.pooling in POOLINGS, f"pooling must be one of {', '.join(POOLINGS)}")
    unknown = [v for v in m.variants if v not in VARIANTS]
    _check(not unknown and len(m.variants) > 0, f"unknown variants {unknown}; choose from {VARIANTS}")
    _check(s.variant in VARIANTS, f"unknown stability variant {s.variant!r}")
    _check(s.trials >= 1 and s.probes >= 1, "stability trials and probes must be at least 1")
    _check(s.grid >= 2 and cfg.spectral.grid >= 2, "spectral grids need at least 2 points")
    _check(all(e >= 0 for e in s.epsilons), "epsilons must be non-negative")
    _check(all(w >= 1 for w in s.windows), "windows must be at least 1")


def _section(data: dict[str, Any], name: str, kind, converters: dict[str, Any]):
    raw = data.get(name, {})
    _check(isinstance(raw, dict), f"section {name!r} must be a table")
    known = kind.__dataclass_fields__
    unknown = sorted(set(raw) - set(known))
    _check(not unknown, f"unknown keys in {name!r}: {', '.join(unknown)}")
    values = {}
    for key, value in raw.items():
        convert = converters.get(key)
        try:
            values[key] = convert(value) if convert is not None else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}.{key}: {value!r}") from exc
    return kind(**values)


def _optional_str(value) -> str | None:
    return None if value is None else str(value)


def _floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def _ints(values) -> tuple[int, ...]:
    return tuple(int(v) for v in values)


def _strs(values) -> tuple[str, ...]:
    return tuple(str(v) for v in values)


def _parse_experiment(data: dict[str, Any]) -> ExperimentConfig:
    _check(isinstance(data, dict), "experiment config must be an object")
    top = {"task", "seed", "output_dir", "graph", "diffusion", "dataset", "model", "train", "stability", "spectral"}
    unknown = sorted(set(data) - top)
    _check(not unknown, f"unknown keys: {', '.join(unknown)}")
    name = data.get("task", Task.SOURCE_LOCALIZATION.value)
    if isinstance(name, str) and name in COMMAND_TASKS:
        raise ConfigError(f"task {name!r} is not a learning task; run it with 'gtcnn {COMMAND_TASKS[name]}' instead")
    try:
        task = Task(name)
    except ValueError as exc:
        raise ConfigError(f"unknown task {name!r}; choose from {', '.join(t.value for t in Task)}") from exc
    try:
        train = TrainConfig.from_dict(data.get("train", {}))
        unknown_train = sorted(set(data.get("train", {})) - set(TrainConfig.__dataclass_fields__))
        _check(not unknown_train, f"unknown keys in 'train': {', '.join(unknown_train)}")
        return ExperimentConfig(
            task=task,
            seed=int(data.get("seed", 0)),
            output_dir=str(data.get("output_dir", "out")),
            graph=_section(data, "graph", GraphParams, {"n": int, "communities": int, "p_in": float, "p_out": float, "temporal": str}),
            diffusion=_section(data, "diffusion", DiffusionParams, {"t_min": int, "t_max": int, "window": int, "time_step": float}),
            dataset=_section(data, "dataset", DatasetParams, {"samples": int}),
            model=_section(
                data,
                "model",
                ModelParams,
                {
                    "hidden": _ints,
                    "orders": _ints,
                    "variants": _strs,
                    "l1_weight": float,
                    "relu_last": bool,
                    "repeats": int,
                    "pooling": str,
                },
            ),
            train=train,
            stability=_section(
                data,
                "stability",
                StabilityParams,
                {
                    "variant": str,
                    "checkpoint": _optional_str,
                    "snr_db": _floats,
                    "trials": int,
                    "probes": int,
                    "epsilons": _floats,
                    "windows": _ints,
                    "window_snr_db": float,
                    "grid": int,
                    "squared_delta": bool,
                },
            ),
            spectral=_section(data, "spectral", SpectralParams, {"checkpoint": _optional_str, "grid": int}),
        )
    except ConfigError:
        raise
    except (GTCNNError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment config from JSON, or TOML for a ``.toml`` file.

    Raises:
        ConfigError: If the file is missing, unparsable or invalid.
    """
    path = Path(path)
    try:
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as f:
                data = tomllib.load(f)
        else:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def product_spec_for(variant: str) -> ProductSpec | None:
    """Product used by a variant; None for the GCNN and joint variants.

    The parametric variant starts from the Cartesian pattern.
    """
    if variant in ("kronecker", "cartesian", "strong"):
        return ProductSpec.from_dict({"kind": variant})
    if variant == "parametric":
        return ProductSpec.cartesian().as_parametric()
    return None


@dataclass
class Settings:
    """User settings from ``~/.config/gtcnn/gtcnn.toml``."""

    log_level: str = DEFAULT_LOG_LEVEL
    threads: int = 1
    float_digits: int = DEFAULT_FLOAT_DIGITS


def load_settings() -> Settings:
    """Load user settings.

    Returns the defaults if:
    - The settings file doesn't exist
    - The settings file has invalid TOML syntax
    - Any other error occurs during loading
    """
    if not CONFIG_FILE.exists():
        return Settings()

    try:
        with open(CONFIG_FILE, "rb") as f:
            data = tomllib.load(f)
    except Exception:
        return Settings()

    return _parse_settings(data)


def _parse_settings(data: dict[str, Any]) -> Settings:
    """Parse settings from a dictionary, ignoring invalid entries."""
    settings = Settings()

    if isinstance(data.get("log_level"), str) and data["log_level"].upper() in LOG_LEVELS:
        settings.log_level = data["log_level"].upper()

    threads = data.get("threads")
    if isinstance(threads, int) and not isinstance(threads, bool) and threads >= 1:
        settings.threads = threads

    digits = data.get("float_digits")
    if isinstance(digits, int) and not isinstance(digits, bool) and 1 <= digits <= 17:
        settings.float_digits = digits

    return settings
