"""
Experiment configuration: defaults, JSON files and command-line overrides.

Every experiment declares a parameter dataclass. Field metadata carries
range limits ("min", "max", "exclusive", "choices"); validation walks the declared field
types and reports the first violation with its dotted path.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, get_args, get_origin, get_type_hints

from .types import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("csv", "json", "both")
MAX_SEED = 1 << 64
SWAP_VERDICTS = ("admissible", "dissimilar")


def _range(lo: float | None = None, hi: float | None = None, **extra: Any) -> dict[str, Any]:
    return {"min": lo, "max": hi, **extra}


@dataclass
class BranchDemoParams:
    amplitudes: list[float] = field(
        default_factory=lambda: [math.sqrt(0.5), math.sqrt(0.3), math.sqrt(0.2)]
    )
    hamiltonians: int = field(default=50, metadata=_range(1))
    rotations: int = field(default=100, metadata=_range(1))
    leakage: float = field(default=0.0, metadata=_range(0.0, 1.0))
    evolve_time: float = field(default=1.0, metadata=_range(0.0))


@dataclass
class BornDeriveParams:
    law: str = field(
        default="born",
        metadata={"choices": ("born", "affine_quadratic", "odd_counterexample",
                              "general_affine", "counting")},
    )
    law_params: dict[str, Any] = field(default_factory=dict)
    outcome_counts: list[int] = field(default_factory=lambda: [2, 3, 5, 8])
    samples: int = field(default=10_000, metadata=_range(1))
    epsilon: float = field(default=0.05, metadata=_range(0.0, 0.1))
    noise: float = field(default=0.0, metadata=_range(0.0))


@dataclass
class LargeNParams:
    N: int = field(default=10_000, metadata=_range(1, 100_000))
    p: float = field(default=0.9, metadata=_range(0.0, 1.0))
    alpha: float = field(default=0.8, metadata=_range(0.0))
    beta: float = field(default=0.2, metadata=_range(0.0))
    runs: int = field(default=10_000, metadata=_range(0))
    washout_sizes: list[int] = field(default_factory=lambda: [100, 1_000, 10_000])
    exact_N: int = field(default=20, metadata=_range(1, 20_000))
    quoted_ratio_log10: float = 800.0


@dataclass
class CollapseExperimentParams:
    amplitude_sets: list[list[float]] = field(
        default_factory=lambda: [
            [math.sqrt(0.9), math.sqrt(0.1)],
            [math.sqrt(0.5), math.sqrt(0.5)],
            [math.sqrt(0.5), math.sqrt(0.3), math.sqrt(0.2)],
        ]
    )
    runs: int = field(default=10_000, metadata=_range(100))
    families: int = field(default=100, metadata=_range(1))
    family_steps: int = field(default=5, metadata=_range(1))
    family_runs: int = field(default=3, metadata=_range(1))
    sigma: float = field(default=1.0, metadata=_range(0.0))
    dt: float = field(default=1e-3, metadata=_range(0.0))
    max_steps: int = field(default=1_000_000, metadata=_range(1))


@dataclass
class FinegrainParams:
    weights: list[str] = field(default_factory=lambda: ["3/5", "2/5"])
    # [i, j] or [i, j, verdict]; a missing verdict follows the ancilla sizes of the plan
    swaps: list[list[Any]] = field(
        default_factory=lambda: [[3, 4, "dissimilar"], [1, 2, "admissible"]]
    )

    def __post_init__(self) -> None:
        for n, swap in enumerate(self.swaps):
            path = f"params.swaps[{n}]"
            if len(swap) not in (2, 3):
                raise ConfigError(path, f"expected [i, j] or [i, j, verdict], got {swap!r}")
            i, j = swap[0], swap[1]
            if any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in (i, j)):
                raise ConfigError(path, f"branch indices must be integers ≥ 1, got {swap!r}")
            if len(swap) == 3 and swap[2] not in SWAP_VERDICTS:
                raise ConfigError(
                    path, f"verdict must be one of {', '.join(SWAP_VERDICTS)}, got {swap[2]!r}"
                )


@dataclass
class BohmParams:
    weights: list[float] = field(default_factory=lambda: [0.9, 0.5])
    samples: int = field(default=10_000, metadata=_range(1))
    pairs: int = field(default=1_000, metadata=_range(1))
    width: float = field(default=2.0, metadata=_range(0.0, exclusive=True))
    speed: float = field(default=2.0, metadata=_range(0.0, exclusive=True))
    separation: float = field(default=4.0, metadata=_range(0.0))
    density_shift: float = 1.5
    transport_time: float = field(default=5.0, metadata=_range(0.0))
    probe_delta: float = field(default=0.05, metadata=_range(0.0))


PARAMS_BY_EXPERIMENT: dict[str, type] = {
    "branch-demo": BranchDemoParams,
    "born-derive": BornDeriveParams,
    "large-n": LargeNParams,
    "collapse": CollapseExperimentParams,
    "finegrain": FinegrainParams,
    "bohm": BohmParams,
}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run."""
    experiment: str
    master_seed: int = 0
    output_dir: Path | None = None
    output_format: str = "csv"
    serial: bool = False
    params: Any = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "master_seed": self.master_seed,
            "output_dir": str(self.output_dir) if self.output_dir is not None else None,
            "output_format": self.output_format,
            "serial": self.serial,
            "params": asdict(self.params) if is_dataclass(self.params) else self.params,
        }


# Declared types → accepted Python types
TYPE_MAP: dict[type, type | tuple[type, ...]] = {
    int: int,
    float: (int, float),
    bool: bool,
    str: str,
    list: list,
    dict: dict,
}


def _check_type(value: Any, declared: Any, path: str) -> None:
    origin = get_origin(declared) or declared
    expected = TYPE_MAP.get(origin)
    if expected is None:
        return
    # bool is an int subclass; never accept it for numbers
    if origin is not bool and isinstance(value, bool):
        raise ConfigError(path, f"expected {origin.__name__}, got bool")
    if not isinstance(value, expected):
        raise ConfigError(path, f"expected {origin.__name__}, got {type(value).__name__}")
    if origin is list:
        args = get_args(declared)
        if args:
            for i, item in enumerate(value):
                _check_type(item, args[0], f"{path}[{i}]")


def _check_range(value: Any, metadata: Any, path: str) -> None:
    lo, hi = metadata.get("min"), metadata.get("max")
    if lo is not None and metadata.get("exclusive") and value <= lo:
        raise ConfigError(path, f"must be > {lo}, got {value}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be ≥ {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(path, f"must be ≤ {hi}, got {value}")
    choices = metadata.get("choices")
    if choices is not None and value not in choices:
        raise ConfigError(path, f"must be one of {', '.join(choices)}, got {value!r}")


def build_params(experiment: str, values: dict[str, Any], prefix: str = "params") -> Any:
    """Validate `values` against the experiment's parameter dataclass and build it."""
    cls = PARAMS_BY_EXPERIMENT.get(experiment)
    if cls is None:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}")
    if not isinstance(values, dict):
        raise ConfigError(prefix, "expected an object")
    hints = get_type_hints(cls)
    known = {f.name: f for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
    kwargs = {}
    for name, declared in known.items():
        if name not in values:
            continue
        path = f"{prefix}.{name}"
        value = values[name]
        if hints[name] is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        _check_type(value, hints[name], path)
        _check_range(value, declared.metadata, path)
        kwargs[name] = value
    return cls(**kwargs)


def parse_set_items(items: list[str]) -> dict[str, Any]:
    """Parse repeated `key=value` overrides; values are JSON when they parse as JSON."""
    parsed: dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        try:
            parsed[key] = json.loads(raw)
        except json.JSONDecodeError:
            parsed[key] = raw
    return parsed


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("--config", f"invalid JSON in {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("--config", "top level must be an object")
    return data


_TOP_LEVEL = {"experiment", "master_seed", "output_dir", "output_format", "serial", "params"}


def build_config(
    experiment: str,
    file_data: dict[str, Any] | None = None,
    *,
    master_seed: int | None = None,
    serial: bool | None = None,
    output_dir: Path | None = None,
    output_format: str | None = None,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """
    Merge defaults, config file contents and explicit overrides.

    Later sources win: dataclass defaults, then `file_data`, then keyword
    arguments and `overrides` (parameter values from --set).
    """
    data = dict(file_data or {})
    for key in data:
        if key not in _TOP_LEVEL:
            raise ConfigError(key, "unknown key")
    if "experiment" in data and data["experiment"] != experiment:
        raise ConfigError(
            "experiment", f"config file is for {data['experiment']!r}, not {experiment!r}"
        )

    seed = data.get("master_seed", 0) if master_seed is None else master_seed
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("master_seed", f"expected int, got {type(seed).__name__}")
    if not 0 <= seed < MAX_SEED:
        raise ConfigError("master_seed", f"must be in [0, 2^64), got {seed}")

    fmt = data.get("output_format", "csv") if output_format is None else output_format
    if fmt not in OUTPUT_FORMATS:
        raise ConfigError("output_format", f"must be one of {', '.join(OUTPUT_FORMATS)}")

    is_serial = data.get("serial", False) if serial is None else serial
    if not isinstance(is_serial, bool):
        raise ConfigError("serial", "expected bool")

    out = output_dir
    if out is None and data.get("output_dir") is not None:
        if not isinstance(data["output_dir"], str):
            raise ConfigError("output_dir", "expected str")
        out = Path(data["output_dir"])

    values = dict(data.get("params") or {})
    values.update(overrides or {})
    params = build_params(experiment, values)
    logger.debug(f"Built config for {experiment}: seed={seed}, format={fmt}, serial={is_serial}")
    return ExperimentConfig(experiment, seed, out, fmt, is_serial, params)
