"""Experiment configuration: one flat record, loadable from YAML/JSON, every field a CLI flag."""
from __future__ import annotations

import argparse
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .ansatz import ENTANGLEMENTS, FAMILIES
from .portfolio import GeneratorConfig
from .vqa import DEFAULT_SHOTS


@dataclass(frozen=True)
class ExperimentConfig:
    # instance: generated from these fields unless instance_path is set
    instance_path: str | None = None
    n_bonds: int = 16
    classes_per_dimension: tuple[int, ...] = (3, 2)
    n_metrics: int = 2
    guardrail_fraction: float = 0.5
    noise: float = 0.1
    guardrail_width: float = 0.1
    budget_slack: float = 0.02
    kappa: float = 10.0

    ansatz: str = "twolocal"
    entanglement: str = "bilinear"
    reps: int = 2

    alpha: float = 0.1
    n_shots: int = DEFAULT_SHOTS
    exact: bool = False
    max_epochs: int = 30
    cutoff: float = 0.0
    initial_value: float = math.pi / 3

    instance_seed: int = 0
    sampling_seed: int = 1
    shuffle_seed: int = 2
    search_seed: int = 3

    # polish samples of the last k iterations; None polishes every iteration
    polish_last_k: int | None = 20
    # baseline budget in cost evaluations; None matches the trained polishing budget
    baseline_budget: int | None = None
    plots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "classes_per_dimension", tuple(int(k) for k in self.classes_per_dimension))
        for name in ("polish_last_k", "baseline_budget"):
            value = getattr(self, name)
            if isinstance(value, str):
                object.__setattr__(self, name, _optional_int(value))
        if self.ansatz not in FAMILIES:
            raise ValueError(f"ansatz must be one of {FAMILIES}")
        if self.entanglement not in ENTANGLEMENTS:
            raise ValueError(f"entanglement must be one of {ENTANGLEMENTS}")
        if self.n_bonds < 2:
            raise ValueError("n_bonds must be >= 2")
        for name in ("instance_seed", "sampling_seed", "shuffle_seed", "search_seed"):
            if not isinstance(getattr(self, name), int):
                raise ValueError(f"{name} must be an explicit integer")

    def generator(self) -> GeneratorConfig:
        return GeneratorConfig(
            n_bonds=self.n_bonds,
            classes_per_dimension=self.classes_per_dimension,
            n_metrics=self.n_metrics,
            seed=self.instance_seed,
            guardrail_fraction=self.guardrail_fraction,
            noise=self.noise,
            guardrail_width=self.guardrail_width,
            budget_slack=self.budget_slack,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes_per_dimension"] = list(self.classes_per_dimension)
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return ExperimentConfig(**{**self.to_dict(), **changes})


def load_config(path) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text()) or {}
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**data)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=1, sort_keys=True) + "\n")


def _optional_int(text: str) -> int | None:
    return None if text.lower() in ("none", "all") else int(text)


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


_PARSERS = {
    "instance_path": str,
    "classes_per_dimension": _int_tuple,
    "polish_last_k": _optional_int,
    "baseline_budget": _optional_int,
    "exact": _bool,
    "plots": _bool,
}


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """Add ``--config`` plus one override flag per config field (``--n-bonds`` etc)."""
    parser.add_argument("--config", help="YAML or JSON experiment config")
    group = parser.add_argument_group("config overrides")
    for f in fields(ExperimentConfig):
        default = f.default
        kind = _PARSERS.get(f.name, type(default))
        flag = "--" + f.name.replace("_", "-")
        group.add_argument(flag, dest=f.name, type=kind, default=None,
                           help=f"default: {default}")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(ExperimentConfig)
        if getattr(args, f.name, None) is not None
    }
    return config.replace(**overrides) if overrides else config
