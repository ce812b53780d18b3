from __future__ import annotations

import copy
import functools
import logging
import typing as t
from dataclasses import dataclass, field

from .errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_KEYS = frozenset({"experiment", "seed", "parameters"})


@dataclass
class Check:
    """One verification criterion observed by an experiment."""

    criterion: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    rows: list[dict[str, t.Any]] = field(default_factory=list)
    metrics: dict[str, t.Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    plots: dict[str, t.Sequence[t.Sequence[float]]] = field(default_factory=dict)
    tables: dict[str, list[dict[str, t.Any]]] = field(default_factory=dict)
    label: str | None = None

    def check(self, criterion: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(criterion, bool(passed), detail))
        if not passed:
            logger.warning(f"criterion {criterion} failed: {detail}")

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def status(self) -> str:
        if self.label:
            return self.label
        return "FAILED" if self.failures else "OK"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int | None = None
    parameters: dict[str, t.Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: t.Any) -> ExperimentConfig:
        """Strict parse of a decoded config file."""
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        unknown = sorted(set(data) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        if "experiment" not in data:
            raise ConfigError("experiment config is missing 'experiment'")

        seed = data.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        parameters = data.get("parameters", {})
        if not isinstance(parameters, dict):
            raise ConfigError("'parameters' must be a JSON object")
        return cls(str(data["experiment"]), seed, dict(parameters))


class experiment(object):
    """Registering decorator for experiment runners.

    ::

        @experiment("bessel-check", defaults={"sample_density": 256})
        def bessel_check(params, seed):
            ...
            return ExperimentResult(rows=...)

    ``defaults`` declares every parameter the experiment accepts; a config
    naming anything else is rejected. ``seeded`` experiments require a
    seed in their config. Experiments with ``verify`` set are part of the
    acceptance suite run by ``restriction-lab verify``.
    """

    registry: dict[str, experiment] = {}

    def __init__(self, name: str, defaults: dict[str, t.Any] | None = None, seeded: bool = False,
                 verify: bool = True, description: str | None = None):
        self.name = name
        self.defaults = dict(defaults or {})
        self.seeded = seeded
        self.verify = verify
        self.description = description
        self.fn = None

    def __call__(self, fn):
        self.fn = fn
        self.description = self.description or (fn.__doc__ or "").strip().split("\n")[0]
        if self.name in experiment.registry:
            logger.debug(f"experiment {self.name!r} re-registered")
        experiment.registry[self.name] = self

        @functools.wraps(fn)
        def decorated(params, seed=None):
            return fn(params, seed)

        return decorated

    def __repr__(self):
        return f"<experiment {self.name!r}>"

    @staticmethod
    def find(name: str) -> experiment:
        try:
            return experiment.registry[name]
        except KeyError:
            known = ", ".join(sorted(experiment.registry))
            raise ConfigError(f"Unknown experiment {name!r}; registered: {known}") from None

    @staticmethod
    def names() -> list[str]:
        return sorted(experiment.registry)

    def parameters(self, overrides: t.Mapping[str, t.Any]) -> dict[str, t.Any]:
        unknown = sorted(set(overrides) - set(self.defaults))
        if unknown:
            raise ConfigError(f"Unknown parameters for {self.name}: {', '.join(unknown)}")
        merged = copy.deepcopy(self.defaults)
        merged.update(overrides)
        return merged

    def resolve(self, config: ExperimentConfig) -> dict[str, t.Any]:
        """Fully merged config (experiment, seed, parameters) or ConfigError."""
        if self.seeded and config.seed is None:
            raise ConfigError(f"experiment {self.name} is randomized and needs a 'seed'")
        return {
            "experiment": self.name,
            "seed": config.seed,
            "parameters": self.parameters(config.parameters),
        }
