"""Experiment configuration: shipped JSON defaults, user files and CLI overrides.

A config file is one JSON object::

    {
      "experiment": "needle",            # lasso | diffdrive | needle | satellite
      "solvers": ["tron", "admm", "ilqr"],
      "seed": 0,                         # lasso data / initial-control noise
      "iters": 100,                      # outer iterations, same for every solver
      "eta": 0.3,                        # first (or constant) smoothing level
      "eta_decay": null,                 # null = constant, else geometric rate
      "inner_iters": 5,                  # inner iLQR iterations per outer step
      "admm_rho": 1.0,
      "subgradient_lr0": 1.0,
      "init_noise": 0.0,                 # std of Gaussian noise on initial controls
      "model": {...},                    # fields of the model's parameter dataclass
      "notes": {...}                     # free-form documentation, ignored
    }

Keys missing from a user file fall back to the shipped default of the same
experiment.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Optional

EXPERIMENTS = ("lasso", "diffdrive", "needle", "satellite")
SOLVERS = ("tron", "ilqr", "admm", "newton", "subgradient")
SCALAR_SOLVERS = ("tron", "newton", "subgradient")
TRAJECTORY_SOLVERS = ("tron", "ilqr", "admm")
#: solvers each experiment supports (ADMM needs an L1 control penalty)
APPLICABLE = {
    "lasso": SCALAR_SOLVERS,
    "diffdrive": ("tron", "ilqr"),
    "needle": TRAJECTORY_SOLVERS,
    "satellite": TRAJECTORY_SOLVERS,
}

_KEYS = (
    "experiment", "solvers", "seed", "iters", "eta", "eta_decay", "inner_iters",
    "admm_rho", "subgradient_lr0", "init_noise", "model", "notes",
)


class ConfigError(ValueError):
    """Invalid experiment configuration (a usage error on the command line)."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    solvers: tuple
    seed: int = 0
    iters: int = 100
    eta: float = 1.0
    eta_decay: Optional[float] = None
    inner_iters: int = 5
    admm_rho: float = 1.0
    subgradient_lr0: float = 1.0
    init_noise: float = 0.0
    model: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        allowed = APPLICABLE[self.experiment]
        for s in self.solvers:
            if s not in SOLVERS:
                raise ConfigError(f"unknown solver {s!r}; choose from {', '.join(SOLVERS)}")
            if s not in allowed:
                raise ConfigError(f"solver {s!r} does not apply to {self.experiment}; use {', '.join(allowed)}")
        if len(set(self.solvers)) != len(self.solvers):
            raise ConfigError(f"duplicate solvers in {list(self.solvers)}")
        if self.iters < 1 or self.inner_iters < 1:
            raise ConfigError("iters and inner_iters must be >= 1")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if self.eta_decay is not None and not 0 < self.eta_decay < 1:
            raise ConfigError("eta_decay must lie in (0, 1) or be null")
        if not self.admm_rho > 0 or not self.subgradient_lr0 > 0:
            raise ConfigError("admm_rho and subgradient_lr0 must be positive")
        if self.init_noise < 0:
            raise ConfigError("init_noise must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["solvers"] = list(self.solvers)
        return d

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Non-None keyword values replace fields; ``model`` entries are merged."""
        kw = {k: v for k, v in kw.items() if v is not None}
        if "model" in kw:
            kw["model"] = {**self.model, **kw["model"]}
        if "solvers" in kw:
            kw["solvers"] = tuple(kw["solvers"])
        try:
            return replace(self, **kw)
        except TypeError as e:
            raise ConfigError(str(e)) from None


def _from_dict(d: dict) -> ExperimentConfig:
    unknown = set(d) - set(_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    d = dict(d)
    d["solvers"] = tuple(d.get("solvers", ()))
    try:
        return ExperimentConfig(**d)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def default_config(experiment: str) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    text = resources.files("tron.bench").joinpath("configs", f"{experiment}.json").read_text()
    return _from_dict(json.loads(text))


def load_config(experiment: Optional[str] = None, path: Optional[str] = None) -> ExperimentConfig:
    """Shipped defaults for ``experiment``, overlaid with the JSON file at ``path``."""
    user = {}
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    name = experiment or user.get("experiment")
    if name is None:
        raise ConfigError("no experiment given")
    if experiment and user.get("experiment") not in (None, experiment):
        raise ConfigError(f"config {path} is for {user['experiment']!r}, not {experiment!r}")
    base = default_config(name).to_dict()
    model = {**base["model"], **user.get("model", {})}
    merged = {**base, **user, "model": model, "experiment": name}
    return _from_dict(merged)
