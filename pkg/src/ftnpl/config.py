"""Experiment configuration: defaults, JSON file loading, validation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .mediator import MODES, PENALTIES

EXPERIMENTS = ("pennies", "pennies_nonconvex", "replicator", "toygan", "circleworld")
LEARNERS = ("ftrl_l2", "ftrl_entropy", "ftpl", "ftnpl", "gda")
REPLICATOR_MODES = ("flow", "mw")

# learners each experiment can run
SUPPORTED = {
    "pennies": ("ftrl_l2", "ftpl", "ftnpl"),
    "pennies_nonconvex": ("ftrl_l2", "ftpl", "ftnpl"),
    "replicator": ("ftrl_entropy",),
    "toygan": ("ftnpl", "gda"),
    "circleworld": ("ftnpl",),
}

DEFAULT_LEARNER = {
    "pennies": "ftnpl",
    "pennies_nonconvex": "ftnpl",
    "replicator": "ftrl_entropy",
    "toygan": "ftnpl",
    "circleworld": "ftnpl",
}

DEFAULT_CODE_MODE = {
    "pennies": "mean",
    "pennies_nonconvex": "sample",
    "toygan": "mean",
    "circleworld": "sample",
}

DEFAULT_STEPS = {
    "pennies": 20000,
    "pennies_nonconvex": 20000,
    "replicator": 50000,
    "toygan": 5000,
    "circleworld": 200,
}

# player learning rate per (experiment, learner); None means "derived"
_DEFAULT_ETA = {
    ("pennies", "ftrl_l2"): 0.01,
    ("pennies_nonconvex", "ftrl_l2"): 0.01,
    ("pennies", "ftnpl"): 1e-3,
    ("pennies_nonconvex", "ftnpl"): 1e-3,
    ("replicator", "ftrl_entropy"): 1e-3,  # RK4 step size in flow mode
    ("toygan", "ftnpl"): 0.05,
    ("toygan", "gda"): 0.05,
    ("circleworld", "ftnpl"): 0.05,
}


@dataclass
class ExperimentConfig:
    experiment: str = "pennies"
    learner: str | None = None
    steps: int | None = None
    seed: int = 0
    seeds: list[int] | None = None
    eta: float | None = None
    eta_m: float = 1e-3
    k: int = 5
    code_size: int = 2
    penalty: str = "squared"
    code_mode: str | None = None
    zeta: float | None = None
    replicator_mode: str = "flow"
    out: str = "runs"
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def resolved(self) -> "ExperimentConfig":
        """Validated copy with every derived default filled in."""
        cfg = replace(self, extra=dict(self.extra), seeds=None if self.seeds is None else list(self.seeds))
        if cfg.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {cfg.experiment!r}; expected one of {EXPERIMENTS}",
                              field="experiment")
        if cfg.learner is None:
            cfg.learner = DEFAULT_LEARNER[cfg.experiment]
        if cfg.learner not in LEARNERS:
            raise ConfigError(f"unknown learner {cfg.learner!r}; expected one of {LEARNERS}", field="learner")
        if cfg.learner not in SUPPORTED[cfg.experiment]:
            raise ConfigError(f"{cfg.experiment} does not support learner {cfg.learner!r}; "
                              f"supported: {SUPPORTED[cfg.experiment]}", field="learner")
        if cfg.penalty not in PENALTIES:
            raise ConfigError(f"unknown penalty {cfg.penalty!r}; expected one of {PENALTIES}", field="penalty")
        if cfg.code_mode is not None and cfg.code_mode not in MODES:
            raise ConfigError(f"unknown code mode {cfg.code_mode!r}; expected one of {MODES}", field="code_mode")
        if cfg.replicator_mode not in REPLICATOR_MODES:
            raise ConfigError(f"unknown replicator mode {cfg.replicator_mode!r}", field="replicator_mode")
        if cfg.steps is None:
            cfg.steps = DEFAULT_STEPS[cfg.experiment]
        if cfg.code_mode is None and cfg.learner == "ftnpl":
            cfg.code_mode = DEFAULT_CODE_MODE[cfg.experiment]
        if cfg.eta is None:
            cfg.eta = _DEFAULT_ETA.get((cfg.experiment, cfg.learner))
        _check_int(cfg.steps, "steps", 1)
        _check_int(cfg.k, "k", 1)
        _check_int(cfg.code_size, "code_size", 1)
        _check_int(cfg.seed, "seed", 0)
        _check_int(cfg.workers, "workers", 1)
        if cfg.seeds is not None:
            if not isinstance(cfg.seeds, list) or not cfg.seeds:
                raise ConfigError("must be a nonempty list of seeds", field="seeds")
            for s in cfg.seeds:
                _check_int(s, "seeds", 0)
        for name in ("eta", "eta_m", "zeta"):
            v = getattr(cfg, name)
            if v is not None and (not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0):
                raise ConfigError(f"must be a positive number, got {v!r}", field=name)
        if not isinstance(cfg.extra, dict):
            raise ConfigError("must be a JSON object", field="extra")
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


def _check_int(v, name, lo):
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigError(f"must be an integer >= {lo}, got {v!r}", field=name)


def config_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(ExperimentConfig))


def from_mapping(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay ``data`` on ``base`` (or the defaults); unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object", field="config")
    known = set(config_fields())
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}", field=key)
    return replace(base or ExperimentConfig(), **data)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", field="config") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc.msg}", field="config") from exc
