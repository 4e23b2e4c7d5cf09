"""Experiment configuration: flat ``dotted.key=value`` files plus overrides."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

SEED_ENV = "ACTIVESQ_SEED"

LEARNERS = (
    "threshold",
    "rectangle",
    "hs_u_passive",
    "hs_u_active",
    "hs_logc",
    "hs_u_unknown_noise",
)
MARGINALS = ("sphere", "gaussian", "ball", "interval", "cube")
ORACLES = ("exact", "sampling", "rcn", "uncorrelated", "dp")
NOISE_KINDS = ("none", "rcn", "per_point")


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


@dataclass
class ExperimentConfig:
    learner: str = "hs_u_active"
    marginal: str = "sphere"
    d: int = 8
    target: str = "random"          # "random" or comma-separated numbers
    noise_kind: str = "none"
    noise_eta: float = 0.0
    noise_spread: float = 0.0       # per-point rates uniform on [eta - spread, eta + spread]
    oracle: str = "exact"
    eta_assumed: float | None = None
    fast: bool = True
    share_samples: bool = False
    eps: float = 0.05
    delta: float = 0.05
    alpha: float = 1.0
    dp_records: int = 0             # 0: size the database from the query budget
    beta: float = 0.3               # rectangle side mass
    trials: int = 1
    seed: int = field(default_factory=default_seed)
    workers: int = 1
    logc_c: float | None = None
    logc_C1: float | None = None
    logc_c_m: float | None = None
    noise_kappa: float = 1.0 / 8.0

    # dotted names used in files and on the command line
    KEYS = {
        "learner": "learner",
        "marginal.kind": "marginal",
        "marginal.d": "d",
        "target": "target",
        "noise.kind": "noise_kind",
        "noise.eta": "noise_eta",
        "noise.spread": "noise_spread",
        "oracle.kind": "oracle",
        "oracle.eta_assumed": "eta_assumed",
        "oracle.fast": "fast",
        "oracle.share_samples": "share_samples",
        "eps": "eps",
        "delta": "delta",
        "dp.alpha": "alpha",
        "dp.records": "dp_records",
        "rectangle.beta": "beta",
        "trials": "trials",
        "seed": "seed",
        "workers": "workers",
        "logc.c": "logc_c",
        "logc.C1": "logc_C1",
        "logc.c_m": "logc_c_m",
        "noise.kappa": "noise_kappa",
    }

    def validate(self) -> ExperimentConfig:
        if self.learner not in LEARNERS:
            raise ValueError(f"unknown learner {self.learner!r}; choose from {LEARNERS}")
        if self.marginal not in MARGINALS:
            raise ValueError(f"unknown marginal {self.marginal!r}")
        if self.oracle not in ORACLES:
            raise ValueError(f"unknown oracle {self.oracle!r}")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if not (0 < self.eps < 1 and 0 < self.delta < 1):
            raise ValueError("eps and delta must lie in (0, 1)")
        if not 0 <= self.noise_eta < 0.5:
            raise ValueError("noise.eta must lie in [0, 1/2)")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        return self

    def with_overrides(self, pairs: dict[str, str]) -> ExperimentConfig:
        out = ExperimentConfig(**asdict(self))
        types = {f.name: f.type for f in fields(self)}
        for key, raw in pairs.items():
            if key not in self.KEYS:
                raise ValueError(f"unknown configuration key {key!r}")
            name = self.KEYS[key]
            setattr(out, name, _coerce(raw, types[name]))
        return out

    def to_dotted(self) -> dict:
        return {key: getattr(self, name) for key, name in self.KEYS.items()}

    @property
    def resolved_eta_assumed(self) -> float:
        return self.noise_eta if self.eta_assumed is None else self.eta_assumed


def _coerce(raw: str, annotation: str):
    text = raw.strip()
    if "None" in annotation and text.lower() in ("", "none", "null"):
        return None
    if annotation.startswith("bool"):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if annotation.startswith("int"):
        return int(text)
    if annotation.startswith("float"):
        return float(text)
    return text


def parse_pairs(lines) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    pairs: dict[str, str] = {}
    for n, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {n}: expected key=value, got {line.strip()!r}")
        key, value = body.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        cfg = cfg.with_overrides(parse_pairs(Path(path).read_text().splitlines()))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg.validate()
