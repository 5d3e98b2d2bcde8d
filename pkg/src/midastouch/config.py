"""Run configuration: one flat record driving a whole simulation.

Loads from JSON, rejects unknown keys, and hashes canonically so result
files can carry a configuration fingerprint.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    epsilon: int = 6
    committee_size: int = 4
    deposit: int = 32
    deposit_threshold: int = 32
    penalty_rate: float = 0.5
    fee_rate: float = 0.05
    finality_depth: int = 6
    block_interval: int = 600
    blocks: int = 40
    workload: str = "token"
    fault_plan: dict = field(default_factory=dict)
    min_committee_size: int = 4
    max_views_per_epoch: int = 16

    def validate(self) -> None:
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.epsilon < 1:
            raise ConfigError("epsilon must be at least 1")
        if self.committee_size < 0:
            raise ConfigError("committee size must be non-negative")
        if self.deposit < 0:
            raise ConfigError("deposit must be non-negative")
        if not 0 <= self.fee_rate < 1:
            raise ConfigError("fee rate must lie in [0, 1)")
        if not 0 < self.penalty_rate <= 1:
            raise ConfigError("penalty rate must lie in (0, 1]")
        if self.finality_depth < 1:
            raise ConfigError("finality depth must be at least 1")
        if self.block_interval < 1:
            raise ConfigError("block interval must be positive")
        if self.blocks < 0:
            raise ConfigError("blocks must be non-negative")
        if self.workload not in ("none", "token", "mixed"):
            raise ConfigError(f"unknown workload {self.workload!r}")
        for key, mode in self.fault_plan.items():
            if mode not in ("honest", "silent", "equivocating"):
                raise ConfigError(f"unknown fault mode {mode!r} for {key!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "RunConfig":
        merged = dataclasses.replace(self, **changes)
        merged.validate()
        return merged

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as err:
            raise ConfigError(f"cannot read {path}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path} is not valid JSON: {err}") from err
        return cls.from_dict(raw)
