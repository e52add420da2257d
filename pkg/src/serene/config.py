"""Scenario configuration: every knob a run depends on, with validation.

Configs serialize to a flat ``key = value`` text format (one key per line,
``#`` comments allowed) and every key can be overridden from the command
line. All times are seconds except the RTT bounds, which are milliseconds.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Raised for invalid or inconsistent scenario parameters."""


@dataclass
class ScenarioConfig:
    """Parameters of one simulated scenario.

    ``cvt_len`` defaults to ``round(0.25 * n_workers)`` when left ``None``.
    ``obs_per_edge`` is both the SnE observation window and the trusted-task
    verification budget in mitigation.
    """

    n_workers: int = 20
    pool_size: int = 3
    colluding_fraction: float = 0.5
    naive_fraction: float = 0.0
    p_collude: float = 0.5
    epsilon: float = 0.003
    cvt_len: int | None = None
    detect_period: float = 0.1
    obs_per_edge: int = 12
    pair_pool_target: int = 8
    task_rate: float = 1000.0
    rtt_min_ms: float = 20.0
    rtt_max_ms: float = 25.0
    sim_end: float = 100.0
    collusion_start_window: tuple[float, float] = (3.0, 90.0)
    rng_seed: int = 1
    joint_collusion: bool = True
    shared_ring_memory: bool = False
    stop_after_mitigation: bool = True

    def resolved_cvt_len(self) -> int:
        if self.cvt_len is not None:
            return self.cvt_len
        return max(1, int(0.25 * self.n_workers + 0.5))

    def n_colluding(self) -> int:
        """Colluding head count, rounded half up."""
        return int(self.n_workers * self.colluding_fraction + 0.5)

    def n_naive(self) -> int:
        return int(self.n_workers * self.naive_fraction + 0.5)

    def validate(self) -> "ScenarioConfig":
        k, n = self.pool_size, self.n_workers
        if k < 3 or k % 2 == 0:
            raise ConfigError(f"pool_size must be odd and >= 3, got {k}")
        if n < k:
            raise ConfigError(f"n_workers ({n}) must be >= pool_size ({k})")
        for name in ("colluding_fraction", "naive_fraction", "p_collude", "epsilon"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.colluding_fraction + self.naive_fraction > 1.0 + 1e-12:
            raise ConfigError("colluding_fraction + naive_fraction exceeds 1")
        if n - self.n_colluding() - self.n_naive() < 2:
            raise ConfigError("scenario must keep at least 2 honest workers")
        if self.resolved_cvt_len() < 1:
            raise ConfigError("cvt_len must be >= 1")
        if self.rtt_min_ms > self.rtt_max_ms:
            raise ConfigError("rtt_min_ms must be <= rtt_max_ms")
        if self.rtt_min_ms < 0:
            raise ConfigError("rtt bounds must be non-negative")
        if self.task_rate <= 0 or self.sim_end <= 0:
            raise ConfigError("task_rate and sim_end must be positive")
        if self.detect_period <= 0:
            raise ConfigError("detect_period must be positive")
        if self.obs_per_edge < 1:
            raise ConfigError("obs_per_edge must be >= 1")
        if self.pair_pool_target < 0:
            raise ConfigError("pair_pool_target must be >= 0")
        lo, hi = self.collusion_start_window
        if lo > hi or lo < 0:
            raise ConfigError("collusion_start_window must be 0 <= lo <= hi")
        return self

    # --- flat key=value round trip ------------------------------------

    def to_file(self, path: str | Path) -> None:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = " ".join(repr(x) for x in v)
            lines.append(f"{f.name} = {v}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        values: dict[str, str] = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
        return cls().with_overrides(values)

    def with_overrides(self, overrides: dict[str, object]) -> "ScenarioConfig":
        """New config with ``overrides`` applied; values may be strings."""
        known = {f.name: f for f in dataclasses.fields(self)}
        updates = {}
        for key, val in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            updates[key] = _coerce(key, val)
        return dataclasses.replace(self, **updates).validate()


_BOOL_KEYS = {"joint_collusion", "shared_ring_memory", "stop_after_mitigation"}
_INT_KEYS = {"n_workers", "pool_size", "cvt_len", "obs_per_edge", "pair_pool_target", "rng_seed"}


def _coerce(key: str, val: object):
    if not isinstance(val, str):
        return val
    text = val.strip()
    if key == "collusion_start_window":
        parts = text.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError("collusion_start_window needs two numbers")
        return (float(parts[0]), float(parts[1]))
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} expects a boolean, got {text!r}")
    if key in _INT_KEYS:
        if text.lower() == "none":
            return None
        return int(text)
    return float(text)
