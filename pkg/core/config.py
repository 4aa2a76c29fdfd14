"""Config loader for the numeric policy and the simulation budget."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

import yaml

from core.errors import ConfigError

POLICY_ENV = "KRIGE_NUMERIC_POLICY"


def _load_yaml(path: str, default: dict) -> dict:
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
            return data
    except Exception:
        return default


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances shared by every solver and check."""

    weight_sum_tol: float = 1e-10
    formula_rel_tol: float = 1e-8
    residual_tol: float = 1e-9
    condition_limit: float = 1e12
    clamp_tol: float = 1e-9
    se_multiplier: float = 4.0
    schedule_se_multiplier: float = 2.0

    @classmethod
    def from_mapping(cls, data: dict, source: str = "policy") -> "NumericPolicy":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown numeric policy keys in {source}: {', '.join(unknown)}", key=unknown[0])
        values = {}
        for key, raw in data.items():
            try:
                value = float(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"Numeric policy key '{key}' must be a number, got {raw!r}", key=key)
            if not value > 0:
                raise ConfigError(f"Numeric policy key '{key}' must be > 0, got {value}", key=key)
            values[key] = value
        return replace(cls(), **values)


def load_numeric_policy(path: str | None = None) -> NumericPolicy:
    """Defaults from configs/numeric_policy.yaml, then the KRIGE_NUMERIC_POLICY override."""
    base = _load_yaml(path or str(repo_root() / "configs" / "numeric_policy.yaml"), {})
    policy = NumericPolicy.from_mapping(base.get("tolerances", {}) if isinstance(base, dict) else {})

    override = os.environ.get(POLICY_ENV)
    if not override:
        return policy
    try:
        with open(override, "r") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"{POLICY_ENV} points to a missing file: {override}", key=POLICY_ENV)
    except yaml.YAMLError as e:
        raise ConfigError(f"{POLICY_ENV} file is not valid JSON: {e}", key=POLICY_ENV)
    if not isinstance(data, dict):
        raise ConfigError(f"{POLICY_ENV} file must hold a JSON object", key=POLICY_ENV)
    merged = {f.name: getattr(policy, f.name) for f in fields(policy)}
    merged.update(data)
    return NumericPolicy.from_mapping(merged, source=override)


def load_budget(path: str | None = None) -> dict:
    default = {"simulation": {"max_draws": 100_000_000, "block_size": 4096, "lanes": 1}}
    data = _load_yaml(path or str(repo_root() / "configs" / "budget.yaml"), default)
    sim = {**default["simulation"], **(data.get("simulation") or {})}
    return {"simulation": sim}


def repo_root() -> Path:
    return Path(__file__).resolve().parents[1]
