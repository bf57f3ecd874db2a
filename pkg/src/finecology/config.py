"""Simulation configuration.

Every model constant is a named field carrying its published default, so a
config file (TOML) or a ``key=value`` override can change any of them.
Population sizes and initial-distribution knobs live here as well; they are
calibration choices rather than published values.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass
class EvolutionParams:
    enabled: bool = True
    a: float = 0.02891
    b: float = -0.2168
    benchmark_centile: float = 0.40
    infection_rate_annual: float = 0.01
    # trailing window (months) used to pick the most profitable donor bank
    donor_window: int = 12
    # multiplier applied to the base rate inside exp(b * ir); 100 reads ir in percent
    ir_scale: float = 1.0
    # monthly chance that a below-benchmark investor raises its expectation
    dissemination_probability: float = 0.05

    def validate(self) -> None:
        if not 0.0 < self.benchmark_centile < 1.0:
            raise ConfigError("benchmark_centile must lie in (0, 1)")
        if not 0.0 <= self.infection_rate_annual <= 1.0:
            raise ConfigError("infection_rate_annual must lie in [0, 1]")
        if not 0.0 <= self.dissemination_probability <= 1.0:
            raise ConfigError("dissemination_probability must lie in [0, 1]")
        if self.donor_window < 1:
            raise ConfigError("donor_window must be >= 1")

    @property
    def infection_rate_monthly(self) -> float:
        return monthly_infection_probability(self.infection_rate_annual)


@dataclass
class SimConfig:
    # investment period and memory (months)
    t_inv: int = 48
    m: int = 24
    # fractions
    CL: float = 0.10
    TT: float = 0.10
    pr: float = 0.03
    vol: float = 0.20
    rec: float = 0.40
    Spr: float = 0.01
    c: float = 2.71
    sigma2: float = 0.5
    min_capital_ratio: float = 0.08
    dividend_ratio: float = 0.95
    investor_distribution_ratio: float = 0.90
    crisis_threshold: float = 0.02
    # acceptance probability by |RT - AG|; distances beyond the list get 0
    match_probabilities: list[float] = field(default_factory=lambda: [0.80, 0.20, 0.10])
    n_clusters: int = 41
    n_ratings: int = 10
    n_appetite_groups: int = 11
    # capital remuneration enters net income with this sign (-1 = cost)
    cinc_sign: float = 1.0
    # cycles an unplaced investor tranche keeps retrying before it lapses
    idle_retry_months: int = 1

    # populations and initial conditions
    # investors start as if 1/t_inv of wealth had been committed in each prior month
    staggered_entry: bool = True
    n_banks: int = 250
    n_investors: int = 2500
    bank_capital_median: float = 100.0
    bank_capital_sigma: float = 0.5
    investor_wealth_median: float = 100.0
    investor_wealth_sigma: float = 0.5
    tcr_range: tuple[float, float] = (0.10, 0.20)
    sr_range: tuple[float, float] = (0.05, 0.15)
    bn_range: tuple[float, float] = (0.0, 0.5)
    rex_range: tuple[float, float] = (0.005, 0.02)
    # aggregate cluster market capacity as a multiple of aggregate initial wealth
    market_capacity_ratio: float = 1.0

    # time axis
    start: str = "1973-01"
    end: str = "2011-12"
    rates_path: str | None = None

    # exports
    snapshot_months: list[str] = field(
        default_factory=lambda: ["1975-01", "1985-01", "1995-01", "2005-01"]
    )
    snapshot_fraction: float = 0.01

    evolution: EvolutionParams = field(default_factory=EvolutionParams)

    def validate(self) -> None:
        fractions = {
            "CL": self.CL, "TT": self.TT, "pr": self.pr, "vol": self.vol,
            "rec": self.rec, "Spr": self.Spr, "min_capital_ratio": self.min_capital_ratio,
            "dividend_ratio": self.dividend_ratio,
            "investor_distribution_ratio": self.investor_distribution_ratio,
            "crisis_threshold": self.crisis_threshold,
            "snapshot_fraction": self.snapshot_fraction,
        }
        for name, value in fractions.items():
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name}={value} is not a fraction in [0, 1]")
        for name, value in (("CL", self.CL), ("TT", self.TT)):
            if value <= 0.0:
                raise ConfigError(f"{name} must be positive")
            nt = 1.0 / value
            if abs(nt - round(nt)) > 1e-9:
                raise ConfigError(f"1/{name} must be an integer, got {nt}")
        if self.t_inv <= 0 or self.t_inv % 12:
            raise ConfigError("t_inv must be a positive multiple of 12")
        if self.m <= 0:
            raise ConfigError("m must be positive")
        if any(not 0.0 <= p <= 1.0 for p in self.match_probabilities):
            raise ConfigError("match_probabilities must be probabilities")
        if self.n_clusters < 1 or self.n_banks < 1 or self.n_investors < 1:
            raise ConfigError("population sizes must be positive")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2 must be positive")
        lo, hi = self.tcr_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ConfigError("tcr_range must lie in (0, 1]")
        lo, hi = self.bn_range
        if not 0.0 <= lo <= hi < 1.0:
            raise ConfigError("bn_range must lie in [0, 1)")
        self.evolution.validate()

    @property
    def n_tranches_investor(self) -> int:
        return int(round(1.0 / self.CL))

    @property
    def n_tranches_lending(self) -> int:
        return int(round(1.0 / self.TT))

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        for key in ("tcr_range", "sr_range", "bn_range", "rex_range"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        data = dict(data)
        evo = data.pop("evolution", {}) or {}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        evo_known = {f.name for f in dataclasses.fields(EvolutionParams)}
        if set(evo) - evo_known:
            raise ConfigError(f"unknown evolution keys: {sorted(set(evo) - evo_known)}")
        for key in ("tcr_range", "sr_range", "bn_range", "rex_range"):
            if key in data:
                try:
                    lo, hi = (float(v) for v in data[key])
                except (TypeError, ValueError):
                    raise ConfigError(f"{key} must be a pair of numbers, got {data[key]!r}") from None
                data[key] = (lo, hi)
        cfg = cls(**data, evolution=EvolutionParams(**evo))
        cfg.validate()
        return cfg


def _coerce(text: str) -> Any:
    """Parse an override value: JSON literal if possible, else bare string."""
    lowered = text.strip()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return json.loads(lowered)
    except json.JSONDecodeError:
        return lowered


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``dotted.key=value`` overrides to a nested config mapping."""
    out = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a scalar")
        node[parts[-1]] = _coerce(value)
    return out


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> SimConfig:
    data: dict[str, Any] = SimConfig().to_dict()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                file_data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        evo = file_data.pop("evolution", {})
        data.update(file_data)
        data["evolution"].update(evo)
    if overrides:
        data = apply_overrides(data, overrides)
    try:
        return SimConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def monthly_infection_probability(annual: float) -> float:
    return 1.0 - (1.0 - annual) ** (1.0 / 12.0)


__all__ = [
    "ConfigError",
    "EvolutionParams",
    "SimConfig",
    "apply_overrides",
    "load_config",
    "monthly_infection_probability",
]
