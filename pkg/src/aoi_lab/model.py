"""Scenario, policy and result records shared by every solver."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .channel import ChannelModel, InfeasibleError

GENERATION_MODELS = ("NP", "P", "AT")


class DivergenceError(ArithmeticError):
    """Average age is unbounded for the requested configuration."""


class InsufficientDataError(RuntimeError):
    """Too few renewal cycles were observed to form an estimate."""


class ConfigError(ValueError):
    """Invalid user-supplied configuration."""


__all__ = [
    "Scenario", "FTT", "Threshold", "Randomized", "Tabular", "ATFixed",
    "TradeoffPoint", "DivergenceError", "InsufficientDataError", "ConfigError",
    "InfeasibleError", "GENERATION_MODELS",
]


@dataclass(frozen=True)
class Scenario:
    """Link parameters: generation probability, error probability, power table."""

    lam: float
    epsilon: float
    channel: ChannelModel
    model: str = "NP"

    def __post_init__(self):
        if self.model not in GENERATION_MODELS:
            raise ValueError(f"generation model must be one of {GENERATION_MODELS}, got {self.model!r}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon!r}")
        if self.model != "AT" and not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam!r}")

    @property
    def tau_min(self) -> int:
        return self.channel.tau_min

    @property
    def tau_max(self) -> int:
        return self.channel.tau_max

    @property
    def taus(self) -> np.ndarray:
        return self.channel.taus

    @property
    def mean_wait(self) -> float:
        """E[G~] = (1 - lambda) / lambda, the idle time before a fresh packet."""
        return (1.0 - self.lam) / self.lam

    def power(self, tau) -> float:
        return self.channel.power(tau)

    def errorfree(self) -> "Scenario":
        return replace(self, epsilon=0.0)

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def describe(self) -> dict:
        return {"lambda": self.lam, "epsilon": self.epsilon, "model": self.model,
                "channel": self.channel.describe()}

    def digest(self) -> str:
        return self._digest

    @cached_property
    def _digest(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

def _check_int(name, v, lo=0):
    if int(v) != v or v < lo:
        raise ValueError(f"{name} must be an integer >= {lo}, got {v!r}")


@dataclass(frozen=True)
class FTT:
    """Every packet is sent in ``t_s`` slots."""

    t_s: int

    def __post_init__(self):
        _check_int("t_s", self.t_s, 1)

    def action(self, age: int) -> int:
        return self.t_s


@dataclass(frozen=True)
class Threshold:
    """Long duration ``tau_a`` while the age is at most ``h``, ``tau_b`` otherwise."""

    h: int
    tau_a: int
    tau_b: int

    def __post_init__(self):
        _check_int("h", self.h)
        _check_int("tau_a", self.tau_a, 1)
        _check_int("tau_b", self.tau_b, 1)
        if self.tau_a < self.tau_b:
            raise ValueError(f"threshold policy needs tau_a >= tau_b, got {self.tau_a} < {self.tau_b}")

    def action(self, age: int) -> int:
        return self.tau_a if age <= self.h else self.tau_b


@dataclass(frozen=True)
class Randomized:
    """Duration drawn independently per packet from ``pmf`` over ``taus``."""

    taus: tuple
    pmf: tuple

    def __post_init__(self):
        taus = tuple(int(t) for t in self.taus)
        pmf = tuple(float(p) for p in self.pmf)
        if len(taus) != len(pmf) or not taus:
            raise ValueError("taus and pmf must be non-empty and the same length")
        if any(p < 0 for p in pmf) or abs(math.fsum(pmf) - 1.0) > 1e-12:
            raise ValueError("pmf must be non-negative and sum to 1")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "pmf", pmf)


@dataclass(frozen=True)
class Tabular:
    """Age-indexed durations; ``table[i]`` applies at age ``first_age + i``.

    Ages past the end of the table use the last entry, ages before the
    start use the first.
    """

    table: tuple
    first_age: int = 0

    def __post_init__(self):
        tab = tuple(int(t) for t in self.table)
        if not tab:
            raise ValueError("empty policy table")
        object.__setattr__(self, "table", tab)

    def action(self, age: int) -> int:
        i = min(max(age - self.first_age, 0), len(self.table) - 1)
        return self.table[i]

    def as_array(self, ages) -> np.ndarray:
        idx = np.clip(np.asarray(ages) - self.first_age, 0, len(self.table) - 1)
        return np.asarray(self.table)[idx]

    def is_constant(self) -> bool:
        return len(set(self.table)) == 1


@dataclass(frozen=True)
class ATFixed:
    """Age-threshold generation with fixed duration: sample when age >= ``h_a``."""

    h_a: int
    t_s: int

    def __post_init__(self):
        _check_int("h_a", self.h_a)
        _check_int("t_s", self.t_s, 1)

    def action(self, age: int) -> int:
        return self.t_s


def policy_actions(policy) -> set:
    """Durations a policy may ever use."""
    if isinstance(policy, (FTT, ATFixed)):
        return {policy.t_s}
    if isinstance(policy, Threshold):
        return {policy.tau_a, policy.tau_b}
    if isinstance(policy, Randomized):
        return {t for t, p in zip(policy.taus, policy.pmf) if p > 0}
    if isinstance(policy, Tabular):
        return set(policy.table)
    raise TypeError(f"unknown policy {policy!r}")


def policy_describe(policy) -> dict:
    if isinstance(policy, Tabular):
        return {"kind": "tabular", "first_age": policy.first_age, "n": len(policy.table)}
    d = {"kind": type(policy).__name__.lower()}
    d.update(vars(policy))
    return d


@dataclass(frozen=True)
class TradeoffPoint:
    avg_age: float
    avg_power: float
    provenance: str
    policy: object = None
    scenario_digest: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)
