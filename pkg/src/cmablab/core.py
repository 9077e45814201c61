"""Core data types and model-level operations shared across the package.

A problem has m base arms with unknown means in [0, 1]. Playing a super arm
triggers a random subset of base arms; the learner observes the outcome of
every triggered arm (semi-bandit feedback) and the per-round regret is
measured against the best super arm under the true means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

PACKAGE_VERSION = "0.1.0"

#: absolute tolerance for closed-form equality checks on unit-interval reals
TOL = 1e-9

EXPECTED = "expected"
REALIZED_APPROX = "realized-approx"
REGRET_MODES = (EXPECTED, REALIZED_APPROX)


class ConfigurationError(Exception):
    """Invalid configuration, arguments, or unsupported combination (CLI exit 2)."""


class IngestError(Exception):
    """Malformed or inconsistent input data (CLI exit 3)."""


class SimulationError(Exception):
    """Runtime failure inside a simulation (CLI exit 4)."""


@dataclass(frozen=True)
class RankedLists:
    """One ranked K-list of item ids per user; lists[j][k] is user j's rank-k item."""

    lists: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for lst in self.lists:
            if len(set(lst)) != len(lst):
                raise ValueError("a ranked list repeats an item")

    @property
    def n_users(self) -> int:
        return len(self.lists)


@dataclass(frozen=True)
class ItemSubset:
    """Unordered item subset, stored as a strictly increasing id tuple."""

    items: tuple[int, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.items, self.items[1:])):
            raise ValueError("items must be strictly increasing")


@dataclass(frozen=True)
class SeedSet:
    """Seed nodes of an influence cascade, stored strictly increasing."""

    nodes: tuple[int, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.nodes, self.nodes[1:])):
            raise ValueError("nodes must be strictly increasing")


@dataclass(frozen=True)
class Path:
    """Edge ids of a source-to-destination walk, in walk order, no repeats."""

    edges: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("a path must not repeat an edge")


SuperArm = Union[RankedLists, ItemSubset, SeedSet, Path]


@dataclass
class Feedback:
    """Triggered base arms of one round and their observed outcomes."""

    arm_ids: np.ndarray
    outcomes: np.ndarray
    round_index: int = 0

    def __post_init__(self):
        self.arm_ids = np.asarray(self.arm_ids, dtype=np.int64)
        self.outcomes = np.asarray(self.outcomes, dtype=np.float64)
        if self.arm_ids.shape != self.outcomes.shape or self.arm_ids.ndim != 1:
            raise ValueError("arm_ids and outcomes must be aligned 1-d arrays")

    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.arm_ids.tolist(), self.outcomes.tolist()))

    def __len__(self) -> int:
        return int(self.arm_ids.size)


def validate_feedback(fb: Feedback, m: int) -> None:
    """Raise SimulationError unless fb holds distinct in-range arms with unit-interval outcomes."""
    if fb.arm_ids.size != np.unique(fb.arm_ids).size:
        raise SimulationError("feedback repeats a base arm")
    if fb.arm_ids.size and (fb.arm_ids.min() < 0 or fb.arm_ids.max() >= m):
        raise SimulationError("feedback arm id out of range")
    if fb.outcomes.size and (fb.outcomes.min() < 0.0 or fb.outcomes.max() > 1.0):
        raise SimulationError("feedback outcome outside [0, 1]")


@dataclass(frozen=True)
class RegretRecord:
    round_index: int
    instantaneous: float
    cumulative: float
    mode: str


def regret_step(opt_value: float, achieved_value: float, mode: str) -> float:
    """Instantaneous regret of one round.

    In expected mode the benchmark is the exact optimum, so a materially
    negative increment means the oracle or reward path is broken. In
    realized-approximation mode negative increments are legitimate (the
    benchmark is only an approximation-factor fraction of the optimum).
    """
    if mode not in REGRET_MODES:
        raise ConfigurationError(f"unknown regret mode {mode!r}")
    inc = float(opt_value) - float(achieved_value)
    if mode == EXPECTED and inc < -TOL:
        raise SimulationError(f"negative expected regret {inc:g}; oracle not optimal")
    return inc


def _closed_form(env):
    reward = getattr(env, "reward", None)
    trig = getattr(env, "triggering_set", None)
    if reward is None or trig is None:
        raise ConfigurationError(
            f"{type(env).__name__} does not expose a closed-form reward")
    return reward, trig


def check_lipschitz(env, S, mu, mu_alt, bound: float = 1.0) -> bool:
    """True iff |r(S, mu) - r(S, mu_alt)| <= bound * sum_{i in triggering set} |mu_i - mu_alt_i|."""
    reward, trig = _closed_form(env)
    mu = np.asarray(mu, dtype=np.float64)
    mu_alt = np.asarray(mu_alt, dtype=np.float64)
    arms = np.asarray(trig(S), dtype=np.intp)
    lhs = abs(reward(S, mu) - reward(S, mu_alt))
    rhs = bound * float(np.abs(mu[arms] - mu_alt[arms]).sum())
    return lhs <= rhs + TOL


def check_monotonicity(env, S, mu_lo, mu_hi) -> bool:
    """True iff r(S, mu_lo) <= r(S, mu_hi); requires mu_lo <= mu_hi componentwise."""
    reward, _ = _closed_form(env)
    mu_lo = np.asarray(mu_lo, dtype=np.float64)
    mu_hi = np.asarray(mu_hi, dtype=np.float64)
    if not np.all(mu_lo <= mu_hi):
        raise ValueError("mu_lo must be componentwise <= mu_hi")
    return reward(S, mu_lo) <= reward(S, mu_hi) + TOL
