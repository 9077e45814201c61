"""Bandit policies over Bernoulli base arms under semi-bandit feedback.

Every policy exposes the same two calls: indices(t, rng) produces a per-arm
score vector for the oracle, update(feedback, rng) folds in one round of
observations. Round counters start at t = 1.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .core import ConfigurationError, Feedback


class CtsState:
    """Per-arm Beta posteriors, stored as the two count vectors."""

    __slots__ = ("a", "b")

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.a = a
        self.b = b


def make_cts_state(m: int, prior_a: float = 1.0, prior_b: float = 1.0) -> CtsState:
    if prior_a <= 0.0 or prior_b <= 0.0:
        raise ConfigurationError("Beta priors must be positive")
    return CtsState(np.full(m, float(prior_a)), np.full(m, float(prior_b)))


def cts_sample(state: CtsState, rng) -> np.ndarray:
    return rng.beta(state.a, state.b)


def cts_update(state: CtsState, fb: Feedback, rng) -> None:
    """Posterior update with Bernoulli rounding of fractional outcomes.

    An outcome strictly inside (0, 1) is rounded to a coin flip with that
    success probability, one uniform per fractional entry in feedback order.
    Outcomes exactly 0 or 1 consume no randomness at all, so binary
    environments replay identically whether or not rounding code runs.
    """
    if len(fb) == 0:
        return
    x = fb.outcomes
    y = x.copy()
    fr = (x > 0.0) & (x < 1.0)
    if fr.any():
        y[fr] = (rng.random(int(fr.sum())) < x[fr]).astype(np.float64)
    state.a[fb.arm_ids] += y
    state.b[fb.arm_ids] += 1.0 - y


class UcbState:
    """Per-arm pull counts and outcome totals shared by the UCB family."""

    __slots__ = ("counts", "totals")

    def __init__(self, counts: np.ndarray, totals: np.ndarray):
        self.counts = counts
        self.totals = totals


def make_ucb_state(m: int) -> UcbState:
    return UcbState(np.zeros(m), np.zeros(m))


def ucb_update(state: UcbState, fb: Feedback) -> None:
    if len(fb) == 0:
        return
    state.counts[fb.arm_ids] += 1.0
    state.totals[fb.arm_ids] += fb.outcomes


# Deprioritization factor for observed arms during the UCB init phase:
# close enough to 1 to keep the observed ranking intact, yet strictly
# below any still-unobserved arm's index of exactly 1.
INIT_SCALE = 1.0 - 2.0 ** -30


def cucb_indices(state: UcbState, t: int, coef: float = 1.5) -> np.ndarray:
    if t < 1:
        raise ConfigurationError("round counter starts at 1")
    out = np.empty_like(state.totals)
    _kernels.cucb_block(state.totals, state.counts, np.log(t), coef, out)
    return out


def klucb_threshold(t: int) -> float:
    if t < 1:
        raise ConfigurationError("round counter starts at 1")
    return float(_kernels.klucb_threshold(float(t)))


def klucb_index(mu: float, count: float, t: int) -> float:
    return float(_kernels.klucb_scalar(float(mu), float(count), _kernels.klucb_threshold(float(t))))


def klucb_indices(state: UcbState, t: int) -> np.ndarray:
    out = np.empty_like(state.totals)
    _kernels.klucb_block(state.totals, state.counts,
                         _kernels.klucb_threshold(float(t)), out)
    return out


def ts_cascade_sample(state: UcbState, t: int, rng,
                      empirical_variance: bool = True) -> np.ndarray:
    z = rng.standard_normal()
    out = np.empty_like(state.totals)
    _kernels.ts_cascade_block(state.totals, state.counts, float(t), z,
                              empirical_variance, out)
    return out


class CtsPolicy:
    """Thompson sampling: Beta posteriors, one independent draw per arm."""

    name = "cts"

    def __init__(self, m: int, prior_a: float = 1.0, prior_b: float = 1.0):
        self.m = int(m)
        self.state = make_cts_state(self.m, prior_a, prior_b)

    def indices(self, t: int, rng) -> np.ndarray:
        return cts_sample(self.state, rng)

    def update(self, fb: Feedback, rng) -> None:
        cts_update(self.state, fb, rng)


class _UcbBase:
    def __init__(self, m: int):
        self.m = int(m)
        self.state = make_ucb_state(self.m)

    def update(self, fb: Feedback, rng) -> None:
        ucb_update(self.state, fb)


class CucbPolicy(_UcbBase):
    """Clipped UCB1 index per arm; unobserved arms score 1.

    With init_phase enabled (the default, matching the original algorithm's
    explicit initialization), rounds in which some arm is still unobserved
    deprioritize every observed arm below the unobserved ones, so the oracle
    keeps scheduling fresh arms first. The relative order among observed
    arms is preserved and the vector stays inside [0, 1].
    """

    name = "cucb"

    def __init__(self, m: int, exploration_coef: float = 1.5,
                 init_phase: bool = True):
        super().__init__(m)
        if exploration_coef <= 0.0:
            raise ConfigurationError("exploration_coef must be positive")
        self.exploration_coef = float(exploration_coef)
        self.init_phase = bool(init_phase)

    def indices(self, t: int, rng) -> np.ndarray:
        v = cucb_indices(self.state, t, self.exploration_coef)
        if self.init_phase and (self.state.counts == 0.0).any():
            v[self.state.counts > 0.0] *= INIT_SCALE
        return v


class CascadeUcb1Policy(CucbPolicy):
    """Same clipped UCB1 index; registered separately because the cascading
    literature treats it as its own baseline."""

    name = "cascade-ucb1"


class CascadeKlUcbPolicy(_UcbBase):
    """Bernoulli KL divergence upper-confidence index per arm."""

    name = "cascade-klucb"

    def indices(self, t: int, rng) -> np.ndarray:
        return klucb_indices(self.state, t)


class TsCascadePolicy(_UcbBase):
    """Gaussian-perturbed empirical means with one shared normal per round."""

    name = "ts-cascade"

    def __init__(self, m: int, ts_width: str = "variance"):
        super().__init__(m)
        if ts_width not in ("variance", "hoeffding"):
            raise ConfigurationError(f"unknown ts_width {ts_width!r}")
        self.ts_width = ts_width

    def indices(self, t: int, rng) -> np.ndarray:
        return ts_cascade_sample(self.state, t, rng, self.ts_width == "variance")


_REGISTRY = {
    "cts": CtsPolicy,
    "cucb": CucbPolicy,
    "cascade-ucb1": CascadeUcb1Policy,
    "cascade-klucb": CascadeKlUcbPolicy,
    "ts-cascade": TsCascadePolicy,
}

POLICY_NAMES = tuple(sorted(_REGISTRY))


def make_policy(name: str, m: int, **knobs):
    cls = _REGISTRY.get(name)
    if cls is None:
        raise ConfigurationError(
            f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
    return cls(m, **knobs)


def select(policy, oracle, t: int, rng):
    """One proposal step: score the arms, then ask the oracle for a super arm."""
    theta = policy.indices(t, rng)
    return oracle.propose(theta, rng)
