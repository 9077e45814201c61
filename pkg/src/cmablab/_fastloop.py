"""Fused simulation loop for single-user cascading instances.

Large-horizon cascading runs spend their time in tiny per-round numpy calls;
this module compiles the whole round loop instead. The loop consumes the
generator stream in exactly the same order as the generic path (per-arm Beta
draws, one shared normal, the full K-uniform feedback block), so for any
supported configuration the two paths produce bit-identical regret curves.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._kernels import cucb_block, klucb_block, klucb_threshold, ts_cascade_block
from .core import EXPECTED, SimulationError, TOL
from .environments import DISJUNCTIVE, CascadingInstance
from .oracles import TIE_LOWEST, TopKOracle
from .policies import INIT_SCALE

POLICY_IDS = {"cts": 0, "cucb": 1, "cascade-ucb1": 1, "cascade-klucb": 2,
              "ts-cascade": 3}


@njit(cache=True)
def _cascade_w1_loop(p, K, T, policy_id, disjunctive, coef, init_scale,
                     empirical_variance, a, b, counts, totals, opt_value,
                     rng, cum):
    V = p.shape[0]
    th = np.empty(V)
    sel = np.empty(K, dtype=np.int64)
    chosen = np.zeros(V, dtype=np.bool_)
    u = np.empty(K)
    c = 0.0
    min_inc = 0.0
    for t in range(1, T + 1):
        tf = float(t)
        if policy_id == 0:
            for i in range(V):
                th[i] = rng.beta(a[i], b[i])
        elif policy_id == 1:
            cucb_block(totals, counts, np.log(tf), coef, th)
            if init_scale < 1.0:
                unseen = False
                for i in range(V):
                    if counts[i] == 0.0:
                        unseen = True
                        break
                if unseen:
                    for i in range(V):
                        if counts[i] > 0.0:
                            th[i] *= init_scale
        elif policy_id == 2:
            klucb_block(totals, counts, klucb_threshold(tf), th)
        else:
            z = rng.standard_normal()
            ts_cascade_block(totals, counts, tf, z, empirical_variance, th)
        # top-K by descending score, ties to the lowest item id
        for k in range(K):
            best = -1
            bv = -1.0
            for i in range(V):
                if not chosen[i] and th[i] > bv:
                    bv = th[i]
                    best = i
            sel[k] = best
            chosen[best] = True
        for k in range(K):
            chosen[sel[k]] = False
        # feedback block is drawn in full, past the stopping point
        for k in range(K):
            u[k] = rng.random()
        if disjunctive:
            stop = K
            for k in range(K):
                if u[k] < p[sel[k]]:
                    stop = k + 1
                    break
            r = 1.0
            for k in range(K):
                r *= 1.0 - p[sel[k]]
            r = 1.0 - r
        else:
            stop = K
            for k in range(K):
                if u[k] >= p[sel[k]]:
                    stop = k + 1
                    break
            r = 1.0
            for k in range(K):
                r *= p[sel[k]]
        inc = opt_value - r
        if inc < min_inc:
            min_inc = inc
        c += inc
        cum[t - 1] = c
        if policy_id == 0:
            for k in range(stop):
                i = sel[k]
                if u[k] < p[i]:
                    a[i] += 1.0
                else:
                    b[i] += 1.0
        else:
            for k in range(stop):
                i = sel[k]
                counts[i] += 1.0
                if u[k] < p[i]:
                    totals[i] += 1.0
    return min_inc


def supports(env, policy, oracle, regret_mode: str) -> bool:
    return (isinstance(env, CascadingInstance) and env.W == 1
            and isinstance(oracle, TopKOracle) and oracle.tie_rule == TIE_LOWEST
            and oracle.K == env.K
            and getattr(policy, "name", None) in POLICY_IDS
            and regret_mode == EXPECTED)


def run_cascade_w1(env: CascadingInstance, policy, T: int, rng,
                   opt_value: float) -> np.ndarray:
    """Run one full horizon and return the cumulative regret curve.

    Mutates the policy state exactly as the generic loop would.
    """
    policy_id = POLICY_IDS[policy.name]
    p = np.ascontiguousarray(env.p[:, 0])
    coef = float(getattr(policy, "exploration_coef", 1.5))
    scale = INIT_SCALE if getattr(policy, "init_phase", False) else 1.0
    emp = getattr(policy, "ts_width", "variance") == "variance"
    if policy_id == 0:
        a, b = policy.state.a, policy.state.b
        counts = totals = np.zeros(1)
    else:
        a = b = np.zeros(1)
        counts, totals = policy.state.counts, policy.state.totals
    cum = np.empty(T)
    min_inc = _cascade_w1_loop(p, env.K, T, policy_id, env.form == DISJUNCTIVE,
                               coef, scale, emp, a, b, counts, totals,
                               float(opt_value), rng, cum)
    if min_inc < -TOL:
        raise SimulationError(
            "achieved expected reward exceeded the optimum; oracle and "
            "environment disagree")
    return cum
