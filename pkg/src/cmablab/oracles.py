"""Offline combinatorial optimizers consulted by the bandit policies.

Each oracle maps a per-arm mean estimate to a feasible super arm. The first
three are exact for their problems; the seed-set oracle is a budgeted
reverse-reachable-set greedy with an (alpha, beta) guarantee.
"""

from __future__ import annotations

import heapq
import math
from itertools import combinations

import numpy as np

from .core import (ConfigurationError, ItemSubset, Path, RankedLists,
                   SeedSet, SimulationError)
from .environments import InfluenceGraph, RoutingInstance

TIE_LOWEST = "lowest"
TIE_HIGHEST = "highest"

_SUBSET_LIMIT = 1_000_000
_BLOCKED_WEIGHT = 1e18

_subset_cache: dict = {}


def _check_tie_rule(tie_rule: str) -> None:
    if tie_rule not in (TIE_LOWEST, TIE_HIGHEST):
        raise ConfigurationError(f"unknown tie rule {tie_rule!r}")


def topk_oracle(theta, V: int, W: int, K: int, tie_rule: str = TIE_LOWEST) -> RankedLists:
    """Best K items per user, ranked by descending mean estimate.

    Ties go to the lowest item id (or highest under tie_rule='highest').
    Order within a list never changes the list value, but the ranking is kept
    deterministic so feedback streams are reproducible.
    """
    _check_tie_rule(tie_rule)
    if not 1 <= int(K) <= int(V):
        raise ConfigurationError("need 1 <= K <= V")
    th = np.asarray(theta, dtype=np.float64).reshape(V, W)
    if tie_rule == TIE_LOWEST:
        idx = np.argsort(-th, axis=0, kind="stable")[:K]
    else:
        idx = (V - 1) - np.argsort(-th[::-1], axis=0, kind="stable")[:K]
    return RankedLists(tuple(tuple(int(i) for i in idx[:, j]) for j in range(W)))


def _subsets(V: int, K: int) -> np.ndarray:
    key = (V, K)
    got = _subset_cache.get(key)
    if got is None:
        got = np.array(list(combinations(range(V), K)), dtype=np.intp)
        _subset_cache[key] = got
    return got


def exhaustive_subset_oracle(theta, V: int, W: int, K: int, p_star: float,
                             tie_rule: str = TIE_LOWEST) -> ItemSubset:
    """Exact argmax over all item K-subsets of the coverage objective.

    Scores every subset in chunks using the identity that advertising a
    subset rescales its rows of the no-attraction product. Ties keep the
    lexicographically smallest subset (largest under tie_rule='highest').
    """
    _check_tie_rule(tie_rule)
    if not 1 <= int(K) <= int(V):
        raise ConfigurationError("need 1 <= K <= V")
    if math.comb(V, K) > _SUBSET_LIMIT:
        raise ConfigurationError("subset oracle limited to 1e6 candidate subsets")
    th = np.asarray(theta, dtype=np.float64).reshape(V, W)
    subs = _subsets(V, K)
    if np.any(p_star * th >= 1.0):
        # the ratio trick divides by 1 - p_star * theta; fall back to direct scoring
        best_val, best = -np.inf, None
        for c in combinations(range(V), K):
            q = 1.0 - p_star * th
            rows = np.asarray(c, dtype=np.intp)
            q[rows] = 1.0 - th[rows]
            v = float((1.0 - q.prod(axis=0)).sum())
            if (v > best_val) if tie_rule == TIE_LOWEST else (v >= best_val):
                best_val, best = v, c
        return ItemSubset(best)
    base = np.prod(1.0 - p_star * th, axis=0)  # (W,)
    ratio = (1.0 - th) / (1.0 - p_star * th)  # (V, W)
    best_val, best_row = -np.inf, None
    for lo in range(0, subs.shape[0], 2048):
        chunk = subs[lo:lo + 2048]
        prod = ratio[chunk].prod(axis=1)  # (chunk, W)
        scores = (1.0 - base[None, :] * prod).sum(axis=1)
        if tie_rule == TIE_LOWEST:
            i = int(np.argmax(scores))
            if scores[i] > best_val:
                best_val, best_row = float(scores[i]), chunk[i]
        else:
            rev = scores[::-1]
            i = scores.size - 1 - int(np.argmax(rev))
            if scores[i] >= best_val:
                best_val, best_row = float(scores[i]), chunk[i]
    return ItemSubset(tuple(int(i) for i in best_row))


def reliable_path_oracle(inst: RoutingInstance, theta,
                         tie_rule: str = TIE_LOWEST) -> Path:
    """Most reliable source-to-destination path under the given link means.

    Dijkstra on weights -ln(theta); zero-mean links carry a huge weight so
    any path of live links is preferred, and if the best route still crosses
    a dead link there is no usable path at all. Ties prefer fewer hops, then
    the lexicographically smallest edge-id sequence (largest under
    tie_rule='highest').
    """
    _check_tie_rule(tie_rule)
    th = np.asarray(theta, dtype=np.float64)
    with np.errstate(divide="ignore"):
        w = np.where(th > 0.0, -np.log(np.minimum(th, 1.0)), _BLOCKED_WEIGHT)
    visited = np.zeros(inst.n, dtype=bool)
    heap = [(0.0, 0, (), inst.source, ())]
    while heap:
        dist, hops, _key, v, edges = heapq.heappop(heap)
        if visited[v]:
            continue
        visited[v] = True
        if v == inst.destination:
            if dist >= _BLOCKED_WEIGHT:
                raise SimulationError("no path with positive reliability")
            return Path(edges)
        for e in range(inst.out_ptr[v], inst.out_ptr[v + 1]):
            u = int(inst.dst[e])
            if visited[u]:
                continue
            tag = e if tie_rule == TIE_LOWEST else -e
            heapq.heappush(heap, (dist + float(w[e]), hops + 1,
                                  _key + (tag,), u, edges + (e,)))
    raise ConfigurationError("destination unreachable")


def _rr_membership(graph: InfluenceGraph, theta: np.ndarray, roots: np.ndarray,
                   rng, chunk: int = 4096):
    """Reverse-reachable sets for the given roots, batched.

    Returns (set_ids, node_ids, widths): the membership pairs of every set
    and, per set, the total in-degree of its members. Each batch runs one
    breadth-first expansion level at a time across all its sets, drawing one
    uniform per candidate incoming edge.
    """
    parts_s: list[np.ndarray] = []
    parts_n: list[np.ndarray] = []
    n = graph.n
    for start in range(0, roots.size, chunk):
        sub = roots[start:start + chunk].astype(np.int64)
        B = sub.size
        visited = np.zeros((B, n), dtype=bool)
        rows = np.arange(B, dtype=np.int64)
        nodes = sub
        visited[rows, nodes] = True
        parts_s.append(rows + start)
        parts_n.append(nodes.copy())
        while nodes.size:
            counts = graph.in_deg[nodes]
            total = int(counts.sum())
            if total == 0:
                break
            rep_rows = np.repeat(rows, counts)
            cum = np.cumsum(counts)
            offs = np.arange(total) - np.repeat(cum - counts, counts)
            eidx = np.repeat(graph.in_ptr[nodes], counts) + offs
            live = rng.random(total) < theta[graph.in_eid[eidx]]
            rr = rep_rows[live]
            ss = graph.in_src[eidx[live]]
            if rr.size == 0:
                break
            _, first = np.unique(rr * n + ss, return_index=True)
            rr, ss = rr[first], ss[first]
            fresh = ~visited[rr, ss]
            rr, ss = rr[fresh], ss[fresh]
            if rr.size == 0:
                break
            visited[rr, ss] = True
            parts_s.append(rr + start)
            parts_n.append(ss)
            rows, nodes = rr, ss
    set_ids = np.concatenate(parts_s)
    node_ids = np.concatenate(parts_n)
    widths = np.bincount(set_ids, weights=graph.in_deg[node_ids],
                         minlength=roots.size)
    return set_ids, node_ids, widths


def _greedy_cover(set_ids: np.ndarray, node_ids: np.ndarray, n_sets: int,
                  n: int, K: int):
    """Greedy max coverage of the sets; K seeds, ties to the lowest node id.

    When no remaining node covers anything, padding continues with the lowest
    unchosen ids so the seed set always has exactly K nodes.
    """
    chosen: list[int] = []
    covered = np.zeros(n_sets, dtype=bool)
    for _ in range(K):
        if set_ids.size:
            alive = ~covered[set_ids]
            cnt = np.bincount(node_ids[alive], minlength=n).astype(np.int64)
        else:
            cnt = np.zeros(n, dtype=np.int64)
        for c in chosen:
            cnt[c] = -1
        pick = int(np.argmax(cnt))
        chosen.append(pick)
        if set_ids.size:
            covered[set_ids[node_ids == pick]] = True
    frac = float(covered.mean()) if n_sets else 0.0
    return SeedSet(tuple(sorted(chosen))), frac


def rr_greedy_oracle(graph: InfluenceGraph, theta, K: int, rng,
                     epsilon: float = 0.5, ell: float = 1.0,
                     rr_budget: int = 1_000_000, kpt_coef: float = 6.0,
                     theta_coef: float = 1.0):
    """Near-optimal seed set by sampled reverse-reachable-set coverage.

    Three phases share one budget of reverse-reachable sets: a doubling
    search for a lower bound on the optimal spread, a greedy-based
    refinement of that bound, and the final sampling pass whose size the
    bound dictates. Set roots cycle through the nodes. If the budget runs
    out the result is still returned, flagged truncated. Returns
    (SeedSet, info dict).
    """
    n = graph.n
    if not 1 <= int(K) <= n:
        raise ConfigurationError("need 1 <= K <= n")
    if rr_budget < 1:
        raise ConfigurationError("rr_budget must be positive")
    if not 0.0 < epsilon < 1.0:
        raise ConfigurationError("epsilon must lie in (0, 1)")
    if ell < 1.0:
        raise ConfigurationError("ell must be at least 1")
    th = np.asarray(theta, dtype=np.float64)
    if th.shape != (graph.m,):
        raise ConfigurationError("theta must hold one mean per edge")
    K = int(K)
    if n == 1:
        return SeedSet((0,)), {"n_sets": 0, "kpt": 1.0, "truncated": False,
                               "coverage": 1.0, "spread_estimate": 1.0}

    used = 0
    truncated = False

    def draw(count: int):
        nonlocal used, truncated
        gen = min(count, rr_budget - used)
        if gen < count:
            truncated = True
        if gen <= 0:
            return None
        roots = (used + np.arange(gen, dtype=np.int64)) % n
        out = _rr_membership(graph, th, roots, rng)
        used += gen
        return out

    # phase 1: doubling search for a spread lower bound
    kpt = 1.0
    log2n = math.log2(n)
    base_ci = kpt_coef * ell * math.log(n) \
        + (kpt_coef * math.log(log2n) if log2n > 1.0 else 0.0)
    m_edges = max(graph.m, 1)
    for i in range(1, max(2, math.ceil(log2n))):
        got = draw(int(math.ceil(base_ci * (2.0 ** i))))
        if got is None:
            break
        _, _, widths = got
        kappa = 1.0 - (1.0 - widths / m_edges) ** K
        mean_k = float(kappa.mean())
        if mean_k > 2.0 ** (-i):
            kpt = max(1.0, n * mean_k / 2.0)
            break

    # phase 2: greedy refinement of the bound
    eps1 = 5.0 * (ell * epsilon ** 2 / (ell + K)) ** (1.0 / 3.0)
    lam1 = (2.0 + eps1) * ell * n * math.log(n) / eps1 ** 2
    seeds = cov = None
    got = draw(int(math.ceil(lam1 / kpt)))
    kpt_plus = kpt
    if got is not None:
        set_ids, node_ids, widths = got
        seeds, cov = _greedy_cover(set_ids, node_ids, widths.size, n, K)
        kpt_plus = max(kpt, cov * n / (1.0 + eps1))

    # phase 3: final sampling at the size the refined bound dictates
    ln_cnk = math.lgamma(n + 1) - math.lgamma(K + 1) - math.lgamma(n - K + 1)
    lam = (8.0 + 2.0 * epsilon) * n * (ell * math.log(n) + ln_cnk + math.log(2.0)) \
        / epsilon ** 2
    want = int(math.ceil(theta_coef * lam / kpt_plus))
    want += (-want) % n  # whole root cycles, so equal nodes stay tied
    got = draw(want)
    if got is not None:
        set_ids, node_ids, widths = got
        seeds, cov = _greedy_cover(set_ids, node_ids, widths.size, n, K)
    if seeds is None:
        seeds, cov = _greedy_cover(np.empty(0, dtype=np.int64),
                                   np.empty(0, dtype=np.int64), 0, n, K)
    info = {"n_sets": used, "kpt": float(kpt_plus), "truncated": truncated,
            "coverage": float(cov), "spread_estimate": float(cov * n)}
    return seeds, info


class TopKOracle:
    name = "top-k"
    is_exact = True

    def __init__(self, V: int, W: int, K: int, tie_rule: str = TIE_LOWEST):
        _check_tie_rule(tie_rule)
        self.V, self.W, self.K = int(V), int(W), int(K)
        self.tie_rule = tie_rule

    def propose(self, theta, rng=None) -> RankedLists:
        return topk_oracle(theta, self.V, self.W, self.K, self.tie_rule)


class SubsetOracle:
    name = "exhaustive-subset"
    is_exact = True

    def __init__(self, V: int, W: int, K: int, p_star: float,
                 tie_rule: str = TIE_LOWEST):
        _check_tie_rule(tie_rule)
        if math.comb(V, K) > _SUBSET_LIMIT:
            raise ConfigurationError("subset oracle limited to 1e6 candidate subsets")
        self.V, self.W, self.K = int(V), int(W), int(K)
        self.p_star = float(p_star)
        self.tie_rule = tie_rule

    def propose(self, theta, rng=None) -> ItemSubset:
        return exhaustive_subset_oracle(theta, self.V, self.W, self.K,
                                        self.p_star, self.tie_rule)


class PathOracle:
    name = "reliable-path"
    is_exact = True

    def __init__(self, inst: RoutingInstance, tie_rule: str = TIE_LOWEST):
        _check_tie_rule(tie_rule)
        self.inst = inst
        self.tie_rule = tie_rule

    def propose(self, theta, rng=None) -> Path:
        return reliable_path_oracle(self.inst, theta, self.tie_rule)


class RrGreedyOracle:
    """Budgeted reverse-reachable greedy with an (alpha, beta) guarantee."""

    name = "rr-greedy"
    is_exact = False

    def __init__(self, graph: InfluenceGraph, K: int, epsilon: float = 0.5,
                 ell: float = 1.0, rr_budget: int = 1_000_000,
                 kpt_coef: float = 6.0, theta_coef: float = 1.0):
        if not 1 <= int(K) <= graph.n:
            raise ConfigurationError("need 1 <= K <= n")
        if not 0.0 < epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        if ell < 1.0:
            raise ConfigurationError("ell must be at least 1")
        self.graph = graph
        self.K = int(K)
        self.epsilon = float(epsilon)
        self.ell = float(ell)
        self.rr_budget = int(rr_budget)
        self.kpt_coef = float(kpt_coef)
        self.theta_coef = float(theta_coef)
        self.truncation_count = 0
        self.last_info: dict = {}

    @property
    def alpha(self) -> float:
        return 1.0 - 1.0 / math.e - self.epsilon

    @property
    def beta(self) -> float:
        return 1.0 - 3.0 * self.graph.n ** (-self.ell)

    def propose(self, theta, rng) -> SeedSet:
        if rng is None:
            raise ConfigurationError("seed-set oracle needs a random generator")
        seeds, info = rr_greedy_oracle(self.graph, theta, self.K, rng,
                                       self.epsilon, self.ell, self.rr_budget,
                                       self.kpt_coef, self.theta_coef)
        self.last_info = info
        if info["truncated"]:
            self.truncation_count += 1
        return seeds
