"""Exhaustive reference computations used to cross-check the fast code paths.

Everything here trades speed for transparency: plain loops, full enumeration,
and explicit guards on problem size. Production code must never import this
module; tests compare its answers against the optimized implementations.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .core import ConfigurationError, ItemSubset, Path, RankedLists, SeedSet
from .environments import DISJUNCTIVE, CONJUNCTIVE, InfluenceGraph, RoutingInstance

_ENUM_LIMIT = 2_000_000


def cascading_list_value(p_col, lst, form: str = DISJUNCTIVE) -> float:
    """Value of one user's ranked list under their attraction column."""
    if form == DISJUNCTIVE:
        none = 1.0
        for i in lst:
            none *= 1.0 - float(p_col[i])
        return 1.0 - none
    if form == CONJUNCTIVE:
        val = 1.0
        for i in lst:
            val *= float(p_col[i])
        return val
    raise ConfigurationError(f"unknown cascading form {form!r}")


def best_ranked_lists(p, K: int, form: str = DISJUNCTIVE):
    """Per-user exhaustive search over item K-subsets (order cannot matter).

    Ties keep the lexicographically smallest subset. Returns (RankedLists,
    total value).
    """
    p = np.asarray(p, dtype=np.float64)
    V, W = p.shape
    if W * math.comb(V, K) > _ENUM_LIMIT:
        raise ConfigurationError("cascading enumeration too large")
    lists = []
    total = 0.0
    for j in range(W):
        best_val, best = -1.0, None
        for c in combinations(range(V), K):
            v = cascading_list_value(p[:, j], c, form)
            if v > best_val:
                best_val, best = v, c
        lists.append(best)
        total += best_val
    return RankedLists(tuple(lists)), total


def pmc_subset_value(p, items, p_star: float) -> float:
    """Expected covered-user count for an advertised item subset."""
    p = np.asarray(p, dtype=np.float64)
    V, W = p.shape
    chosen = set(int(i) for i in items)
    total = 0.0
    for j in range(W):
        none = 1.0
        for i in range(V):
            q = 1.0 if i in chosen else p_star
            none *= 1.0 - q * p[i, j]
        total += 1.0 - none
    return total


def best_item_subset(p, K: int, p_star: float):
    """Exhaustive argmax over item K-subsets; ties keep the lex smallest."""
    p = np.asarray(p, dtype=np.float64)
    V = p.shape[0]
    if math.comb(V, K) > _ENUM_LIMIT:
        raise ConfigurationError("subset enumeration too large")
    best_val, best = -1.0, None
    for c in combinations(range(V), K):
        v = pmc_subset_value(p, c, p_star)
        if v > best_val:
            best_val, best = v, c
    return ItemSubset(best), best_val


def all_simple_paths(inst: RoutingInstance, limit: int = 100_000):
    """All node-simple source-to-destination paths as edge-id tuples."""
    paths: list[tuple[int, ...]] = []
    seen = [False] * inst.n
    seen[inst.source] = True
    stack: list[int] = []

    def walk(v: int) -> None:
        if v == inst.destination:
            if len(paths) >= limit:
                raise ConfigurationError("path enumeration too large")
            paths.append(tuple(stack))
            return
        for e in range(inst.out_ptr[v], inst.out_ptr[v + 1]):
            u = int(inst.dst[e])
            if not seen[u]:
                seen[u] = True
                stack.append(e)
                walk(u)
                stack.pop()
                seen[u] = False

    walk(inst.source)
    return paths


def best_path(inst: RoutingInstance, theta, tie_rule: str = "lowest"):
    """Exhaustive max-reliability path; ties prefer fewer hops, then the
    lexicographically smallest (or largest) edge-id sequence."""
    th = np.asarray(theta, dtype=np.float64)
    best_val = -1.0
    best_key = None
    best_edges = None
    for edges in all_simple_paths(inst):
        v = 1.0
        for e in edges:
            v *= float(th[e])
        if tie_rule == "lowest":
            key = (len(edges), edges)
        else:
            key = (len(edges), tuple(-e for e in edges))
        if v > best_val or (v == best_val and key < best_key):
            best_val, best_key, best_edges = v, key, edges
    return Path(best_edges), best_val


def _world_reach(n: int, live) -> list[int]:
    # bitset transitive closure: reach[v] = nodes reachable from v over live edges
    reach = [1 << v for v in range(n)]
    changed = True
    while changed:
        changed = False
        for s, d in live:
            merged = reach[s] | reach[d]
            if merged != reach[s]:
                reach[s] = merged
                changed = True
    return reach


def _enumerate_worlds(graph: InfluenceGraph, p=None):
    if graph.m > 22:
        raise ConfigurationError("exhaustive spread limited to 22 edges")
    probs = graph.p if p is None else np.asarray(p, dtype=np.float64)
    pairs = list(zip(graph.src.tolist(), graph.dst.tolist()))
    for mask in range(1 << graph.m):
        prob = 1.0
        live = []
        for e in range(graph.m):
            if mask >> e & 1:
                prob *= probs[e]
                live.append(pairs[e])
            else:
                prob *= 1.0 - probs[e]
        if prob > 0.0:
            yield prob, _world_reach(graph.n, live)


def exact_spread(graph: InfluenceGraph, seeds: SeedSet, p=None) -> float:
    """Exact expected influenced-node count by edge-world enumeration.

    p overrides the graph's edge probabilities when given.
    """
    total = 0.0
    for prob, reach in _enumerate_worlds(graph, p):
        mask = 0
        for v in seeds.nodes:
            mask |= reach[v]
        total += prob * mask.bit_count()
    return total


def exact_spread_table(graph: InfluenceGraph, K: int) -> dict:
    """Exact expected spread of every size-K seed set."""
    sets = list(combinations(range(graph.n), K))
    vals = {s: 0.0 for s in sets}
    for prob, reach in _enumerate_worlds(graph):
        for s in sets:
            mask = 0
            for v in s:
                mask |= reach[v]
            vals[s] += prob * mask.bit_count()
    return vals


def best_seed_set(graph: InfluenceGraph, K: int):
    """Exact optimum seed set; ties keep the lex smallest."""
    table = exact_spread_table(graph, K)
    best = max(sorted(table), key=lambda s: table[s])
    return SeedSet(best), table[best]


def kl_bernoulli(p: float, q: float, eps: float = 1e-15) -> float:
    p = min(max(p, eps), 1.0 - eps)
    q = min(max(q, eps), 1.0 - eps)
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def klucb_grid(mu: float, count: float, t: int, step: float = 1e-6) -> float:
    """Grid-search reference for the KL divergence upper-confidence index."""
    if count <= 0:
        return 1.0
    if mu >= 1.0:
        return 1.0
    lt = math.log(t)
    thr = lt + 3.0 * math.log(lt) if lt > 1.0 else lt
    if thr <= 0.0:
        return mu
    budget = thr / count
    lo = max(mu, 0.0)
    qs = np.arange(lo, 1.0, step)
    pc = min(max(mu, 1e-15), 1.0 - 1e-15)
    qc = np.clip(qs, 1e-15, 1.0 - 1e-15)
    kl = pc * np.log(pc / qc) + (1.0 - pc) * np.log((1.0 - pc) / (1.0 - qc))
    ok = np.flatnonzero(kl <= budget)
    if ok.size == 0:
        return float(mu)
    return float(qs[ok[-1]])
