"""Networking environments with probabilistically triggered base arms.

Each environment owns the true per-arm means, evaluates its closed-form
expected reward at an arbitrary mean vector (where one exists), reports
analytic triggering probabilities, and simulates one feedback round. The rng
consumption order of every step function is fixed and documented so that runs
are reproducible draw for draw.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .core import (ConfigurationError, Feedback, ItemSubset, Path, RankedLists,
                   SeedSet)

DISJUNCTIVE = "disjunctive"
CONJUNCTIVE = "conjunctive"


def _as_prob_matrix(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise ConfigurationError("probability matrix must be 2-d and non-empty")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ConfigurationError("probabilities must lie in [0, 1]")
    return p


class CascadingInstance:
    """V items shown to W users in ranked K-lists.

    disjunctive: a user scans their list top down and stops at the first
    attractive item (a click); the round counts every clicking user.
    conjunctive: a user stops at the first unattractive item and only counts
    when the whole list is attractive (all-links-work semantics).

    Base arm (item i, user j) has id i * W + j. One step consumes one uniform
    per (user, rank) pair, user-major and rank-minor, drawn for the full list
    even past the stopping point.
    """

    def __init__(self, p, K: int, form: str = DISJUNCTIVE):
        self.p = _as_prob_matrix(p)
        self.V, self.W = self.p.shape
        if not 1 <= int(K) <= self.V:
            raise ConfigurationError("need 1 <= K <= V")
        if form not in (DISJUNCTIVE, CONJUNCTIVE):
            raise ConfigurationError(f"unknown cascading form {form!r}")
        self.K = int(K)
        self.form = form
        self.m = self.V * self.W
        self._users = np.arange(self.W)

    def arm_id(self, item: int, user: int) -> int:
        return item * self.W + user

    def true_means(self) -> np.ndarray:
        return self.p.ravel().copy()

    def validate_super_arm(self, S) -> None:
        if not isinstance(S, RankedLists) or len(S.lists) != self.W:
            raise ConfigurationError("super arm must hold one ranked list per user")
        for lst in S.lists:
            if len(lst) != self.K:
                raise ConfigurationError("each ranked list must have length K")
            if any(not 0 <= i < self.V for i in lst):
                raise ConfigurationError("list item id out of range")

    def _gather(self, S: RankedLists, theta) -> np.ndarray:
        idx = np.asarray(S.lists, dtype=np.intp)
        th = np.asarray(theta, dtype=np.float64).reshape(self.V, self.W)
        return th[idx, self._users[:, None]]  # (W, K)

    def reward(self, S: RankedLists, theta) -> float:
        vals = self._gather(S, theta)
        if self.form == DISJUNCTIVE:
            return float((1.0 - np.prod(1.0 - vals, axis=1)).sum())
        return float(np.prod(vals, axis=1).sum())

    def triggering_prob(self, S: RankedLists, arm: int) -> float:
        item, user = divmod(int(arm), self.W)
        lst = S.lists[user]
        if item not in lst:
            return 0.0
        k = lst.index(item)
        if k == 0:
            return 1.0
        prefix = self.p[np.asarray(lst[:k], dtype=np.intp), user]
        if self.form == DISJUNCTIVE:
            return float(np.prod(1.0 - prefix))
        return float(np.prod(prefix))

    def triggering_set(self, S: RankedLists) -> np.ndarray:
        idx = np.asarray(S.lists, dtype=np.intp)
        return np.sort((idx * self.W + self._users[:, None]).ravel())

    def step(self, S: RankedLists, rng, round_index: int = 0):
        idx = np.asarray(S.lists, dtype=np.intp)
        x = rng.random((self.W, self.K)) < self.p[idx, self._users[:, None]]
        if self.form == DISJUNCTIVE:
            hit = x.any(axis=1)
            stop = np.where(hit, x.argmax(axis=1) + 1, self.K)
            realized = float(hit.sum())
        else:
            miss = ~x
            failed = miss.any(axis=1)
            stop = np.where(failed, miss.argmax(axis=1) + 1, self.K)
            realized = float((~failed).sum())
        observed = np.arange(self.K) < stop[:, None]
        ids = (idx * self.W + self._users[:, None])[observed]
        fb = Feedback(ids, x[observed].astype(np.float64), round_index)
        return fb, realized


def casc_reward(inst: CascadingInstance, S: RankedLists, theta) -> float:
    return inst.reward(S, theta)


def casc_triggering_prob(inst: CascadingInstance, S: RankedLists, arm: int) -> float:
    return inst.triggering_prob(S, arm)


def casc_step(inst: CascadingInstance, S: RankedLists, rng, round_index: int = 0):
    return inst.step(S, rng, round_index)


class PmcInstance:
    """Probabilistic maximum coverage with word-of-mouth spillover.

    Advertising a size-K item subset triggers every (item, user) pair of the
    chosen items outright; every other pair is triggered independently with
    probability p_star. A triggered pair attracts its user with probability
    p[i, j] and a user counts once if any triggered pair attracts them.

    Base arm (i, j) has id i * W + j. One step consumes a full V x W uniform
    block for triggering, then a full V x W block for attraction outcomes.
    """

    def __init__(self, p, K: int, p_star: float):
        self.p = _as_prob_matrix(p)
        self.V, self.W = self.p.shape
        if not 1 <= int(K) <= self.V:
            raise ConfigurationError("need 1 <= K <= V")
        if not 0.0 <= float(p_star) <= 1.0:
            raise ConfigurationError("p_star must lie in [0, 1]")
        self.K = int(K)
        self.p_star = float(p_star)
        self.m = self.V * self.W

    def arm_id(self, item: int, user: int) -> int:
        return item * self.W + user

    def true_means(self) -> np.ndarray:
        return self.p.ravel().copy()

    def validate_super_arm(self, S) -> None:
        if not isinstance(S, ItemSubset) or len(S.items) != self.K:
            raise ConfigurationError("super arm must be a size-K item subset")
        if any(not 0 <= i < self.V for i in S.items):
            raise ConfigurationError("subset item id out of range")

    def reward(self, S: ItemSubset, theta) -> float:
        th = np.asarray(theta, dtype=np.float64).reshape(self.V, self.W)
        q = 1.0 - self.p_star * th
        rows = np.asarray(S.items, dtype=np.intp)
        q[rows] = 1.0 - th[rows]
        return float((1.0 - q.prod(axis=0)).sum())

    def triggering_prob(self, S: ItemSubset, arm: int) -> float:
        item = int(arm) // self.W
        return 1.0 if item in S.items else self.p_star

    def triggering_set(self, S: ItemSubset) -> np.ndarray:
        if self.p_star > 0.0:
            return np.arange(self.m)
        rows = np.asarray(S.items, dtype=np.intp)
        return np.sort((rows[:, None] * self.W + np.arange(self.W)).ravel())

    def step(self, S: ItemSubset, rng, round_index: int = 0):
        trig = rng.random((self.V, self.W)) < self.p_star
        x = rng.random((self.V, self.W)) < self.p
        rows = np.asarray(S.items, dtype=np.intp)
        trig[rows] = True
        ids = np.flatnonzero(trig.ravel())
        fb = Feedback(ids, x.ravel()[ids].astype(np.float64), round_index)
        realized = float((trig & x).any(axis=0).sum())
        return fb, realized


def pmc_reward(inst: PmcInstance, S: ItemSubset, theta) -> float:
    return inst.reward(S, theta)


def pmc_step(inst: PmcInstance, S: ItemSubset, rng, round_index: int = 0):
    return inst.step(S, rng, round_index)


class InfluenceGraph:
    """Directed influence graph; base arm e is the directed edge src[e] -> dst[e].

    Edges are stored sorted by (src, dst) and the edge id is the position in
    that order (input order within ties), so ids are a pure function of the
    edge list. Parallel edges are rejected unless explicitly allowed; routing
    opts in because each link is its own arm even between the same endpoints.
    """

    def __init__(self, n: int, edges, p, allow_parallel: bool = False):
        self.n = int(n)
        if self.n < 1:
            raise ConfigurationError("graph needs at least one node")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        p = np.asarray(p, dtype=np.float64).ravel()
        if edges.shape[0] != p.size:
            raise ConfigurationError("edge and probability counts differ")
        if edges.size and (edges.min() < 0 or edges.max() >= self.n):
            raise ConfigurationError("edge endpoint out of range")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ConfigurationError("edge probabilities must lie in [0, 1]")
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        self.src = edges[order, 0].copy()
        self.dst = edges[order, 1].copy()
        self.p = p[order].copy()
        self.m = int(self.src.size)
        if self.m > 1 and not allow_parallel:
            dup = (np.diff(self.src) == 0) & (np.diff(self.dst) == 0)
            if dup.any():
                raise ConfigurationError("parallel edges are not allowed")
        self.out_ptr = np.searchsorted(self.src, np.arange(self.n + 1))
        self.out_deg = np.diff(self.out_ptr)
        in_order = np.lexsort((self.src, self.dst))
        self.in_eid = in_order.astype(np.int64)
        self.in_src = self.src[in_order]
        self.in_ptr = np.searchsorted(self.dst[in_order], np.arange(self.n + 1))
        self.in_deg = np.diff(self.in_ptr)

    def true_means(self) -> np.ndarray:
        return self.p.copy()


def im_cascade(graph: InfluenceGraph, seeds: SeedSet, rng, round_index: int = 0):
    """One independent-cascade round from the given seed set.

    Influenced nodes are processed first-in first-out (seeds in ascending
    order); each processed node fires all its outgoing edges once, in edge-id
    order, and every one of those edges is observed with its realized outcome.
    Returns (influenced node ids ascending, Feedback).
    """
    nodes = list(seeds.nodes)
    if nodes and (nodes[0] < 0 or nodes[-1] >= graph.n):
        raise ConfigurationError("seed node out of range")
    active = np.zeros(graph.n, dtype=bool)
    active[nodes] = True
    queue = deque(nodes)
    id_parts: list[np.ndarray] = []
    out_parts: list[np.ndarray] = []
    while queue:
        v = queue.popleft()
        lo, hi = graph.out_ptr[v], graph.out_ptr[v + 1]
        if lo == hi:
            continue
        fire = rng.random(hi - lo) < graph.p[lo:hi]
        id_parts.append(np.arange(lo, hi, dtype=np.int64))
        out_parts.append(fire)
        hit = graph.dst[lo:hi][fire]
        fresh = hit[~active[hit]]
        active[fresh] = True
        queue.extend(fresh.tolist())
    if id_parts:
        fb = Feedback(np.concatenate(id_parts),
                      np.concatenate(out_parts).astype(np.float64), round_index)
    else:
        fb = Feedback(np.empty(0, dtype=np.int64), np.empty(0), round_index)
    return np.flatnonzero(active), fb


def im_spread(graph: InfluenceGraph, seeds: SeedSet, n_mc: int, rng) -> float:
    """Monte-Carlo estimate of the expected influenced-node count."""
    if n_mc < 1:
        raise ConfigurationError("n_mc must be positive")
    total = 0
    for _ in range(n_mc):
        influenced, _ = im_cascade(graph, seeds, rng)
        total += influenced.size
    return total / n_mc


class ImEnvironment:
    """Seed-set selection on an influence graph.

    The realized reward of a round is the influenced-node count. Expected
    spread has no closed form, so this environment only supports
    realized-approximation regret.
    """

    def __init__(self, graph: InfluenceGraph, K: int):
        if not 1 <= int(K) <= graph.n:
            raise ConfigurationError("need 1 <= K <= n")
        self.graph = graph
        self.K = int(K)
        self.m = graph.m

    def true_means(self) -> np.ndarray:
        return self.graph.true_means()

    def validate_super_arm(self, S) -> None:
        if not isinstance(S, SeedSet) or len(S.nodes) != self.K:
            raise ConfigurationError("super arm must be a size-K seed set")
        if any(not 0 <= v < self.graph.n for v in S.nodes):
            raise ConfigurationError("seed node out of range")

    def triggering_set(self, S: SeedSet) -> np.ndarray:
        # all outgoing edges of every node reachable through positive-probability edges
        g = self.graph
        reach = np.zeros(g.n, dtype=bool)
        reach[list(S.nodes)] = True
        queue = deque(S.nodes)
        while queue:
            v = queue.popleft()
            lo, hi = g.out_ptr[v], g.out_ptr[v + 1]
            nxt = g.dst[lo:hi][g.p[lo:hi] > 0.0]
            fresh = nxt[~reach[nxt]]
            reach[fresh] = True
            queue.extend(fresh.tolist())
        arms = [np.arange(g.out_ptr[v], g.out_ptr[v + 1], dtype=np.int64)
                for v in np.flatnonzero(reach)]
        if not arms:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(arms))

    def step(self, S: SeedSet, rng, round_index: int = 0):
        influenced, fb = im_cascade(self.graph, S, rng, round_index)
        return fb, float(influenced.size)


class RoutingInstance:
    """Source-to-destination reliability routing over directed links.

    Base arm e is the link with success probability p[e]; a chosen path is
    traversed link by link and the attempt succeeds only when every link
    does, so feedback is the link-outcome prefix up to and including the
    first failure. One step consumes one uniform per path link, in walk
    order, drawn for the full path even past the first failure.
    """

    def __init__(self, n: int, edges, p, source: int, destination: int):
        # reuse edge canonicalization; parallel links are legal routes
        graph = InfluenceGraph(n, edges, p, allow_parallel=True)
        if np.any(graph.p <= 0.0):
            raise ConfigurationError("link probabilities must lie in (0, 1]")
        self.n = graph.n
        self.src = graph.src
        self.dst = graph.dst
        self.p = graph.p
        self.m = graph.m
        self.out_ptr = graph.out_ptr
        if not (0 <= source < self.n and 0 <= destination < self.n):
            raise ConfigurationError("source or destination out of range")
        if source == destination:
            raise ConfigurationError("source and destination must differ")
        self.source = int(source)
        self.destination = int(destination)
        if not self._reachable():
            raise ConfigurationError("no source-to-destination path exists")

    def _reachable(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        seen[self.source] = True
        queue = deque([self.source])
        while queue:
            v = queue.popleft()
            if v == self.destination:
                return True
            lo, hi = self.out_ptr[v], self.out_ptr[v + 1]
            for u in self.dst[lo:hi]:
                if not seen[u]:
                    seen[u] = True
                    queue.append(int(u))
        return bool(seen[self.destination])

    def true_means(self) -> np.ndarray:
        return self.p.copy()

    def validate_super_arm(self, S) -> None:
        if not isinstance(S, Path) or not S.edges:
            raise ConfigurationError("super arm must be a non-empty path")
        if any(not 0 <= e < self.m for e in S.edges):
            raise ConfigurationError("path edge id out of range")
        at = self.source
        for e in S.edges:
            if self.src[e] != at:
                raise ConfigurationError("path edges do not chain from the source")
            at = int(self.dst[e])
        if at != self.destination:
            raise ConfigurationError("path does not end at the destination")

    def reward(self, S: Path, theta) -> float:
        th = np.asarray(theta, dtype=np.float64)
        return float(np.prod(th[np.asarray(S.edges, dtype=np.intp)]))

    def triggering_prob(self, S: Path, arm: int) -> float:
        if arm not in S.edges:
            return 0.0
        k = S.edges.index(arm)
        if k == 0:
            return 1.0
        return float(np.prod(self.p[np.asarray(S.edges[:k], dtype=np.intp)]))

    def triggering_set(self, S: Path) -> np.ndarray:
        return np.sort(np.asarray(S.edges, dtype=np.int64))

    def step(self, S: Path, rng, round_index: int = 0):
        eids = np.asarray(S.edges, dtype=np.intp)
        x = rng.random(eids.size) < self.p[eids]
        miss = ~x
        if miss.any():
            stop = int(miss.argmax()) + 1
            realized = 0.0
        else:
            stop = eids.size
            realized = 1.0
        fb = Feedback(eids[:stop].astype(np.int64),
                      x[:stop].astype(np.float64), round_index)
        return fb, realized


def path_reliability(inst: RoutingInstance, S: Path, theta) -> float:
    return inst.reward(S, theta)
