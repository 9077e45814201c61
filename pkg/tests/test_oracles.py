import math

import numpy as np
import pytest

from cmablab.bruteforce import (
    best_item_subset,
    best_path,
    best_ranked_lists,
    best_seed_set,
    cascading_list_value,
    exact_spread,
    pmc_subset_value,
)
from cmablab.core import ConfigurationError, Path, SeedSet, SimulationError
from cmablab.environments import InfluenceGraph, RoutingInstance
from cmablab.oracles import (
    RrGreedyOracle,
    SubsetOracle,
    TopKOracle,
    exhaustive_subset_oracle,
    reliable_path_oracle,
    rr_greedy_oracle,
    topk_oracle,
)


def _no_edges(n):
    return InfluenceGraph(n, np.empty((0, 2), dtype=np.int64), [])


class TestTopK:
    def test_single_user_sorts_by_mean(self):
        S = topk_oracle(np.array([0.9, 0.1, 0.5]), V=3, W=1, K=2)
        assert S.lists == ((0, 2),)

    def test_all_equal_breaks_ties_by_id(self):
        th = np.full((4, 1), 0.7)
        assert topk_oracle(th, 4, 1, 2).lists == ((0, 1),)
        assert topk_oracle(th, 4, 1, 2, tie_rule="highest").lists == ((3, 2),)

    def test_matches_exhaustive_enumeration(self, rng):
        th = rng.random((6, 2))
        for form in ("disjunctive", "conjunctive"):
            S = topk_oracle(th, 6, 2, 3)
            got = sum(cascading_list_value(th[:, j], S.lists[j], form)
                      for j in range(2))
            _, want = best_ranked_lists(th, 3, form)
            assert got == pytest.approx(want, abs=1e-12)

    def test_invariant_under_monotone_transform(self, rng):
        th = rng.random((5, 3))
        assert topk_oracle(th, 5, 3, 2) == topk_oracle(th ** 3, 5, 3, 2)

    def test_k_out_of_range(self):
        th = np.zeros((3, 1))
        with pytest.raises(ConfigurationError):
            topk_oracle(th, 3, 1, 0)
        with pytest.raises(ConfigurationError):
            topk_oracle(th, 3, 1, 4)

    def test_bad_tie_rule(self):
        with pytest.raises(ConfigurationError):
            topk_oracle(np.zeros((3, 1)), 3, 1, 1, tie_rule="random")

    def test_oracle_object_delegates(self):
        S = TopKOracle(V=3, W=1, K=2).propose(np.array([0.9, 0.1, 0.5]))
        assert S.lists == ((0, 2),)


class TestExhaustiveSubset:
    def test_k_equals_v_returns_everything(self, rng):
        S = exhaustive_subset_oracle(rng.random((4, 2)), 4, 2, 4, p_star=0.3)
        assert S.items == (0, 1, 2, 3)

    def test_single_user_argmax(self):
        th = np.array([[0.2], [0.9], [0.4]])
        S = exhaustive_subset_oracle(th, 3, 1, 1, p_star=0.0)
        assert S.items == (1,)

    def test_matches_bruteforce_enumerator(self, rng):
        th = rng.random((6, 4))
        S = exhaustive_subset_oracle(th, 6, 4, 2, p_star=0.1)
        want, val = best_item_subset(th, 2, 0.1)
        assert S == want
        assert pmc_subset_value(th, S.items, 0.1) == pytest.approx(val)

    def test_ties_lexicographic(self):
        th = np.full((4, 1), 0.5)
        lo = exhaustive_subset_oracle(th, 4, 1, 2, p_star=0.1)
        hi = exhaustive_subset_oracle(th, 4, 1, 2, p_star=0.1,
                                      tie_rule="highest")
        assert lo.items == (0, 1)
        assert hi.items == (2, 3)

    def test_saturated_probabilities_fall_back(self, rng):
        # p_star * theta hitting 1 defeats the ratio trick; the direct
        # scoring branch must agree with the enumerator anyway
        th = rng.random((4, 2))
        th[1, :] = 1.0
        S = exhaustive_subset_oracle(th, 4, 2, 2, p_star=1.0)
        want, _ = best_item_subset(th, 2, 1.0)
        assert S == want

    def test_combinatorial_guard(self):
        with pytest.raises(ConfigurationError):
            exhaustive_subset_oracle(np.zeros((40, 1)), 40, 1, 20, p_star=0.1)

    def test_k_out_of_range(self):
        with pytest.raises(ConfigurationError):
            exhaustive_subset_oracle(np.zeros((3, 1)), 3, 1, 5, p_star=0.1)

    def test_oracle_object_delegates(self):
        th = np.array([[0.2], [0.9], [0.4]])
        S = SubsetOracle(V=3, W=1, K=1, p_star=0.0).propose(th)
        assert S.items == (1,)


class TestReliablePath:
    def test_single_route(self):
        inst = RoutingInstance(3, [(0, 1), (1, 2)], [0.9, 0.8], 0, 2)
        assert reliable_path_oracle(inst, inst.p) == Path(edges=(0, 1))

    def test_parallel_links_pick_the_stronger(self):
        inst = RoutingInstance(2, [(0, 1), (0, 1)], [0.8, 0.9], 0, 1)
        assert reliable_path_oracle(inst, inst.p) == Path(edges=(1,))

    def test_tie_prefers_fewer_hops(self):
        inst = RoutingInstance(3, [(0, 1), (0, 2), (1, 2)],
                               [0.5, 0.25, 0.5], 0, 2)
        # direct link reliability 0.25 equals the 0.5 * 0.5 detour exactly
        assert reliable_path_oracle(inst, inst.p) == Path(edges=(1,))

    def test_tie_breaks_on_edge_ids(self):
        inst = RoutingInstance(4, [(0, 1), (0, 2), (1, 3), (2, 3)],
                               [0.5, 0.5, 0.5, 0.5], 0, 3)
        assert reliable_path_oracle(inst, inst.p) == Path(edges=(0, 2))
        hi = reliable_path_oracle(inst, inst.p, tie_rule="highest")
        assert hi == Path(edges=(1, 3))

    def test_matches_path_enumeration(self, rng):
        edges = [(i, j) for i in range(8) for j in range(i + 1, 8)
                 if rng.random() < 0.6 or j == i + 1]
        inst = RoutingInstance(8, edges, rng.uniform(0.05, 0.95, len(edges)),
                               0, 7)
        th = rng.uniform(0.05, 0.95, inst.m)
        got = reliable_path_oracle(inst, th)
        _, want = best_path(inst, th)
        rel = float(np.prod(th[list(got.edges)]))
        assert rel == pytest.approx(want, abs=1e-12)

    def test_dead_link_reroutes(self):
        inst = RoutingInstance(2, [(0, 1), (0, 1)], [0.8, 0.9], 0, 1)
        assert reliable_path_oracle(inst, np.array([0.0, 0.3])) == Path(edges=(1,))

    def test_all_routes_dead_raise(self):
        inst = RoutingInstance(3, [(0, 1), (1, 2)], [0.9, 0.9], 0, 2)
        with pytest.raises(SimulationError):
            reliable_path_oracle(inst, np.array([0.0, 0.5]))


class TestRrGreedy:
    def test_no_edges_lowest_node(self, rng):
        S, info = rr_greedy_oracle(_no_edges(3), np.empty(0), 1, rng,
                                   rr_budget=500)
        assert S == SeedSet(nodes=(0,))
        assert not info["truncated"]

    def test_certain_chain_prefers_the_root(self, rng):
        graph = InfluenceGraph(3, [(0, 1), (1, 2)], [1.0, 1.0])
        S, _ = rr_greedy_oracle(graph, np.ones(2), 1, rng, rr_budget=500)
        assert S == SeedSet(nodes=(0,))

    def test_deterministic_given_seed(self, rng):
        edges = [(i, j) for i in range(8) for j in range(8)
                 if i != j and rng.random() < 0.3]
        graph = InfluenceGraph(8, edges, rng.uniform(0.2, 0.8, len(edges)))
        out = [rr_greedy_oracle(graph, graph.p, 2, np.random.default_rng(5),
                                rr_budget=5000) for _ in range(2)]
        assert out[0][0] == out[1][0]
        assert out[0][1] == out[1][1]

    def test_truncation_flag_and_counter(self, rng):
        graph = InfluenceGraph(6, [(0, 1), (2, 3), (4, 5)], [0.5, 0.5, 0.5])
        oracle = RrGreedyOracle(graph, K=2, epsilon=0.3, rr_budget=3)
        oracle.propose(graph.p, rng)
        oracle.propose(graph.p, rng)
        assert oracle.truncation_count == 2
        assert oracle.last_info["truncated"]
        assert oracle.last_info["n_sets"] <= 3

    def test_alpha_beta(self):
        oracle = RrGreedyOracle(_no_edges(8), K=1, epsilon=0.1, ell=1.0)
        assert oracle.alpha == pytest.approx(1.0 - 1.0 / math.e - 0.1)
        assert oracle.beta == pytest.approx(1.0 - 3.0 / 8.0)

    def test_validation(self, rng):
        graph = _no_edges(4)
        with pytest.raises(ConfigurationError):
            RrGreedyOracle(graph, K=0)
        with pytest.raises(ConfigurationError):
            RrGreedyOracle(graph, K=5)
        with pytest.raises(ConfigurationError):
            RrGreedyOracle(graph, K=1, epsilon=1.2)
        with pytest.raises(ConfigurationError):
            RrGreedyOracle(graph, K=1, ell=0.5)
        with pytest.raises(ConfigurationError):
            rr_greedy_oracle(graph, np.empty(0), 1, rng, rr_budget=0)
        with pytest.raises(ConfigurationError):
            rr_greedy_oracle(graph, np.zeros(3), 1, rng)  # wrong theta length

    def test_rng_is_required(self):
        with pytest.raises(ConfigurationError):
            RrGreedyOracle(_no_edges(2), K=1).propose(np.empty(0), None)

    def test_small_graph_guarantee(self, rng):
        edges = [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 5), (5, 0)]
        graph = InfluenceGraph(6, edges, rng.uniform(0.3, 0.9, len(edges)))
        S, info = rr_greedy_oracle(graph, graph.p, 2, rng, epsilon=0.3,
                                   rr_budget=200_000)
        assert not info["truncated"]
        _, opt = best_seed_set(graph, 2)
        assert exact_spread(graph, S) >= (1.0 - 1.0 / math.e - 0.3) * opt
