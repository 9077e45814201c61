"""Built-in verification battery.

Every check pits an optimized code path against an independent reference:
Monte-Carlo frequencies against closed forms, fast oracles against full
enumeration, bisection against grid search, and the sampled greedy against
the exact optimum on exhaustively enumerable graphs. All checks are seeded
and deterministic. Each returns (name, ok, detail).
"""

from __future__ import annotations

import numpy as np

from . import bruteforce
from .core import (Feedback, ItemSubset, Path, SeedSet, check_lipschitz,
                   check_monotonicity)
from .environments import (CONJUNCTIVE, DISJUNCTIVE, CascadingInstance,
                           ImEnvironment, InfluenceGraph, PmcInstance,
                           RoutingInstance, im_spread)
from .harness import make_blb_instance, make_random_graph, resolve_config, run_experiment
from .oracles import (RrGreedyOracle, exhaustive_subset_oracle,
                      reliable_path_oracle, topk_oracle)
from .policies import CtsPolicy, klucb_index


def _mc_check(name: str, closed: float, samples: np.ndarray):
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    se = max(se, 1e-12)
    gap = abs(samples.mean() - closed)
    ok = gap <= 3.0 * se
    return (name, ok,
            f"closed {closed:.5f}, mc {samples.mean():.5f}, gap/se {gap / se:.2f}")


def _routing_fixture() -> RoutingInstance:
    edges = [(0, 1), (0, 2), (1, 3), (2, 3), (1, 2), (0, 3)]
    p = [0.9, 0.5, 0.8, 0.7, 0.6, 0.25]
    return RoutingInstance(4, edges, p, source=0, destination=3)


def _im_fixture() -> InfluenceGraph:
    edges = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (1, 4)]
    p = [0.6, 0.5, 0.7, 0.4, 0.8, 0.3]
    return InfluenceGraph(5, edges, p)


def check_mc_rewards(n_mc: int):
    """Closed-form expected reward vs Monte-Carlo realization, 3 sigma."""
    out = []
    rng = np.random.default_rng(101)
    for form in (DISJUNCTIVE, CONJUNCTIVE):
        p = np.random.default_rng(11).random((6, 3))
        env = CascadingInstance(p, K=3, form=form)
        S = topk_oracle(p, 6, 3, 3)
        closed = env.reward(S, p)
        samples = np.fromiter(
            (env.step(S, rng, t)[1] for t in range(n_mc)), dtype=np.float64,
            count=n_mc)
        out.append(_mc_check(f"mc-reward-cascading-{form}", closed, samples))
    p = np.random.default_rng(12).random((5, 4))
    env = PmcInstance(p, K=2, p_star=0.3)
    S = ItemSubset((1, 3))
    samples = np.fromiter((env.step(S, rng, t)[1] for t in range(n_mc)),
                          dtype=np.float64, count=n_mc)
    out.append(_mc_check("mc-reward-pmc", env.reward(S, p), samples))
    rinst = _routing_fixture()
    S = Path((0, 2))
    samples = np.fromiter((rinst.step(S, rng, t)[1] for t in range(n_mc)),
                          dtype=np.float64, count=n_mc)
    out.append(_mc_check("mc-reward-routing", rinst.reward(S, rinst.p), samples))
    graph = _im_fixture()
    seeds = SeedSet((0,))
    exact = bruteforce.exact_spread(graph, seeds)
    samples = np.fromiter(
        (im_spread(graph, seeds, 1, rng) for _ in range(n_mc)),
        dtype=np.float64, count=n_mc)
    out.append(_mc_check("mc-reward-im", exact, samples))
    return out


def check_triggering(n_mc: int):
    """Observation frequency of every arm vs its analytic triggering
    probability, 3 sigma per arm."""
    out = []
    rng = np.random.default_rng(202)
    p = np.random.default_rng(13).random((5, 2))
    env = CascadingInstance(p, K=3, form=DISJUNCTIVE)
    S = topk_oracle(p, 5, 2, 3)
    arms = env.triggering_set(S)
    hits = np.zeros(env.m)
    for t in range(n_mc):
        fb, _ = env.step(S, rng, t)
        hits[fb.arm_ids] += 1.0
    worst = 0.0
    for arm in arms:
        q = env.triggering_prob(S, int(arm))
        se = max(np.sqrt(q * (1.0 - q) / n_mc), 1e-12)
        worst = max(worst, abs(hits[arm] / n_mc - q) / se)
    out.append(("triggering-cascading", worst <= 3.0, f"worst gap/se {worst:.2f}"))

    env2 = PmcInstance(np.random.default_rng(14).random((4, 3)), K=2, p_star=0.25)
    S2 = ItemSubset((0, 2))
    hits = np.zeros(env2.m)
    for t in range(n_mc):
        fb, _ = env2.step(S2, rng, t)
        hits[fb.arm_ids] += 1.0
    worst = 0.0
    for arm in range(env2.m):
        q = env2.triggering_prob(S2, arm)
        se = max(np.sqrt(q * (1.0 - q) / n_mc), 1e-12)
        worst = max(worst, abs(hits[arm] / n_mc - q) / se)
    out.append(("triggering-pmc", worst <= 3.0, f"worst gap/se {worst:.2f}"))

    rinst = _routing_fixture()
    S3 = Path((0, 2))
    hits = np.zeros(rinst.m)
    for t in range(n_mc):
        fb, _ = rinst.step(S3, rng, t)
        hits[fb.arm_ids] += 1.0
    worst = 0.0
    for arm in S3.edges:
        q = rinst.triggering_prob(S3, arm)
        se = max(np.sqrt(q * (1.0 - q) / n_mc), 1e-12)
        worst = max(worst, abs(hits[arm] / n_mc - q) / se)
    out.append(("triggering-routing", worst <= 3.0, f"worst gap/se {worst:.2f}"))
    return out


def check_oracles(n_instances: int):
    """Production oracles vs exhaustive enumeration on random instances."""
    ok = True
    detail = []
    for k in range(n_instances):
        p = np.random.default_rng(300 + k).random((8, 4))
        S = topk_oracle(p, 8, 4, 3)
        ref, ref_val = bruteforce.best_ranked_lists(p, 3)
        env = CascadingInstance(p, K=3)
        if not np.isclose(env.reward(S, p), ref_val, rtol=0.0, atol=1e-12):
            ok = False
            detail.append(f"cascading value mismatch on instance {k}")
        if any(tuple(sorted(a)) != tuple(sorted(b))
               for a, b in zip(S.lists, ref.lists)):
            ok = False
            detail.append(f"cascading set mismatch on instance {k}")
    for k in range(n_instances):
        p = np.random.default_rng(400 + k).random((10, 3))
        S = exhaustive_subset_oracle(p, 10, 3, 3, 0.2)
        ref, ref_val = bruteforce.best_item_subset(p, 3, 0.2)
        if S.items != ref.items:
            ok = False
            detail.append(f"subset mismatch on instance {k}")
    rinst = _routing_fixture()
    for k in range(n_instances):
        th = np.random.default_rng(500 + k).random(rinst.m)
        S = reliable_path_oracle(rinst, th)
        ref, ref_val = bruteforce.best_path(rinst, th)
        if not np.isclose(rinst.reward(S, th), ref_val, rtol=0.0, atol=1e-12):
            ok = False
            detail.append(f"path value mismatch on instance {k}")
    return [("oracle-vs-exhaustive", ok, "; ".join(detail) or
             f"{3 * n_instances} instances agree")]


def check_smoothness(n_pairs: int):
    """One-norm Lipschitz bound (B=1) and monotonicity of every closed-form
    reward, plus the exhaustively enumerated influence spread."""
    out = []
    rng = np.random.default_rng(606)
    specs = [
        ("cascading-disjunctive",
         CascadingInstance(rng.random((5, 2)), K=3, form=DISJUNCTIVE)),
        ("cascading-conjunctive",
         CascadingInstance(rng.random((5, 2)), K=3, form=CONJUNCTIVE)),
        ("pmc", PmcInstance(rng.random((4, 3)), K=2, p_star=0.3)),
        ("routing", _routing_fixture()),
    ]
    for name, env in specs:
        if isinstance(env, CascadingInstance):
            S = topk_oracle(rng.random((env.V, env.W)), env.V, env.W, env.K)
        elif isinstance(env, PmcInstance):
            S = ItemSubset((0, 2))
        else:
            S = Path((0, 2))
        lip = mono = True
        for _ in range(n_pairs):
            mu = rng.random(env.m)
            mu2 = rng.random(env.m)
            lip &= check_lipschitz(env, S, mu, mu2, bound=1.0)
            lo = np.minimum(mu, mu2)
            hi = np.maximum(mu, mu2)
            mono &= check_monotonicity(env, S, lo, hi)
        out.append((f"lipschitz-{name}", lip, f"{n_pairs} pairs, bound 1"))
        out.append((f"monotonicity-{name}", mono, f"{n_pairs} pairs"))

    graph = _im_fixture()
    seeds = SeedSet((0, 1))
    env = ImEnvironment(graph, K=2)
    trig = set(env.triggering_set(seeds).tolist())
    lip = mono = True
    pairs = max(20, n_pairs // 20)  # each evaluation enumerates 2^m worlds
    for _ in range(pairs):
        mu = rng.random(graph.m)
        mu2 = rng.random(graph.m)
        r1 = bruteforce.exact_spread(graph, seeds, mu)
        r2 = bruteforce.exact_spread(graph, seeds, mu2)
        budget = sum(abs(mu[e] - mu2[e]) for e in range(graph.m) if e in trig)
        lip &= abs(r1 - r2) <= budget + 1e-9
        lo = np.minimum(mu, mu2)
        hi = np.maximum(mu, mu2)
        mono &= (bruteforce.exact_spread(graph, seeds, lo)
                 <= bruteforce.exact_spread(graph, seeds, hi) + 1e-9)
    out.append(("lipschitz-im", lip, f"{pairs} pairs, bound 1"))
    out.append(("monotonicity-im", mono, f"{pairs} pairs"))
    return out


def check_cts_conservation(n_rounds: int):
    """Posterior counts grow by exactly one per observation, and fractional
    outcomes round to Bernoulli draws with the right frequency."""
    rng = np.random.default_rng(707)
    p = np.random.default_rng(15).random((6, 2))
    env = CascadingInstance(p, K=3)
    pol = CtsPolicy(env.m)
    observed = 0
    for t in range(1, n_rounds + 1):
        th = pol.indices(t, rng)
        S = topk_oracle(th, 6, 2, 3)
        fb, _ = env.step(S, rng, t)
        observed += len(fb)
        pol.update(fb, rng)
    total = float((pol.state.a + pol.state.b).sum()) - 2.0 * env.m
    ok = total == float(observed)
    out = [("cts-count-conservation", ok,
            f"{observed} observations, posterior mass {total:.0f}")]

    pol2 = CtsPolicy(1)
    n = 4 * n_rounds
    for t in range(n):
        fb = Feedback(np.array([0]), np.array([0.7]), t)
        pol2.update(fb, rng)
    wins = float(pol2.state.a[0] - 1.0)
    se = np.sqrt(n * 0.7 * 0.3)
    ok2 = abs(wins - 0.7 * n) <= 3.0 * se
    out.append(("cts-fractional-rounding", ok2,
                f"{wins:.0f} successes of {n} at 0.7"))
    return out


def check_klucb(step: float = 1e-6):
    """Bisection index equals grid search to within the grid step."""
    cases = [(0.3, 50.0, 1000), (0.0, 10.0, 100), (0.5, 1.0, 2),
             (0.9, 200.0, 5000), (0.05, 3.0, 17), (0.99, 1000.0, 100000)]
    worst = 0.0
    for mu, count, t in cases:
        fast = klucb_index(mu, count, t)
        slow = bruteforce.klucb_grid(mu, count, t, step)
        worst = max(worst, abs(fast - slow))
    return [("klucb-grid-agreement", worst <= 1e-6 + step,
             f"worst gap {worst:.2e} over {len(cases)} cases")]


def check_rr_guarantee(n_graphs: int):
    """Sampled greedy spread vs the enumerated optimum on tiny graphs.

    Passes when at least 95% of the graphs meet the (1 - 1/e - eps) factor.
    """
    epsilon, ell = 0.3, 1.0
    good = 0
    details = []
    for k in range(n_graphs):
        grng = np.random.default_rng(800 + k)
        n, m = 8, 14
        codes = grng.choice(n * (n - 1), size=m, replace=False)
        src = codes // (n - 1)
        rem = codes % (n - 1)
        dst = np.where(rem < src, rem, rem + 1)
        p = grng.random(m)
        graph = InfluenceGraph(n, np.stack([src, dst], axis=1), p)
        oracle = RrGreedyOracle(graph, K=2, epsilon=epsilon, ell=ell,
                                rr_budget=200_000)
        seeds = oracle.propose(graph.p, np.random.default_rng(900 + k))
        achieved = bruteforce.exact_spread(graph, seeds)
        _, opt = bruteforce.best_seed_set(graph, 2)
        factor = 1.0 - 1.0 / np.e - epsilon
        if achieved >= factor * opt - 1e-9:
            good += 1
        else:
            details.append(f"graph {k}: {achieved:.3f} < {factor:.3f}*{opt:.3f}")
    ok = good >= int(np.ceil(0.95 * n_graphs))
    return [("rr-greedy-guarantee", ok,
             f"{good}/{n_graphs} graphs met the factor" +
             ("; " + "; ".join(details[:3]) if details else ""))]


def check_sublinearity(horizon: int, runs: int):
    """Cumulative regret of the posterior-sampling policy grows slower in the
    second half of the horizon than in the first."""
    cfg = resolve_config({
        "environment": {"family": "cascading",
                        "blb": {"V": 8, "K": 2, "p": 0.2, "delta": 0.15}},
        "policy": {"name": "cts"},
        "run": {"horizon": horizon, "runs": runs, "master_seed": 20240801},
    })
    res = run_experiment(cfg)
    half = horizon // 2
    first = float(res.mean[half - 1])
    second = float(res.mean[-1]) - first
    return [("regret-sublinearity", second < first,
             f"first half {first:.1f}, second half {second:.1f}")]


def check_determinism():
    """Two executions of one config produce identical curves."""
    cfg = {
        "environment": {"family": "cascading",
                        "blb": {"V": 8, "K": 2, "p": 0.2, "delta": 0.1}},
        "policy": {"name": "cts"},
        "run": {"horizon": 500, "runs": 3, "master_seed": 42},
    }
    a = run_experiment(resolve_config(cfg))
    b = run_experiment(resolve_config(cfg))
    ok = (np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std))
    return [("determinism", ok, "repeat run bit-identical" if ok else
             "repeat run diverged")]


def run_selftest(quick: bool = False):
    """Run the full battery; returns a list of (name, ok, detail)."""
    n_mc = 20_000 if quick else 100_000
    results = []
    results += check_mc_rewards(n_mc)
    results += check_triggering(min(n_mc, 50_000))
    results += check_oracles(5 if quick else 20)
    results += check_smoothness(200 if quick else 1000)
    results += check_cts_conservation(100 if quick else 400)
    results += check_klucb()
    results += check_rr_guarantee(5 if quick else 20)
    results += check_sublinearity(2000 if quick else 10_000, 5 if quick else 20)
    results += check_determinism()
    return results
