"""Config-driven experiment orchestration.

A run config names an environment, a policy, an oracle, and the run plan
(horizon, number of runs, master seed, regret mode). run_experiment executes
every run with its own splittable seed stream, aggregates cumulative regret
across runs in one streaming pass, and emit_report writes the artifact files.
Outputs are deterministic given (config, master_seed): byte-identical CSVs on
every repeat.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import _fastloop
from .core import (ConfigurationError, EXPECTED, PACKAGE_VERSION,
                   REALIZED_APPROX, REGRET_MODES, regret_step)
from .environments import (CONJUNCTIVE, DISJUNCTIVE, CascadingInstance,
                           ImEnvironment, InfluenceGraph, PmcInstance,
                           RoutingInstance, im_spread)
from .ingest import load_instance
from .oracles import (PathOracle, RrGreedyOracle, SubsetOracle, TopKOracle)
from .policies import POLICY_NAMES, make_policy

_FAMILIES = ("cascading", "pmc", "im", "routing")
_DEFAULT_ORACLES = {"cascading": "top-k", "pmc": "exhaustive-subset",
                    "im": "rr-greedy", "routing": "reliable-path"}
_ALLOWED_ORACLES = {"cascading": ("top-k",), "pmc": ("exhaustive-subset",),
                    "im": ("rr-greedy",), "routing": ("reliable-path",)}
_BENCH_RR_BUDGET = 2_000_000


@dataclass
class RunConfig:
    """A fully resolved experiment description."""

    environment: dict
    policy: dict
    oracle: dict
    horizon: int
    runs: int
    master_seed: int
    regret_mode: str
    baseline_mc: int
    workers: int
    store_runs: bool
    force_generic: bool
    output_dir: str | None
    fingerprint: str = ""

    def resolved(self) -> dict:
        return {
            "environment": self.environment,
            "policy": self.policy,
            "oracle": self.oracle,
            "run": {
                "horizon": self.horizon,
                "runs": self.runs,
                "master_seed": self.master_seed,
                "regret_mode": self.regret_mode,
                "baseline_mc": self.baseline_mc,
                "workers": self.workers,
                "store_runs": self.store_runs,
                "force_generic": self.force_generic,
            },
            "output": {"dir": self.output_dir},
        }


@dataclass
class RunResult:
    """Aggregate and (optionally) per-run cumulative regret curves."""

    config: RunConfig
    mean: np.ndarray
    std: np.ndarray
    curves: list = field(default_factory=list)
    degenerate_std: bool = False
    opt_value: float | None = None
    baseline_value: float | None = None
    oracle_truncations: int = 0
    wall_time_s: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])

    @property
    def final_std(self) -> float:
        return float(self.std[-1])


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.1f} ± {std:.1f}"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigurationError(msg)


def _as_mapping(obj, name: str) -> dict:
    if obj is None:
        return {}
    _require(isinstance(obj, dict), f"{name} section must be a mapping")
    return dict(obj)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid yaml: {exc}") from None
    _require(isinstance(raw, dict), "config root must be a mapping")
    return resolve_config(raw)


def resolve_config(raw: dict) -> RunConfig:
    """Validate a raw config mapping and fill in every default.

    The fingerprint is the SHA-256 of the canonical JSON of the resolved
    config, so two configs that differ only in formatting share it.
    """
    env = _as_mapping(raw.get("environment"), "environment")
    pol = _as_mapping(raw.get("policy"), "policy")
    ora = _as_mapping(raw.get("oracle"), "oracle")
    run = _as_mapping(raw.get("run"), "run")
    out = _as_mapping(raw.get("output"), "output")
    known = {"environment", "policy", "oracle", "run", "output"}
    extra = set(raw) - known
    _require(not extra, f"unknown top-level config keys: {sorted(extra)}")

    family = env.get("family")
    _require(family in _FAMILIES,
             f"environment.family must be one of {', '.join(_FAMILIES)}")
    sources = [k for k in ("blb", "uniform", "attractions", "instance",
                           "random", "edges") if k in env]
    _require(len(sources) == 1,
             "environment needs exactly one instance source among "
             "blb/uniform/attractions/instance/random/edges")

    name = pol.get("name")
    _require(name is not None, "policy.name is required")
    _require(name in POLICY_NAMES,
             f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
    policy = {"name": name}
    if name == "cts":
        policy["prior_a"] = float(pol.get("prior_a", 1.0))
        policy["prior_b"] = float(pol.get("prior_b", 1.0))
    elif name in ("cucb", "cascade-ucb1"):
        policy["exploration_coef"] = float(pol.get("exploration_coef", 1.5))
        policy["init_phase"] = bool(pol.get("init_phase", True))
    elif name == "ts-cascade":
        policy["ts_width"] = str(pol.get("ts_width", "variance"))

    oracle = {"name": ora.get("name", _DEFAULT_ORACLES[family]),
              "tie_rule": str(ora.get("tie_rule", "lowest"))}
    _require(oracle["name"] in _ALLOWED_ORACLES[family],
             f"oracle {oracle['name']!r} is incompatible with family {family!r}")
    if oracle["name"] == "rr-greedy":
        oracle["epsilon"] = float(ora.get("epsilon", 0.5))
        oracle["ell"] = float(ora.get("ell", 1.0))
        oracle["rr_budget"] = int(ora.get("rr_budget", 1_000_000))
        oracle["kpt_coef"] = float(ora.get("kpt_coef", 6.0))
        oracle["theta_coef"] = float(ora.get("theta_coef", 1.0))

    horizon = int(run.get("horizon", 0))
    runs = int(run.get("runs", 0))
    _require(horizon >= 1, "run.horizon must be >= 1")
    _require(runs >= 1, "run.runs must be >= 1")
    _require("master_seed" in run, "run.master_seed is required")
    master_seed = int(run["master_seed"])
    _require(master_seed >= 0, "run.master_seed must be non-negative")
    default_mode = REALIZED_APPROX if family == "im" else EXPECTED
    regret_mode = str(run.get("regret_mode", default_mode))
    _require(regret_mode in REGRET_MODES,
             f"run.regret_mode must be one of {', '.join(REGRET_MODES)}")
    if family == "im":
        _require(regret_mode == REALIZED_APPROX,
                 "seed-set selection has no closed-form expected reward; "
                 "use realized-approx regret")
    else:
        _require(regret_mode == EXPECTED,
                 "realized-approx regret is only defined for the im family")
    baseline_mc = int(run.get("baseline_mc", 10_000))
    _require(baseline_mc >= 1, "run.baseline_mc must be >= 1")
    workers = int(run.get("workers", 1))
    _require(workers >= 1, "run.workers must be >= 1")

    cfg = RunConfig(
        environment=env, policy=policy, oracle=oracle, horizon=horizon,
        runs=runs, master_seed=master_seed, regret_mode=regret_mode,
        baseline_mc=baseline_mc, workers=workers,
        store_runs=bool(run.get("store_runs", True)),
        force_generic=bool(run.get("force_generic", False)),
        output_dir=out.get("dir"),
    )
    canon = json.dumps(cfg.resolved(), sort_keys=True, separators=(",", ":"))
    cfg.fingerprint = hashlib.sha256(canon.encode()).hexdigest()
    return cfg


def make_blb_instance(V: int, K: int, p: float, delta: float) -> CascadingInstance:
    """Single-user disjunctive instance with K good items and V-K decoys."""
    _require(0.0 < p < 1.0, "p must lie in (0, 1)")
    _require(0.0 < delta < p, "delta must lie in (0, p)")
    _require(1 <= K <= V, "need 1 <= K <= V")
    col = np.full((V, 1), p - delta)
    col[:K] = p
    return CascadingInstance(col, K=K, form=DISJUNCTIVE)


def make_uniform_cascading(V: int, W: int, K: int, seed: int,
                           form: str = DISJUNCTIVE) -> CascadingInstance:
    p = np.random.default_rng(int(seed)).random((V, W))
    return CascadingInstance(p, K=K, form=form)


def make_uniform_pmc(V: int, W: int, K: int, p_star: float, seed: int) -> PmcInstance:
    p = np.random.default_rng(int(seed)).random((V, W))
    return PmcInstance(p, K=K, p_star=p_star)


def make_random_graph(n: int, n_edges: int, seed: int) -> InfluenceGraph:
    """Random simple directed graph with weighted-cascade probabilities.

    Edges are n_edges distinct ordered pairs sampled uniformly; each edge
    (i, j) then gets probability 1/outdegree(i).
    """
    _require(n >= 2, "graph needs at least two nodes")
    _require(1 <= n_edges <= n * (n - 1), "n_edges out of range")
    rng = np.random.default_rng(int(seed))
    codes = rng.choice(n * (n - 1), size=n_edges, replace=False)
    src = codes // (n - 1)
    rem = codes % (n - 1)
    dst = np.where(rem < src, rem, rem + 1)
    outdeg = np.bincount(src, minlength=n)
    p = 1.0 / outdeg[src]
    return InfluenceGraph(n, np.stack([src, dst], axis=1), p)


def build_environment(cfg: RunConfig):
    """Instantiate the environment a config describes."""
    env = cfg.environment
    family = env["family"]
    if family == "cascading":
        form = env.get("form", DISJUNCTIVE)
        _require(form in (DISJUNCTIVE, CONJUNCTIVE),
                 f"unknown cascading form {form!r}")
        if "blb" in env:
            b = _as_mapping(env["blb"], "environment.blb")
            inst = make_blb_instance(int(b["V"]), int(b["K"]), float(b["p"]),
                                     float(b["delta"]))
            _require(form == DISJUNCTIVE,
                     "the lower-bound instance class is disjunctive")
            return inst
        K = int(env.get("K", 0))
        if "uniform" in env:
            u = _as_mapping(env["uniform"], "environment.uniform")
            return make_uniform_cascading(int(u["V"]), int(u["W"]), K,
                                          int(u.get("seed", 0)), form)
        return CascadingInstance(np.asarray(env["attractions"], dtype=np.float64),
                                 K=K, form=form)
    if family == "pmc":
        K = int(env.get("K", 0))
        p_star = float(env.get("p_star", 0.05))
        if "uniform" in env:
            u = _as_mapping(env["uniform"], "environment.uniform")
            return make_uniform_pmc(int(u["V"]), int(u["W"]), K, p_star,
                                    int(u.get("seed", 0)))
        if "instance" in env:
            inst, _meta = load_instance(env["instance"])
            _require(isinstance(inst, PmcInstance),
                     "instance file does not hold a coverage instance")
            return PmcInstance(inst.p, K=K or inst.K, p_star=p_star)
        return PmcInstance(np.asarray(env["attractions"], dtype=np.float64),
                           K=K, p_star=p_star)
    if family == "im":
        K = int(env.get("K", 0))
        if "random" in env:
            r = _as_mapping(env["random"], "environment.random")
            graph = make_random_graph(int(r["n"]), int(r["edges"]),
                                      int(r.get("seed", 0)))
        elif "instance" in env:
            graph, _meta = load_instance(env["instance"])
            _require(isinstance(graph, InfluenceGraph),
                     "instance file does not hold a graph")
        else:
            edges = np.asarray([e[:2] for e in env["edges"]], dtype=np.int64)
            p = np.asarray([e[2] for e in env["edges"]], dtype=np.float64)
            graph = InfluenceGraph(int(env["n"]), edges, p)
        return ImEnvironment(graph, K=K)
    # routing
    edges = np.asarray([e[:2] for e in env["edges"]], dtype=np.int64)
    p = np.asarray([e[2] for e in env["edges"]], dtype=np.float64)
    return RoutingInstance(int(env["n"]), edges, p,
                           int(env["source"]), int(env["destination"]))


def build_policy(cfg: RunConfig, m: int):
    knobs = {k: v for k, v in cfg.policy.items() if k != "name"}
    return make_policy(cfg.policy["name"], m, **knobs)


def build_oracle(cfg: RunConfig, env):
    ora = cfg.oracle
    name = ora["name"]
    if name == "top-k":
        return TopKOracle(env.V, env.W, env.K, ora["tie_rule"])
    if name == "exhaustive-subset":
        return SubsetOracle(env.V, env.W, env.K, env.p_star, ora["tie_rule"])
    if name == "reliable-path":
        return PathOracle(env, ora["tie_rule"])
    return RrGreedyOracle(env.graph, env.K, ora["epsilon"], ora["ell"],
                          ora["rr_budget"], ora["kpt_coef"], ora["theta_coef"])


def run_seed(master_seed: int, run_index: int) -> np.random.SeedSequence:
    """Splittable per-run seed: child (0, r) of the master entropy."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(0, run_index))


def baseline_seed(master_seed: int) -> np.random.SeedSequence:
    """Seed stream for the one-off benchmark computation: child (1, 0)."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(1, 0))


def single_run(env, policy, oracle, T: int, rng, regret_mode: str,
               opt_value: float | None = None,
               baseline_value: float | None = None) -> np.ndarray:
    """One simulation run; returns the cumulative regret curve."""
    mu = env.true_means()
    cum = np.empty(T)
    c = 0.0
    for t in range(1, T + 1):
        theta = policy.indices(t, rng)
        S = oracle.propose(theta, rng)
        fb, realized = env.step(S, rng, t)
        if regret_mode == EXPECTED:
            inc = regret_step(opt_value, env.reward(S, mu), EXPECTED)
        else:
            inc = regret_step(baseline_value, realized, REALIZED_APPROX)
        c += inc
        cum[t - 1] = c
        policy.update(fb, rng)
    return cum


def _one_run(cfg: RunConfig, env, oracle, run_index: int,
             opt_value, baseline_value) -> np.ndarray:
    rng = np.random.default_rng(run_seed(cfg.master_seed, run_index))
    policy = build_policy(cfg, env.m)
    if (not cfg.force_generic
            and _fastloop.supports(env, policy, oracle, cfg.regret_mode)):
        return _fastloop.run_cascade_w1(env, policy, cfg.horizon, rng, opt_value)
    return single_run(env, policy, oracle, cfg.horizon, rng, cfg.regret_mode,
                      opt_value, baseline_value)


def run_experiment(cfg: RunConfig) -> RunResult:
    """Execute every run of a config and aggregate the regret curves.

    Aggregation is a streaming mean/variance pass in run-index order, so
    memory stays flat in the number of runs even when per-run curves are not
    stored.
    """
    t0 = time.perf_counter()
    env = build_environment(cfg)
    oracle = build_oracle(cfg, env)
    mu = env.true_means()
    opt_value = baseline_value = None
    meta: dict = {}
    if cfg.regret_mode == EXPECTED:
        S_star = oracle.propose(mu, None)
        opt_value = env.reward(S_star, mu)
        meta["optimal_super_arm"] = _arm_repr(S_star)
    else:
        # The benchmark seed set is computed once, so it gets a generous
        # sample budget regardless of the per-round cap.
        ora = cfg.oracle
        bench_oracle = RrGreedyOracle(
            env.graph, env.K, ora["epsilon"], ora["ell"],
            max(ora["rr_budget"], _BENCH_RR_BUDGET),
            ora["kpt_coef"], ora["theta_coef"])
        brng = np.random.default_rng(baseline_seed(cfg.master_seed))
        S_star = bench_oracle.propose(mu, brng)
        sigma_hat = im_spread(env.graph, S_star, cfg.baseline_mc, brng)
        baseline_value = oracle.alpha * oracle.beta * sigma_hat
        meta["benchmark_seed_set"] = _arm_repr(S_star)
        meta["benchmark_spread"] = sigma_hat

    T, n = cfg.horizon, cfg.runs
    mean = np.zeros(T)
    m2 = np.zeros(T)
    curves: list[np.ndarray] = []

    if cfg.workers > 1:
        from joblib import Parallel, delayed
        produced = Parallel(n_jobs=cfg.workers)(
            delayed(_one_run)(cfg, env, oracle, r, opt_value, baseline_value)
            for r in range(n))
    else:
        produced = (_one_run(cfg, env, oracle, r, opt_value, baseline_value)
                    for r in range(n))

    count = 0
    for curve in produced:
        count += 1
        d = curve - mean
        mean += d / count
        m2 += d * (curve - mean)
        if cfg.store_runs:
            curves.append(curve)
    std = np.sqrt(m2 / (n - 1)) if n > 1 else np.zeros(T)
    result = RunResult(
        config=cfg, mean=mean, std=std, curves=curves,
        degenerate_std=(n == 1), opt_value=opt_value,
        baseline_value=baseline_value,
        oracle_truncations=getattr(oracle, "truncation_count", 0),
        wall_time_s=time.perf_counter() - t0, meta=meta)
    return result


def _arm_repr(S):
    if hasattr(S, "lists"):
        return [list(l) for l in S.lists]
    if hasattr(S, "items"):
        return list(S.items)
    if hasattr(S, "nodes"):
        return list(S.nodes)
    return list(S.edges)


def aggregate(curves) -> tuple:
    """Sample mean and n-1 standard deviation per round across runs.

    Returns (mean, std, degenerate) where degenerate flags the single-run
    convention std = 0.
    """
    curves = [np.asarray(c, dtype=np.float64) for c in curves]
    if not curves:
        raise ConfigurationError("aggregate needs at least one run")
    T = curves[0].size
    if any(c.size != T for c in curves):
        raise ConfigurationError("runs have mismatched horizons")
    n = len(curves)
    mean = np.zeros(T)
    m2 = np.zeros(T)
    for k, curve in enumerate(curves, start=1):
        d = curve - mean
        mean += d / k
        m2 += d * (curve - mean)
    if n == 1:
        return mean, np.zeros(T), True
    return mean, np.sqrt(m2 / (n - 1)), False


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def emit_report(result: RunResult, path) -> dict:
    """Write aggregate.csv, runs.csv (when runs are stored) and summary.json.

    Returns the summary mapping. File bytes depend only on (config,
    master_seed); wall time lives in the summary but is excluded from the
    determinism contract.
    """
    os.makedirs(path, exist_ok=True)
    T = result.mean.size
    agg_path = os.path.join(path, "aggregate.csv")
    with open(agg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("round,mean_cum_regret,std_cum_regret\n")
        for t in range(T):
            fh.write(f"{t + 1},{_fmt(result.mean[t])},{_fmt(result.std[t])}\n")
    if result.curves:
        runs_path = os.path.join(path, "runs.csv")
        with open(runs_path, "w", encoding="utf-8", newline="\n") as fh:
            heads = ",".join(f"run_{r:03d}" for r in range(len(result.curves)))
            fh.write(f"round,{heads}\n")
            for t in range(T):
                row = ",".join(_fmt(c[t]) for c in result.curves)
                fh.write(f"{t + 1},{row}\n")
    cfg = result.config
    summary = {
        "package_version": PACKAGE_VERSION,
        "config_fingerprint": cfg.fingerprint,
        "config": cfg.resolved(),
        "master_seed": cfg.master_seed,
        "run_seeds": [[0, r] for r in range(cfg.runs)],
        "horizon": cfg.horizon,
        "runs": cfg.runs,
        "regret_mode": cfg.regret_mode,
        "final_mean": result.final_mean,
        "final_std": result.final_std,
        "final_formatted": format_mean_std(result.final_mean, result.final_std),
        "degenerate_std": result.degenerate_std,
        "opt_value": result.opt_value,
        "baseline_value": result.baseline_value,
        "oracle_truncations": result.oracle_truncations,
        "wall_time_s": result.wall_time_s,
        "meta": result.meta,
    }
    with open(os.path.join(path, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def read_report(path) -> dict:
    """Load a result directory back into memory for reporting."""
    summary_path = os.path.join(path, "summary.json")
    if not os.path.exists(summary_path):
        raise ConfigurationError(f"{path} holds no summary.json")
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    agg = np.genfromtxt(os.path.join(path, "aggregate.csv"), delimiter=",",
                        names=True)
    rounds = np.atleast_1d(agg["round"])
    summary["_rounds"] = int(rounds[-1])
    summary["_mean_curve"] = np.atleast_1d(agg["mean_cum_regret"])
    summary["_std_curve"] = np.atleast_1d(agg["std_cum_regret"])
    return summary
