"""Simulation laboratory for combinatorial bandits with probabilistically
triggered arms: posterior-sampling and confidence-bound policies, exact and
sampled combinatorial oracles, four networking environments, data ingestion,
and a reproducible experiment harness."""

from .core import (ConfigurationError, EXPECTED, Feedback, IngestError,
                   ItemSubset, PACKAGE_VERSION, Path, RankedLists,
                   REALIZED_APPROX, RegretRecord, SeedSet, SimulationError,
                   regret_step, validate_feedback)
from .environments import (CascadingInstance, ImEnvironment, InfluenceGraph,
                           PmcInstance, RoutingInstance, im_cascade, im_spread)
from .harness import (RunConfig, RunResult, aggregate, emit_report,
                      format_mean_std, load_config, make_blb_instance,
                      resolve_config, run_experiment)
from .ingest import (RatingsTable, build_movielens_instance, load_edge_graph,
                     load_instance, load_ratings_table, save_instance)
from .oracles import (PathOracle, RrGreedyOracle, SubsetOracle, TopKOracle,
                      exhaustive_subset_oracle, reliable_path_oracle,
                      rr_greedy_oracle, topk_oracle)
from .policies import (CascadeKlUcbPolicy, CascadeUcb1Policy, CtsPolicy,
                       CucbPolicy, TsCascadePolicy, make_policy)

__version__ = PACKAGE_VERSION

__all__ = [
    "CascadeKlUcbPolicy", "CascadeUcb1Policy", "CascadingInstance",
    "ConfigurationError", "CtsPolicy", "CucbPolicy", "EXPECTED", "Feedback",
    "ImEnvironment", "InfluenceGraph", "IngestError", "ItemSubset",
    "PACKAGE_VERSION", "Path", "PathOracle", "PmcInstance", "RankedLists",
    "RatingsTable", "REALIZED_APPROX", "RegretRecord", "RoutingInstance",
    "RrGreedyOracle", "RunConfig", "RunResult", "SeedSet", "SimulationError",
    "SubsetOracle", "TopKOracle", "TsCascadePolicy", "aggregate",
    "build_movielens_instance", "emit_report", "exhaustive_subset_oracle",
    "format_mean_std", "im_cascade", "im_spread", "load_config",
    "load_edge_graph", "load_instance", "load_ratings_table",
    "make_blb_instance", "make_policy", "regret_step", "reliable_path_oracle",
    "resolve_config", "rr_greedy_oracle", "run_experiment", "save_instance",
    "topk_oracle", "validate_feedback",
]
