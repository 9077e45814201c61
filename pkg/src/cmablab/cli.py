"""Command-line interface.

Subcommands: run, ingest-movielens, ingest-graph, report, selftest.
Exit codes: 0 success, 2 configuration error, 3 ingestion error, 4 runtime
simulation error.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone

from .core import ConfigurationError, IngestError, SimulationError
from .harness import emit_report, format_mean_std, load_config, read_report, run_experiment


def _parse_stamp(text: str) -> int:
    """ISO date (UTC midnight) or raw integer epoch seconds."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    except ValueError:
        raise IngestError(f"bad date {text!r}; use YYYY-MM-DD or epoch seconds") \
            from None
    return int(dt.timestamp())


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or cfg.output_dir
    if out_dir is None:
        raise ConfigurationError(
            "no output directory: set output.dir in the config or pass --out")
    result = run_experiment(cfg)
    emit_report(result, out_dir)
    print(f"final cumulative regret: "
          f"{format_mean_std(result.final_mean, result.final_std)}")
    print(f"artifacts written to {out_dir}")
    return 0


def _cmd_ingest_movielens(args) -> int:
    from .ingest import build_movielens_instance, load_ratings_table, save_instance
    table = load_ratings_table(args.ratings, args.movies)
    window = (_parse_stamp(args.start), _parse_stamp(args.end))
    inst, meta = build_movielens_instance(
        table, window, V=args.movies_count, w_cap=args.w_cap, K=args.k,
        p_star=args.p_star, noise_seed=args.noise_seed,
        selection_seed=args.selection_seed, noise_scale=args.noise_scale,
        noise_as=args.noise_as)
    save_instance(args.out, "pmc", meta, p=inst.p)
    print(f"wrote {args.out}: V={meta['V']} W={meta['W']} "
          f"fingerprint {meta['fingerprint'][:16]}")
    return 0


def _cmd_ingest_graph(args) -> int:
    from .ingest import load_edge_graph, save_instance
    graph, meta = load_edge_graph(args.edges, directed=not args.undirected)
    save_instance(args.out, "graph", meta, src=graph.src, dst=graph.dst,
                  p=graph.p)
    print(f"wrote {args.out}: n={meta['n']} m={meta['m']} "
          f"fingerprint {meta['fingerprint'][:16]}")
    return 0


def _cmd_report(args) -> int:
    summary = read_report(args.result_dir)
    print(f"config fingerprint: {summary['config_fingerprint']}")
    print(f"horizon {summary['horizon']}, {summary['runs']} runs, "
          f"regret mode {summary['regret_mode']}")
    if summary.get("opt_value") is not None:
        print(f"optimal expected reward: {summary['opt_value']:.6g}")
    if summary.get("baseline_value") is not None:
        print(f"benchmark value: {summary['baseline_value']:.6g}")
    print(f"final cumulative regret: {summary['final_formatted']}")
    if summary.get("degenerate_std"):
        print("note: single run, std is 0 by convention")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest
    results = run_selftest(quick=args.quick)
    failures = 0
    for name, ok, detail in results:
        tag = "PASS" if ok else "FAIL"
        failures += 0 if ok else 1
        print(f"[{tag}] {name}: {detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    if failures:
        raise SimulationError(f"{failures} selftest checks failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmablab",
        description="simulation laboratory for combinatorial bandits with "
                    "probabilistically triggered arms")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config and write artifacts")
    p_run.add_argument("config", help="YAML run config")
    p_run.add_argument("--out", default=None,
                       help="output directory (overrides output.dir)")
    p_run.set_defaults(func=_cmd_run)

    p_ml = sub.add_parser("ingest-movielens",
                          help="build a coverage instance from ratings CSVs")
    p_ml.add_argument("--ratings", required=True)
    p_ml.add_argument("--movies", required=True)
    p_ml.add_argument("--start", required=True, help="window start (YYYY-MM-DD)")
    p_ml.add_argument("--end", required=True, help="window end, exclusive")
    p_ml.add_argument("--out", required=True, help="output .npz path")
    p_ml.add_argument("--movies-count", type=int, default=30,
                      help="number of movies, split into thirds")
    p_ml.add_argument("--w-cap", type=int, default=None)
    p_ml.add_argument("--k", type=int, default=3)
    p_ml.add_argument("--p-star", type=float, default=0.05)
    p_ml.add_argument("--noise-seed", type=int, default=0)
    p_ml.add_argument("--selection-seed", type=int, default=None)
    p_ml.add_argument("--noise-scale", type=float, default=0.05)
    p_ml.add_argument("--noise-as", choices=("variance", "std"),
                      default="variance")
    p_ml.set_defaults(func=_cmd_ingest_movielens)

    p_g = sub.add_parser("ingest-graph",
                         help="build an influence graph from an edge list")
    p_g.add_argument("--edges", required=True)
    p_g.add_argument("--out", required=True, help="output .npz path")
    p_g.add_argument("--undirected", action="store_true",
                     help="expand each line into both directions")
    p_g.set_defaults(func=_cmd_ingest_graph)

    p_rep = sub.add_parser("report", help="summarize a result directory")
    p_rep.add_argument("result_dir")
    p_rep.set_defaults(func=_cmd_report)

    p_st = sub.add_parser("selftest", help="run the verification battery")
    p_st.add_argument("--quick", action="store_true",
                      help="reduced sample sizes")
    p_st.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except IngestError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return 3
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
