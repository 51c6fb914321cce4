import os
import sys
import argparse
import json
import logging
from pathlib import Path
from typing import List, Optional

# Adjust path to import from sibling directories
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dotenv import load_dotenv
load_dotenv()

from pydantic import ValidationError
from wearable_graph_project.config.config import Configuration, load_retrieval_config
from wearable_graph_project.core.calibration import calibrate, curves_to_csv, default_alpha_grid, parse_grid
from wearable_graph_project.core.errors import (
    ArgumentError, CalibrationError, GraphSchemaError, InsufficientDataError, WearableGraphError,
)
from wearable_graph_project.core.global_weights import GlobalStrategy, hbm_config
from wearable_graph_project.core.graph_store import init_general_graph, integrate_metric, load_graph, save_graph
from wearable_graph_project.core.ingestion import load_cohort, load_subject_csv, select_participants, selection_stats
from wearable_graph_project.core.queryset import (
    aggregate_rankings, build_subject_queries, read_rank_records, sample_multi_metric_inputs,
    sample_single_metric_inputs, to_jsonl,
)
from wearable_graph_project.core.reporting import weight_report_csv, weight_report_rows
from wearable_graph_project.core.retrieval import FusionMode, neighbor_budget, parse_query, retrieve
from wearable_graph_project.core.state import MetricRecord, NodeCategory, ParsedQuery, ValueKind
from wearable_graph_project.core.synthetic import generate_synthetic_cohort, synthetic_metric_records, write_cohort
from wearable_graph_project.tools.providers import StubEmbeddings, stub_knowledge

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(module)s.%(funcName)s:%(lineno)d - %(message)s'


class UsageError(Exception):
    """Raised instead of exiting when the command line cannot be parsed."""

    def __init__(self, message: str, usage: str):
        self.usage = usage
        super().__init__(message)


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_json(data) -> None:
    _emit(json.dumps(data, ensure_ascii=False, indent=2))


def _subject_from(path: str):
    return load_subject_csv(path, Path(path).stem)


# --- Commands ---

def cmd_build_graph(args, config: Configuration) -> int:
    cohort = load_cohort(args.cohort)
    catalogue = {r.name: r for r in synthetic_metric_records()}
    kinds = {}
    for subject in cohort:
        for metric, kind in subject.metric_kinds.items():
            kinds.setdefault(metric, kind)
    records = []
    for metric in sorted(kinds):
        record = catalogue.get(metric) or MetricRecord(name=metric, value_kind=kinds[metric])
        records.append(record.model_copy(update={"dataset": Path(args.cohort).name, "path": str(args.cohort)}))
    if not records:
        raise ArgumentError(f"No metrics found in cohort {args.cohort}")

    knowledge = stub_knowledge(args.fixture or config.KNOWLEDGE_FIXTURE_PATH)
    graph = init_general_graph(records, knowledge, StubEmbeddings(config.EMBEDDING_DIM))
    save_graph(graph, args.out)
    _emit_json({"nodes": len(graph.nodes), "edges": len(graph.edges), "out": str(args.out)})
    return 0


def cmd_integrate(args, config: Configuration) -> int:
    graph = load_graph(args.graph)
    spec = MetricRecord(
        name=args.metric,
        value_kind=ValueKind(args.kind),
        category=NodeCategory(args.category),
        sensor_info=args.sensor_info,
        dataset=args.dataset or "",
    )
    knowledge = stub_knowledge(args.fixture or config.KNOWLEDGE_FIXTURE_PATH)
    report = integrate_metric(graph, spec, knowledge, StubEmbeddings(config.EMBEDDING_DIM))
    save_graph(report.graph, args.out)
    _emit(report.model_dump_json(indent=2))
    return 0


def cmd_ingest_stats(args, config: Configuration) -> int:
    cohort = load_cohort(args.cohort)
    stats = [selection_stats(s, config.MI_BINS, config.MIN_SAMPLES).model_dump() for s in cohort]
    selection = select_participants(cohort, args.n or config.PARTICIPANT_COUNT, args.seed,
                                    config.MAX_MISSING_RATE, config.MIN_VALID_DAYS)
    _emit_json({"stats": stats, "selection": selection.model_dump()})
    return 0


def cmd_retrieve(args, config: Configuration) -> int:
    graph = load_graph(args.graph)
    subject = _subject_from(args.subject)
    cohort = load_cohort(args.cohort)
    cfg = load_retrieval_config(args.config, config)
    parsed = parse_query(args.query, graph.node_names(), default_window=cfg.default_window)
    result = retrieve(
        graph, cohort, subject, parsed, cfg,
        embedder=StubEmbeddings(config.EMBEDDING_DIM),
        strategy=GlobalStrategy(args.strategy or config.GLOBAL_STRATEGY),
        mode=FusionMode(args.mode or config.FUSION_MODE),
        numeric_only=args.numeric_only,
        default_prior_var=config.DEFAULT_PRIOR_VARIANCE,
    )
    if args.text:
        _emit(result.context.text)
    else:
        _emit(result.model_dump_json(indent=2))
    return 0


def cmd_budget(args, config: Configuration) -> int:
    kappa = config.KAPPA if args.kappa is None else args.kappa
    _emit(" ".join(str(b) for b in neighbor_budget(args.eta, kappa, args.primaries)))
    return 0


def cmd_calibrate(args, config: Configuration) -> int:
    graph = load_graph(args.graph)
    cohort = load_cohort(args.cohort)
    cfg = load_retrieval_config(args.config, config)
    grid = parse_grid(args.grid) if args.grid else default_alpha_grid(
        config.ALPHA_GRID_MIN, config.ALPHA_GRID_MAX, config.ALPHA_GRID_POINTS)
    selection = select_participants(cohort, config.PARTICIPANT_COUNT, args.seed,
                                    config.MAX_MISSING_RATE, config.MIN_VALID_DAYS)
    if not selection.subject_ids:
        raise InsufficientDataError("No cohort member passes the participant selection filters")
    chosen = set(selection.subject_ids)
    subjects = [s for s in cohort if s.subject_id in chosen]
    try:
        result = calibrate(graph, cohort, grid, hbm_config(cfg, config.DEFAULT_PRIOR_VARIANCE), subjects=subjects)
    except CalibrationError as e:
        logger.error(f"Calibration failed: {e}")
        raise
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(curves_to_csv(result))
        logger.info(f"Wrote calibration curves to {args.out}")
    _emit_json({"alpha_pop": result.alpha_pop, "alpha_ind": result.alpha_ind})
    return 0


def cmd_queryset(args, config: Configuration) -> int:
    subject = _subject_from(args.subject)
    if args.text:
        queries = build_subject_queries(subject, args.seed, multi_count=config.MULTI_METRIC_QUERIES,
                                        max_retries=config.MULTI_METRIC_MAX_RETRIES)
        _emit("".join(f"{q.query_id}\t{q.category}\t{q.openness:.2f}\t{q.question}\n" for q in queries))
        return 0
    tuples = sample_single_metric_inputs(subject, seed=args.seed)
    multi = sample_multi_metric_inputs(subject, config.MULTI_METRIC_QUERIES, args.seed,
                                       max_retries=config.MULTI_METRIC_MAX_RETRIES)
    sys.stdout.write(to_jsonl(tuples + multi.tuples))
    return 0


def cmd_eval_agg(args, config: Configuration) -> int:
    summary = aggregate_rankings(read_rank_records(args.records))
    _emit_json({method: s.model_dump() for method, s in summary.items()})
    return 0


def cmd_weight_report(args, config: Configuration) -> int:
    graph = load_graph(args.graph)
    subject = _subject_from(args.subject)
    cohort = load_cohort(args.cohort)
    cfg = load_retrieval_config(args.config, config)
    queries = build_subject_queries(subject, args.seed, multi_count=config.MULTI_METRIC_QUERIES,
                                    max_retries=config.MULTI_METRIC_MAX_RETRIES)
    if args.limit is not None:
        queries = queries[:args.limit]
    embedder = StubEmbeddings(config.EMBEDDING_DIM)
    rows = []
    for query in queries:
        parsed = ParsedQuery(metrics=query.input.metrics, window_days=query.input.window,
                             reference_time=query.input.timestamp, openness=query.openness)
        result = retrieve(graph, cohort, subject, parsed, cfg, embedder=embedder,
                          default_prior_var=config.DEFAULT_PRIOR_VARIANCE)
        rows.extend(weight_report_rows(query.query_id, result))
    sys.stdout.write(weight_report_csv(rows))
    return 0


def cmd_synth_cohort(args, config: Configuration) -> int:
    cohort = generate_synthetic_cohort(args.subjects, args.days, args.seed)
    paths = write_cohort(cohort, args.out)
    _emit_json({"subjects": len(paths), "out": str(args.out)})
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="wag", description="Query-adaptive context retrieval over a wearable-health knowledge graph")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="Build the general graph from a cohort's metrics")
    p.add_argument("--cohort", required=True, help="Directory of subject CSV files")
    p.add_argument("--out", required=True, help="Where to write the graph JSON")
    p.add_argument("--fixture", help="Knowledge fixture JSON (aliases and edge strengths)")
    p.set_defaults(handler=cmd_build_graph)

    p = sub.add_parser("integrate", help="Add a dataset metric to an existing graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", required=True, help="Metric name")
    p.add_argument("--kind", choices=[k.value for k in ValueKind], default=ValueKind.NUMERIC.value)
    p.add_argument("--category", choices=[c.value for c in NodeCategory], default=NodeCategory.PHYSIOLOGICAL.value)
    p.add_argument("--sensor-info", help="Sensor-specific note kept on merge")
    p.add_argument("--dataset", help="Dataset name")
    p.add_argument("--fixture", help="Knowledge fixture JSON")
    p.set_defaults(handler=cmd_integrate)

    p = sub.add_parser("ingest-stats", help="Per-subject selection statistics and a stratified participant sample")
    p.add_argument("--cohort", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, help="Participants to select")
    p.set_defaults(handler=cmd_ingest_stats)

    p = sub.add_parser("retrieve", help="Retrieve the context subgraph for one query")
    p.add_argument("--graph", required=True)
    p.add_argument("--subject", required=True, help="Subject CSV")
    p.add_argument("--cohort", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--config", help="Retrieval config JSON")
    p.add_argument("--text", action="store_true", help="Print the rendered context instead of JSON")
    p.add_argument("--strategy", choices=[s.value for s in GlobalStrategy])
    p.add_argument("--mode", choices=[m.value for m in FusionMode])
    p.add_argument("--numeric-only", action="store_true", help="Only consider neighbors with numeric data")
    p.set_defaults(handler=cmd_retrieve)

    p = sub.add_parser("budget", help="Neighbor budget for an openness score")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--kappa", type=int)
    p.add_argument("--primaries", type=int, default=1)
    p.set_defaults(handler=cmd_budget)

    p = sub.add_parser("calibrate", help="Calibrate alpha_pop and alpha_ind")
    p.add_argument("--graph", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--grid", help="'min,max,points' of the log-spaced alpha grid")
    p.add_argument("--config", help="Retrieval config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path for the tau curves")
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("queryset", help="Sample query inputs for one subject")
    p.add_argument("--subject", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text", action="store_true", help="Print templated questions instead of JSON Lines")
    p.set_defaults(handler=cmd_queryset)

    p = sub.add_parser("eval-agg", help="Aggregate method rankings")
    p.add_argument("records", help="JSON Lines file of rank records")
    p.set_defaults(handler=cmd_eval_agg)

    p = sub.add_parser("weight-report", help="CSV of every weight component for a sampled query set")
    p.add_argument("--graph", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--config", help="Retrieval config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, help="Use only the first N sampled queries")
    p.set_defaults(handler=cmd_weight_report)

    p = sub.add_parser("synth-cohort", help="Write a seeded synthetic cohort")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--days", type=int, default=120)
    p.set_defaults(handler=cmd_synth_cohort)

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"{parser.prog}: error: {e}\n")
        return 1
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0

    try:
        config = Configuration()
    except Exception as e:
        sys.stderr.write(f"CRITICAL: Error initializing configuration: {e}\n")
        return 1

    logging.basicConfig(level=config.LOG_LEVEL, format=LOG_FORMAT, stream=sys.stderr)

    try:
        return args.handler(args, config)
    except (GraphSchemaError, json.JSONDecodeError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        sys.stderr.write(f"error: {e}\n")
        return 2
    except (WearableGraphError, ValidationError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        sys.stderr.write(f"error: {e}\n")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
