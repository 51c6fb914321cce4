import logging
import math
from datetime import date
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple
from langgraph.graph import END, StateGraph
from wearable_graph_project.config.config import RetrievalConfig
from wearable_graph_project.core.errors import ArgumentError
from wearable_graph_project.core.global_weights import GlobalStrategy, global_weights_for_node, hbm_config
from wearable_graph_project.core.graph_state import RetrievalState
from wearable_graph_project.core.local_weights import local_weight, local_weights_for_node, short_term_weight
from wearable_graph_project.core.reporting import render_context
from wearable_graph_project.core.state import (
    KnowledgeGraph, LocalWeight, NeighborWeights, ParsedQuery, PrimaryMatch, PrimarySelection, RetrievalResult, SubjectData,
)
from wearable_graph_project.tools.providers import EmbeddingProvider, StubEmbeddings, cosine_similarity
from wearable_graph_project.tools.query_parser import QueryParserProvider, StubQueryParser

logger = logging.getLogger(__name__)


class FusionMode(str, Enum):
    FINAL = "final"
    GLOBAL = "global"
    LOCAL = "local"


def parse_query(text: str, dictionary: Sequence[str], parser: Optional[QueryParserProvider] = None,
                default_window: int = 7, reference_time: Optional[date] = None) -> ParsedQuery:
    if not dictionary:
        raise ArgumentError("parse_query needs a non-empty metric dictionary")
    parser = parser or StubQueryParser()
    parsed = parser.parse(text, dictionary, default_window=default_window, reference_time=reference_time)
    # provider output is re-validated
    return ParsedQuery.model_validate(parsed.model_dump())


def match_entities(metrics: Sequence[str], graph: KnowledgeGraph, embedder: EmbeddingProvider,
                   delta: float) -> Tuple[List[PrimaryMatch], List[str]]:
    """Best-matching node per query metric, accepted when its cosine similarity reaches delta."""
    node_vectors = {}
    for node in graph.nodes.values():
        vector = node.name_embedding
        if vector is None or len(vector) != embedder.dimension:
            vector = embedder.embed(node.name)
        node_vectors[node.id] = vector

    primaries: List[PrimaryMatch] = []
    misses: List[str] = []
    for metric in metrics:
        try:
            query_vector = embedder.embed(metric)
        except ArgumentError:
            logger.warning(f"Query metric {metric!r} cannot be embedded; reporting it as a miss.")
            misses.append(metric)
            continue
        scored = sorted(
            ((cosine_similarity(query_vector, node_vectors[node.id]), node) for node in graph.nodes.values()),
            key=lambda p: (-p[0], p[1].name, p[1].id),
        )
        if not scored or scored[0][0] < delta:
            best = f"{scored[0][1].name} ({scored[0][0]:.3f})" if scored else "none"
            logger.warning(f"No node matches query metric {metric!r} (best: {best}, threshold {delta}).")
            misses.append(metric)
            continue
        similarity, node = scored[0]
        if any(p.node_id == node.id for p in primaries):
            logger.debug(f"Query metric {metric!r} matches already selected node {node.name}.")
            continue
        primaries.append(PrimaryMatch(node_id=node.id, name=node.name, metric=metric, similarity=similarity))
    return primaries, misses


def neighbor_budget(eta: float, kappa: int, primary_count: int) -> List[int]:
    """Splits round-half-up(eta * kappa) across primaries; the first ones get the remainder."""
    if primary_count < 1:
        raise ArgumentError("neighbor_budget needs at least one primary node")
    if not 0.0 <= eta <= 1.0:
        raise ArgumentError(f"eta must lie in [0, 1], got {eta}")
    if kappa < 0:
        raise ArgumentError(f"kappa must be non-negative, got {kappa}")
    total = math.floor(round(eta * kappa, 9) + 0.5)
    total = min(kappa, max(0, total))
    base, remainder = divmod(total, primary_count)
    return [base + (1 if i < remainder else 0) for i in range(primary_count)]


def fuse(w_global: float, w_local: float, beta: float) -> float:
    for name, value in (("w_global", w_global), ("w_local", w_local), ("beta", beta)):
        if not 0.0 <= value <= 1.0:
            raise ArgumentError(f"{name} must lie in [0, 1], got {value}")
    w = (1.0 - beta) * w_global + beta * w_local
    return min(max(w, min(w_global, w_local)), max(w_global, w_local))


def select_top_neighbors(candidates: Sequence[NeighborWeights], budget: int) -> List[NeighborWeights]:
    """Top-budget neighbors by fused weight; ties go to the higher global weight, the more important node, then the smaller name."""
    ranked = sorted(candidates, key=lambda w: (-w.w_final, -w.w_global, -w.importance, w.neighbor_name, w.neighbor_id))
    return ranked[:max(0, budget)]


def _fusion_beta(mode: FusionMode, beta: float) -> float:
    if mode == FusionMode.GLOBAL:
        return 0.0
    if mode == FusionMode.LOCAL:
        return 1.0
    return beta


def create_retrieval_graph(graph: KnowledgeGraph, cohort: Sequence[SubjectData], subject: SubjectData,
                           cfg: RetrievalConfig, embedder: EmbeddingProvider,
                           strategy: GlobalStrategy = GlobalStrategy.HBM, mode: FusionMode = FusionMode.FINAL,
                           numeric_only: bool = False, default_prior_var: float = 1.0):
    hbm = hbm_config(cfg, default_prior_var)
    beta = _fusion_beta(mode, cfg.beta)

    def match_node(state: RetrievalState):
        parsed = state["parsed"]
        primaries, misses = match_entities(parsed.metrics, graph, embedder, cfg.delta)
        days = subject.all_days()
        reference_time = parsed.reference_time or (days[-1] if days else None)
        if not primaries:
            logger.warning(f"No query metric matched the graph (misses: {misses}).")
        return {"primaries": primaries, "misses": misses, "no_match": not primaries, "reference_time": reference_time}

    def weigh_node(state: RetrievalState):
        parsed = state["parsed"]
        primaries = state["primaries"]
        t = state["reference_time"]
        by_name = sorted(primaries, key=lambda p: (p.name, p.node_id))
        budgets = dict(zip((p.node_id for p in by_name), neighbor_budget(parsed.openness, cfg.kappa, len(primaries))))
        primary_ids = [p.node_id for p in primaries]

        candidates: Dict[str, List[NeighborWeights]] = {}
        for match in primaries:
            others = [pid for pid in primary_ids if pid != match.node_id]
            bundle = global_weights_for_node(graph, cohort, subject, match.node_id, hbm, strategy, exclude=others)
            rows = bundle.neighbors
            if numeric_only:
                rows = [w for w in rows if w.numeric]
            nodes = [graph.nodes[w.neighbor_id] for w in rows]
            if t is not None:
                local = local_weights_for_node(subject, nodes, t, parsed.window_days, parsed.openness, cfg.gamma_local)
            else:
                calm = local_weight(short_term_weight(0.0, parsed.openness), cfg.gamma_local)
                local = {n.id: LocalWeight(w_local=calm, zeta=0.0, valid=False) for n in nodes}
            fused = []
            for w in rows:
                lw = local[w.neighbor_id]
                fused.append(w.model_copy(update={
                    "w_local": lw.w_local,
                    "zeta": lw.zeta,
                    "local_valid": lw.valid,
                    "w_final": fuse(w.w_global, lw.w_local, beta),
                }))
            candidates[match.node_id] = fused
        return {"budgets": budgets, "candidates": candidates}

    def select_node(state: RetrievalState):
        selected = []
        for match in state["primaries"]:
            pool = state["candidates"][match.node_id]
            budget = state["budgets"][match.node_id]
            chosen = select_top_neighbors(pool, budget)
            logger.info(f"{match.name}: selected {[w.neighbor_name for w in chosen]} (budget {budget}, {len(pool)} candidates)")
            selected.append(PrimarySelection(
                primary_id=match.node_id, primary_name=match.name, budget=budget, neighbors=chosen, candidates=pool,
            ))
        return {"selected": selected}

    def render_node(state: RetrievalState):
        context = render_context(graph, subject, state["parsed"], state["reference_time"],
                                 state["primaries"], state["selected"])
        return {"context": context}

    workflow = StateGraph(RetrievalState)
    workflow.add_node("match", match_node)
    workflow.add_node("weigh", weigh_node)
    workflow.add_node("select", select_node)
    workflow.add_node("render", render_node)

    workflow.set_entry_point("match")

    def has_primaries(state: RetrievalState):
        return "end" if state["no_match"] else "continue"

    workflow.add_conditional_edges("match", has_primaries, {"continue": "weigh", "end": END})
    workflow.add_edge("weigh", "select")
    workflow.add_edge("select", "render")
    workflow.add_edge("render", END)
    return workflow.compile()


def retrieve(graph: KnowledgeGraph, cohort: Sequence[SubjectData], subject: SubjectData, parsed: ParsedQuery,
             cfg: RetrievalConfig, *, embedder: Optional[EmbeddingProvider] = None,
             strategy: GlobalStrategy = GlobalStrategy.HBM, mode: FusionMode = FusionMode.FINAL,
             numeric_only: bool = False, default_prior_var: float = 1.0) -> RetrievalResult:
    """Runs match -> weigh -> select -> render for one parsed query. Never mutates the graph."""
    embedder = embedder or StubEmbeddings()
    app = create_retrieval_graph(graph, cohort, subject, cfg, embedder, strategy, mode, numeric_only, default_prior_var)
    final = app.invoke({
        "parsed": parsed,
        "reference_time": None,
        "primaries": [],
        "misses": [],
        "no_match": False,
        "budgets": {},
        "candidates": {},
        "selected": [],
        "context": None,
    })
    result = RetrievalResult(
        query=parsed,
        reference_time=final["reference_time"],
        primaries=final["primaries"],
        selected=final["selected"],
        misses=final["misses"],
        no_match=final["no_match"],
    )
    if final.get("context") is not None:
        result.context = final["context"]
    return result
