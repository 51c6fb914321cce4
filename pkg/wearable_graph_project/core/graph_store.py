import json
import logging
import os
import tempfile
import threading
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
from pydantic import ValidationError
from wearable_graph_project.core.errors import (
    ArgumentError, DuplicateMetricError, GraphSchemaError, NodeNotFoundError, ProviderError, SchemaVersionError,
)
from wearable_graph_project.core.state import (
    SCHEMA_VERSION, DataSource, Edge, IntegrationReport, KnowledgeGraph, MetricRecord, Node, NodeDraft, Provenance,
)
from wearable_graph_project.core.utils import normalize_name, slugify
from wearable_graph_project.tools.providers import EDGE_STRENGTH_THRESHOLD, EmbeddingProvider, KnowledgeProvider

logger = logging.getLogger(__name__)

MetricInput = Union[str, MetricRecord]


def _as_record(metric: MetricInput) -> MetricRecord:
    return metric if isinstance(metric, MetricRecord) else MetricRecord(name=metric)


def _new_id(name: str, taken) -> str:
    stem = slugify(name)
    candidate, suffix = stem, 2
    while candidate in taken:
        candidate = f"{stem}_{suffix}"
        suffix += 1
    return candidate


def _node_from_draft(node_id: str, draft: NodeDraft, embedder: Optional[EmbeddingProvider]) -> Node:
    return Node(
        id=node_id,
        name=draft.name,
        category=draft.category,
        description=draft.description,
        range=draft.range,
        recommendations=draft.recommendations,
        data_source=draft.data_source,
        name_embedding=embedder.embed(draft.name) if embedder else None,
        is_data_associated=draft.is_data_associated,
        sensor_info=draft.sensor_info,
    )


def _judge_edge(knowledge: KnowledgeProvider, a: Node, b: Node) -> Optional[Edge]:
    try:
        judgement = knowledge.edge_gen(a, b)
    except Exception as e:
        logger.error(f"Edge generation failed for ({a.name}, {b.name}): {e}", exc_info=True)
        raise ProviderError(f"Edge generation failed for ({a.name}, {b.name}): {e}", subject=(a.name, b.name)) from e
    if judgement.strength < EDGE_STRENGTH_THRESHOLD:
        logger.debug(f"Dropping pair ({a.name}, {b.name}) with strength {judgement.strength}")
        return None
    return Edge(
        endpoints=(a.id, b.id),
        description=judgement.description,
        prior_weight=judgement.strength,
        provenance=Provenance.LLM_GENERATED,
    )


def init_general_graph(metric_names: Sequence[MetricInput], knowledge: KnowledgeProvider,
                       embedder: Optional[EmbeddingProvider] = None) -> KnowledgeGraph:
    """Builds the general graph: one node per metric and one edge per related pair."""
    records = [_as_record(m) for m in metric_names]
    if not records:
        raise ArgumentError("init_general_graph needs at least one metric name")

    counts = Counter(normalize_name(r.name) for r in records)
    duplicates = sorted(name for name, count in counts.items() if count > 1)
    if duplicates:
        raise DuplicateMetricError(duplicates)

    nodes: Dict[str, Node] = {}
    for record in records:
        try:
            draft = knowledge.node_gen(record)
        except Exception as e:
            raise ProviderError(f"Node generation failed for {record.name}: {e}", subject=record.name) from e
        node = _node_from_draft(_new_id(record.name, nodes), draft, embedder)
        nodes[node.id] = node

    edges: Dict[Tuple[str, str], Edge] = {}
    ordered = sorted(nodes.values(), key=lambda n: n.id)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            edge = _judge_edge(knowledge, a, b)
            if edge is not None:
                edges[edge.endpoints] = edge

    logger.info(f"Built general graph with {len(nodes)} nodes and {len(edges)} edges.")
    return KnowledgeGraph(nodes=nodes, edges=edges)


def integrate_metric(graph: KnowledgeGraph, spec: MetricRecord, knowledge: KnowledgeProvider,
                     embedder: Optional[EmbeddingProvider] = None) -> IntegrationReport:
    """Adds a metric to the graph, merging it into an existing node when the provider finds a duplicate.

    All changes are staged on copies of the node and edge maps; the input graph is never touched.
    """
    if spec.value_kind is None:
        raise ValueError(f"Incoming metric {spec.name!r} needs a value kind")

    try:
        draft = knowledge.node_gen(spec)
        match = knowledge.merge(draft, list(graph.nodes.values()))
    except Exception as e:
        logger.error(f"Knowledge provider failed while integrating {spec.name}: {e}", exc_info=True)
        raise ProviderError(f"Knowledge provider failed while integrating {spec.name}: {e}", subject=spec.name) from e

    nodes = dict(graph.nodes)
    edges = dict(graph.edges)

    if match is not None and match.same_concept and match.node_id in nodes:
        existing = nodes[match.node_id]
        notes = list(existing.sensor_info)
        for note in draft.sensor_info:
            if note not in notes:
                notes.append(note)
        update = {"sensor_info": tuple(notes)}
        if existing.data_source is None and draft.data_source is not None:
            update["data_source"] = draft.data_source
            update["is_data_associated"] = True
        nodes[existing.id] = existing.model_copy(update=update)
        logger.info(f"Merged incoming metric '{spec.name}' into node '{existing.name}' (similarity {match.similarity:.2f}).")
        return IntegrationReport(merged=[(spec.name, existing.id)], graph=KnowledgeGraph(nodes=nodes, edges=edges))

    node = _node_from_draft(_new_id(spec.name, nodes), draft, embedder)
    new_edges = 0
    for other in sorted(graph.nodes.values(), key=lambda n: n.id):
        edge = _judge_edge(knowledge, node, other)
        if edge is not None:
            edges[edge.endpoints] = edge
            new_edges += 1
    nodes[node.id] = node
    logger.info(f"Added node '{node.name}' ({node.id}) with {new_edges} new edges.")
    return IntegrationReport(created=[node.id], new_edges=new_edges, graph=KnowledgeGraph(nodes=nodes, edges=edges))


def neighborhood(graph: KnowledgeGraph, node_id: str) -> List[Tuple[Node, Edge]]:
    if node_id not in graph.nodes:
        raise NodeNotFoundError(node_id)
    pairs = [(graph.nodes[edge.other(node_id)], edge) for edge in graph.edges.values() if node_id in edge.endpoints]
    return sorted(pairs, key=lambda p: (p[0].name, p[0].id))


class GraphStore:
    """Holds the current graph value and serializes writers."""

    def __init__(self, graph: Optional[KnowledgeGraph] = None):
        self._graph = graph or KnowledgeGraph()
        self._lock = threading.Lock()

    @property
    def graph(self) -> KnowledgeGraph:
        return self._graph

    def integrate(self, spec: MetricRecord, knowledge: KnowledgeProvider,
                  embedder: Optional[EmbeddingProvider] = None) -> IntegrationReport:
        with self._lock:
            report = integrate_metric(self._graph, spec, knowledge, embedder)
            self._graph = report.graph
            return report


# --- Persistence ---

def graph_to_document(graph: KnowledgeGraph) -> dict:
    nodes = [graph.nodes[k].model_dump(mode="json") for k in sorted(graph.nodes)]
    edges = []
    for key in sorted(graph.edges):
        edge = graph.edges[key]
        edges.append({
            "endpoints": list(edge.endpoints),
            "description": edge.description,
            "prior_weight": edge.prior_weight,
            "provenance": edge.provenance.value,
        })
    return {"schema_version": graph.schema_version, "nodes": nodes, "edges": edges}


def _error_path(error: ValidationError, prefix: str) -> str:
    loc = error.errors()[0].get("loc", ()) if error.errors() else ()
    return prefix + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in loc)


def graph_from_document(doc) -> KnowledgeGraph:
    if not isinstance(doc, dict):
        raise GraphSchemaError("Graph document must be a JSON object", "$")
    for field in ("schema_version", "nodes", "edges"):
        if field not in doc:
            raise GraphSchemaError(f"Missing field '{field}'", f"$.{field}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(doc["schema_version"], SCHEMA_VERSION)
    if not isinstance(doc["nodes"], list):
        raise GraphSchemaError("'nodes' must be a list", "$.nodes")
    if not isinstance(doc["edges"], list):
        raise GraphSchemaError("'edges' must be a list", "$.edges")

    nodes: Dict[str, Node] = {}
    for i, raw in enumerate(doc["nodes"]):
        try:
            node = Node.model_validate(raw)
        except ValidationError as e:
            raise GraphSchemaError(f"Invalid node: {e.errors()[0]['msg']}", _error_path(e, f"$.nodes[{i}]")) from e
        if node.id in nodes:
            raise GraphSchemaError(f"Duplicate node id {node.id!r}", f"$.nodes[{i}].id")
        nodes[node.id] = node

    edges: Dict[Tuple[str, str], Edge] = {}
    for i, raw in enumerate(doc["edges"]):
        try:
            edge = Edge.model_validate(raw)
        except ValidationError as e:
            raise GraphSchemaError(f"Invalid edge: {e.errors()[0]['msg']}", _error_path(e, f"$.edges[{i}]")) from e
        if list(edge.endpoints) != list(raw["endpoints"]):
            raise GraphSchemaError("Edge endpoints must be sorted", f"$.edges[{i}].endpoints")
        for endpoint in edge.endpoints:
            if endpoint not in nodes:
                raise GraphSchemaError(f"Edge references unknown node {endpoint!r}", f"$.edges[{i}].endpoints")
        if edge.endpoints in edges:
            raise GraphSchemaError(f"Duplicate edge {edge.endpoints!r}", f"$.edges[{i}]")
        edges[edge.endpoints] = edge

    return KnowledgeGraph(schema_version=doc["schema_version"], nodes=nodes, edges=edges)


def save_graph(graph: KnowledgeGraph, destination: Union[str, Path]) -> None:
    """Writes the graph as JSON. Floats are written in shortest round-trip form."""
    destination = Path(destination)
    payload = json.dumps(graph_to_document(graph), ensure_ascii=False, indent=2)
    fd, tmp_path = tempfile.mkstemp(dir=destination.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(payload)
        os.replace(tmp_path, destination)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f"Saved graph ({len(graph.nodes)} nodes, {len(graph.edges)} edges) to {destination}")


def load_graph(source: Union[str, Path]) -> KnowledgeGraph:
    try:
        with open(source, "r", encoding="utf-8") as f:
            doc = json.loads(f.read())
    except UnicodeDecodeError as e:
        raise GraphSchemaError("Graph file is not valid UTF-8", "$") from e
    except json.JSONDecodeError as e:
        raise GraphSchemaError(f"Malformed JSON: {e.msg}", f"$ (line {e.lineno}, column {e.colno})") from e
    graph = graph_from_document(doc)
    logger.info(f"Loaded graph ({len(graph.nodes)} nodes, {len(graph.edges)} edges) from {source}")
    return graph
