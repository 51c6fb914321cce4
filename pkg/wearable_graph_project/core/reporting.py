import io
import logging
import math
from datetime import date, timedelta
from typing import Dict, List, Optional, Sequence
import pandas as pd
from wearable_graph_project.core.ingestion import numeric_series
from wearable_graph_project.core.local_weights import window_deviation
from wearable_graph_project.core.state import (
    ContextDocument, ContextSection, KnowledgeGraph, Node, ParsedQuery, PrimaryMatch, PrimarySelection,
    RetrievalResult, SubjectData, ValueKind, Window,
)
from wearable_graph_project.tools.providers import strength_band

logger = logging.getLogger(__name__)

MATCHED_HEADER = "Matched nodes:"
RELATED_HEADER = "Nodes related to matched nodes which might be helpful:"
WEIGHT_REPORT_COLUMNS = [
    "query_id", "primary", "neighbor", "w_prior", "strength_band", "r_pop", "r_ind",
    "mu_pop", "mu_ind", "r_post", "w_global", "w_local", "w_final", "fallback_path",
]


def window_days(subject: SubjectData, t: date, k: Window) -> List[date]:
    """Calendar days covered by the window ending on t; 'all' starts at the subject's first day."""
    if k == "all":
        days = subject.all_days()
        start = days[0] if days and days[0] <= t else t
        return [start + timedelta(days=i) for i in range((t - start).days + 1)]
    return [t - timedelta(days=k - 1 - i) for i in range(k)]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value).replace("|", "/").replace("\n", " ")


def _data_table(node: Node, subject: SubjectData, days: Sequence[date]) -> List[str]:
    rows = {r.day: r.value for r in subject.series.get(node.metric_key, ())}
    lines = [f"| date | {node.name} |", "| --- | --- |"]
    lines.extend(f"| {d.isoformat()} | {_cell(rows.get(d))} |" for d in days)
    return lines


def _deviation(node: Node, subject: SubjectData, t: Optional[date], k: Window) -> float:
    if t is None or subject.metric_kinds.get(node.metric_key) != ValueKind.NUMERIC:
        return math.nan
    return window_deviation(numeric_series(subject, node.metric_key), t, k)


def _node_block(node: Node, subject: SubjectData, t: Optional[date], k: Window) -> List[str]:
    lines = [f"{node.name}:"]
    if node.description:
        lines.append(f"description: {node.description}")
    if node.range:
        lines.append(f"range: {node.range}")
    if node.recommendations:
        lines.append(f"recommendation: {node.recommendations}")
    for note in node.sensor_info:
        lines.append(f"sensor: {note}")
    if t is not None:
        lines.extend(_data_table(node, subject, window_days(subject, t, k)))
    z = _deviation(node, subject, t, k)
    span = "Overall" if k == "all" else f"Recent {k}-day"
    lines.append(f"{span} value deviates from the individual's average by {z:.2f} standard deviations.")
    return lines


def render_context(graph: KnowledgeGraph, subject: SubjectData, parsed: ParsedQuery, reference_time: Optional[date],
                   primaries: Sequence[PrimaryMatch], selected: Sequence[PrimarySelection]) -> ContextDocument:
    """Plain-text context: matched nodes first, then the selected neighbors of each."""
    k = parsed.window_days
    sections: List[ContextSection] = []
    for match in primaries:
        node = graph.nodes[match.node_id]
        text = "\n".join(_node_block(node, subject, reference_time, k))
        sections.append(ContextSection(kind="primary", node_id=node.id, text=text))

    for selection in selected:
        for weights in selection.neighbors:
            node = graph.nodes[weights.neighbor_id]
            edge = graph.edge(selection.primary_id, node.id)
            lines = [f"{node.name} is related to {selection.primary_name}: {edge.description if edge else ''}".rstrip()]
            lines.extend(_node_block(node, subject, reference_time, k))
            sections.append(ContextSection(kind="related", node_id=node.id, text="\n".join(lines)))

    parts = [MATCHED_HEADER] + [s.text for s in sections if s.kind == "primary"]
    related = [s.text for s in sections if s.kind == "related"]
    if related:
        parts += [RELATED_HEADER] + related
    return ContextDocument(sections=sections, text="\n\n".join(parts) + "\n")


# --- Weight report ---

def weight_report_rows(query_id: str, result: RetrievalResult) -> List[Dict]:
    rows = []
    for selection in result.selected:
        for w in selection.candidates:
            rows.append({
                "query_id": query_id,
                "primary": selection.primary_name,
                "neighbor": w.neighbor_name,
                "w_prior": w.w_prior,
                "strength_band": strength_band(w.w_prior),
                "r_pop": w.r_pop,
                "r_ind": w.r_ind,
                "mu_pop": w.mu_pop,
                "mu_ind": w.mu_ind,
                "r_post": w.r_post,
                "w_global": w.w_global,
                "w_local": w.w_local,
                "w_final": w.w_final,
                "fallback_path": w.fallback_path,
            })
    return rows


def weight_report_csv(rows: Sequence[Dict]) -> str:
    buffer = io.StringIO()
    pd.DataFrame(list(rows), columns=WEIGHT_REPORT_COLUMNS).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()
