"""Data-grounded query inputs for evaluation, plus aggregation of method rankings."""
import json
import logging
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import numpy as np
from pydantic import BaseModel, ValidationError
from wearable_graph_project.core.errors import ArgumentError, RankRecordError
from wearable_graph_project.core.ingestion import numeric_series
from wearable_graph_project.core.local_weights import abnormality_profile
from wearable_graph_project.core.state import (
    QUERY_CATEGORIES, AbnormalityScore, GeneratedQuery, MethodSummary, MultiMetricSample, QueryCategory,
    QueryInputTuple, RankRecord, SubjectData, ValueKind, Window,
)
from wearable_graph_project.tools.query_parser import QueryGenProvider, StubQueryGenerator

logger = logging.getLogger(__name__)

DEFAULT_WINDOWS: Tuple[Window, ...] = (1, 7, 14, 30, "all")
LEVELS = ("low", "medium", "high")

Profile = Dict[date, Tuple[AbnormalityScore, str]]


def _present_days(subject: SubjectData, metric: str) -> List[date]:
    return [r.day for r in subject.series[metric] if r.value is not None]


def _metric_profile(subject: SubjectData, metric: str, k: Window) -> Profile:
    """Abnormality and tercile level for every day on which the metric has a value."""
    days = _present_days(subject, metric)
    if not days:
        return {}
    scores = abnormality_profile(numeric_series(subject, metric), days, k)
    raw = np.array([scores[d].raw for d in days], dtype=float)
    if len(days) < 3:
        return {d: (scores[d], "low") for d in days}
    q1, q2 = np.quantile(raw, [1.0 / 3.0, 2.0 / 3.0])
    profile = {}
    for d, value in zip(days, raw):
        level = "low" if value <= q1 else "medium" if value <= q2 else "high"
        profile[d] = (scores[d], level)
    return profile


def _pick(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


def sample_single_metric_inputs(subject: SubjectData, windows: Sequence[Window] = DEFAULT_WINDOWS,
                                seed: int = 0) -> List[QueryInputTuple]:
    """One tuple per occupied anomaly tercile (and one on a missing day) for each numeric metric and window.

    Textual metrics get a single tuple on a random day that has an entry.
    """
    rng = np.random.default_rng(seed)
    tuples: List[QueryInputTuple] = []
    for metric in sorted(subject.series):
        if subject.metric_kinds[metric] != ValueKind.NUMERIC:
            days = _present_days(subject, metric)
            if days:
                tuples.append(QueryInputTuple(
                    kind="single", metrics=[metric], timestamp=_pick(rng, days),
                    window=_pick(rng, list(windows)), anomaly_level="n/a", zeta=[None],
                ))
            continue

        missing_days = [r.day for r in subject.series[metric] if r.value is None]
        for k in windows:
            profile = _metric_profile(subject, metric, k)
            for level in LEVELS:
                days = [d for d, (_, lv) in profile.items() if lv == level]
                if not days:
                    continue
                t = _pick(rng, days)
                tuples.append(QueryInputTuple(
                    kind="single", metrics=[metric], timestamp=t, window=k,
                    anomaly_level=level, zeta=[profile[t][0].normalized],
                ))
            if missing_days:
                t = _pick(rng, missing_days)
                score = abnormality_profile(numeric_series(subject, metric), [t], k)[t]
                tuples.append(QueryInputTuple(
                    kind="single", metrics=[metric], timestamp=t, window=k,
                    anomaly_level="missing", zeta=[score.normalized if score.valid else None],
                ))
    logger.info(f"Sampled {len(tuples)} single-metric inputs for {subject.subject_id}.")
    return tuples


def sample_multi_metric_inputs(subject: SubjectData, count: int, seed: int = 0,
                               windows: Sequence[Window] = DEFAULT_WINDOWS, max_retries: int = 20) -> MultiMetricSample:
    """count tuples of 2-3 numeric metrics on a day where all of them have values."""
    numeric = subject.numeric_metrics()
    if len(numeric) < 2:
        logger.warning(f"Subject {subject.subject_id} has fewer than 2 numeric metrics; no multi-metric inputs.")
        return MultiMetricSample(insufficient_metrics=True)

    rng = np.random.default_rng(seed)
    present = {m: set(_present_days(subject, m)) for m in numeric}
    profiles: Dict[Tuple[str, Window], Profile] = {}
    tuples: List[QueryInputTuple] = []
    for n in range(count):
        for _ in range(max_retries):
            size = 3 if len(numeric) >= 3 and rng.random() < 0.5 else 2
            chosen = sorted(str(m) for m in rng.choice(numeric, size=size, replace=False))
            common = sorted(set.intersection(*(present[m] for m in chosen)))
            if not common:
                continue
            t = _pick(rng, common)
            k = _pick(rng, list(windows))
            levels, zetas = [], []
            for m in chosen:
                if (m, k) not in profiles:
                    profiles[(m, k)] = _metric_profile(subject, m, k)
                score, level = profiles[(m, k)][t]
                levels.append(level)
                zetas.append(score.normalized)
            tuples.append(QueryInputTuple(
                kind="multiple", metrics=chosen, timestamp=t, window=k, anomaly_level=levels, zeta=zetas,
            ))
            break
        else:
            logger.warning(f"Skipping multi-metric input {n} for {subject.subject_id}: no common day after {max_retries} tries.")
    return MultiMetricSample(tuples=tuples)


def assign_openness(category: Union[str, QueryCategory], seed: int = 0) -> float:
    if isinstance(category, str):
        if category not in QUERY_CATEGORIES:
            raise ArgumentError(f"Unknown query category: {category!r}")
        category = QUERY_CATEGORIES[category]
    lo, hi = category.openness_range
    return float(min(hi, np.random.default_rng(seed).uniform(lo, hi)))


def aggregate_rankings(records: Sequence[RankRecord]) -> Dict[str, MethodSummary]:
    """Mean rank and win rate (share of records ranked first) per method."""
    if not records:
        return {}
    methods = sorted(records[0].ranks)
    for record in records:
        if sorted(record.ranks) != methods:
            raise RankRecordError(f"Record {record.query_id} ranks methods {sorted(record.ranks)}, expected {methods}",
                                  query_id=record.query_id)
        if sorted(record.ranks.values()) != list(range(1, len(methods) + 1)):
            raise RankRecordError(f"Record {record.query_id} does not rank 1..{len(methods)} exactly once: {record.ranks}",
                                  query_id=record.query_id)
    total = len(records)
    return {
        m: MethodSummary(
            mean_rank=sum(r.ranks[m] for r in records) / total,
            win_rate=sum(1 for r in records if r.ranks[m] == 1) / total,
        )
        for m in methods
    }


# --- JSON Lines ---

def to_jsonl(items: Sequence[BaseModel]) -> str:
    return "".join(item.model_dump_json() + "\n" for item in items)


def write_jsonl(items: Sequence[BaseModel], destination: Union[str, Path]) -> None:
    with open(destination, "w", encoding="utf-8") as f:
        f.write(to_jsonl(items))


def read_rank_records(source: Union[str, Path]) -> List[RankRecord]:
    records = []
    with open(source, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise RankRecordError(f"{source}:{line_no}: malformed JSON ({e.msg})")
            try:
                records.append(RankRecord.model_validate(data))
            except ValidationError as e:
                query_id = data.get("query_id") if isinstance(data, dict) else None
                raise RankRecordError(f"{source}:{line_no}: invalid rank record {query_id!r}: {e.errors()[0]['msg']}",
                                      query_id=query_id) from e
    logger.info(f"Read {len(records)} rank records from {source}")
    return records


# --- Query set assembly ---

def build_subject_queries(subject: SubjectData, seed: int, generator: Optional[QueryGenProvider] = None,
                          windows: Sequence[Window] = DEFAULT_WINDOWS, multi_count: int = 5,
                          max_retries: int = 20) -> List[GeneratedQuery]:
    """Pairs every sampled input with a category, an openness score and a question."""
    generator = generator or StubQueryGenerator()
    rng = np.random.default_rng(seed)
    single = [c for c in QUERY_CATEGORIES.values() if c.kind == "single"]
    multiple = [c for c in QUERY_CATEGORIES.values() if c.kind == "multiple"]

    inputs = sample_single_metric_inputs(subject, windows, seed)
    inputs += sample_multi_metric_inputs(subject, multi_count, seed, windows, max_retries).tuples
    queries = []
    for i, item in enumerate(inputs):
        category = _pick(rng, single if item.kind == "single" else multiple)
        openness = assign_openness(category, int(rng.integers(2 ** 32)))
        queries.append(GeneratedQuery(
            query_id=f"{subject.subject_id}-{i:04d}",
            subject_id=subject.subject_id,
            category=category.name,
            openness=openness,
            question=generator.generate(item, category),
            input=item,
        ))
    return queries


def build_query_set(cohort: Sequence[SubjectData], seed: int, generator: Optional[QueryGenProvider] = None,
                    windows: Sequence[Window] = DEFAULT_WINDOWS, multi_count: int = 5,
                    max_retries: int = 20) -> List[GeneratedQuery]:
    queries = []
    for i, subject in enumerate(sorted(cohort, key=lambda s: s.subject_id)):
        queries += build_subject_queries(subject, seed + i, generator, windows, multi_count, max_retries)
    logger.info(f"Built query set of {len(queries)} queries for {len(cohort)} subjects.")
    return queries
