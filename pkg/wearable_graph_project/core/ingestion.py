import logging
import re
from datetime import date
from itertools import combinations
from pathlib import Path
from typing import List, Sequence, Tuple, Union
import numpy as np
import pandas as pd
from wearable_graph_project.core.errors import ArgumentError, DataFormatError
from wearable_graph_project.core.state import (
    DailyValue, SelectionResult, SelectionStats, SubjectData, ValueKind, VariabilityResult,
)
from wearable_graph_project.core.stats_kernel import mutual_information

logger = logging.getLogger(__name__)

_ISO_DAY = re.compile(r"^\d{4}-\d{2}-\d{2}$")
MEAN_EPSILON = 1e-12


def load_subject_csv(source: Union[str, Path], subject_id: str) -> SubjectData:
    """Reads one subject file: a 'date' column followed by one column per metric."""
    try:
        df = pd.read_csv(source, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"{source}: file has no header row") from e
    df.columns = [str(c).strip() for c in df.columns]
    if not len(df.columns) or df.columns[0] != "date":
        raise DataFormatError(f"{source}: first column must be 'date', got {list(df.columns)[:1]}")

    days: List[date] = []
    seen = set()
    for i, raw in enumerate(df["date"]):
        row_number = i + 2  # header is line 1
        text = raw.strip()
        try:
            if not _ISO_DAY.match(text):
                raise ValueError(text)
            day = date.fromisoformat(text)
        except ValueError:
            raise DataFormatError(f"{source}: unparsable date {raw!r} at row {row_number}", row=row_number)
        if day in seen:
            raise DataFormatError(f"{source}: duplicate date {day.isoformat()}", row=row_number, day=day.isoformat())
        seen.add(day)
        days.append(day)

    order = np.argsort(np.array([d.toordinal() for d in days], dtype=np.int64), kind="stable")
    df = df.iloc[order].reset_index(drop=True)
    days = [days[i] for i in order]

    series, kinds = {}, {}
    for column in df.columns[1:]:
        cells = df[column].str.strip()
        present = cells != ""
        parsed = pd.to_numeric(cells[present], errors="coerce")
        if parsed.notna().all():
            kinds[column] = ValueKind.NUMERIC
            values = [float(parsed[i]) if present[i] else None for i in range(len(cells))]
        else:
            kinds[column] = ValueKind.TEXTUAL
            values = [cells[i] if present[i] else None for i in range(len(cells))]
        series[column] = tuple(DailyValue(day=d, value=v) for d, v in zip(days, values))

    subject = SubjectData(subject_id=subject_id, series=series, metric_kinds=kinds)
    logger.info(f"Loaded subject {subject_id}: {len(series)} metrics over {len(days)} days.")
    return subject


def load_cohort(directory: Union[str, Path]) -> List[SubjectData]:
    """One CSV per subject; the file stem is the subject id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Cohort directory not found: {directory}")
    cohort = [load_subject_csv(path, path.stem) for path in sorted(directory.glob("*.csv"))]
    logger.info(f"Loaded cohort of {len(cohort)} subjects from {directory}")
    return cohort


def write_subject_csv(subject: SubjectData, destination: Union[str, Path]) -> None:
    metrics = sorted(subject.series)
    frame = pd.DataFrame(index=pd.Index(subject.all_days(), name="date"))
    for metric in metrics:
        frame[metric] = pd.Series({row.day: row.value for row in subject.series[metric]}, dtype=object)
    frame.index = [d.isoformat() for d in frame.index]
    frame.index.name = "date"
    frame.to_csv(destination, na_rep="")


def numeric_series(subject: SubjectData, metric: str) -> pd.Series:
    """Float series indexed by day; missing observations are NaN. Cached per subject."""
    key = ("numeric", metric)
    if key not in subject._cache:
        if subject.metric_kinds.get(metric) != ValueKind.NUMERIC:
            raise ArgumentError(f"Metric {metric!r} of subject {subject.subject_id} is not numeric")
        rows = subject.series[metric]
        subject._cache[key] = pd.Series(
            [np.nan if r.value is None else r.value for r in rows],
            index=pd.Index([r.day for r in rows]),
            dtype=float,
        )
    return subject._cache[key]


def paired_observations(subject: SubjectData, x: str, y: str) -> List[Tuple[float, float]]:
    """Days on which both metrics have a value. Empty when either metric is missing or not numeric."""
    if subject.metric_kinds.get(x) != ValueKind.NUMERIC or subject.metric_kinds.get(y) != ValueKind.NUMERIC:
        return []
    joined = pd.concat([numeric_series(subject, x), numeric_series(subject, y)], axis=1, join="inner").dropna()
    return [(float(a), float(b)) for a, b in joined.itertuples(index=False, name=None)]


def missing_rate(subject: SubjectData) -> float:
    rates = []
    for metric in sorted(subject.series):
        rows = subject.series[metric]
        if rows:
            rates.append(sum(1 for r in rows if r.value is None) / len(rows))
    if not rates:
        raise ArgumentError(f"Subject {subject.subject_id} has no dated rows")
    return float(np.mean(rates))


def valid_period(subject: SubjectData) -> int:
    days = subject.all_days()
    if not days:
        raise ArgumentError(f"Subject {subject.subject_id} has no dated rows")
    return (days[-1] - days[0]).days


def variability(subject: SubjectData) -> VariabilityResult:
    """Sum of per-metric coefficients of variation (sample std over mean)."""
    cv, eligible = 0.0, 0
    for metric in subject.numeric_metrics():
        values = numeric_series(subject, metric).dropna()
        if len(values) < 2:
            continue
        mean = float(values.mean())
        if abs(mean) < MEAN_EPSILON:
            logger.debug(f"Skipping {metric} of {subject.subject_id} in CV: mean is zero")
            continue
        cv += float(values.std(ddof=1)) / mean
        eligible += 1
    if eligible == 0:
        logger.warning(f"Subject {subject.subject_id} has no metrics eligible for CV")
    return VariabilityResult(cv=cv, eligible_metrics=eligible, no_eligible_metrics=eligible == 0)


def pairwise_mi(subject: SubjectData, bins: int = 8, min_samples: int = 10) -> float:
    if bins < 2:
        raise ArgumentError("bins must be at least 2")
    total = 0.0
    for x, y in combinations(subject.numeric_metrics(), 2):
        pairs = paired_observations(subject, x, y)
        if len(pairs) < max(min_samples, 2):
            continue
        xs, ys = zip(*pairs)
        total += mutual_information(xs, ys, bins)
    return total


def selection_stats(subject: SubjectData, bins: int = 8, min_samples: int = 10) -> SelectionStats:
    var = variability(subject)
    return SelectionStats(
        subject_id=subject.subject_id,
        md=missing_rate(subject),
        vl=valid_period(subject),
        cv=var.cv,
        mi=pairwise_mi(subject, bins, min_samples),
        no_eligible_metrics=var.no_eligible_metrics,
    )


def select_participants(cohort: Sequence[SubjectData], n: int, seed: int,
                        max_missing_rate: float = 0.5, min_valid_days: int = 30) -> SelectionResult:
    """Stratified sample over CV deciles of the subjects that pass the completeness and duration filters."""
    if n < 1:
        raise ArgumentError("n must be at least 1")

    scored = []
    for subject in sorted(cohort, key=lambda s: s.subject_id):
        try:
            md, vl = missing_rate(subject), valid_period(subject)
        except ArgumentError as e:
            logger.warning(f"Excluding subject {subject.subject_id}: {e}")
            continue
        if md <= max_missing_rate and vl >= min_valid_days:
            scored.append((variability(subject).cv, subject.subject_id))
        else:
            logger.info(f"Subject {subject.subject_id} not eligible (md={md:.3f}, vl={vl})")

    scored.sort()
    eligible = [sid for _, sid in scored]
    shortfall = n > len(eligible)
    if shortfall:
        logger.warning(f"Requested {n} participants but only {len(eligible)} are eligible.")
    if not eligible:
        return SelectionResult(subject_ids=[], eligible=[], shortfall=True)

    rng = np.random.default_rng(seed)
    deciles = [[str(sid) for sid in part] for part in np.array_split(np.array(eligible, dtype=object), 10)]
    for decile in deciles:
        rng.shuffle(decile)

    selected: List[str] = []
    while len(selected) < min(n, len(eligible)):
        for decile in deciles:
            if decile and len(selected) < n:
                selected.append(decile.pop(0))
    return SelectionResult(subject_ids=selected, eligible=eligible, shortfall=shortfall)
