"""Short-term, query-conditioned edge weights from recent abnormality."""
import logging
import math
from datetime import date
from typing import Dict, Optional, Sequence, Tuple, Union
import numpy as np
import pandas as pd
from wearable_graph_project.core.errors import ArgumentError
from wearable_graph_project.core.ingestion import numeric_series
from wearable_graph_project.core.state import AbnormalityScore, DailyValue, LocalWeight, Node, SubjectData, Window
from wearable_graph_project.core.stats_kernel import squash

logger = logging.getLogger(__name__)

ZETA_CAP = 3.0

SeriesInput = Union[pd.Series, Sequence[DailyValue]]


def _as_float_series(series: SeriesInput) -> pd.Series:
    if isinstance(series, pd.Series):
        raw = series
    else:
        raw = pd.Series([row.value for row in series], index=[row.day for row in series], dtype=object)
    if raw.empty:
        return pd.Series(dtype=float)
    present = raw.dropna()
    if any(isinstance(v, str) for v in present):
        raise ArgumentError("abnormality needs a numeric series")
    try:
        values = raw.astype(float)
    except (TypeError, ValueError) as e:
        raise ArgumentError(f"abnormality needs a numeric series: {e}")
    return values.sort_index()


def _check_days(k) -> None:
    if k != "all" and (isinstance(k, bool) or not isinstance(k, int) or k < 1):
        raise ArgumentError(f"window must be a positive number of days or 'all', got {k!r}")


def historical_stats(series: SeriesInput) -> Tuple[float, float]:
    """Mean and sample standard deviation over every present value. A single value has sigma 0."""
    values = _as_float_series(series).dropna()
    if values.empty:
        return math.nan, math.nan
    mu = float(values.mean())
    sigma = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return mu, sigma


def _prepared(series: SeriesInput) -> Tuple[np.ndarray, np.ndarray]:
    values = _as_float_series(series)
    ordinals = np.fromiter((d.toordinal() for d in values.index), dtype=np.int64, count=len(values))
    return ordinals, values.to_numpy(dtype=float)


def _score_window(ordinals: np.ndarray, data: np.ndarray, t: date, k: Window, mu: float, sigma: float) -> AbnormalityScore:
    end = t.toordinal()
    mask = ordinals <= end
    if k != "all":
        mask &= ordinals > end - k
    window = data[mask]
    window = window[~np.isnan(window)]

    if window.size == 0:
        return AbnormalityScore(raw=0.0, normalized=0.0, observed_count=0, valid=False)
    if not sigma or not math.isfinite(sigma):
        raw = 0.0
    else:
        raw = float(np.mean(np.abs((window - mu) / sigma)))
    return AbnormalityScore(raw=raw, normalized=min(raw / ZETA_CAP, 1.0), observed_count=int(window.size), valid=True)


def abnormality(series: SeriesInput, t: date, k: Window,
                baseline: Optional[Tuple[float, float]] = None) -> AbnormalityScore:
    """Mean absolute z-score over the days t-k+1..t that have a value.

    k may be 'all', meaning every day up to t. baseline overrides the
    historical (mean, std) of the whole series.
    """
    _check_days(k)
    mu, sigma = baseline if baseline is not None else historical_stats(series)
    return _score_window(*_prepared(series), t, k, mu, sigma)


def abnormality_profile(series: SeriesInput, days: Sequence[date], k: Window) -> Dict[date, AbnormalityScore]:
    """abnormality for many reference days of one series; each entry equals abnormality(series, day, k)."""
    _check_days(k)
    mu, sigma = historical_stats(series)
    ordinals, data = _prepared(series)
    return {day: _score_window(ordinals, data, day, k, mu, sigma) for day in days}


def window_deviation(series: SeriesInput, t: date, k: Window) -> float:
    """Signed z-score of the window mean against the individual's history; NaN when undefined."""
    _check_days(k)
    mu, sigma = historical_stats(series)
    ordinals, data = _prepared(series)
    mask = ordinals <= t.toordinal()
    if k != "all":
        mask &= ordinals > t.toordinal() - k
    window = data[mask]
    window = window[~np.isnan(window)]
    if window.size == 0 or not sigma or not math.isfinite(sigma):
        return math.nan
    return float((window.mean() - mu) / sigma)


def short_term_weight(zeta: float, eta: float) -> float:
    """Openness dial: eta=1 favours anomalous neighbors, eta=0 calm ones, eta=0.5 is indifferent."""
    for name, value in (("zeta", zeta), ("eta", eta)):
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            raise ArgumentError(f"{name} must lie in [0, 1], got {value!r}")
    w = (2 * eta - 1) * zeta + (1 - eta)
    return min(1.0, max(0.0, w))


def local_weight(w_short: float, gamma_local: float) -> float:
    if not 0.0 <= w_short <= 1.0:
        raise ArgumentError(f"w_short must lie in [0, 1], got {w_short}")
    return squash(2.0 * w_short - 1.0, gamma_local)


def local_weights_for_node(subject: SubjectData, neighbors: Sequence[Node], t: date, k: Window,
                           eta: float, gamma_local: float) -> Dict[str, LocalWeight]:
    """Local weight per neighbor id. Neighbors without usable recent data count as calm and are flagged invalid."""
    weights: Dict[str, LocalWeight] = {}
    for node in neighbors:
        key = node.metric_key
        score = None
        if node.is_numeric and key in subject.numeric_metrics():
            score = abnormality(numeric_series(subject, key), t, k)
        valid = score is not None and score.valid
        zeta = score.normalized if valid else 0.0
        if not valid:
            logger.debug(f"No usable window data for {node.name} of {subject.subject_id}; treating it as calm.")
        weights[node.id] = LocalWeight(
            w_local=local_weight(short_term_weight(zeta, eta), gamma_local),
            zeta=zeta,
            valid=valid,
        )
    return weights
