"""Numeric primitives shared by the weighting, calibration and selection code."""
import logging
import math
from typing import Mapping, Sequence, Tuple, Union
import numpy as np
from scipy import special, stats
from wearable_graph_project.core.errors import ArgumentError
from wearable_graph_project.core.state import CorrelationEstimate

logger = logging.getLogger(__name__)

FISHER_EPSILON = 1e-6

Scores = Union[Sequence[float], Mapping[str, float]]


def _finite(value: float, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ArgumentError(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value):
        raise ArgumentError(f"{name} must be finite, got {value}")
    return value


def spearman(pairs: Sequence[Tuple[float, float]], min_samples: int = 10) -> CorrelationEstimate:
    """Spearman correlation of pairwise-complete observations.

    Average ranks for ties, then the plain Pearson formula on the ranks.
    Returns an invalid estimate when there are too few pairs or either side is constant.
    """
    n = len(pairs)
    if n < max(min_samples, 2):
        return CorrelationEstimate(n=n, valid=False)

    data = np.asarray(pairs, dtype=float)
    x, y = data[:, 0], data[:, 1]
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return CorrelationEstimate(n=n, valid=False)

    rx = stats.rankdata(x) - (n + 1) / 2.0
    ry = stats.rankdata(y) - (n + 1) / 2.0
    r = float(np.sum(rx * ry) / math.sqrt(np.sum(rx * rx) * np.sum(ry * ry)))
    return CorrelationEstimate(r=min(1.0, max(-1.0, r)), n=n, valid=True)


def fisher_z(r: float) -> float:
    r = _finite(r, "r")
    bound = 1.0 - FISHER_EPSILON
    return float(np.arctanh(min(bound, max(-bound, r))))


def inv_fisher_z(z: float) -> float:
    return float(np.tanh(_finite(z, "z")))


def kendall_tau(a: Scores, b: Scores) -> float:
    """Tie-corrected Kendall tau (tau-b) between two scorings of the same items.

    Accepts aligned sequences or item -> score mappings. When either side is
    entirely tied tau-b is undefined and 0.0 is returned.
    """
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)):
            raise ArgumentError("kendall_tau needs two mappings or two sequences")
        if set(a) != set(b):
            missing = sorted(set(a) ^ set(b))
            raise ArgumentError(f"Rankings cover different items: {missing}")
        items = sorted(a)
        x = [a[k] for k in items]
        y = [b[k] for k in items]
    else:
        x, y = list(a), list(b)
        if len(x) != len(y):
            raise ArgumentError(f"Rankings have different lengths: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ArgumentError("kendall_tau needs at least 2 items")

    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if np.ptp(x_arr) == 0 or np.ptp(y_arr) == 0:
        return 0.0
    tau, _ = stats.kendalltau(x_arr, y_arr, variant="b")
    return float(min(1.0, max(-1.0, tau)))


def mutual_information(x: Sequence[float], y: Sequence[float], bins: int = 8) -> float:
    """Plug-in mutual information (nats) from a joint equal-width histogram, clamped at 0."""
    if len(x) != len(y):
        raise ArgumentError(f"Length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ArgumentError("mutual_information needs at least 2 observations")
    if bins < 2:
        raise ArgumentError("bins must be at least 2")

    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if np.ptp(x_arr) == 0 or np.ptp(y_arr) == 0:
        return 0.0

    joint, _, _ = np.histogram2d(x_arr, y_arr, bins=bins)
    joint = joint / joint.sum()
    h_x = stats.entropy(joint.sum(axis=1))
    h_y = stats.entropy(joint.sum(axis=0))
    h_xy = stats.entropy(joint.ravel())
    return max(0.0, float(h_x + h_y - h_xy))


def squash(z: float, gamma: float) -> float:
    z = _finite(z, "z")
    gamma = _finite(gamma, "gamma")
    if gamma <= 0:
        raise ArgumentError(f"gamma must be positive, got {gamma}")
    return float(special.expit(gamma * z))


def logit(w: float) -> float:
    w = _finite(w, "w")
    if not 0.0 < w < 1.0:
        raise ArgumentError(f"logit is defined on (0, 1), got {w}")
    return float(special.logit(w))
