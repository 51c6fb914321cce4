"""Seeded synthetic wearable cohorts for demos and end-to-end tests."""
import logging
from datetime import date, timedelta
from pathlib import Path
from typing import Dict, List, Union
import numpy as np
from wearable_graph_project.core.ingestion import write_subject_csv
from wearable_graph_project.core.state import DailyValue, MetricRecord, NodeCategory, SubjectData, ValueKind

logger = logging.getLogger(__name__)

# name -> (category, unit, mean, sd, activity loading, stress loading, description, range, recommendation)
_CATALOGUE = {
    "Steps taken": (NodeCategory.ACTIVITY, "steps", 8000.0, 2500.0, 0.8, -0.2,
                    "Number of steps counted by the wrist-worn tracker over the day.",
                    "7,000-10,000 steps per day", "Aim for at least 7,000 steps on most days."),
    "Active time": (NodeCategory.ACTIVITY, "minutes", 60.0, 20.0, 0.7, -0.1,
                    "Minutes spent in light to vigorous physical activity.",
                    "30-60 minutes per day", "Accumulate 150 minutes of moderate activity per week."),
    "Sleep efficiency": (NodeCategory.SLEEP, "%", 88.0, 5.0, 0.3, -0.5,
                         "Share of time in bed spent asleep.",
                         "85-95%", "Keep a regular bedtime and limit screens before sleep."),
    "Total sleep duration": (NodeCategory.SLEEP, "hours", 7.2, 0.9, 0.2, -0.4,
                             "Total time asleep during the main sleep period.",
                             "7-9 hours", "Adults should sleep 7 to 9 hours per night."),
    "Resting heart rate": (NodeCategory.PHYSIOLOGICAL, "bpm", 62.0, 5.0, -0.4, 0.5,
                           "Heart rate measured while at rest.",
                           "60-100 bpm", "Regular aerobic exercise tends to lower resting heart rate."),
    "Heart rate variability": (NodeCategory.PHYSIOLOGICAL, "ms", 55.0, 12.0, 0.4, -0.6,
                               "Variation in time between heartbeats (RMSSD).",
                               "20-100 ms", "Recovery, sleep and stress management support higher HRV."),
    "Mental stress": (NodeCategory.MENTAL, "score", 40.0, 15.0, -0.2, 0.9,
                      "Self-reported or device-estimated stress level.",
                      "0-100", "Short breaks and breathing exercises can reduce stress."),
    "PANAS negative affect": (NodeCategory.MENTAL, "score", 18.0, 6.0, -0.1, 0.8,
                              "Negative affect score from the PANAS questionnaire.",
                              "10-50", None),
    "Maximum distance from home": (NodeCategory.ENVIRONMENTAL, "km", 8.0, 6.0, 0.5, 0.0,
                                   "Farthest distance travelled from home during the day.",
                                   None, None),
}

LIFELOG_ENTRIES = (
    "Worked late, skipped the gym.",
    "Long walk in the park with friends.",
    "Felt tired after a poor night of sleep.",
    "Busy day of meetings, coffee in the afternoon.",
    "Rest day, read a book at home.",
    "Travelled to visit family.",
)
LIFELOG = "Lifelog"


def synthetic_metric_records() -> List[MetricRecord]:
    records = []
    for name, (category, unit, *_rest, description, normal_range, recommendation) in _CATALOGUE.items():
        records.append(MetricRecord(
            name=name, value_kind=ValueKind.NUMERIC, category=category, description=description,
            range=normal_range, recommendations=recommendation, dataset="synthetic", unit=unit,
        ))
    records.append(MetricRecord(
        name=LIFELOG, value_kind=ValueKind.TEXTUAL, category=NodeCategory.LIFESTYLE,
        description="Free-text daily diary entry.", dataset="synthetic",
    ))
    return records


def _latent(rng: np.random.Generator, n_days: int, phi: float = 0.7) -> np.ndarray:
    shocks = rng.standard_normal(n_days)
    out = np.empty(n_days)
    out[0] = shocks[0]
    for t in range(1, n_days):
        out[t] = phi * out[t - 1] + np.sqrt(1 - phi ** 2) * shocks[t]
    return out


def generate_subject(subject_id: str, rng: np.random.Generator, n_days: int, start: date) -> SubjectData:
    days = [start + timedelta(days=i) for i in range(n_days)]
    activity, stress = _latent(rng, n_days), _latent(rng, n_days)
    spread = rng.uniform(0.6, 1.6)
    missing_prob = rng.uniform(0.02, 0.2)

    series: Dict[str, tuple] = {}
    kinds: Dict[str, ValueKind] = {}
    for name, (_, _, mean, sd, load_a, load_s, *_rest) in _CATALOGUE.items():
        own_mean = mean * (1.0 + 0.1 * rng.standard_normal())
        noise_scale = np.sqrt(max(0.1, 1.0 - load_a ** 2 - load_s ** 2))
        raw = own_mean + spread * sd * (load_a * activity + load_s * stress + noise_scale * rng.standard_normal(n_days))
        spikes = rng.random(n_days) < 0.03
        raw = raw + spikes * 3.0 * spread * sd
        raw = np.maximum(raw, 0.0)
        missing = rng.random(n_days) < missing_prob
        series[name] = tuple(
            DailyValue(day=d, value=None if m else round(float(v), 2))
            for d, v, m in zip(days, raw, missing)
        )
        kinds[name] = ValueKind.NUMERIC

    picks = rng.integers(0, len(LIFELOG_ENTRIES), n_days)
    present = rng.random(n_days) < 0.4
    series[LIFELOG] = tuple(
        DailyValue(day=d, value=LIFELOG_ENTRIES[p] if ok else None) for d, p, ok in zip(days, picks, present)
    )
    kinds[LIFELOG] = ValueKind.TEXTUAL
    return SubjectData(subject_id=subject_id, series=series, metric_kinds=kinds)


def generate_synthetic_cohort(n_subjects: int = 10, n_days: int = 120, seed: int = 0,
                              start: date = date(2021, 1, 1)) -> List[SubjectData]:
    rng = np.random.default_rng(seed)
    cohort = [generate_subject(f"subject_{i + 1:02d}", rng, n_days, start) for i in range(n_subjects)]
    logger.info(f"Generated synthetic cohort: {n_subjects} subjects x {n_days} days (seed {seed}).")
    return cohort


def write_cohort(cohort: List[SubjectData], directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for subject in cohort:
        path = directory / f"{subject.subject_id}.csv"
        write_subject_csv(subject, path)
        paths.append(path)
    return paths
