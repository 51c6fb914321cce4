import logging
import re
from abc import ABC, abstractmethod
from datetime import date
from typing import List, Optional, Sequence, Tuple
from wearable_graph_project.core.state import QUERY_CATEGORIES, ParsedQuery, QueryCategory, QueryInputTuple, Window
from wearable_graph_project.core.utils import normalize_text

logger = logging.getLogger(__name__)

# Checked in order; the first phrase found decides the window.
WINDOW_PHRASES: List[Tuple[re.Pattern, Window]] = [
    (re.compile(r"\btoday\b"), 1),
    (re.compile(r"\b(?:past|last) 7 days\b|\b(?:past|last) week\b"), 7),
    (re.compile(r"\b(?:past|last) 14 days\b|\b(?:past|last) two weeks\b"), 14),
    (re.compile(r"\b(?:past|last) 30 days\b|\b(?:past|last) month\b"), 30),
    (re.compile(r"\b(?:past|last) 60 days\b"), 60),
    (re.compile(r"\boverall\b|\ball time\b"), "all"),
]

CATEGORY_CUES = {
    "General Knowledge": ("what is", "what are", "healthy range", "definition"),
    "Data Retrieval": ("what was my", "how many", "average", "total"),
    "Trend Analysis": ("trend", "over time", "typically"),
    "Comparative Insight": ("compare", "compared", "versus", "improved"),
    "Anomaly Detection": ("unusual", "abnormal", "anomal", "deviation", "outlier", "spike"),
    "Actionable Advice": ("how can i", "should i", "ways to", "tips"),
    "Exploratory Analysis": ("why", "what factors", "causing", "might be"),
    "Metric Relationships": ("relationship", "related to", "correlate"),
    "Contextual Queries": ("on days", "days when", "days with"),
}

WINDOW_WORDING = {1: "today", 7: "over the past 7 days", 14: "over the past 14 days",
                  30: "over the past 30 days", 60: "over the past 60 days", "all": "overall"}


class QueryParserProvider(ABC):
    """Turns a free-text question into metrics, window, reference day and openness."""

    @abstractmethod
    def parse(self, text: str, dictionary: Sequence[str], default_window: int = 7,
              reference_time: Optional[date] = None) -> ParsedQuery:
        ...


class StubQueryParser(QueryParserProvider):
    """Phrase-table parser that needs no language model."""

    def window_of(self, text: str, default_window: int = 7) -> Window:
        lowered = text.lower()
        for pattern, window in WINDOW_PHRASES:
            if pattern.search(lowered):
                return window
        return default_window

    def metrics_of(self, text: str, dictionary: Sequence[str]) -> List[str]:
        """Longest non-overlapping dictionary matches, in order of appearance."""
        padded = f" {normalize_text(text)} "
        candidates = []
        for name in dictionary:
            key = normalize_text(name)
            if not key:
                continue
            pos = padded.find(f" {key} ")
            if pos >= 0:
                candidates.append((len(key), pos, name, key))
        taken: List[Tuple[int, int]] = []
        found = []
        for length, pos, name, key in sorted(candidates, key=lambda c: (-c[0], c[1], c[2])):
            span = (pos, pos + length + 1)
            if any(span[0] < end and start < span[1] for start, end in taken):
                continue
            taken.append(span)
            found.append((pos, name))
        return [name for _, name in sorted(found)]

    def categories_of(self, text: str) -> List[QueryCategory]:
        lowered = f" {text.lower()} "
        return [QUERY_CATEGORIES[name] for name, cues in CATEGORY_CUES.items()
                if any(cue in lowered for cue in cues)]

    def openness_of(self, text: str) -> float:
        matched = self.categories_of(text)
        if not matched:
            return 0.5
        lo = min(c.openness_range[0] for c in matched)
        hi = max(c.openness_range[1] for c in matched)
        return (lo + hi) / 2.0

    def parse(self, text, dictionary, default_window=7, reference_time=None) -> ParsedQuery:
        parsed = ParsedQuery(
            metrics=self.metrics_of(text, dictionary),
            window_days=self.window_of(text, default_window),
            reference_time=reference_time,
            openness=self.openness_of(text),
        )
        logger.debug(f"Parsed query '{text}' -> {parsed}")
        return parsed


class QueryGenProvider(ABC):
    """Writes a natural-language question for a query input tuple."""

    @abstractmethod
    def generate(self, item: QueryInputTuple, category: QueryCategory) -> str:
        ...


class StubQueryGenerator(QueryGenProvider):
    TEMPLATES = {
        "General Knowledge": "What is a healthy range for {m0}, and how does mine look {w}?",
        "Data Retrieval": "What was my average {m0} {w}?",
        "Trend Analysis": "What trend does my {m0} show {w}?",
        "Comparative Insight": "How does my {m0} {w} compare with my usual level?",
        "Anomaly Detection": "Was there anything unusual about my {m0} {w}?",
        "Actionable Advice": "How can I improve my {m0} given my data {w}?",
        "Exploratory Analysis": "What factors might be causing changes in my {m0} {w}?",
        "Metric Relationships": "How is my {m0} related to my {m1} {w}?",
        "Contextual Queries": "On days when my {m0} was high, how did my {m1} look {w}?",
    }

    def generate(self, item: QueryInputTuple, category: QueryCategory) -> str:
        template = self.TEMPLATES.get(category.name)
        if template is None:
            raise ValueError(f"No question template for category: {category.name}")
        metrics = list(item.metrics) + [item.metrics[-1]] * (2 - len(item.metrics))
        return template.format(m0=metrics[0], m1=metrics[1], w=WINDOW_WORDING[item.window])
