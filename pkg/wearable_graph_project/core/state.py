import math
from datetime import date
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

SCHEMA_VERSION = 1
VALID_WINDOWS = (1, 7, 14, 30, 60)
Window = Union[int, Literal["all"]]
FallbackPath = Literal["individual", "population", "prior"]
AnomalyLevel = Literal["low", "medium", "high", "missing", "n/a"]


def check_window(value: Window) -> Window:
    if value == "all" or (isinstance(value, int) and not isinstance(value, bool) and value in VALID_WINDOWS):
        return value
    raise ValueError(f"window must be one of {VALID_WINDOWS} or 'all', got {value!r}")


class NodeCategory(str, Enum):
    PHYSIOLOGICAL = "Physiological"
    SLEEP = "Sleep"
    ACTIVITY = "Activity"
    MENTAL = "Mental"
    ENVIRONMENTAL = "Environmental"
    LIFESTYLE = "Lifestyle"
    DEMOGRAPHIC = "Demographic"


class ValueKind(str, Enum):
    NUMERIC = "numeric"
    TEXTUAL = "textual"


class Provenance(str, Enum):
    LLM_GENERATED = "llm-generated"
    EXPERT = "expert"
    FIXTURE = "fixture"


# --- Knowledge graph ---

class DataSource(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset: str = Field(default="", description="Name of the dataset the metric comes from")
    feature: str = Field(description="Column / feature name of the metric in the dataset")
    unit: str = Field(default="")
    value_kind: ValueKind
    path: str = Field(default="", description="Where the raw data lives")


class MetricRecord(BaseModel):
    """An incoming metric to be placed in the graph. value_kind is None for knowledge-only metrics."""
    name: str = Field(min_length=1)
    value_kind: Optional[ValueKind] = None
    category: NodeCategory = NodeCategory.PHYSIOLOGICAL
    description: str = ""
    range: Optional[str] = None
    recommendations: Optional[str] = None
    dataset: str = ""
    feature: Optional[str] = None
    unit: str = ""
    path: str = ""
    sensor_info: Optional[str] = Field(default=None, description="Sensor-specific note appended when the metric merges into an existing node")

    def data_source(self) -> Optional[DataSource]:
        if self.value_kind is None:
            return None
        return DataSource(
            dataset=self.dataset,
            feature=self.feature or self.name,
            unit=self.unit,
            value_kind=self.value_kind,
            path=self.path,
        )


class NodeDraft(BaseModel):
    """Node content produced by a knowledge provider, before an id is assigned."""
    name: str = Field(min_length=1)
    category: NodeCategory
    description: str = ""
    range: Optional[str] = None
    recommendations: Optional[str] = None
    data_source: Optional[DataSource] = None
    is_data_associated: bool = False
    sensor_info: Tuple[str, ...] = ()


class Node(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1, description="Stable identifier, unique within a graph")
    name: str = Field(description="Display name of the metric")
    category: NodeCategory
    description: str = ""
    range: Optional[str] = None
    recommendations: Optional[str] = None
    data_source: Optional[DataSource] = None
    name_embedding: Optional[Tuple[float, ...]] = None
    is_data_associated: bool = False
    sensor_info: Tuple[str, ...] = Field(default=(), description="Sensor-specific notes accumulated by merges")
    importance: float = Field(default=1.0, ge=0.0)
    graph_embedding: Optional[Tuple[float, ...]] = Field(default=None, description="Opaque structure embedding; stored, never computed")

    @field_validator("name")
    @classmethod
    def name_not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("Node name must be non-empty")
        return v

    @field_validator("name_embedding")
    @classmethod
    def embedding_is_unit(cls, v):
        if v is None:
            return v
        norm = math.sqrt(math.fsum(x * x for x in v))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"name_embedding must have unit norm, got {norm}")
        return v

    @property
    def is_numeric(self) -> bool:
        return self.data_source is not None and self.data_source.value_kind == ValueKind.NUMERIC

    @property
    def metric_key(self) -> str:
        """Column name under which the node's data is stored in subject files."""
        return self.data_source.feature if self.data_source else self.name


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True)

    endpoints: Tuple[str, str]
    description: str = ""
    prior_weight: float = Field(ge=0.1, le=1.0)
    provenance: Provenance = Provenance.LLM_GENERATED

    @field_validator("endpoints")
    @classmethod
    def canonical_pair(cls, v: Tuple[str, str]) -> Tuple[str, str]:
        a, b = v
        if a == b:
            raise ValueError(f"Self-loop edges are not allowed: {a}")
        return (a, b) if a < b else (b, a)

    def other(self, node_id: str) -> str:
        a, b = self.endpoints
        return b if node_id == a else a


class KnowledgeGraph(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    nodes: Dict[str, Node] = Field(default_factory=dict)
    edges: Dict[Tuple[str, str], Edge] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_structure(self):
        for key, node in self.nodes.items():
            if key != node.id:
                raise ValueError(f"Node stored under key {key!r} has id {node.id!r}")
        for key, edge in self.edges.items():
            if key != edge.endpoints:
                raise ValueError(f"Edge stored under key {key!r} has endpoints {edge.endpoints!r}")
            for endpoint in edge.endpoints:
                if endpoint not in self.nodes:
                    raise ValueError(f"Edge {key!r} references unknown node {endpoint!r}")
        return self

    def edge(self, a: str, b: str) -> Optional[Edge]:
        return self.edges.get((a, b) if a < b else (b, a))

    def node_names(self) -> List[str]:
        return sorted(node.name for node in self.nodes.values())


class IntegrationReport(BaseModel):
    merged: List[Tuple[str, str]] = Field(default_factory=list, description="(incoming metric, existing node id) pairs")
    created: List[str] = Field(default_factory=list, description="Ids of nodes added to the graph")
    new_edges: int = 0
    graph: KnowledgeGraph = Field(exclude=True, description="The committed graph")


# --- Subject data ---

class DailyValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    day: date
    value: Union[float, str, None] = None

    @property
    def present(self) -> bool:
        return self.value is not None


class SubjectData(BaseModel):
    subject_id: str
    series: Dict[str, Tuple[DailyValue, ...]] = Field(default_factory=dict)
    metric_kinds: Dict[str, ValueKind] = Field(default_factory=dict)

    _cache: dict = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def check_series(self):
        if set(self.series) != set(self.metric_kinds):
            raise ValueError("series and metric_kinds must cover the same metrics")
        for metric, rows in self.series.items():
            for prev, cur in zip(rows, rows[1:]):
                if cur.day <= prev.day:
                    raise ValueError(f"Dates for metric {metric!r} must be strictly increasing ({prev.day} then {cur.day})")
            if self.metric_kinds[metric] == ValueKind.NUMERIC:
                for row in rows:
                    if row.value is not None and not isinstance(row.value, float):
                        raise ValueError(f"Numeric metric {metric!r} holds non-numeric value {row.value!r} on {row.day}")
        return self

    def numeric_metrics(self) -> List[str]:
        return sorted(m for m, kind in self.metric_kinds.items() if kind == ValueKind.NUMERIC)

    def all_days(self) -> List[date]:
        return sorted({row.day for rows in self.series.values() for row in rows})


class SelectionStats(BaseModel):
    subject_id: str
    md: float = Field(ge=0.0, le=1.0)
    vl: int = Field(ge=0)
    cv: float
    mi: float = Field(ge=0.0)
    no_eligible_metrics: bool = False


class VariabilityResult(BaseModel):
    cv: float
    eligible_metrics: int = 0
    no_eligible_metrics: bool = False


class SelectionResult(BaseModel):
    subject_ids: List[str]
    eligible: List[str]
    shortfall: bool = False


# --- Statistics / weights ---

class CorrelationEstimate(BaseModel):
    r: Optional[float] = None
    n: int = 0
    valid: bool = False

    @model_validator(mode="after")
    def check_validity(self):
        if self.valid and (self.r is None or not math.isfinite(self.r)):
            raise ValueError("A valid estimate needs a finite r")
        if not self.valid and self.r is not None:
            raise ValueError("An invalid estimate carries no r")
        return self


class GaussianBelief(BaseModel):
    """Independent Gaussians over the neighbors of one node (diagonal covariance), on the z scale."""
    mean: Tuple[float, ...]
    var: Tuple[float, ...]

    @model_validator(mode="after")
    def check_belief(self):
        if len(self.mean) != len(self.var):
            raise ValueError("mean and var must have the same dimension")
        if not all(math.isfinite(m) for m in self.mean):
            raise ValueError("mean must be finite")
        if not all(math.isfinite(v) and v > 0 for v in self.var):
            raise ValueError("var must be strictly positive and finite")
        return self


class Observation(BaseModel):
    """Per-neighbor correlation evidence. Entries with valid=False carry no value or variance."""
    value: Tuple[Optional[float], ...]
    var: Tuple[Optional[float], ...]
    valid: Tuple[bool, ...]
    n: Tuple[int, ...]
    r: Tuple[Optional[float], ...]

    @model_validator(mode="after")
    def check_observation(self):
        size = len(self.valid)
        if not (len(self.value) == len(self.var) == len(self.n) == len(self.r) == size):
            raise ValueError("Observation fields must have equal lengths")
        for i, ok in enumerate(self.valid):
            if ok and (self.value[i] is None or self.var[i] is None or not math.isfinite(self.value[i]) or self.var[i] <= 0):
                raise ValueError(f"Valid observation {i} needs a finite value and positive variance")
        return self

    def __len__(self):
        return len(self.valid)


class HbmConfig(BaseModel):
    alpha_pop: float = Field(gt=0.0)
    alpha_ind: float = Field(gt=0.0)
    min_samples: int = Field(default=10, ge=4)
    gamma_global: float = Field(default=0.9, gt=0.0)
    default_prior_var: float = Field(default=1.0, gt=0.0)


class NeighborWeights(BaseModel):
    """Every intermediate weight computed for one (primary, neighbor) edge."""
    neighbor_id: str
    neighbor_name: str
    numeric: bool = False
    importance: float = Field(default=1.0, ge=0.0, description="Neighbor node importance; breaks weight ties")
    w_prior: float = Field(ge=0.1, le=1.0)
    z_prior: float
    r_pop: Optional[float] = None
    n_pop: int = 0
    r_ind: Optional[float] = None
    n_ind: int = 0
    mu_pop: float
    var_pop: float
    mu_ind: float
    var_ind: float
    r_post: Optional[float] = Field(default=None, description="Final posterior back on the correlation scale")
    r_post_var: Optional[float] = None
    w_global: float
    fallback_path: FallbackPath
    w_local: Optional[float] = None
    zeta: Optional[float] = None
    local_valid: Optional[bool] = None
    w_final: Optional[float] = None

    @model_validator(mode="after")
    def check_path(self):
        if self.fallback_path == "individual" and self.r_ind is None:
            raise ValueError("individual path requires individual evidence")
        if self.fallback_path == "population" and (self.r_ind is not None or self.r_pop is None):
            raise ValueError("population path requires population evidence and no individual evidence")
        if self.fallback_path == "prior" and (self.r_ind is not None or self.r_pop is not None):
            raise ValueError("prior path requires both evidence levels to be invalid")
        return self


class EdgeWeightBundle(BaseModel):
    primary_id: str
    primary_name: str
    neighbors: List[NeighborWeights] = Field(default_factory=list)


class AbnormalityScore(BaseModel):
    raw: float = Field(ge=0.0)
    normalized: float = Field(ge=0.0, le=1.0)
    observed_count: int = Field(ge=0)
    valid: bool

    @model_validator(mode="after")
    def check_score(self):
        if self.valid and self.observed_count < 1:
            raise ValueError("A valid score needs at least one observed day")
        return self


class LocalWeight(BaseModel):
    w_local: float
    zeta: float
    valid: bool


# --- Retrieval ---

class ParsedQuery(BaseModel):
    metrics: List[str] = Field(default_factory=list, description="Metric names mentioned by the query")
    window_days: Window = Field(default=7, description="Look-back window in days, or 'all'")
    reference_time: Optional[date] = Field(default=None, description="Day the window ends on; None means the subject's latest day")
    openness: float = Field(default=0.5, ge=0.0, le=1.0, description="How exploratory the query is")

    @field_validator("window_days")
    @classmethod
    def valid_window(cls, v):
        return check_window(v)


class PrimaryMatch(BaseModel):
    node_id: str
    name: str
    metric: str = Field(description="Query metric that matched the node")
    similarity: float


class PrimarySelection(BaseModel):
    primary_id: str
    primary_name: str
    budget: int = Field(ge=0)
    neighbors: List[NeighborWeights] = Field(default_factory=list)
    candidates: List[NeighborWeights] = Field(default_factory=list, description="Every scored neighbor, before the budget cut")

    @model_validator(mode="after")
    def within_budget(self):
        if len(self.neighbors) > self.budget:
            raise ValueError(f"{len(self.neighbors)} neighbors selected for a budget of {self.budget}")
        return self


class ContextSection(BaseModel):
    kind: Literal["primary", "related"]
    node_id: str
    text: str


class ContextDocument(BaseModel):
    sections: List[ContextSection] = Field(default_factory=list)
    text: str = ""


class RetrievalResult(BaseModel):
    query: ParsedQuery
    reference_time: Optional[date] = None
    primaries: List[PrimaryMatch] = Field(default_factory=list)
    selected: List[PrimarySelection] = Field(default_factory=list)
    misses: List[str] = Field(default_factory=list)
    no_match: bool = False
    context: ContextDocument = Field(default_factory=ContextDocument)


# --- Calibration ---

class TauCurve(BaseModel):
    alphas: Tuple[float, ...]
    taus: Tuple[float, ...]
    label: str

    @model_validator(mode="after")
    def check_curve(self):
        if len(self.alphas) != len(self.taus) or len(self.alphas) < 2:
            raise ValueError("alphas and taus must have equal length of at least 2")
        if self.alphas[0] <= 0:
            raise ValueError("alphas must be positive")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ValueError("alphas must be strictly increasing")
        if any(not -1.0 <= t <= 1.0 for t in self.taus):
            raise ValueError("taus must lie in [-1, 1]")
        return self


class StageCurves(BaseModel):
    stage: Literal["population", "individual"]
    preserve: TauCurve
    align: TauCurve
    alpha: Optional[float] = None


class CalibrationResult(BaseModel):
    alpha_pop: float
    alpha_ind: float
    population: StageCurves
    individual: StageCurves
    diagnostics: List[TauCurve] = Field(default_factory=list, description="Auxiliary curves; reported, never used for selection")


# --- Query set / evaluation ---

class QueryCategory(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    openness_range: Tuple[float, float]
    kind: Literal["single", "multiple"]

    @field_validator("openness_range")
    @classmethod
    def check_range(cls, v):
        lo, hi = v
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"openness range must be a closed interval within [0, 1], got {v}")
        return v


class QueryInputTuple(BaseModel):
    kind: Literal["single", "multiple"]
    metrics: List[str] = Field(min_length=1, max_length=3)
    timestamp: date
    window: Window
    anomaly_level: Union[AnomalyLevel, List[AnomalyLevel]]
    zeta: List[Optional[float]] = Field(description="Normalized abnormality per metric, aligned with metrics")

    @field_validator("window")
    @classmethod
    def valid_window(cls, v):
        return check_window(v)

    @model_validator(mode="after")
    def check_kind(self):
        if len(self.zeta) != len(self.metrics):
            raise ValueError("zeta must hold one value per metric")
        if self.kind == "single":
            if len(self.metrics) != 1 or isinstance(self.anomaly_level, list):
                raise ValueError("single tuples carry exactly one metric and one anomaly level")
        else:
            if len(self.metrics) not in (2, 3):
                raise ValueError("multiple tuples carry 2 or 3 metrics")
            if not isinstance(self.anomaly_level, list) or len(self.anomaly_level) != len(self.metrics):
                raise ValueError("multiple tuples carry one anomaly level per metric")
        return self


class MultiMetricSample(BaseModel):
    tuples: List[QueryInputTuple] = Field(default_factory=list)
    insufficient_metrics: bool = False


class GeneratedQuery(BaseModel):
    query_id: str
    subject_id: str
    category: str
    openness: float = Field(ge=0.0, le=1.0)
    question: str
    input: QueryInputTuple


class RankRecord(BaseModel):
    query_id: str
    ranks: Dict[str, int]


class MethodSummary(BaseModel):
    mean_rank: float
    win_rate: float = Field(ge=0.0, le=1.0)


QUERY_CATEGORIES: Dict[str, QueryCategory] = {
    c.name: c for c in (
        QueryCategory(name="General Knowledge", openness_range=(0.2, 0.4), kind="single"),
        QueryCategory(name="Data Retrieval", openness_range=(0.1, 0.3), kind="single"),
        QueryCategory(name="Trend Analysis", openness_range=(0.4, 0.6), kind="single"),
        QueryCategory(name="Comparative Insight", openness_range=(0.5, 0.7), kind="single"),
        QueryCategory(name="Anomaly Detection", openness_range=(0.6, 0.8), kind="single"),
        QueryCategory(name="Actionable Advice", openness_range=(0.3, 0.5), kind="single"),
        QueryCategory(name="Exploratory Analysis", openness_range=(0.7, 1.0), kind="single"),
        QueryCategory(name="Metric Relationships", openness_range=(0.4, 0.6), kind="multiple"),
        QueryCategory(name="Contextual Queries", openness_range=(0.5, 0.7), kind="multiple"),
    )
}
