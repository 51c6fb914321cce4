import hashlib
import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import numpy as np
from langchain_core.embeddings import Embeddings
from pydantic import BaseModel, Field
from wearable_graph_project.core.errors import ArgumentError
from wearable_graph_project.core.state import MetricRecord, Node, NodeDraft
from wearable_graph_project.core.utils import normalize_name, normalize_text

logger = logging.getLogger(__name__)

DEFAULT_EDGE_STRENGTH = 0.5
EDGE_STRENGTH_THRESHOLD = 0.1


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)
    if a.shape != b.shape:
        raise ArgumentError(f"Dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise ArgumentError("cosine_similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def strength_band(strength: float) -> str:
    """Maps a relationship strength onto the scorer's qualitative bands."""
    if strength >= 0.7:
        return "strong"
    if strength >= 0.3:
        return "moderate"
    if strength >= EDGE_STRENGTH_THRESHOLD:
        return "weak"
    return "not related"


# --- Embeddings ---

class EmbeddingProvider(Embeddings, ABC):
    """Unit-norm text embeddings of a fixed dimension."""

    @property
    @abstractmethod
    def dimension(self) -> int:
        ...

    @abstractmethod
    def embed(self, text: str) -> Tuple[float, ...]:
        ...

    def embed_query(self, text: str) -> List[float]:
        return list(self.embed(text))

    def embed_documents(self, texts: List[str]) -> List[List[float]]:
        return [list(self.embed(t)) for t in texts]


class StubEmbeddings(EmbeddingProvider):
    """Hashed character-trigram counts over normalized text, L2-normalized."""

    def __init__(self, dimension: int = 64):
        if dimension < 1:
            raise ArgumentError("Embedding dimension must be positive")
        self._dimension = dimension

    @property
    def dimension(self) -> int:
        return self._dimension

    def _bucket(self, trigram: str) -> int:
        digest = hashlib.md5(trigram.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big") % self._dimension

    def embed(self, text: str) -> Tuple[float, ...]:
        normalized = normalize_text(text)
        if not normalized:
            raise ArgumentError(f"Cannot embed text that is empty after normalization: {text!r}")
        padded = f" {normalized} "
        counts = np.zeros(self._dimension, dtype=float)
        for i in range(len(padded) - 2):
            counts[self._bucket(padded[i:i + 3])] += 1.0
        return tuple(float(x) for x in counts / np.linalg.norm(counts))


def stub_embed(text: str, dimension: int = 64) -> Tuple[float, ...]:
    return StubEmbeddings(dimension).embed(text)


# --- Knowledge generation / merging ---

class EdgeJudgement(BaseModel):
    description: str
    strength: float = Field(ge=0.0, le=1.0)


class MergeMatch(BaseModel):
    node_id: str
    similarity: float = Field(ge=0.0, le=1.0)
    same_concept: bool = True
    reasoning: str = ""


class KnowledgeProvider(ABC):
    """Produces node content, relationship judgements and duplicate decisions."""

    @abstractmethod
    def node_gen(self, record: MetricRecord) -> NodeDraft:
        ...

    @abstractmethod
    def edge_gen(self, a: Union[NodeDraft, Node], b: Union[NodeDraft, Node]) -> EdgeJudgement:
        ...

    @abstractmethod
    def merge(self, incoming: NodeDraft, candidates: Sequence[Node]) -> Optional[MergeMatch]:
        ...


class FixtureEdge(BaseModel):
    a: str
    b: str
    strength: float = Field(ge=0.0, le=1.0)
    description: str = ""


class KnowledgeFixture(BaseModel):
    aliases: Dict[str, str] = Field(default_factory=dict)
    edges: List[FixtureEdge] = Field(default_factory=list)


def load_knowledge_fixture(path: Union[str, Path]) -> KnowledgeFixture:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    fixture = KnowledgeFixture.model_validate(data)
    logger.info(f"Loaded knowledge fixture from {path}: {len(fixture.aliases)} aliases, {len(fixture.edges)} edges")
    return fixture


class StubKnowledgeProvider(KnowledgeProvider):
    """Deterministic offline knowledge provider driven by an optional fixture table."""

    def __init__(self, fixture: Optional[KnowledgeFixture] = None, default_strength: float = DEFAULT_EDGE_STRENGTH):
        self.fixture = fixture or KnowledgeFixture()
        self.default_strength = default_strength
        self._aliases = {normalize_name(k): normalize_name(v) for k, v in self.fixture.aliases.items()}
        self._edges: Dict[Tuple[str, str], FixtureEdge] = {}
        for entry in self.fixture.edges:
            self._edges[self._pair_key(entry.a, entry.b)] = entry

    def canonical(self, name: str) -> str:
        normalized = normalize_name(name)
        return self._aliases.get(normalized, normalized)

    def _pair_key(self, a: str, b: str) -> Tuple[str, str]:
        ca, cb = self.canonical(a), self.canonical(b)
        return (ca, cb) if ca <= cb else (cb, ca)

    def node_gen(self, record: MetricRecord) -> NodeDraft:
        return NodeDraft(
            name=record.name,
            category=record.category,
            description=record.description,
            range=record.range,
            recommendations=record.recommendations,
            data_source=record.data_source(),
            is_data_associated=record.value_kind is not None,
            sensor_info=(record.sensor_info,) if record.sensor_info else (),
        )

    def edge_gen(self, a, b) -> EdgeJudgement:
        entry = self._edges.get(self._pair_key(a.name, b.name))
        if entry is not None:
            description = entry.description or f"{a.name} is related to {b.name}."
            return EdgeJudgement(description=description, strength=entry.strength)
        return EdgeJudgement(
            description=f"{a.name} and {b.name} may be related.",
            strength=self.default_strength,
        )

    def merge(self, incoming: NodeDraft, candidates: Sequence[Node]) -> Optional[MergeMatch]:
        target = self.canonical(incoming.name)
        for node in sorted(candidates, key=lambda n: (n.name, n.id)):
            if self.canonical(node.name) == target:
                return MergeMatch(node_id=node.id, similarity=1.0, reasoning="Normalized names are equal.")
        return None


def stub_knowledge(fixture: Union[KnowledgeFixture, str, Path, None] = None) -> StubKnowledgeProvider:
    if isinstance(fixture, (str, Path)):
        fixture = load_knowledge_fixture(fixture)
    return StubKnowledgeProvider(fixture)
