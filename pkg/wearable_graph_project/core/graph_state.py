from datetime import date
from typing import Dict, List, Optional, TypedDict
from wearable_graph_project.core.state import ContextDocument, NeighborWeights, ParsedQuery, PrimaryMatch, PrimarySelection


class RetrievalState(TypedDict):
    """LangGraph state for one retrieval run."""
    parsed: ParsedQuery
    reference_time: Optional[date]
    primaries: List[PrimaryMatch]
    misses: List[str]
    no_match: bool
    budgets: Dict[str, int]  # primary id -> neighbor budget
    candidates: Dict[str, List[NeighborWeights]]  # primary id -> scored neighbors
    selected: List[PrimarySelection]
    context: Optional[ContextDocument]
