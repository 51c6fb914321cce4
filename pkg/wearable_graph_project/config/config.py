import json
import logging
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)

GLOBAL_STRATEGIES = ("hbm", "prior", "population", "individual")
FUSION_MODES = ("final", "global", "local")


class Configuration(BaseSettings):
    # Logging Configuration
    LOG_LEVEL: str = Field(default="INFO")

    # Retrieval Configuration
    KAPPA: int = Field(default=5, ge=0, description="Maximum number of related nodes retrieved per query")
    BETA: float = Field(default=0.5, description="Fusion weight of the local component")
    DELTA: float = Field(default=0.85, description="Cosine similarity threshold for entity matching")
    DEFAULT_WINDOW: int = Field(default=7, description="Query window in days when the query names none")
    GAMMA_GLOBAL: float = Field(default=0.9)
    GAMMA_LOCAL: float = Field(default=0.7)
    GLOBAL_STRATEGY: str = Field(default="hbm", description="One of 'hbm', 'prior', 'population', 'individual'")
    FUSION_MODE: str = Field(default="final", description="One of 'final', 'global', 'local'")

    # Hierarchical update Configuration
    ALPHA_POP: float = Field(default=1.0, description="Trust placed in population evidence (precision multiplier)")
    ALPHA_IND: float = Field(default=1.0, description="Trust placed in individual evidence (precision multiplier)")
    MIN_SAMPLES: int = Field(default=10, ge=4, description="Minimum paired days for a correlation to count as evidence")
    DEFAULT_PRIOR_VARIANCE: float = Field(default=1.0, description="z-scale prior variance when population evidence is absent")

    # Calibration Configuration
    ALPHA_GRID_MIN: float = Field(default=1e-2)
    ALPHA_GRID_MAX: float = Field(default=1e2)
    ALPHA_GRID_POINTS: int = Field(default=25)

    # Ingestion / Participant Selection Configuration
    MI_BINS: int = Field(default=8, ge=2)
    MAX_MISSING_RATE: float = Field(default=0.5, ge=0.0, le=1.0)
    MIN_VALID_DAYS: int = Field(default=30, ge=0)
    PARTICIPANT_COUNT: int = Field(default=10, ge=1)

    # Query Set Configuration
    MULTI_METRIC_QUERIES: int = Field(default=5, ge=0, description="Multi-metric tuples sampled per subject")
    MULTI_METRIC_MAX_RETRIES: int = Field(default=20, ge=1)

    # Provider Configuration
    EMBEDDING_DIM: int = Field(default=64, ge=8)
    KNOWLEDGE_FIXTURE_PATH: Optional[str] = Field(default=None, description="JSON table of aliases and edge strengths for the offline knowledge stub")

    @model_validator(mode='after')
    def validate_config(self):
        # Normalize LOG_LEVEL to uppercase
        self.LOG_LEVEL = self.LOG_LEVEL.upper()

        if not 0.0 <= self.BETA <= 1.0:
            raise ValueError("BETA must be between 0.0 and 1.0")
        if not 0.0 < self.DELTA <= 1.0:
            raise ValueError("DELTA must be in (0.0, 1.0]")
        if self.GAMMA_GLOBAL <= 0 or self.GAMMA_LOCAL <= 0:
            raise ValueError("GAMMA_GLOBAL and GAMMA_LOCAL must be positive.")
        if self.ALPHA_POP <= 0 or self.ALPHA_IND <= 0:
            raise ValueError("ALPHA_POP and ALPHA_IND must be positive.")
        if self.DEFAULT_PRIOR_VARIANCE <= 0:
            raise ValueError("DEFAULT_PRIOR_VARIANCE must be positive.")
        if self.DEFAULT_WINDOW not in (1, 7, 14, 30, 60):
            raise ValueError("DEFAULT_WINDOW must be one of 1, 7, 14, 30, 60")
        if self.ALPHA_GRID_MIN <= 0 or self.ALPHA_GRID_MIN >= self.ALPHA_GRID_MAX:
            raise ValueError("ALPHA_GRID_MIN must be positive and less than ALPHA_GRID_MAX.")
        if self.ALPHA_GRID_POINTS < 2:
            raise ValueError("ALPHA_GRID_POINTS must be at least 2.")
        if self.GLOBAL_STRATEGY not in GLOBAL_STRATEGIES:
            raise ValueError(f"GLOBAL_STRATEGY must be one of: {', '.join(GLOBAL_STRATEGIES)}")
        if self.FUSION_MODE not in FUSION_MODES:
            raise ValueError(f"FUSION_MODE must be one of: {', '.join(FUSION_MODES)}")

        return self

    def retrieval_config(self) -> "RetrievalConfig":
        """Builds the per-run retrieval parameters from the environment defaults."""
        return RetrievalConfig(
            kappa=self.KAPPA,
            beta=self.BETA,
            delta=self.DELTA,
            default_window=self.DEFAULT_WINDOW,
            gamma_global=self.GAMMA_GLOBAL,
            gamma_local=self.GAMMA_LOCAL,
            alpha_pop=self.ALPHA_POP,
            alpha_ind=self.ALPHA_IND,
            min_samples=self.MIN_SAMPLES,
        )

    def __str__(self):
        config_details = [
            f"  Log Level: {self.LOG_LEVEL}",
            f"  Kappa / Beta / Delta: {self.KAPPA} / {self.BETA} / {self.DELTA}",
            f"  Default Window: {self.DEFAULT_WINDOW} days",
            f"  Gamma (global / local): {self.GAMMA_GLOBAL} / {self.GAMMA_LOCAL}",
            f"  Alpha (pop / ind): {self.ALPHA_POP} / {self.ALPHA_IND}",
            f"  Min Samples: {self.MIN_SAMPLES}",
            f"  Strategy / Fusion: {self.GLOBAL_STRATEGY} / {self.FUSION_MODE}",
            f"  Alpha Grid: {self.ALPHA_GRID_MIN}..{self.ALPHA_GRID_MAX} ({self.ALPHA_GRID_POINTS} points)",
            f"  Selection: max MD {self.MAX_MISSING_RATE}, min VL {self.MIN_VALID_DAYS} days, n={self.PARTICIPANT_COUNT}",
            f"  Knowledge Fixture: {self.KNOWLEDGE_FIXTURE_PATH or 'Not Set'}",
        ]
        return "Configuration:\n" + "\n".join(config_details)


class RetrievalConfig(BaseModel):
    """Retrieval parameters as stored in a config JSON file."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kappa: int = Field(default=5, ge=0)
    beta: float = Field(default=0.5, ge=0.0, le=1.0)
    delta: float = Field(default=0.85, gt=0.0, le=1.0)
    default_window: int = Field(default=7)
    gamma_global: float = Field(default=0.9, gt=0.0)
    gamma_local: float = Field(default=0.7, gt=0.0)
    alpha_pop: float = Field(default=1.0, gt=0.0)
    alpha_ind: float = Field(default=1.0, gt=0.0)
    min_samples: int = Field(default=10, ge=4)

    @model_validator(mode='after')
    def validate_window(self):
        if self.default_window not in (1, 7, 14, 30, 60):
            raise ValueError("default_window must be one of 1, 7, 14, 30, 60")
        return self


def load_retrieval_config(path: Optional[str | Path], base: Optional[Configuration] = None) -> RetrievalConfig:
    """Reads a config JSON file; keys it omits fall back to the environment defaults."""
    base = base or Configuration()
    defaults = base.retrieval_config().model_dump()
    if path is None:
        return RetrievalConfig(**defaults)
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"Config file {path} must contain a JSON object.")
    logger.info(f"Loaded retrieval config from {path}: {sorted(data)}")
    return RetrievalConfig(**{**defaults, **data})
