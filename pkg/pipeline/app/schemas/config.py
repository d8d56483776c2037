from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import Literal, Optional


class ExtractionConfig(BaseModel):
    """Settings for turning a confidence map into lesion candidates"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_threshold: float = Field(0.40, gt=0.0, lt=1.0)
    max_lesions: int = Field(5, ge=1)
    min_voxels: int = Field(10, ge=0)
    min_peak: float = Field(0.10, ge=0.0, lt=1.0)
    connectivity: Literal[6, 18, 26] = 26
    ranking: Literal["peak", "mean"] = "peak"
    method: Literal["dynamic", "dynamic-fast", "static", "otsu"] = "dynamic"
    static_threshold: float = Field(0.5, gt=0.0, lt=1.0)
    # Regions bordering voxels already taken out are the tails of earlier peaks
    remove_adjacent: bool = True


class EvaluationConfig(BaseModel):
    """Lesion hit criterion and FROC integration range"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    hit_threshold: float = Field(0.10, gt=0.0, le=1.0)
    criterion: Literal["iou", "dice"] = "iou"
    pauc_lo: float = Field(0.0, ge=0.0)
    pauc_hi: float = Field(1.0, gt=0.0)
    sens_at_fp: float = Field(1.0, ge=0.0)
    spec_at_sens: Optional[float] = Field(None, ge=0.0, le=1.0)

    @field_validator("pauc_hi")
    @classmethod
    def _hi_above_lo(cls, value: float, info) -> float:
        lo = info.data.get("pauc_lo", 0.0)
        if value <= lo:
            raise ValueError(f"pauc_hi ({value}) must exceed pauc_lo ({lo})")
        return value


class StatsConfig(BaseModel):
    """Resampling settings; alpha is only used when reporting"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    permutation_iterations: int = Field(10_000, ge=1)
    bootstrap_iterations: int = Field(10_000, ge=100)
    alpha: float = Field(0.01, gt=0.0, lt=1.0)
    run_aggregation: Literal["mean", "median"] = "mean"


class RunConfig(BaseModel):
    """Everything a single CLI invocation depends on"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 0
    jobs: int = Field(1, ge=1)
    language: Literal["dutch", "english", "bilingual"] = "bilingual"
    extraction: ExtractionConfig = ExtractionConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    stats: StatsConfig = StatsConfig()


class LoggingSettings(BaseModel):
    """Level of the `app` logger; None keeps logging.ini's level"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    level: Optional[Literal["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"]] = None

    @field_validator("level", mode="before")
    @classmethod
    def _normalise(cls, value):
        if isinstance(value, str):
            return value.strip().upper() or None
        return value
