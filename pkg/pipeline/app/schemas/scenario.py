from typing import List, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

ReportVariant = Literal["sectioned", "joint", "grouped"]


class ScenarioConfig(BaseModel):
    """Synthetic cohort description read by the `synth` subcommand"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cases: int = Field(20, ge=1)
    seed: int = 0
    case_prefix: str = "case"
    dims: Tuple[int, int, int] = (48, 48, 16)
    spacing_mm: Tuple[float, float, float] = (0.5, 0.5, 3.0)

    min_lesions: int = Field(0, ge=0)
    max_lesions: int = Field(3, ge=0)
    sigma_mm: Tuple[float, float] = (1.5, 2.5)
    significant_amplitude: Tuple[float, float] = (0.7, 0.95)
    insignificant_fraction: float = Field(0.2, ge=0.0, le=1.0)

    # Low-amplitude blobs without a report finding
    min_false_positives: int = Field(0, ge=0)
    max_false_positives: int = Field(2, ge=0)
    false_positive_amplitude: Tuple[float, float] = (0.2, 0.45)

    background_level: float = Field(0.01, ge=0.0, le=0.05)
    significance_cut: float = Field(0.5, gt=0.0, le=1.0)
    noise_sigma: float = Field(0.0, ge=0.0)
    ensemble_members: int = Field(1, ge=1)
    member_noise_sigma: float = Field(0.01, ge=0.0)
    min_separation_sigma: float = Field(6.0, ge=0.0)
    variants: List[ReportVariant] = Field(default_factory=lambda: ["sectioned", "joint", "grouped"], min_length=1)

    @model_validator(mode="after")
    def _ranges(self):
        if self.min_lesions > self.max_lesions:
            raise ValueError("min_lesions exceeds max_lesions")
        if self.min_false_positives > self.max_false_positives:
            raise ValueError("min_false_positives exceeds max_false_positives")
        for name in ("sigma_mm", "significant_amplitude", "false_positive_amplitude"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be an increasing positive range, got {(lo, hi)}")
        if self.significant_amplitude[1] > 1.0:
            raise ValueError("significant_amplitude must not exceed 1")
        if self.significant_amplitude[0] < self.significance_cut:
            raise ValueError("significant_amplitude must start at or above significance_cut")
        if self.false_positive_amplitude[1] >= self.significance_cut:
            raise ValueError("false_positive_amplitude must stay below significance_cut")
        if min(self.dims) < 1 or min(self.spacing_mm) <= 0:
            raise ValueError("dims and spacing_mm must be positive")
        return self
