from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..core.errors import PhantomSpecError
from .report import FindingScores, Report
from .volume import LabelVolume, Volume


@dataclass(frozen=True)
class PlantedLesion:
    center: Tuple[int, int, int]  # voxel (x, y, z)
    sigma_mm: Tuple[float, float, float]
    amplitude: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        object.__setattr__(self, "sigma_mm", tuple(float(s) for s in self.sigma_mm))
        if len(self.center) != 3 or len(self.sigma_mm) != 3:
            raise PhantomSpecError("Lesion center and sigma_mm need three components")
        if not all(np.isfinite(s) and s > 0 for s in self.sigma_mm):
            raise PhantomSpecError(f"sigma_mm must be positive, got {self.sigma_mm}")
        if not 0.0 < self.amplitude <= 1.0:
            raise PhantomSpecError(f"Lesion amplitude must lie in (0, 1], got {self.amplitude}")


@dataclass(frozen=True)
class PhantomSpec:
    """Sum of anisotropic Gaussian bumps on a uniform background"""

    dims: Tuple[int, int, int]
    spacing_mm: Tuple[float, float, float]
    lesions: Tuple[PlantedLesion, ...] = ()
    background_level: float = 0.0
    seed: int = 0
    noise_sigma: float = 0.0
    significance_cut: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing_mm", tuple(float(s) for s in self.spacing_mm))
        object.__setattr__(self, "lesions", tuple(self.lesions))

        if len(self.dims) != 3 or min(self.dims) < 1:
            raise PhantomSpecError(f"dims must be three positive integers, got {self.dims}")
        if len(self.spacing_mm) != 3 or not all(np.isfinite(s) and s > 0 for s in self.spacing_mm):
            raise PhantomSpecError(f"spacing_mm must be positive and finite, got {self.spacing_mm}")
        if not 0.0 <= self.background_level <= 0.05:
            raise PhantomSpecError(f"background_level must lie in [0, 0.05], got {self.background_level}")
        if self.noise_sigma < 0:
            raise PhantomSpecError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if not 0.0 < self.significance_cut <= 1.0:
            raise PhantomSpecError(f"significance_cut must lie in (0, 1], got {self.significance_cut}")

        for lesion in self.lesions:
            if not all(0 <= c < d for c, d in zip(lesion.center, self.dims)):
                raise PhantomSpecError(f"Lesion center {lesion.center} outside grid {self.dims}")
            if lesion.amplitude <= self.background_level:
                raise PhantomSpecError(
                    f"Lesion amplitude {lesion.amplitude} does not exceed background {self.background_level}"
                )

    @property
    def significant_lesions(self) -> List[PlantedLesion]:
        return [lesion for lesion in self.lesions if lesion.amplitude >= self.significance_cut]


@dataclass
class SyntheticCase:
    case_id: str
    members: List[Volume]
    gt: LabelVolume
    report: Report
    true_n_sig: int
    findings: List[FindingScores] = field(default_factory=list)
    variant: str = "sectioned"

    @property
    def confidence(self) -> Volume:
        return self.members[0]
