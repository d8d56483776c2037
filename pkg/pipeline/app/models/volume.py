from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from ..core.errors import ConfidenceRangeError, VolumeFormatError

VOLUME_KINDS = ("confidence", "label", "intensity")
CONNECTIVITIES = (6, 18, 26)


def _check_spacing(spacing_mm) -> Tuple[float, float, float]:
    spacing = tuple(float(s) for s in spacing_mm)
    if len(spacing) != 3:
        raise VolumeFormatError(f"spacing_mm must have 3 components, got {len(spacing)}")
    if not all(np.isfinite(s) and s > 0 for s in spacing):
        raise VolumeFormatError(f"spacing_mm must be positive and finite, got {spacing}")
    return spacing


def _check_shape(array: np.ndarray) -> None:
    if array.ndim != 3:
        raise VolumeFormatError(f"Volume data must be 3D (nz, ny, nx), got shape {array.shape}")
    if min(array.shape) < 1:
        raise VolumeFormatError(f"Volume dims must be positive, got shape {array.shape}")


@dataclass(frozen=True)
class Volume:
    """3D scalar field; `data` is indexed [z, y, x] so its C-order ravel is x-fastest"""

    data: np.ndarray
    spacing_mm: Tuple[float, float, float]
    kind: str = "confidence"

    def __post_init__(self):
        if self.kind not in VOLUME_KINDS:
            raise VolumeFormatError(f"Unknown volume kind '{self.kind}'")
        array = np.array(self.data, dtype=np.float32, copy=True)
        _check_shape(array)
        if not np.all(np.isfinite(array)):
            raise VolumeFormatError("Volume data contains non-finite values")
        if self.kind == "confidence" and (array.min() < 0.0 or array.max() > 1.0):
            raise ConfidenceRangeError(
                f"Confidence values must lie in [0, 1], found [{array.min()}, {array.max()}]"
            )
        array.setflags(write=False)
        object.__setattr__(self, "data", array)
        object.__setattr__(self, "spacing_mm", _check_spacing(self.spacing_mm))

    @property
    def dims(self) -> Tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    @property
    def flat(self) -> np.ndarray:
        return self.data.ravel()

    def same_grid(self, other) -> bool:
        return self.dims == other.dims and self.spacing_mm == other.spacing_mm


@dataclass(frozen=True)
class LabelVolume:
    """Integer label map (0 = background, 1..K components)"""

    data: np.ndarray
    spacing_mm: Tuple[float, float, float]
    connectivity: int = 26
    num_labels: int = field(init=False)

    def __post_init__(self):
        array = np.asarray(self.data)
        if array.dtype.kind == "f":
            if not np.all(np.isfinite(array)) or np.any(array != np.round(array)):
                raise VolumeFormatError("Label volume holds non-integer values")
        array = np.array(array, dtype=np.int32, copy=True)
        _check_shape(array)
        if array.min() < 0:
            raise VolumeFormatError("Label volume holds negative labels")
        if self.connectivity not in CONNECTIVITIES:
            raise VolumeFormatError(f"Connectivity must be one of {CONNECTIVITIES}")

        present = np.unique(array[array > 0])
        num_labels = int(present.size)
        if num_labels and not np.array_equal(present, np.arange(1, num_labels + 1)):
            raise VolumeFormatError(f"Labels must form the range 1..K, found {present.tolist()}")

        array.setflags(write=False)
        object.__setattr__(self, "data", array)
        object.__setattr__(self, "spacing_mm", _check_spacing(self.spacing_mm))
        object.__setattr__(self, "num_labels", num_labels)

    @classmethod
    def empty(cls, dims, spacing_mm, connectivity: int = 26) -> "LabelVolume":
        nx, ny, nz = dims
        return cls(np.zeros((nz, ny, nx), dtype=np.int32), spacing_mm, connectivity)

    @property
    def dims(self) -> Tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    @property
    def flat(self) -> np.ndarray:
        return self.data.ravel()

    def label_sizes(self) -> np.ndarray:
        """Voxel count per label; index 0 is background."""
        return np.bincount(self.flat, minlength=self.num_labels + 1)

    def lesion_mask(self, label: int) -> np.ndarray:
        return self.data == label
