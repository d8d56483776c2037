import json
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy import ndimage

from ..core.errors import VolumeFormatError
from ..models.volume import CONNECTIVITIES, LabelVolume, Volume, VOLUME_KINDS

logger = logging.getLogger(__name__)

RAW_DTYPE = "<f4"
HEADER_DTYPE = "f32le"
HEADER_ORDER = "x-fastest"

# scipy's rank-based structuring elements: 1 -> faces, 2 -> +edges, 3 -> +corners
_STRUCTURE_RANK = {6: 1, 18: 2, 26: 3}


def volume_paths(path: Union[str, Path]) -> Tuple[Path, Path]:
    """Return (header, raw) for `<name>`, `<name>.json` or `<name>.raw`."""
    path = Path(path)
    if path.suffix in (".json", ".raw"):
        path = path.with_suffix("")
    return path.with_name(path.name + ".json"), path.with_name(path.name + ".raw")


def _read_header(header_path: Path) -> dict:
    try:
        with header_path.open("r", encoding="utf-8") as handle:
            header = json.load(handle)
    except FileNotFoundError as e:
        raise VolumeFormatError(f"Volume header not found: {header_path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise VolumeFormatError(f"Cannot read volume header {header_path}: {e}") from e

    for key in ("dims", "spacing_mm"):
        if key not in header:
            raise VolumeFormatError(f"Volume header {header_path} lacks '{key}'")
    if header.get("dtype", HEADER_DTYPE) != HEADER_DTYPE:
        raise VolumeFormatError(f"Unsupported dtype '{header.get('dtype')}', expected {HEADER_DTYPE}")
    if header.get("order", HEADER_ORDER) != HEADER_ORDER:
        raise VolumeFormatError(f"Unsupported order '{header.get('order')}', expected {HEADER_ORDER}")
    if header.get("kind", "confidence") not in VOLUME_KINDS:
        raise VolumeFormatError(f"Unknown volume kind '{header.get('kind')}'")

    dims = header["dims"]
    if len(dims) != 3 or not all(isinstance(d, int) and d > 0 for d in dims):
        raise VolumeFormatError(f"dims must be three positive integers, got {dims}")
    return header


def _read_payload(raw_path: Path, dims) -> np.ndarray:
    try:
        values = np.fromfile(raw_path, dtype=RAW_DTYPE)
    except FileNotFoundError as e:
        raise VolumeFormatError(f"Volume payload not found: {raw_path}") from e
    except OSError as e:
        raise VolumeFormatError(f"Cannot read volume payload {raw_path}: {e}") from e

    expected = int(np.prod(dims))
    if values.size != expected:
        raise VolumeFormatError(
            f"Payload {raw_path} holds {values.size} values, header dims {list(dims)} need {expected}"
        )
    nx, ny, nz = dims
    return values.reshape(nz, ny, nx)


def read_volume(path: Union[str, Path]) -> Volume:
    """Read a two-file volume; confidence volumes are range-checked."""
    header_path, raw_path = volume_paths(path)
    header = _read_header(header_path)
    data = _read_payload(raw_path, header["dims"])
    volume = Volume(data, tuple(header["spacing_mm"]), header.get("kind", "confidence"))
    logger.debug("Read %s volume %s dims=%s", volume.kind, header_path.name, volume.dims)
    return volume


def read_label_volume(path: Union[str, Path]) -> LabelVolume:
    """Read a kind=label volume into a LabelVolume."""
    header_path, raw_path = volume_paths(path)
    header = _read_header(header_path)
    if header.get("kind") != "label":
        raise VolumeFormatError(f"{header_path} is a '{header.get('kind')}' volume, expected 'label'")
    data = _read_payload(raw_path, header["dims"])
    return LabelVolume(data, tuple(header["spacing_mm"]), int(header.get("connectivity", 26)))


def write_volume(volume: Union[Volume, LabelVolume], path: Union[str, Path]) -> None:
    """Write header + raw payload; float32 data round-trips bit-exactly."""
    if min(volume.data.shape) < 1:
        raise VolumeFormatError("Refusing to write a volume with empty dims")

    header_path, raw_path = volume_paths(path)
    header = {
        "dims": list(volume.dims),
        "spacing_mm": list(volume.spacing_mm),
        "dtype": HEADER_DTYPE,
        "order": HEADER_ORDER,
    }
    if isinstance(volume, LabelVolume):
        header["kind"] = "label"
        header["connectivity"] = volume.connectivity
    else:
        header["kind"] = volume.kind

    try:
        header_path.parent.mkdir(parents=True, exist_ok=True)
        with header_path.open("w", encoding="utf-8") as handle:
            json.dump(header, handle, indent=2, sort_keys=True)
            handle.write("\n")
        with raw_path.open("wb") as handle:
            handle.write(np.ascontiguousarray(volume.data, dtype=RAW_DTYPE).tobytes())
    except OSError as e:
        raise VolumeFormatError(f"Failed to write volume {header_path}: {e}") from e


def structuring_element(connectivity: int) -> np.ndarray:
    if connectivity not in _STRUCTURE_RANK:
        raise VolumeFormatError(f"Connectivity must be one of {CONNECTIVITIES}, got {connectivity}")
    return ndimage.generate_binary_structure(3, _STRUCTURE_RANK[connectivity])


def label_ordered(mask: np.ndarray, connectivity: int = 26) -> Tuple[np.ndarray, int]:
    """Label a boolean (nz, ny, nx) mask; labels ordered by size desc, then first linear index."""
    raw_labels, count = ndimage.label(mask, structure=structuring_element(connectivity))
    if count == 0:
        return raw_labels.astype(np.int32), 0

    flat = raw_labels.ravel()
    sizes = np.bincount(flat, minlength=count + 1)[1:]
    _, first_index = np.unique(flat, return_index=True)
    # np.unique sorts labels, so entry 0 is the background when present
    first_index = first_index[-count:]

    order = np.lexsort((first_index, -sizes))
    lookup = np.zeros(count + 1, dtype=np.int32)
    lookup[order + 1] = np.arange(1, count + 1, dtype=np.int32)
    return lookup[raw_labels], count


def connected_components(
    mask: Union[Volume, LabelVolume, np.ndarray],
    connectivity: int = 26,
    spacing_mm=(1.0, 1.0, 1.0),
) -> LabelVolume:
    """Label a binary (0/1) mask into deterministic components 1..K."""
    if isinstance(mask, (Volume, LabelVolume)):
        spacing_mm = mask.spacing_mm
        values = mask.data
    else:
        values = np.asarray(mask)

    if values.ndim != 3:
        raise VolumeFormatError(f"Mask must be 3D, got shape {values.shape}")
    if not np.all((values == 0) | (values == 1)):
        raise VolumeFormatError("connected_components expects a binary (0/1) mask")

    labels, _ = label_ordered(values.astype(bool), connectivity)
    return LabelVolume(labels, spacing_mm, connectivity)


def voxel_volume_cm3(spacing_mm) -> float:
    """Volume of a single voxel in cm^3 (1 cm^3 = 1000 mm^3)."""
    sx, sy, sz = (float(s) for s in spacing_mm)
    return sx * sy * sz / 1000.0
