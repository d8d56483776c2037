import csv
import json
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from ..models.lesion import LesionCandidate


def encode_runs(indices: np.ndarray) -> List[List[int]]:
    """[[start, length], ...] runs of consecutive sorted linear indices."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(indices) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [indices.size]])
    return [[int(indices[s]), int(e - s)] for s, e in zip(starts, ends)]


def decode_runs(runs: Sequence[Sequence[int]]) -> np.ndarray:
    if not runs:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([np.arange(start, start + length, dtype=np.int64) for start, length in runs])


def candidate_to_dict(candidate: LesionCandidate, rank: int) -> dict:
    return {
        "rank": rank,
        "peak_index": candidate.peak_index,
        "peak_confidence": candidate.peak_confidence,
        "mean_confidence": candidate.mean_confidence,
        "volume_cm3": candidate.volume_cm3,
        "n_voxels": candidate.n_voxels,
        "voxels_rle": encode_runs(candidate.voxels),
    }


def candidate_from_dict(data: dict, dims) -> LesionCandidate:
    return LesionCandidate(
        voxels=decode_runs(data["voxels_rle"]),
        peak_index=int(data["peak_index"]),
        peak_confidence=float(data["peak_confidence"]),
        volume_cm3=float(data["volume_cm3"]),
        mean_confidence=float(data["mean_confidence"]),
        dims=tuple(dims),
    )


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(data, path: Path) -> None:
    with _prepare(path).open("w", encoding="utf-8") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_jsonl(rows: Iterable[dict], path: Path) -> None:
    with _prepare(path).open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def write_csv(rows: Sequence[dict], path: Path, fieldnames: Sequence[str]) -> None:
    with _prepare(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({name: "" if row.get(name) is None else row[name] for name in fieldnames})


def read_jsonl(path: Path) -> List[dict]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def read_csv(path: Path) -> List[dict]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))
