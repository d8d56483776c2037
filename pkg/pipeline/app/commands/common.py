import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..core.config import VERSION, config_hash, load_run_config
from ..core.errors import ConfigurationError
from ..schemas.config import RunConfig
from ..utils.pool import CaseFailure
from ..utils.serialization import write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARTIAL = 2


class CliParser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting so they map onto exit code 1"""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


@dataclass
class RunContext:
    subcommand: str
    config: RunConfig
    out_dir: Path

    def write_run_manifest(self) -> Path:
        path = self.out_dir / "run_manifest.json"
        write_json({
            "subcommand": self.subcommand,
            "config_hash": config_hash(self.config),
            "seed": self.config.seed,
            "version": VERSION,
            "config": self.config.model_dump(mode="json"),
        }, path)
        return path


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run settings")
    group.add_argument("--seed", type=int, help="random seed (default 0)")
    group.add_argument("--jobs", type=int, help="parallel cases / resampling blocks (default 1)")
    group.add_argument("--config", type=Path, help="JSON config file")
    group.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    group.add_argument("--language", choices=["dutch", "english", "bilingual"])
    group.add_argument("--verbose", action="store_true")

    extraction = parser.add_argument_group("candidate extraction")
    extraction.add_argument("--connectivity", type=int, choices=[6, 18, 26])
    extraction.add_argument("--rel-threshold", type=float)
    extraction.add_argument("--max-lesions", type=int)
    extraction.add_argument("--min-voxels", type=int)
    extraction.add_argument("--min-peak", type=float)
    extraction.add_argument("--method", choices=["dynamic", "dynamic-fast", "static", "otsu"])

    evaluation = parser.add_argument_group("evaluation")
    evaluation.add_argument("--hit-iou", type=float, help="overlap needed for a lesion hit (default 0.10)")


# flag attribute -> (config section or None, field)
_FLAG_FIELDS = {
    "seed": (None, "seed"),
    "jobs": (None, "jobs"),
    "language": (None, "language"),
    "connectivity": ("extraction", "connectivity"),
    "rel_threshold": ("extraction", "rel_threshold"),
    "max_lesions": ("extraction", "max_lesions"),
    "min_voxels": ("extraction", "min_voxels"),
    "min_peak": ("extraction", "min_peak"),
    "method": ("extraction", "method"),
    "hit_iou": ("evaluation", "hit_threshold"),
}


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for attribute, (section, name) in _FLAG_FIELDS.items():
        value = getattr(args, attribute, None)
        if value is None:
            continue
        target = overrides.setdefault(section, {}) if section else overrides
        target[name] = value
    return overrides


def build_context(args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> RunContext:
    overrides = overrides_from_args(args)
    for key, value in (extra or {}).items():
        overrides.setdefault(key, {}).update(value)
    config = load_run_config(args.config, overrides)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    context = RunContext(subcommand=args.subcommand, config=config, out_dir=out_dir)
    context.write_run_manifest()
    return context


def split_failures(results: Sequence) -> List[CaseFailure]:
    return [r for r in results if isinstance(r, CaseFailure)]


def finish(failures: Sequence[CaseFailure], total: int) -> int:
    if failures:
        logger.warning("%d of %d cases failed: %s", len(failures), total, ", ".join(f.case_id for f in failures))
        return EXIT_PARTIAL
    return EXIT_OK
