import argparse
import json
import logging
from pathlib import Path

from pydantic import ValidationError

from ..core.errors import ConfigurationError
from ..schemas.scenario import ScenarioConfig
from ..services.synthetic import materialize_scenario
from .common import EXIT_OK, add_common_flags, build_context

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    synth = subparsers.add_parser("synth", help="write a synthetic cohort (volumes, reports, ground truth, manifest)")
    synth.add_argument("scenario", type=Path, nargs="?", help="scenario JSON (defaults when omitted)")
    synth.add_argument("--cases", type=int, help="override the scenario case count")
    add_common_flags(synth)
    synth.set_defaults(handler=run_synth)


def load_scenario(path) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        with Path(path).open("r", encoding="utf-8") as handle:
            return ScenarioConfig.model_validate(json.load(handle))
    except OSError as e:
        raise ConfigurationError(f"Cannot read scenario {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Scenario {path} is not valid JSON: {e}") from e
    except ValidationError as e:
        raise ConfigurationError(f"Invalid scenario {path}: {e}") from e


def run_synth(args: argparse.Namespace) -> int:
    context = build_context(args)
    scenario = load_scenario(args.scenario)
    updates = {}
    if args.cases is not None:
        updates["cases"] = args.cases
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        try:
            scenario = ScenarioConfig.model_validate({**scenario.model_dump(), **updates})
        except ValidationError as e:
            raise ConfigurationError(f"Invalid scenario override: {e}") from e

    manifest = materialize_scenario(scenario, context.out_dir, jobs=context.config.jobs)
    logger.info("Scenario with %d cases written, manifest %s", scenario.cases, manifest)
    return EXIT_OK
