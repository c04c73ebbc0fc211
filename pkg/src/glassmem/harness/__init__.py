"""Configuration, seeding, experiment recipes, and the CLI."""

from .config import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    default_config,
    dump_config,
    load_config,
    validate,
)
from .runner import ExperimentContext, RunManifest, output_digests, run, verify_outputs
from .seeding import seed_hex, trial_rng, trial_seed

__all__ = [
    "EXPERIMENT_NAMES",
    "ExperimentConfig",
    "ExperimentContext",
    "RunManifest",
    "config_from_dict",
    "config_to_dict",
    "default_config",
    "dump_config",
    "load_config",
    "output_digests",
    "run",
    "seed_hex",
    "trial_rng",
    "trial_seed",
    "validate",
    "verify_outputs",
]
