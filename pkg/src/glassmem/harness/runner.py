"""Experiment execution: worker pool, seed bookkeeping, manifest."""
from __future__ import annotations

import dataclasses
import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .. import __version__
from ..errors import ConfigError
from . import seeding
from .config import ExperimentConfig, config_to_dict
from .experiments import RUNNERS


class ExperimentContext:
    """Per-run services handed to an experiment recipe.

    seed_entropy(i) derives the trial seed in the parent process and logs
    its hex form for the manifest; map() fans trials out to a process pool
    but always returns results in submission order, so aggregation is
    independent of the worker count.
    """

    def __init__(self, out_dir: Path, base_seed: int, experiment: str,
                 workers: int):
        self.out_dir = Path(out_dir)
        self.base_seed = base_seed
        self.experiment = experiment
        self.workers = workers
        self.seed_hexes: dict[int, str] = {}

    def seed_entropy(self, index: int) -> int:
        seq = seeding.trial_seed(self.base_seed, self.experiment, index)
        self.seed_hexes[index] = seeding.seed_hex(
            self.base_seed, self.experiment, index)
        return int(seq.entropy)

    def map(self, fn, tasks):
        tasks = list(tasks)
        if self.workers <= 1 or len(tasks) <= 1:
            return [fn(t) for t in tasks]
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, tasks))


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Everything needed to audit or exactly re-run one experiment."""

    experiment: str
    config: dict
    version: str
    seeds: dict[int, str]
    wall_clock_s: float
    outputs: dict[str, str]


def output_digests(out_dir) -> dict[str, str]:
    """SHA-256 of every CSV in the output directory, keyed by file name."""
    digests = {}
    for path in sorted(Path(out_dir).glob("*.csv")):
        digests[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return digests


def manifest_to_dict(manifest: RunManifest) -> dict:
    return {
        "experiment": manifest.experiment,
        "version": manifest.version,
        "wall_clock_s": manifest.wall_clock_s,
        "config": manifest.config,
        "seeds": {int(k): v for k, v in sorted(manifest.seeds.items())},
        "outputs": dict(sorted(manifest.outputs.items())),
    }


def write_manifest(manifest: RunManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest_to_dict(manifest), fh, sort_keys=False)


def verify_outputs(manifest: RunManifest, out_dir) -> bool:
    """True when the files on disk still hash to the manifest digests."""
    return output_digests(out_dir) == manifest.outputs


def run(config: ExperimentConfig) -> RunManifest:
    """Execute one experiment and write its outputs plus manifest.yaml."""
    if config.experiment not in RUNNERS:
        raise ConfigError(f"unknown experiment {config.experiment!r}")
    out_dir = Path(config.out) if config.out else (
        Path.cwd() / "results" / config.experiment)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}")

    ctx = ExperimentContext(out_dir, config.base_seed, config.experiment,
                            config.workers)
    started = time.perf_counter()
    RUNNERS[config.experiment](config, ctx)
    wall = time.perf_counter() - started

    manifest = RunManifest(
        experiment=config.experiment,
        config=config_to_dict(config),
        version=__version__,
        seeds=dict(ctx.seed_hexes),
        wall_clock_s=float(wall),
        outputs=output_digests(out_dir),
    )
    write_manifest(manifest, out_dir / "manifest.yaml")
    return manifest
