"""
Run coordinator: fans replicas out to a thread pool, aggregates in replica
order and publishes the output directory together with its manifest.
"""

import shutil
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
from tqdm import tqdm

from core.config import LAB_THREADS, TOOL_VERSION, logger
from core.errors import ConfigError
from core.storage import file_digest, write_json
from harness.experiments import ReplicaOutcome, get_experiment
from harness.schema import ExperimentConfig

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    config: Dict[str, Any]
    tool_version: str
    seed: int
    replica_seeds: List[int]
    timings: Dict[str, float] = field(default_factory=dict)
    outputs: List[Dict[str, str]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def replica_seeds(seed: int, replicas: int) -> List[int]:
    """Per-replica seeds spawned from the master seed; independent of the thread count."""
    children = np.random.SeedSequence(seed).spawn(replicas)
    return [int(child.generate_state(1)[0]) for child in children]


def _staging_dir(output_dir: Path) -> Path:
    return output_dir.parent / f"{output_dir.name}.partial"


def _run_replicas(config: ExperimentConfig, seeds: List[int], staging: Path) -> List[ReplicaOutcome]:
    experiment = get_experiment(config.experiment)
    workers = max(1, min(LAB_THREADS, len(seeds)))
    outcomes = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(experiment.replica, config, index, seed, staging) for index, seed in enumerate(seeds)
        ]
        for future in tqdm(as_completed(futures), total=len(futures), desc=config.experiment.value, leave=False):
            outcome = future.result()
            logger.debug(f"Replica {outcome.index} done (seed {outcome.seed})")
            outcomes.append(outcome)
    return sorted(outcomes, key=lambda outcome: outcome.index)


def _check_output_dir(output_dir: Path):
    if output_dir.exists() and not output_dir.is_dir():
        raise ConfigError("output_dir", f"{output_dir} is a file")
    if output_dir.is_dir() and any(output_dir.iterdir()) and not (output_dir / MANIFEST_NAME).exists():
        raise ConfigError("output_dir", f"{output_dir} is not empty and holds no {MANIFEST_NAME}; refusing to replace it")


def _publish(staging: Path, output_dir: Path):
    """Swap the staged directory in for output_dir, dropping any earlier run."""
    if not output_dir.exists():
        output_dir.parent.mkdir(parents=True, exist_ok=True)
        staging.rename(output_dir)
        return
    retired = output_dir.parent / f"{output_dir.name}.old"
    if retired.exists():
        shutil.rmtree(retired)
    output_dir.rename(retired)
    staging.rename(output_dir)
    shutil.rmtree(retired)


def run(config: ExperimentConfig) -> RunManifest:
    """Run every replica, aggregate, and write the outputs plus manifest.json.

    Outputs are staged in a sibling "<output_dir>.partial" directory that
    replaces output_dir as a whole once the run has succeeded, so files from
    an earlier run never survive.
    """
    output_dir = Path(config.output_dir)
    _check_output_dir(output_dir)
    staging = _staging_dir(output_dir)
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)

    seeds = replica_seeds(config.seed, config.replicas)
    experiment = get_experiment(config.experiment)
    logger.info(f"Running {config.experiment.value}: {config.replicas} replica(s), seed {config.seed}")

    timings = {}
    try:
        start = time.perf_counter()
        outcomes = _run_replicas(config, seeds, staging)
        timings["replicas"] = time.perf_counter() - start

        start = time.perf_counter()
        _, summary = experiment.aggregate(config, outcomes, staging)
        timings["aggregate"] = time.perf_counter() - start
    except Exception as e:
        shutil.rmtree(staging, ignore_errors=True)
        logger.error(f"Run {config.experiment.value} failed: {type(e).__name__}: {e}")
        raise

    published = sorted(staging.iterdir())
    manifest = RunManifest(
        config=config.echo(),
        tool_version=TOOL_VERSION,
        seed=config.seed,
        replica_seeds=seeds,
        timings=timings,
        outputs=[{"file": path.name, "sha256": file_digest(path)} for path in published],
        summary=summary,
    )
    write_json(staging / MANIFEST_NAME, manifest.to_dict())
    _publish(staging, output_dir)
    logger.info(f"Wrote {len(published)} file(s) and {MANIFEST_NAME} to {output_dir}")
    return manifest
