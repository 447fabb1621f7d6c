import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from itertools import repeat
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from django.conf import settings

from evolution.algorithms import RunConfig, RunResult, run
from evolution.sorting import aggregate_pareto
from production.domain import Dataset

from .analysis import boundary_stats, front_mean_f1
from .persistence import (
    PfRecord,
    RunManifest,
    export_front,
    population_frame,
    write_frame,
)

logger = logging.getLogger(__name__)


def run_config_from_settings(**overrides) -> RunConfig:
    """Defaults from settings.STITCHPLAN; None-valued overrides are ignored."""
    defaults = settings.STITCHPLAN
    jade = defaults['JADE']
    nsga2 = defaults['NSGA2']
    values = {
        'np_size': defaults['NP'],
        'xi': defaults['XI'],
        'g_max': defaults['GMAX'],
        'h_samples': defaults['H'],
        'beta': defaults['BETA'],
        'seed': defaults['SEED'],
        'noise_scope': defaults['NOISE_SCOPE'],
        'jade_c': jade['C'],
        'jade_p': jade['P'],
        'mu_cr': jade['MU_CR'],
        'mu_f': jade['MU_F'],
        'eta_c': nsga2['ETA_C'],
        'eta_m': nsga2['ETA_M'],
        'p_c': nsga2['P_C'],
        'p_m': nsga2['P_M'],
    }
    values.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig(**values)


def output_dir(requested: Optional[str]) -> Path:
    """STITCHPLAN_OUT wins over --out, which wins over the default results directory."""
    return Path(settings.STITCHPLAN['OUT_DIR'] or requested or settings.STITCHPLAN['DEFAULT_OUT_DIR'])


def run_seeds(config: RunConfig, dataset: Dataset, runs: int, jobs: int = 1) -> list[RunResult]:
    """
    `runs` independent runs with seeds seed, seed+1, ...

    Several runs go to a process pool one run per task; a single run
    spreads its population evaluations over the pool instead.
    """
    configs = [replace(config, seed=config.seed + k) for k in range(runs)]
    if jobs <= 1:
        return [run(c, dataset) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        if runs > 1:
            return list(executor.map(run, configs, repeat(dataset)))
        chunk = max(1, config.np_size // (4 * jobs))
        return [run(configs[0], dataset, partial(executor.map, chunksize=chunk))]


@dataclass
class ScenarioOutcome:
    record: PfRecord
    results: list
    stats: pd.DataFrame
    directory: Path
    artifacts: list = field(default_factory=list)

    @property
    def fronts(self) -> list:
        return [result.front() for result in self.results]


def run_scenario(config: RunConfig, dataset: Dataset, runs: int, jobs: int, out_dir: Path) -> ScenarioOutcome:
    """Run every seed of one (algorithm, s_day, beta, H) scenario and write its artifacts."""
    record = PfRecord(config.algorithm, config.s_day, config.beta, config.h_samples)
    directory = Path(out_dir) / record.label
    manifests = []
    for k in range(runs):
        seeded = replace(config, seed=config.seed + k)
        manifest = RunManifest.for_run(directory / f"run-{seeded.seed}", seeded, dataset)
        manifest.start()
        manifests.append(manifest)

    logger.info("scenario %s: %s runs", record.label, runs)
    results = run_seeds(config, dataset, runs, jobs)

    for manifest, result in zip(manifests, results):
        run_dir = manifest.path.parent
        artifacts = [
            write_frame(result.stats, run_dir / "stats.csv"),
            write_frame(population_frame(result), run_dir / "population.csv"),
            export_front(result.front(), run_dir / "front.csv"),
        ]
        if config.algorithm == "jade":
            artifacts.append(write_frame(trajectory_frame(result), run_dir / "trajectory.csv"))
        manifest.finish(artifacts)

    record = PfRecord(
        config.algorithm, config.s_day, config.beta, config.h_samples,
        points=aggregate_pareto([result.objectives for result in results]),
        seeds=tuple(result.config.seed for result in results),
    )
    stats = boundary_stats([result.front() for result in results])
    artifacts = [
        export_front(record, directory / "front.csv"),
        write_frame(stats, directory / "boundary_stats.csv"),
    ]
    return ScenarioOutcome(record=record, results=results, stats=stats, directory=directory, artifacts=artifacts)


def trajectory_frame(result: RunResult) -> pd.DataFrame:
    columns = ["generation", "best_f1", "mean_f1", "mu_f", "mu_cr"]
    return pd.DataFrame(result.stats)[columns]


def fronts_long_frame(outcomes) -> pd.DataFrame:
    """One row per (scenario, point) for side-by-side plotting."""
    frames = []
    for outcome in outcomes:
        frame = pd.DataFrame(outcome.record.points, columns=["f1", "f2"])
        for key, value in outcome.record.scenario().items():
            frame.insert(len(frame.columns) - 2, key, value)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["algorithm", "s_day", "beta", "H", "f1", "f2"])
    return pd.concat(frames, ignore_index=True)


def mean_front_f1(outcome: ScenarioOutcome) -> np.ndarray:
    """Per-seed mean f1 over each run's own front, in seed order."""
    return np.array([front_mean_f1(front) for front in outcome.fronts])
