"""
Reading datasets and genomes, writing run artifacts.

Every CSV goes through pandas; every JSON document is written with sorted keys
so re-exports are byte-identical.
"""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from django.utils import timezone

from evolution.algorithms import RunConfig, RunResult
from evolution.sorting import pareto_front
from production.domain import Dataset, validate_dataset
from production.serializers import ObjectivePointSerializer, ScheduleSerializer, dataset_payload, parse_dataset
from production.sim import Schedule

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class DatasetNotFoundError(FileNotFoundError):
    pass


class DatasetParseError(ValueError):
    def __init__(self, path, offset: int, reason: str):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{path}: malformed JSON at byte {offset}: {reason}")


class DatasetValidationError(ValidationError):
    """Schema or invariant violations, keyed by the path of the offending field."""

    def path_messages(self) -> list[str]:
        if hasattr(self, "error_dict"):
            return [f"{path}: {message}" for path, messages in self.message_dict.items() for message in messages]
        return list(self.messages)


def load_dataset(path: PathLike) -> Dataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DatasetNotFoundError(f"dataset not found: {path}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetParseError(path, exc.start, f"not UTF-8 ({exc.reason})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(path, len(text[:exc.pos].encode("utf-8")), exc.msg) from None

    dataset, errors = parse_dataset(data)
    if errors:
        raise DatasetValidationError(errors)
    violations = validate_dataset(dataset)
    if violations:
        errors = {}
        for violation in violations:
            errors.setdefault(violation.path or "dataset", []).append(f"{violation.code}: {violation.message}")
        raise DatasetValidationError(errors)
    logger.info("loaded %s: %s orders on %s lines", path, dataset.n, dataset.m)
    return dataset


def canonical_json(dataset: Dataset) -> str:
    return json.dumps(dataset_payload(dataset), sort_keys=True, indent=2) + "\n"


def save_dataset(dataset: Dataset, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(dataset))
    return path


def dataset_digest(dataset: Dataset) -> str:
    return hashlib.sha256(canonical_json(dataset).encode("utf-8")).hexdigest()


def prepare_dataset(dataset: Dataset, s_day=None, no_events=False, flat_curves=False) -> Dataset:
    if s_day is not None:
        dataset = dataset.at_scenario(s_day)
    if no_events:
        dataset = dataset.without_events()
    if flat_curves:
        dataset = dataset.with_flat_curves()
    return dataset


def genome_hash(genome: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(genome, dtype=np.float64).tobytes()).hexdigest()[:16]


def load_genome(path: PathLike) -> np.ndarray:
    """A JSON array, or numbers separated by commas and/or whitespace."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"genome file not found: {path}")
    text = path.read_text().strip()
    if text.startswith("["):
        return np.asarray(json.loads(text), dtype=float)
    return np.array(text.replace(",", " ").split(), dtype=float)


@dataclass
class PfRecord:
    algorithm: str
    s_day: Optional[int]
    beta: float
    h_samples: int
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    seeds: tuple = ()

    def __post_init__(self):
        self.points = pareto_front(np.asarray(self.points, dtype=float).reshape(-1, 2))

    @property
    def label(self) -> str:
        sday = "none" if self.s_day is None else self.s_day
        return f"{self.algorithm}_sday{sday}_beta{self.beta:g}_H{self.h_samples}"

    def scenario(self) -> dict:
        return {"algorithm": self.algorithm, "s_day": self.s_day, "beta": self.beta, "H": self.h_samples}


def front_frame(points: np.ndarray) -> pd.DataFrame:
    frame = pd.DataFrame(np.asarray(points, dtype=float).reshape(-1, 2), columns=["f1", "f2"])
    return frame.sort_values(["f1", "f2"], kind="mergesort").reset_index(drop=True)


def export_front(record: Union[PfRecord, np.ndarray], path: PathLike) -> Path:
    points = record.points if isinstance(record, PfRecord) else record
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    front_frame(points).to_csv(path, index=False)
    return path


def read_front(path: PathLike) -> np.ndarray:
    return pd.read_csv(path)[["f1", "f2"]].to_numpy(dtype=float)


def write_frame(rows: Union[pd.DataFrame, Sequence[dict]], path: PathLike, columns=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False)
    return path


def population_frame(result: RunResult) -> pd.DataFrame:
    """One row per final individual; F and CR are blank for individuals no trial replaced."""
    rows = [
        {
            "f1": individual.objectives.f1,
            "f2": individual.objectives.f2,
            "rank": individual.rank,
            "crowding": individual.crowding,
            "F": individual.f_used,
            "CR": individual.cr_used,
            **{f"g{i}": gene for i, gene in enumerate(individual.genome)},
        }
        for individual in result.individuals()
    ]
    return pd.DataFrame(rows)


def write_schedule(schedule: Schedule, objectives, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dict(ScheduleSerializer(schedule).data)
    payload["objectives"] = [ObjectivePointSerializer(point).data for point in objectives]
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def write_gantt(schedule: Schedule, path: PathLike) -> Path:
    return write_frame(schedule.gantt_rows(), path, columns=["order", "suborder", "line", "start", "finish"])


@dataclass
class RunManifest:
    """
    Append-only JSON-lines log of one run. The `started` record is written
    before any work; a manifest without a `finished` record marks an
    incomplete run.
    """

    path: Path
    config: dict
    dataset_hash: str
    artifacts: list = field(default_factory=list)

    @classmethod
    def for_run(cls, run_dir: PathLike, config: RunConfig, dataset: Dataset) -> "RunManifest":
        return cls(path=Path(run_dir) / "manifest.jsonl", config=asdict(config), dataset_hash=dataset_digest(dataset))

    def _append(self, record: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")

    def start(self) -> None:
        self._append({
            "event": "started",
            "at": timezone.now().isoformat(),
            "config": self.config,
            "dataset_hash": self.dataset_hash,
        })

    def finish(self, artifacts: Sequence[PathLike]) -> None:
        self.artifacts = [str(p) for p in artifacts]
        self._append({"event": "finished", "at": timezone.now().isoformat(), "artifacts": self.artifacts})

    @staticmethod
    def records(path: PathLike) -> list[dict]:
        with Path(path).open() as handle:
            return [json.loads(line) for line in handle if line.strip()]

    @staticmethod
    def is_complete(path: PathLike) -> bool:
        return any(record["event"] == "finished" for record in RunManifest.records(path))


def evaluation_row(genome: np.ndarray, point, seed: Optional[int]) -> dict:
    return {
        "genome_hash": genome_hash(genome),
        "f1": point.f1,
        "f2": point.f2,
        "kind": point.kind,
        "H": point.h_samples,
        "beta": point.beta,
        "seed": seed,
    }
