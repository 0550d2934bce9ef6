import os
import csv
import json
import logging
import numpy as np

from dataclasses import dataclass
from typing import Dict, List, Optional

from ..errors import DatasetError
from ..utils import to_jsonable

logger = logging.getLogger(__name__)

COLUMNS = ("episode", "agent", "step", "metric", "value")
HASH_PREFIX = "# config_hash="

GAP = "gap"
REGRET = "regret"
DOUBLING = "doubling"
OPTIMISTIC_VALUE = "optimistic_value"
ORACLE_VALUE = "oracle_value"
OPTIMISM = "optimism"
SUBOPT = "subopt"
UPPER_VALUE = "upper_value"
LOWER_VALUE = "lower_value"
PLANNING_UNCERTAINTY = "planning_uncertainty"

OPTIMISM_TOL = 1e-9


@dataclass(frozen=True)
class LogRow:
    episode: int
    agent: Optional[int]
    step: Optional[int]
    metric: str
    value: float


class RunLog:
    """Long-format metric table plus provenance for one learner run.

    Episodes, agents and steps are 0-based; rows that are not per-agent or
    per-step leave those columns empty.
    """

    def __init__(self, algorithm: str, params: Optional[dict] = None, spec_hash: Optional[str] = None, beta: Optional[float] = None):
        self.algorithm = algorithm
        self.params = params or {}
        self.spec_hash = spec_hash
        self.beta = beta
        self.rows: List[LogRow] = []
        self.results: Dict[str, float] = {}
        self.config_hash: Optional[str] = None

    def log(self, metric: str, value: float, episode: int, agent: Optional[int] = None, step: Optional[int] = None) -> None:
        self.rows.append(LogRow(int(episode), agent, step, metric, float(value)))

    def series(self, metric: str) -> np.ndarray:
        return np.array([row.value for row in self.rows if row.metric == metric], dtype=np.float64)

    def rows_for(self, metric: str) -> List[LogRow]:
        return [row for row in self.rows if row.metric == metric]

    @property
    def doubling_count(self) -> int:
        return int(self.series(DOUBLING).sum())

    def optimism_rate(self) -> Optional[float]:
        flags = self.series(OPTIMISM)
        if flags.size == 0:
            return None
        return float(flags.mean())

    def final_regret(self) -> Optional[float]:
        regret = self.series(REGRET)
        return float(regret[-1]) if regret.size else None

    def sidecar(self) -> dict:
        return to_jsonable(
            {
                "algorithm": self.algorithm,
                "params": self.params,
                "spec_hash": self.spec_hash,
                "beta": self.beta,
                "results": self.results,
                "config_hash": self.config_hash,
            }
        )

    def save(self, directory: str, name: str) -> str:
        os.makedirs(directory, exist_ok=True)
        csv_path = os.path.join(directory, f"{name}.csv")
        with open(csv_path, "w", newline="") as f:
            if self.config_hash:
                f.write(f"{HASH_PREFIX}{self.config_hash}\n")
            writer = csv.writer(f)
            writer.writerow(COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [row.episode, "" if row.agent is None else row.agent, "" if row.step is None else row.step, row.metric, repr(row.value)]
                )
        with open(os.path.join(directory, f"{name}.json"), "w") as f:
            json.dump(self.sidecar(), f, sort_keys=True, indent=2)
        return csv_path

    @classmethod
    def load(cls, csv_path: str) -> "RunLog":
        sidecar_path = os.path.splitext(csv_path)[0] + ".json"
        meta = {}
        if os.path.exists(sidecar_path):
            with open(sidecar_path, "r") as f:
                meta = json.load(f)
        runlog = cls(meta.get("algorithm", "unknown"), meta.get("params"), meta.get("spec_hash"), meta.get("beta"))
        runlog.results = meta.get("results", {})
        runlog.config_hash = meta.get("config_hash")

        with open(csv_path, "r", newline="") as f:
            lines = f.read().splitlines()
        while lines and lines[0].startswith("#"):
            if lines[0].startswith(HASH_PREFIX) and runlog.config_hash is None:
                runlog.config_hash = lines[0][len(HASH_PREFIX):]
            lines.pop(0)
        reader = csv.DictReader(lines)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise DatasetError(f"{csv_path} has columns {reader.fieldnames}, expected {list(COLUMNS)}")
        for record in reader:
            runlog.log(
                record["metric"],
                float(record["value"]),
                int(record["episode"]),
                agent=int(record["agent"]) if record["agent"] else None,
                step=int(record["step"]) if record["step"] else None,
            )
        return runlog

    def __str__(self) -> str:
        return f"RunLog(algorithm={self.algorithm}, rows={len(self.rows)}, doubling={self.doubling_count})"
