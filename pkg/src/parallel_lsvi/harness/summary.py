import math
import json
import logging
import numpy as np

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
from scipy import stats

from ..agents import Algorithm, RunLog
from ..agents import runlog as metrics
from ..errors import ParameterError
from ..utils import render_table, to_jsonable

logger = logging.getLogger(__name__)

METRICS = {metrics.REGRET, metrics.SUBOPT}


def metric_for(algorithm: str) -> str:
    return metrics.REGRET if Algorithm(algorithm) == Algorithm.POLSVI else metrics.SUBOPT


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


@dataclass
class PointSummary:
    coordinates: dict
    values: List[float]
    doubling_counts: List[int]
    optimism_rates: List[Optional[float]] = field(default_factory=list)
    check_failures: Dict[str, int] = field(default_factory=dict)
    theory: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def mean(self) -> float:
        return _mean_stderr(self.values)[0]

    @property
    def stderr(self) -> float:
        return _mean_stderr(self.values)[1]

    @property
    def doubling_total(self) -> int:
        return int(sum(self.doubling_counts))

    @property
    def optimism_rate(self) -> Optional[float]:
        rates = [rate for rate in self.optimism_rates if rate is not None]
        return float(np.mean(rates)) if rates else None

    @property
    def kp(self) -> int:
        return int(self.coordinates["episodes"]) * int(self.coordinates["agents"])

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "coordinates": self.coordinates,
                "values": self.values,
                "mean": self.mean,
                "stderr": self.stderr,
                "doubling_counts": self.doubling_counts,
                "doubling_total": self.doubling_total,
                "optimism_rate": self.optimism_rate,
                "optimism_rates": self.optimism_rates,
                "check_failures": self.check_failures,
                "theory": self.theory,
            }
        )

    @classmethod
    def from_dict(cls, payload: dict) -> "PointSummary":
        return cls(
            coordinates=payload["coordinates"],
            values=list(payload["values"]),
            doubling_counts=list(payload["doubling_counts"]),
            optimism_rates=list(payload.get("optimism_rates", [])),
            check_failures=dict(payload.get("check_failures", {})),
            theory=dict(payload.get("theory", {})),
        )


@dataclass
class SweepSummary:
    """Per grid point aggregates of one sweep; wall-time lives only in timing.json."""

    algorithm: str
    metric: str
    config_hash: str
    points: List[PointSummary] = field(default_factory=list)
    status: str = "complete"
    directory: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "metric": self.metric,
            "config_hash": self.config_hash,
            "status": self.status,
            "points": [point.to_dict() for point in self.points],
        }

    def timing(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "points": [{"coordinates": point.coordinates, "wall_time": point.wall_time} for point in self.points],
        }

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=2)

    @classmethod
    def load(cls, path: str) -> "SweepSummary":
        with open(path, "r") as f:
            payload = json.load(f)
        try:
            return cls(
                algorithm=payload["algorithm"],
                metric=payload["metric"],
                config_hash=payload["config_hash"],
                points=[PointSummary.from_dict(point) for point in payload["points"]],
                status=payload.get("status", "complete"),
            )
        except (KeyError, TypeError) as e:
            raise ParameterError(f"{path} is not a sweep summary: {e}") from e

    def curve_rows(self) -> List[dict]:
        return [
            {
                "episodes": point.coordinates["episodes"],
                "agents": point.coordinates["agents"],
                "KP": point.kp,
                "mean": point.mean,
                "stderr": point.stderr,
                "base_term": point.theory.get("base_term"),
                "overhead_term": point.theory.get("overhead_term"),
            }
            for point in self.points
        ]

    def save_curve(self, path: str) -> None:
        columns = ["episodes", "agents", "KP", "mean", "stderr", "base_term", "overhead_term"]
        with open(path, "w") as f:
            f.write(f"{metrics.HASH_PREFIX}{self.config_hash}\n")
            f.write(",".join(columns) + "\n")
            for row in self.curve_rows():
                f.write(",".join("" if row[column] is None else repr(row[column]) for column in columns) + "\n")

    def table(self) -> str:
        rows = []
        for point in self.points:
            beta = point.coordinates.get("beta")
            rate = point.optimism_rate
            rows.append(
                {
                    "K": point.coordinates["episodes"],
                    "P": point.coordinates["agents"],
                    "beta": "derived" if beta is None else f"{beta:g}",
                    "seed": point.coordinates["seed"],
                    "runs": len(point.values),
                    "mean": f"{point.mean:.6g}",
                    "stderr": f"{point.stderr:.3g}",
                    "doubling": point.doubling_total,
                    "optimism": "-" if rate is None else f"{rate:.3f}",
                }
            )
        title = f"{self.algorithm} sweep, metric {self.metric} ({self.status})"
        return render_table(rows, ["K", "P", "beta", "seed", "runs", "mean", "stderr", "doubling", "optimism"], title)


def fit_speedup_slope(summary: SweepSummary, metric: Optional[str] = None) -> Tuple[float, float]:
    """OLS slope (and its standard error) of log(metric) against log(K·P)."""
    metric = summary.metric if metric is None else metric
    if metric not in METRICS:
        raise ParameterError(f"Invalid metric {metric!r}. Must be one of {sorted(METRICS)}.")
    if metric != summary.metric:
        raise ParameterError(f"summary records {summary.metric!r}, not {metric!r}")
    if len(summary.points) < 3:
        raise ParameterError(f"a slope fit needs at least 3 grid points, got {len(summary.points)}")

    kept = [point for point in summary.points if point.mean > 0.0]
    if len(kept) < len(summary.points):
        logger.warning(f"dropping {len(summary.points) - len(kept)} grid points with non-positive mean {metric}")
    if len(kept) < 3:
        raise ParameterError(f"only {len(kept)} grid points with positive {metric}, need at least 3")
    x = np.log([point.kp for point in kept])
    if np.ptp(x) == 0.0:
        raise ParameterError("grid points do not vary K*P")
    y = np.log([point.mean for point in kept])

    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.stderr)


def theory_terms(algorithm: str, dim: int, horizon: int, episodes: int, agents: int, delta: float = 0.05) -> Dict[str, float]:
    """Unit-constant shapes of the base and overhead terms of the performance bounds."""
    iota = math.log(dim * episodes * horizon * agents / delta)
    kp = episodes * agents
    log_term = math.log(1.0 + kp / dim)
    if Algorithm(algorithm) == Algorithm.POLSVI:
        base = math.sqrt(kp) * math.sqrt(dim**3 * horizon**4 * iota**2)
        overhead = math.sqrt(dim**4 * horizon**4 * iota) * agents * log_term
    else:
        base = math.sqrt(dim**3 * horizon**6 * iota**2 / kp)
        overhead = math.sqrt(dim**4 * horizon**6 * iota) / episodes * log_term
    return {"base_term": base, "overhead_term": overhead}


def final_metric(runlog: RunLog, metric: str) -> float:
    series = runlog.series(metric)
    if series.size == 0:
        raise ParameterError(f"run log has no {metric!r} records")
    return float(series[-1])


def summarize_runlogs(paths: Sequence[str], metric: str, coordinates: Optional[dict] = None) -> PointSummary:
    """Recompute one grid point's aggregates from its raw RunLog CSV files."""
    if not paths:
        raise ParameterError("no run logs to summarize")
    values, doublings, rates = [], [], []
    for path in paths:
        runlog = RunLog.load(path)
        values.append(final_metric(runlog, metric))
        doublings.append(runlog.doubling_count)
        rates.append(runlog.optimism_rate())
    return PointSummary(coordinates=coordinates or {}, values=values, doubling_counts=doublings, optimism_rates=rates)

