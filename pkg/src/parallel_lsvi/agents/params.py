import math
import logging

from dataclasses import asdict, dataclass
from typing import Optional

from ..errors import ParameterError
from ..utils import ExplicitEnum

logger = logging.getLogger(__name__)


class ClipMode(ExplicitEnum):
    UPPER = "upper"
    TWO_SIDED = "two_sided"


class Algorithm(ExplicitEnum):
    POLSVI = "polsvi"
    RF = "rf"
    RFMG = "rfmg"


@dataclass
class AlgoParams:
    """Knobs shared by every learner.

    `beta=None` selects the derived bonus scale c_beta * d * H * sqrt(iota)
    with iota = log(d * K * H * P / delta). The derived constants are
    heuristic defaults, not the ones a regret proof would need.
    """

    episodes: int
    agents: int
    ridge: float = 1.0
    beta: Optional[float] = None
    c_beta: float = 1.0
    delta: float = 0.05
    seed: int = 0
    workers: int = 1
    oracle: bool = True

    def __post_init__(self):
        for name in ("episodes", "agents", "workers"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ParameterError(f"Invalid {name}={value}. Must be a positive integer.")
            setattr(self, name, int(value))
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"Invalid seed={self.seed}. Must be a non-negative integer.")
        self.seed = int(self.seed)
        if not self.ridge > 0.0:
            raise ParameterError(f"Invalid ridge={self.ridge}. Must be positive.")
        if self.beta is not None:
            if not self.beta >= 0.0 or math.isinf(self.beta):
                raise ParameterError(f"Invalid beta={self.beta}. Must be a finite non-negative number.")
        else:
            if not 0.0 < self.delta < 1.0:
                raise ParameterError(f"Invalid delta={self.delta}. Must lie in (0, 1).")
            if not self.c_beta >= 0.0:
                raise ParameterError(f"Invalid c_beta={self.c_beta}. Must be non-negative.")

    def resolve_beta(self, dim: int, horizon: int) -> float:
        if self.beta is not None:
            return float(self.beta)
        iota = math.log(dim * self.episodes * horizon * self.agents / self.delta)
        beta = self.c_beta * dim * horizon * math.sqrt(iota)
        logger.debug(f"derived beta={beta:.6g} from d={dim}, H={horizon}, iota={iota:.6g}")
        return beta

    def replace(self, **kwargs) -> "AlgoParams":
        values = asdict(self)
        values.update(kwargs)
        return AlgoParams(**values)

    def to_dict(self) -> dict:
        return asdict(self)

    def provenance(self) -> dict:
        """Fields that determine a run's output; the thread count does not."""
        values = asdict(self)
        values.pop("workers")
        return values
