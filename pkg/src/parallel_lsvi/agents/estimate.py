import numpy as np

from dataclasses import dataclass
from typing import Optional

from ..errors import ParameterError
from ..numerics import quadratic_forms
from .params import ClipMode


@dataclass(frozen=True)
class QEstimate:
    """Linear Q-function of one step: clip(wᵀφ + r + sign·bonus).

    `inverse` is a read-only snapshot of Λ_h⁻¹. With `capped_bonus` the bonus
    is u = min(β·sqrt(φᵀΛ⁻¹φ), H); otherwise it is the raw β·sqrt(φᵀΛ⁻¹φ).
    `reward` is a table over the same leading axes as the features that are
    evaluated, or None.
    """

    weights: np.ndarray
    inverse: np.ndarray
    beta: float
    horizon: int
    clip_mode: ClipMode = ClipMode.UPPER
    reward: Optional[np.ndarray] = None
    bonus_sign: float = 1.0
    capped_bonus: bool = False

    def __post_init__(self):
        if not self.beta >= 0.0:
            raise ParameterError(f"Invalid beta={self.beta}. Must be non-negative.")
        object.__setattr__(self, "clip_mode", ClipMode(self.clip_mode))

    def bonus(self, features: np.ndarray) -> np.ndarray:
        width = self.beta * np.sqrt(quadratic_forms(self.inverse, features))
        if self.capped_bonus:
            width = np.minimum(width, float(self.horizon))
        return width

    def __call__(self, features: np.ndarray) -> np.ndarray:
        values = features @ self.weights + self.bonus_sign * self.bonus(features)
        if self.reward is not None:
            values = values + self.reward
        if self.clip_mode == ClipMode.TWO_SIDED:
            return np.clip(values, 0.0, float(self.horizon))
        return np.minimum(values, float(self.horizon))
