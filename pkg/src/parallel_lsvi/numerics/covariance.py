import math
import logging
import numpy as np

from dataclasses import dataclass
from scipy import linalg

from ..errors import ParameterError, FeatureBoundError, NumericError

logger = logging.getLogger(__name__)

FEATURE_NORM_TOL = 1e-9
DOUBLING_TOL = 1e-10
REFRESH_INTERVAL = 256


@dataclass
class CovarianceState:
    """Ridge covariance Λ = λI + Σ φφᵀ with its inverse and log-determinant.

    The inverse is kept current by Sherman-Morrison updates and recomputed
    directly from `matrix` every `REFRESH_INTERVAL` updates.
    """

    dim: int
    ridge: float
    matrix: np.ndarray
    inverse: np.ndarray
    logdet: float
    updates_applied: int = 0

    def copy(self) -> "CovarianceState":
        return CovarianceState(
            dim=self.dim,
            ridge=self.ridge,
            matrix=self.matrix.copy(),
            inverse=self.inverse.copy(),
            logdet=self.logdet,
            updates_applied=self.updates_applied,
        )

    def add(self, phi: np.ndarray) -> None:
        phi = _check_feature(self, phi)
        if not np.any(phi):
            return
        u = self.inverse @ phi
        denom = 1.0 + float(phi @ u)

        self.matrix += np.outer(phi, phi)
        self.inverse -= np.outer(u, u) / denom
        self.logdet += math.log(denom)
        self.updates_applied += 1

        if self.updates_applied % REFRESH_INTERVAL == 0:
            self.inverse = _direct_inverse(self.matrix)

    def snapshot(self) -> np.ndarray:
        inverse = self.inverse.copy()
        inverse.setflags(write=False)
        return inverse


def _check_feature(state: CovarianceState, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if phi.shape[0] != state.dim:
        raise ParameterError(f"feature has dimension {phi.shape[0]}, covariance has dimension {state.dim}")
    if not np.all(np.isfinite(phi)):
        raise NumericError("feature contains non-finite entries")
    norm = float(np.linalg.norm(phi))
    if norm > 1.0 + FEATURE_NORM_TOL:
        raise FeatureBoundError(f"feature norm {norm:.6g} exceeds the linear-model bound. Must be <= 1")
    return phi


def _direct_inverse(matrix: np.ndarray) -> np.ndarray:
    inverse = linalg.inv(matrix)
    return 0.5 * (inverse + inverse.T)


def new_covariance(dim: int, ridge: float) -> CovarianceState:
    if int(dim) != dim or dim < 1:
        raise ParameterError(f"Invalid dimension {dim}. Must be a positive integer.")
    if not ridge > 0.0:
        raise ParameterError(f"Invalid ridge {ridge}. Must be positive.")
    dim = int(dim)
    ridge = float(ridge)
    return CovarianceState(
        dim=dim,
        ridge=ridge,
        matrix=ridge * np.eye(dim),
        inverse=np.eye(dim) / ridge,
        logdet=dim * math.log(ridge),
        updates_applied=0,
    )


def rank1_update(state: CovarianceState, phi: np.ndarray) -> CovarianceState:
    updated = state.copy()
    updated.add(phi)
    return updated


def refresh_inverse(state: CovarianceState) -> CovarianceState:
    refreshed = state.copy()
    refreshed.inverse = _direct_inverse(refreshed.matrix)
    return refreshed


def quadratic_form(state: CovarianceState, phi: np.ndarray) -> float:
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if phi.shape[0] != state.dim:
        raise ParameterError(f"feature has dimension {phi.shape[0]}, covariance has dimension {state.dim}")
    # clamp float noise, Λ⁻¹ is PD
    return max(float(phi @ state.inverse @ phi), 0.0)


def quadratic_forms(inverse: np.ndarray, features: np.ndarray) -> np.ndarray:
    """φᵀΛ⁻¹φ for every row of `features` (any leading shape, trailing d)."""
    values = np.einsum("...i,ij,...j->...", features, inverse, features)
    return np.maximum(values, 0.0)


def solve(state: CovarianceState, vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (state.dim,):
        raise ParameterError(f"vector has shape {vector.shape}, expected ({state.dim},)")
    return state.inverse @ vector


def detect_doubling(prev: CovarianceState, next: CovarianceState) -> bool:
    """True iff next.matrix ≻ 2·prev.matrix in the Loewner order."""
    if prev.dim != next.dim:
        raise ParameterError(f"dimension mismatch: {prev.dim} vs {next.dim}")
    if prev.ridge != next.ridge:
        raise ParameterError(f"ridge mismatch: {prev.ridge} vs {next.ridge}")

    gap = next.matrix - 2.0 * prev.matrix
    gap = 0.5 * (gap + gap.T) - DOUBLING_TOL * np.eye(prev.dim)
    try:
        linalg.cholesky(gap, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return False
    return True


def doubling_bound(dim: int, horizon: int, episodes: int, agents: int, ridge: float = 1.0) -> float:
    """Upper bound d·H·log(1 + KP/(dλ))/log 2 on the number of doubling rounds."""
    return dim * horizon * math.log(1.0 + episodes * agents / (dim * ridge)) / math.log(2.0)
