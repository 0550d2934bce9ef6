import math
import logging
import itertools
import numpy as np

from dataclasses import dataclass
from typing import Optional, Tuple
from scipy.optimize import linprog

from ..errors import ParameterError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
PLANNING_TOL = 1e-6
FICTITIOUS_PLAY_ITERATIONS = 10_000
WARM_START_MASS = 1e-2
MAX_SUPPORT_CANDIDATES = 200_000

LP_METHODS = (("lp", "highs-ds"), ("interior_point", "highs-ipm"))


@dataclass(frozen=True)
class MatrixGame:
    """Zero-sum game; the row player maximizes pᵀ·payoff·q."""

    payoff: np.ndarray

    def __post_init__(self):
        payoff = np.array(self.payoff, dtype=np.float64)
        if payoff.ndim != 2 or payoff.shape[0] < 1 or payoff.shape[1] < 1:
            raise ParameterError(f"payoff must be a non-empty matrix, got shape {payoff.shape}")
        if not np.all(np.isfinite(payoff)):
            raise ParameterError("payoff contains non-finite entries")
        payoff.setflags(write=False)
        object.__setattr__(self, "payoff", payoff)

    @property
    def rows(self) -> int:
        return self.payoff.shape[0]

    @property
    def cols(self) -> int:
        return self.payoff.shape[1]

    @property
    def payoff_range(self) -> float:
        return float(self.payoff.max() - self.payoff.min())


@dataclass(frozen=True)
class GameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    exploitability: float
    method: str = "lp"


def _check_distribution(p: np.ndarray, size: int, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape[0] != size:
        raise ParameterError(f"{name} has {p.shape[0]} entries, expected {size}")
    if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-9:
        raise ParameterError(f"{name} is not a probability distribution")
    return p


def exploitability(game: MatrixGame, p: np.ndarray, q: np.ndarray) -> float:
    """Largest gain either player obtains by a pure deviation from (p, q)."""
    p = _check_distribution(p, game.rows, "row strategy")
    q = _check_distribution(q, game.cols, "column strategy")
    value = float(p @ game.payoff @ q)
    row_gain = float(np.max(game.payoff @ q)) - value
    col_gain = value - float(np.min(p @ game.payoff))
    return max(row_gain, col_gain, 0.0)


def _normalize(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    total = x.sum()
    if total <= 0.0:
        return np.full(x.shape[0], 1.0 / x.shape[0])
    return x / total


def _maximin_strategy(payoff: np.ndarray, method: str = "highs-ds") -> Optional[np.ndarray]:
    """Row player's maximin strategy: max v s.t. pᵀM ≥ v·1, p in the simplex."""
    m, n = payoff.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    # v - pᵀM[:, b] <= 0 for every column b
    A_ub = np.hstack([-payoff.T, np.ones((n, 1))])
    b_ub = np.zeros(n)
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    b_eq = np.ones(1)
    bounds = [(0.0, None)] * m + [(None, None)]

    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method=method)
    if res.status != 0 or res.x is None:
        logger.debug(f"maximin LP ({method}) failed with status {res.status}: {res.message}")
        return None
    return _normalize(res.x[:m])


def _equalize(block: np.ndarray) -> Optional[np.ndarray]:
    """Weights on the columns of `block` that make every row pay the same, summing to one."""
    k = block.shape[1]
    system = np.vstack([np.hstack([block, -np.ones((block.shape[0], 1))]), np.append(np.ones(k), 0.0)])
    rhs = np.append(np.zeros(block.shape[0]), 1.0)
    if system.shape[0] == system.shape[1]:
        try:
            solution = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            return None
    else:
        solution = np.linalg.lstsq(system, rhs, rcond=None)[0]
    if not np.all(np.isfinite(solution)):
        return None
    return solution[:k]


def _support_strategies(payoff: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Equalizing strategies on the given supports, or None when they are not distributions."""
    if rows.size == 0 or cols.size == 0:
        return None
    sub = payoff[np.ix_(rows, cols)]
    p_support = _equalize(sub.T)
    q_support = _equalize(sub)
    if p_support is None or q_support is None:
        return None
    if np.any(p_support < -1e-12) or np.any(q_support < -1e-12):
        return None

    p = np.zeros(payoff.shape[0])
    q = np.zeros(payoff.shape[1])
    p[rows] = p_support
    q[cols] = q_support
    return _normalize(p), _normalize(q)


def _polish(payoff: np.ndarray, p: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Re-solve the equalizing equations on the supports of (p, q)."""
    polished = _support_strategies(payoff, np.flatnonzero(p > 1e-12), np.flatnonzero(q > 1e-12))
    return polished if polished is not None else (p, q)


def _refine(game: MatrixGame, p: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    residual = exploitability(game, p, q)
    if residual > 0.0:
        polished_p, polished_q = _polish(game.payoff, p, q)
        polished = exploitability(game, polished_p, polished_q)
        if polished < residual:
            return polished_p, polished_q, polished
    return p, q, residual


def _fictitious_play(payoff: np.ndarray, iterations: int) -> Tuple[np.ndarray, np.ndarray]:
    m, n = payoff.shape
    row_cum_payoff = np.zeros(m)
    col_cum_payoff = np.zeros(n)
    rowcnt = np.zeros(m)
    colcnt = np.zeros(n)
    for _ in range(iterations):
        # lowest-index best responses keep the warm start deterministic
        active_row = int(np.argmax(row_cum_payoff))
        rowcnt[active_row] += 1
        col_cum_payoff += payoff[active_row]

        active_col = int(np.argmin(col_cum_payoff))
        colcnt[active_col] += 1
        row_cum_payoff += payoff[:, active_col]
    return rowcnt / rowcnt.sum(), colcnt / colcnt.sum()


def _support_enumeration(game: MatrixGame, threshold: float) -> Tuple[Optional[Tuple[np.ndarray, np.ndarray]], float]:
    """Exact equilibrium search over supports, starting from the supports fictitious play settles on.

    Every zero-sum game has an extreme equilibrium whose supports have equal
    size and a nonsingular equalizing system, so the square enumeration is
    complete. Returns the certified pair (or None) and the best residual seen.
    """
    payoff = game.payoff
    m, n = payoff.shape

    p, q = _fictitious_play(payoff, FICTITIOUS_PLAY_ITERATIONS)
    warm = _support_strategies(payoff, np.flatnonzero(p >= WARM_START_MASS), np.flatnonzero(q >= WARM_START_MASS))
    best = exploitability(game, p, q)
    if warm is not None:
        residual = exploitability(game, *warm)
        if residual <= threshold:
            return warm, residual
        best = min(best, residual)

    candidates = math.comb(m + n, m) - 1
    if candidates > MAX_SUPPORT_CANDIDATES:
        logger.warning(f"{m}x{n} game has {candidates} support pairs, beyond the limit of {MAX_SUPPORT_CANDIDATES}")
        return None, best

    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                pair = _support_strategies(payoff, np.array(rows), np.array(cols))
                if pair is None:
                    continue
                residual = exploitability(game, *pair)
                if residual <= threshold:
                    return pair, residual
                best = min(best, residual)
    return None, best


def _solution(game: MatrixGame, p: np.ndarray, q: np.ndarray, residual: float, method: str) -> GameSolution:
    return GameSolution(
        value=float(p @ game.payoff @ q),
        row_strategy=p,
        col_strategy=q,
        exploitability=residual,
        method=method,
    )


def solve(game: MatrixGame, tol: float = DEFAULT_TOL, location: Optional[Tuple[int, ...]] = None) -> GameSolution:
    """Nash equilibrium of a zero-sum matrix game certified by exploitability.

    A solution is accepted when its exploitability is at most
    tol * max(1, payoff range). The dual simplex LP runs first, then the
    interior-point LP, then an exact support enumeration; if none certifies,
    SolverError carries the smallest residual seen.
    """
    if not tol > 0.0:
        raise ParameterError(f"Invalid tol={tol}. Must be positive.")
    if not isinstance(game, MatrixGame):
        game = MatrixGame(game)

    threshold = tol * max(1.0, game.payoff_range)
    payoff = game.payoff
    best = np.inf

    for method, lp_method in LP_METHODS:
        p = _maximin_strategy(payoff, lp_method)
        q = _maximin_strategy(-payoff.T, lp_method)
        if p is None or q is None:
            logger.warning(f"{lp_method} failed on a {game.rows}x{game.cols} game")
            continue
        p, q, residual = _refine(game, p, q)
        if residual <= threshold:
            return _solution(game, p, q, residual, method)
        logger.warning(f"{lp_method} solution has exploitability {residual:.3e} above {threshold:.3e}")
        best = min(best, residual)

    pair, residual = _support_enumeration(game, threshold)
    if pair is not None:
        return _solution(game, *pair, residual, "support_enumeration")
    raise SolverError(f"no equilibrium within tolerance {threshold:.3e}", min(best, residual), location)
