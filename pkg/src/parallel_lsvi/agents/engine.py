import logging
import numpy as np

from dataclasses import dataclass, replace
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

from ..envs import LinearSpec, RewardFunction, SpecKind, sample_transition
from ..errors import ConsistencyError, NumericError, ParameterError
from ..numerics import CovarianceState, detect_doubling, doubling_bound, new_covariance, solve
from ..oracle import DeterministicPolicy, clamp_gap, evaluate_policy, optimal_value
from ..utils import split_data
from . import runlog as metrics
from .dataset import TrajectoryDataset
from .estimate import QEstimate
from .params import Algorithm, AlgoParams, ClipMode
from .runlog import RunLog

logger = logging.getLogger(__name__)


def agent_stream(seed: int, k: int, p: int) -> np.random.Generator:
    """Counter-based stream owned by agent p in episode k; independent of thread scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, k, p])))


def regression_weights(
    covariance: CovarianceState,
    features: np.ndarray,
    counts: np.ndarray,
    next_values: np.ndarray,
    reward_sum: Optional[np.ndarray] = None,
) -> np.ndarray:
    """w = Λ⁻¹ Σ φ(x, j)·(r + V(x')) over every recorded transition of one step.

    `counts[x, j, x']` tallies the transitions, so the sum runs over the data
    without revisiting individual records.
    """
    target = np.einsum("xjd,xjy,y->d", features, counts, next_values)
    if reward_sum is not None:
        target = target + reward_sum
    return solve(covariance, target)


@dataclass(frozen=True)
class Variant:
    algorithm: Algorithm
    kind: SpecKind
    reward_in_target: bool
    exploration_reward: bool
    clip_mode: ClipMode


VARIANTS = {
    Algorithm.POLSVI: Variant(Algorithm.POLSVI, SpecKind.MDP, True, False, ClipMode.UPPER),
    Algorithm.RF: Variant(Algorithm.RF, SpecKind.MDP, False, True, ClipMode.UPPER),
    Algorithm.RFMG: Variant(Algorithm.RFMG, SpecKind.MG, False, True, ClipMode.TWO_SIDED),
}


@dataclass
class EpisodePlan:
    """Output of one central backward pass; read-only for the rollout workers."""

    estimates: List[QEstimate]
    q_tables: np.ndarray
    values: np.ndarray
    policy: DeterministicPolicy
    exploration_reward: Optional[np.ndarray] = None


class CentralServer:
    """Owns Λ_h and the regression sums; all agents report back to it after each episode."""

    def __init__(self, spec: LinearSpec, params: AlgoParams, variant: Variant):
        self.spec = spec
        self.variant = variant
        self.horizon = spec.horizon
        self.features = spec.joint_features
        self.beta = params.resolve_beta(spec.dim, spec.horizon)
        self.covariances = [new_covariance(spec.dim, params.ridge) for _ in range(spec.horizon)]
        self.counts = np.zeros((spec.horizon, spec.n_states, spec.n_joint, spec.n_states))
        self.reward_sums = np.zeros((spec.horizon, spec.dim))

    def plan_episode(self, k: int) -> EpisodePlan:
        spec = self.spec
        values = np.zeros((self.horizon + 1, spec.n_states))
        q_tables = np.zeros((self.horizon, spec.n_states, spec.n_joint))
        actions = np.zeros((self.horizon, spec.n_states), dtype=np.int64)
        rewards = np.zeros((self.horizon, spec.n_states, spec.n_joint)) if self.variant.exploration_reward else None
        estimates: List[Optional[QEstimate]] = [None] * self.horizon

        for h in reversed(range(self.horizon)):
            covariance = self.covariances[h]
            reward_sum = self.reward_sums[h] if self.variant.reward_in_target else None
            weights = regression_weights(covariance, self.features, self.counts[h], values[h + 1], reward_sum)

            estimate = QEstimate(
                weights=weights,
                inverse=covariance.snapshot(),
                beta=self.beta,
                horizon=self.horizon,
                clip_mode=self.variant.clip_mode,
                capped_bonus=self.variant.exploration_reward,
            )
            if self.variant.exploration_reward:
                rewards[h] = estimate.bonus(self.features) / self.horizon
                estimate = replace(estimate, reward=rewards[h])

            q_tables[h] = estimate(self.features)
            if not np.all(np.isfinite(q_tables[h])):
                raise NumericError("non-finite Q values in the regression step", location=(k, h))
            # np.argmax picks the lowest index among ties
            actions[h] = np.argmax(q_tables[h], axis=1)
            values[h] = q_tables[h, np.arange(spec.n_states), actions[h]]
            estimates[h] = estimate

        return EpisodePlan(estimates, q_tables, values, DeterministicPolicy(actions, spec.n_joint), rewards)

    def absorb(self, dataset: TrajectoryDataset, k: int) -> List[bool]:
        """Fold the P trajectories of episode k into Λ_h and report Λ_h^{k+1} ≻ 2Λ_h^k per step."""
        flags = []
        for h in range(self.horizon):
            covariance = self.covariances[h]
            before = covariance.copy()
            for p in range(dataset.agents):
                x = dataset.states[k, p, h]
                j = dataset.actions[k, p, h]
                phi = self.features[x, j]
                covariance.add(phi)
                self.counts[h, x, j, dataset.next_states[k, p, h]] += 1.0
                self.reward_sums[h] += dataset.rewards[k, p, h] * phi
            doubled = detect_doubling(before, covariance)
            if doubled:
                logger.debug(f"doubling round at episode {k}, step {h}")
            flags.append(doubled)
        return flags


def _rollout_agents(spec: LinearSpec, policy: DeterministicPolicy, k: int, agents: Sequence[int], seed: int, dataset: TrajectoryDataset):
    for p in agents:
        rng = agent_stream(seed, k, p)
        x = spec.initial_state
        for h in range(spec.horizon):
            j = policy(h, x)
            a, *b = spec.split_joint(j)
            x_next, r = sample_transition(spec, x, a, h, rng, b[0] if b else None)
            dataset.record(k, p, h, x, j, r, x_next)
            x = x_next


def rollout(spec: LinearSpec, policy: DeterministicPolicy, k: int, params: AlgoParams, dataset: TrajectoryDataset, executor: ThreadPoolExecutor) -> None:
    """All P agents follow the same greedy policy; each writes only its own dataset slots."""
    chunks = split_data(list(range(params.agents)), params.workers)
    futures = [executor.submit(_rollout_agents, spec, policy, k, chunk, params.seed, dataset) for chunk in chunks]
    for future in futures:
        future.result()


def run_learner(spec: LinearSpec, params: AlgoParams, algorithm: Algorithm) -> Tuple[RunLog, TrajectoryDataset]:
    algorithm = Algorithm(algorithm)
    variant = VARIANTS[algorithm]
    if spec.kind != variant.kind:
        raise ParameterError(f"{algorithm.value} needs a {variant.kind.value} spec, got {spec.kind.value}")

    server = CentralServer(spec, params, variant)
    dataset = TrajectoryDataset.for_spec(spec, params.episodes, params.agents, server.beta, params.ridge)
    runlog = RunLog(algorithm.value, params.provenance(), spec.hash(), server.beta)
    s0 = spec.initial_state

    v_star = None
    if params.oracle and algorithm == Algorithm.POLSVI:
        v_star = optimal_value(spec)[0].at(s0)

    logger.info(f"{algorithm.value}: K={params.episodes}, P={params.agents}, beta={server.beta:.6g}, {spec}")
    regret = 0.0
    with ThreadPoolExecutor(max_workers=params.workers) as executor:
        for k in range(params.episodes):
            plan = server.plan_episode(k)
            rollout(spec, plan.policy, k, params, dataset, executor)

            for h, doubled in enumerate(server.absorb(dataset, k)):
                runlog.log(metrics.DOUBLING, float(doubled), k, step=h)

            if not params.oracle:
                continue
            if algorithm == Algorithm.POLSVI:
                achieved = evaluate_policy(spec, plan.policy).at(s0)
                gap = clamp_gap(v_star - achieved, f"episode {k} regret term")
                for p in range(params.agents):
                    runlog.log(metrics.GAP, gap, k, agent=p)
                regret += params.agents * gap
                runlog.log(metrics.REGRET, regret, k)
            else:
                exploration_reward = RewardFunction.from_table(spec, plan.exploration_reward)
                oracle_value = optimal_value(spec, exploration_reward)[0].at(s0)
                optimistic_value = float(plan.values[0, s0])
                runlog.log(metrics.OPTIMISTIC_VALUE, optimistic_value, k)
                runlog.log(metrics.ORACLE_VALUE, oracle_value, k)
                runlog.log(metrics.OPTIMISM, float(oracle_value <= optimistic_value + metrics.OPTIMISM_TOL), k)

    dataset.check_complete()
    count = runlog.doubling_count
    bound = doubling_bound(spec.dim, spec.horizon, params.episodes, params.agents, params.ridge)
    if count >= bound:
        raise ConsistencyError(f"{count} doubling rounds reached the bound {bound:.3f}")

    runlog.results["doubling_count"] = count
    runlog.results["doubling_bound"] = bound
    if params.oracle:
        if algorithm == Algorithm.POLSVI:
            runlog.results["regret"] = regret
        else:
            runlog.results["optimism_rate"] = runlog.optimism_rate()
    logger.info(f"{algorithm.value} finished: {runlog}")
    return runlog, dataset


def polsvi_run(spec: LinearSpec, params: AlgoParams) -> Tuple[RunLog, TrajectoryDataset]:
    return run_learner(spec, params, Algorithm.POLSVI)


def rf_explore(spec: LinearSpec, params: AlgoParams) -> Tuple[TrajectoryDataset, RunLog]:
    runlog, dataset = run_learner(spec, params, Algorithm.RF)
    return dataset, runlog


def rfmg_explore(spec: LinearSpec, params: AlgoParams) -> Tuple[TrajectoryDataset, RunLog]:
    runlog, dataset = run_learner(spec, params, Algorithm.RFMG)
    return dataset, runlog
