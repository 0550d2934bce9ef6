import numpy as np

from dataclasses import dataclass
from typing import List, Optional

from ..agents import RunLog
from ..agents import runlog as metrics

GAP_TOL = 1e-9
MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


class RunCheck:
    name = "check"

    def __call__(self, runlog: RunLog) -> CheckResult:
        raise NotImplementedError


class RunCheckList(list):
    def __call__(self, runlog: RunLog) -> List[CheckResult]:
        return [check(runlog) for check in self]

    def all_passed(self, runlog: RunLog) -> bool:
        return all(result.passed for result in self(runlog))

    @property
    def optimism_target(self) -> Optional[float]:
        for check in self:
            if isinstance(check, OptimismRateCheck):
                return check.target
        return None


class DoublingBoundCheck(RunCheck):
    name = "doubling_bound"

    def __call__(self, runlog: RunLog) -> CheckResult:
        bound = runlog.results.get("doubling_bound")
        if bound is None:
            return CheckResult(self.name, True, "no bound recorded")
        count = runlog.doubling_count
        return CheckResult(self.name, count < bound, f"{count} doubling rounds, bound {bound:.3f}")


class OptimismRateCheck(RunCheck):
    name = "optimism_rate"

    def __init__(self, target: float = 0.95):
        self.target = target

    def __call__(self, runlog: RunLog) -> CheckResult:
        rate = runlog.optimism_rate()
        if rate is None:
            return CheckResult(self.name, True, "no optimism records")
        return CheckResult(self.name, rate >= self.target, f"rate {rate:.4f}, target {self.target:.2f}")


class RegretMonotoneCheck(RunCheck):
    name = "regret_monotone"

    def __call__(self, runlog: RunLog) -> CheckResult:
        regret = runlog.series(metrics.REGRET)
        if regret.size < 2:
            return CheckResult(self.name, True, "fewer than two regret records")
        worst = float(np.min(np.diff(regret)))
        return CheckResult(self.name, worst >= -MONOTONE_TOL, f"smallest increment {worst:.3e}")


class NonNegativeGapCheck(RunCheck):
    name = "non_negative_gap"

    def __call__(self, runlog: RunLog) -> CheckResult:
        gaps = runlog.series(metrics.GAP)
        if gaps.size == 0:
            return CheckResult(self.name, True, "no gap records")
        worst = float(gaps.min())
        return CheckResult(self.name, worst >= -GAP_TOL, f"smallest gap {worst:.3e}")


def default_checks(algorithm: str, optimism_target: float = 0.95) -> RunCheckList:
    if algorithm == "polsvi":
        return RunCheckList([DoublingBoundCheck(), RegretMonotoneCheck(), NonNegativeGapCheck()])
    return RunCheckList([DoublingBoundCheck(), OptimismRateCheck(optimism_target)])
