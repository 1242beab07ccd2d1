"""
Continuation of quasi-bound poles in the drive amplitude and bisection
for the point where a pole reaches the real axis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .errors import (
    AliasingError,
    ConfigError,
    ContinuationStuckError,
    RegularizationError,
    SolverError,
    StepSizeError,
    ThresholdError,
)
from .matching import FloquetSolution, pole_solve

logger = logging.getLogger(__name__)

RECOVERABLE = (
    SolverError,
    StepSizeError,
    RegularizationError,
    ThresholdError,
    AliasingError,
)


@dataclass(frozen=True)
class StepControl:
    """Adaptive F2 step: halve on failure, double after `grow_after` wins."""

    step_initial: float = 0.005
    step_min: float = 1e-6
    step_max: float = 0.02
    grow_after: int = 2
    jump_factor: float = 10.0
    jump_floor: float = 1e-3

    def __post_init__(self):
        if not 0 < self.step_min <= self.step_initial <= self.step_max:
            raise ConfigError(
                "need 0 < step_min <= step_initial <= step_max",
                key="continuation",
            )


@dataclass
class Trajectory:
    """Accepted solutions in continuation order."""

    points: List[FloquetSolution] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def last(self) -> FloquetSolution:
        return self.points[-1]

    @property
    def F2(self) -> np.ndarray:
        return np.array([p.F2 for p in self.points])

    @property
    def omega(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])


def predict_omega(
    current: FloquetSolution,
    previous: Optional[FloquetSolution],
    F2_next: float,
) -> complex:
    """Secant extrapolation through the last two accepted points."""
    if previous is None or previous.F2 == current.F2:
        return current.omega
    slope = (current.omega - previous.omega) / (current.F2 - previous.F2)
    return current.omega + slope * (F2_next - current.F2)


def continue_in_F2(
    seed: FloquetSolution,
    F2_target: float,
    control: StepControl = StepControl(),
    previous: Optional[FloquetSolution] = None,
    on_step: Optional[Callable[[FloquetSolution], None]] = None,
) -> Trajectory:
    """
    Follow a converged pole from seed.F2 to F2_target.

    Args:
        seed: Converged starting solution
        F2_target: Final drive amplitude (either direction)
        control: Step size policy
        previous: Earlier accepted point, used to resume the secant
        on_step: Called with every accepted solution

    Raises:
        ContinuationStuckError: step fell below step_min; carries the
            trajectory accepted so far
    """
    trajectory = Trajectory([seed])
    current = seed
    direction = 1.0 if F2_target >= seed.F2 else -1.0
    step = control.step_initial
    successes = 0

    while direction * (F2_target - current.F2) > 1e-14:
        F2_next = current.F2 + direction * min(
            step, abs(F2_target - current.F2)
        )
        guess = predict_omega(current, previous, F2_next)
        problem = current.problem.with_F2(F2_next)
        failure = None
        try:
            solution = pole_solve(guess, problem, current.momenta)
            jump = abs(solution.omega - current.omega)
            allowed = control.jump_factor * max(
                abs(guess - current.omega), control.jump_floor
            )
            if jump > allowed:
                failure = f"jump {jump:.2e} exceeds {allowed:.2e}"
        except RECOVERABLE as e:
            failure = f"{type(e).__name__}: {e}"

        if failure:
            step /= 2.0
            successes = 0
            logger.debug(
                "Rejected F2=%.6g (%s); step now %.2e",
                F2_next,
                failure,
                step,
            )
            if step < control.step_min:
                raise ContinuationStuckError(
                    f"continuation stuck at F2={current.F2:.8g}: {failure}",
                    trajectory,
                )
            continue

        trajectory.points.append(solution)
        previous, current = current, solution
        if on_step:
            on_step(solution)
        successes += 1
        if successes >= control.grow_after:
            step = min(2.0 * step, control.step_max)
            successes = 0

    return trajectory


class CriticalPoint(NamedTuple):
    F2: float
    omega: float
    solution: FloquetSolution


def find_bracket(trajectory: Trajectory):
    """First pair of neighbours with strictly opposite Im omega."""
    points = trajectory.points
    for lower, upper in zip(points, points[1:]):
        if lower.omega.imag * upper.omega.imag < 0:
            return lower, upper
    return None


def critical_point(
    trajectory: Trajectory,
    tol: float = 1e-9,
    interval_tol: float = 1e-13,
    max_bisections: int = 200,
) -> Optional[CriticalPoint]:
    """
    Bisect F2 on Im omega inside the first sign change of the trajectory.

    Returns:
        CriticalPoint, or None when the trajectory never crosses the real
        axis
    """
    bracket = find_bracket(trajectory)
    if bracket is None:
        logger.info("Trajectory does not cross the real axis")
        return None
    lower, upper = bracket
    best = lower if abs(lower.omega.imag) < abs(upper.omega.imag) else upper

    for _ in range(max_bisections):
        if abs(best.omega.imag) < tol:
            break
        if abs(upper.F2 - lower.F2) < interval_tol:
            break
        F2_mid = 0.5 * (lower.F2 + upper.F2)
        weight = (F2_mid - lower.F2) / (upper.F2 - lower.F2)
        guess = lower.omega + weight * (upper.omega - lower.omega)
        mid = pole_solve(
            guess, lower.problem.with_F2(F2_mid), lower.momenta
        )
        best = mid
        if mid.omega.imag * lower.omega.imag > 0:
            lower = mid
        else:
            upper = mid

    logger.info(
        "Critical point F2=%.10g omega=%.10g (Im %.1e)",
        best.F2,
        best.omega.real,
        best.omega.imag,
    )
    return CriticalPoint(best.F2, best.omega.real, best)
