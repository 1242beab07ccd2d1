"""
Muller iteration for roots of analytic functions in the complex plane.
"""

import cmath
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

from .errors import SolverError

logger = logging.getLogger(__name__)


@dataclass
class MullerResult:
    root: complex
    value: complex
    iterations: int
    converged: bool
    trace: List[Tuple[complex, complex]] = field(default_factory=list)


def muller_step(
    xs: Tuple[complex, complex, complex],
    fs: Tuple[complex, complex, complex],
) -> complex:
    """
    One Muller update through the parabola fitted to three points,
    taking the larger denominator root.
    """
    x0, x1, x2 = xs
    f0, f1, f2 = fs
    q = (x2 - x1) / (x1 - x0)
    a = q * f2 - q * (1 + q) * f1 + q * q * f0
    b = (2 * q + 1) * f2 - (1 + q) ** 2 * f1 + q * q * f0
    c = (1 + q) * f2
    root = cmath.sqrt(b * b - 4 * a * c)
    denominator = b + root if abs(b + root) >= abs(b - root) else b - root
    if denominator == 0:
        # degenerate parabola, fall back to a secant step
        if f2 == f1:
            raise SolverError("Muller step stalled on equal values")
        return x2 - f2 * (x2 - x1) / (f2 - f1)
    return x2 - (x2 - x1) * 2 * c / denominator


def muller(
    func: Callable[[complex], complex],
    start: complex,
    h: float = 0.0,
    xtol: float = 1e-13,
    ftol: float = 0.0,
    max_iter: int = 60,
) -> MullerResult:
    """
    Find a zero of `func` starting from start - h, start + h, start.

    Args:
        func: Analytic function of one complex variable
        start: Initial guess
        h: Spread of the starting triple (default 1e-4 |start|, >= 1e-6)
        xtol: Relative step size that counts as converged
        ftol: Absolute |f| that counts as converged
        max_iter: Iteration cap

    Returns:
        MullerResult; converged is False when max_iter ran out
    """
    start = complex(start)
    if h <= 0:
        h = max(1e-6, 1e-4 * abs(start))
    xs = [start - h, start + h, start]
    fs = [func(x) for x in xs]
    trace = list(zip(xs, fs))

    for iteration in range(1, max_iter + 1):
        if fs[2] == 0:
            return MullerResult(xs[2], fs[2], iteration, True, trace)
        try:
            x_new = muller_step(tuple(xs), tuple(fs))
        except ZeroDivisionError as e:
            raise SolverError(f"Muller step failed: {e}", trace) from e
        f_new = func(x_new)
        trace.append((x_new, f_new))
        logger.debug("muller %d: x=%s |f|=%.3e", iteration, x_new, abs(f_new))
        step = abs(x_new - xs[2])
        xs = [xs[1], xs[2], x_new]
        fs = [fs[1], fs[2], f_new]
        if step <= xtol * max(1.0, abs(x_new)) or abs(f_new) <= ftol:
            return MullerResult(x_new, f_new, iteration, True, trace)

    return MullerResult(xs[2], fs[2], max_iter, False, trace)
