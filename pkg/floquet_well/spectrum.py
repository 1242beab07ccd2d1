"""
Static (undriven) bound-state spectrum of the spherical square well and the
scan for pairs of levels that coincide modulo the drive quantum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import spherical_jn, spherical_kn

from .channels import well_from_A
from .errors import ConfigError

logger = logging.getLogger(__name__)

SCAN_POINTS = 400
DRIVE_QUANTUM = 2.0


@dataclass(frozen=True)
class BoundState:
    l: int
    index: int
    energy: float
    kappa: float
    q: float
    V0: float
    d: float

    @property
    def A_over_pi(self) -> float:
        return -math.sqrt(2.0 * self.V0) * self.d / math.pi


def static_matching(kappa: float, l: int, V0: float, d: float) -> float:
    """
    kappa j_l'(kappa d) - q (k_l'/k_l)(q d) j_l(kappa d), zero at a bound
    state of angular momentum l.
    """
    q = math.sqrt(max(2.0 * V0 - kappa * kappa, 0.0))
    if q == 0.0:
        log_derivative = -(l + 1) / d
    else:
        log_derivative = (
            q
            * spherical_kn(l, q * d, derivative=True)
            / spherical_kn(l, q * d)
        )
    return kappa * spherical_jn(
        l, kappa * d, derivative=True
    ) - log_derivative * spherical_jn(l, kappa * d)


def bound_states(
    V0: float, d: float, l_max: int = 3, samples: int = SCAN_POINTS
) -> List[BoundState]:
    """All bound states with l <= l_max, deepest first within each l."""
    if V0 <= 0 or d <= 0:
        raise ConfigError("V0 and d must be positive")
    kappa_max = math.sqrt(2.0 * V0)
    # last node hugs threshold so very shallow states are bracketed
    grid = kappa_max * np.append(np.arange(1, samples) / samples, 1 - 1e-12)
    states = []
    for l in range(l_max + 1):
        values = [static_matching(kappa, l, V0, d) for kappa in grid]
        roots = []
        for lo, hi, f_lo, f_hi in zip(grid, grid[1:], values, values[1:]):
            if f_lo == 0.0:
                roots.append(lo)
            elif f_lo * f_hi < 0:
                roots.append(brentq(static_matching, lo, hi, args=(l, V0, d)))
        # deepest state has the smallest kappa
        for index, kappa in enumerate(sorted(roots)):
            energy = 0.5 * kappa * kappa - V0
            states.append(
                BoundState(
                    l, index, energy, kappa, math.sqrt(-2.0 * energy), V0, d
                )
            )
    return states


@dataclass(frozen=True)
class SpectrumRow:
    parameter: float
    V0: float
    d: float
    A_over_pi: float
    l: int
    index: int
    energy: float


def static_spectrum(
    values: Iterable[float],
    mode: str = "A_over_pi",
    d: Optional[float] = None,
    A_over_pi: Optional[float] = None,
    l_max: int = 3,
) -> List[SpectrumRow]:
    """
    Bound energies along a sweep of A/pi at fixed d, or of V0 at fixed A.

    Args:
        values: A_over_pi values (negative) or V0 values
        mode: "A_over_pi" or "V0"
        d: Well radius held fixed in the A_over_pi sweep
        A_over_pi: Strength held fixed in the V0 sweep
    """
    rows = []
    for value in values:
        if mode == "A_over_pi":
            if d is None:
                raise ConfigError("the A_over_pi sweep needs d", key="d")
            V0 = (value * math.pi / d) ** 2 / 2.0
            radius = d
        elif mode == "V0":
            if A_over_pi is None:
                raise ConfigError(
                    "the V0 sweep needs A_over_pi", key="A_over_pi"
                )
            V0 = value
            radius = well_from_A(A_over_pi, V0).d
        else:
            raise ConfigError(f"unknown sweep mode {mode!r}", key="sweep")
        for state in bound_states(V0, radius, l_max):
            rows.append(
                SpectrumRow(
                    float(value),
                    V0,
                    radius,
                    state.A_over_pi,
                    state.l,
                    state.index,
                    state.energy,
                )
            )
    return rows


def count_states(rows: List[SpectrumRow], parameter: float, l: int) -> int:
    """Number of bound states with angular momentum l at one parameter."""
    return sum(1 for r in rows if r.parameter == parameter and r.l == l)


def wrapped_difference(
    first: float, second: float, quantum: float = DRIVE_QUANTUM
) -> float:
    """first - second folded into [-quantum/2, quantum/2)."""
    delta = first - second
    if math.isnan(delta):
        return delta
    return delta - quantum * math.floor(delta / quantum + 0.5)


@dataclass(frozen=True)
class Degeneracy:
    V0: float
    energies: Tuple[float, float]
    residual: float


@dataclass
class DegeneracyScan:
    A_over_pi: float
    levels: Tuple[Tuple[int, int], Tuple[int, int]]
    rows: List[Tuple[float, float, float, float]] = field(default_factory=list)
    crossings: List[Degeneracy] = field(default_factory=list)


def _level(V0: float, A_over_pi: float, l: int, index: int) -> float:
    d = well_from_A(A_over_pi, V0).d
    states = [s for s in bound_states(V0, d, l) if s.l == l]
    if index >= len(states):
        return math.nan
    return states[index].energy


def _closest_pair(V0, A_over_pi, l_pair, quantum):
    well = well_from_A(A_over_pi, V0)
    states = bound_states(well.V0, well.d, max(l_pair))
    upper = [s for s in states if s.l == l_pair[0]]
    lower = [s for s in states if s.l == l_pair[1]]
    if not upper or not lower:
        raise ConfigError(f"no bound states with l={l_pair} at V0={V0}")
    s1, s2 = min(
        ((a, b) for a in upper for b in lower),
        key=lambda pair: abs(
            wrapped_difference(pair[0].energy, pair[1].energy, quantum)
        ),
    )
    return ((s1.l, s1.index), (s2.l, s2.index))


def degeneracy_scan(
    V0_values: Iterable[float],
    A_over_pi: float,
    l_pair: Tuple[int, int] = (1, 0),
    quantum: float = DRIVE_QUANTUM,
    levels: Optional[Tuple[Tuple[int, int], Tuple[int, int]]] = None,
) -> DegeneracyScan:
    """
    Scan V0 for levels of angular momenta l_pair that coincide modulo the
    drive quantum.

    Unless `levels` names them as ((l, index), (l, index)), the two levels
    are the pair closest to degeneracy at the first V0. Either way they
    are followed by their radial index; crossings of the folded difference
    are refined with brentq.
    """
    V0_values = [float(v) for v in V0_values]
    if levels is not None:
        levels = tuple(tuple(int(i) for i in level) for level in levels)
    if not V0_values:
        return DegeneracyScan(
            A_over_pi, levels or ((l_pair[0], 0), (l_pair[1], 0))
        )
    if levels is None:
        levels = _closest_pair(V0_values[0], A_over_pi, l_pair, quantum)
    scan = DegeneracyScan(A_over_pi, levels)

    def delta(V0):
        return wrapped_difference(
            _level(V0, A_over_pi, *levels[0]),
            _level(V0, A_over_pi, *levels[1]),
            quantum,
        )

    previous = None
    for V0 in V0_values:
        e1 = _level(V0, A_over_pi, *levels[0])
        e2 = _level(V0, A_over_pi, *levels[1])
        current = wrapped_difference(e1, e2, quantum)
        scan.rows.append((V0, e1, e2, current))
        if previous is not None and not math.isnan(current):
            V0_prev, value_prev = previous
            # folding jumps by one quantum; only small values bracket a root
            if (
                value_prev * current <= 0
                and abs(value_prev) < quantum / 4
                and abs(current) < quantum / 4
            ):
                root = (
                    V0
                    if current == 0
                    else brentq(delta, V0_prev, V0, xtol=1e-14)
                )
                energies = (
                    _level(root, A_over_pi, *levels[0]),
                    _level(root, A_over_pi, *levels[1]),
                )
                scan.crossings.append(
                    Degeneracy(root, energies, abs(delta(root)))
                )
                logger.info(
                    "Levels %s coincide mod %g at V0=%.8g", levels, quantum,
                    root,
                )
        previous = (V0, current)
    return scan
