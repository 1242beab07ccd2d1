"""
Observables of a converged Floquet solution: emission momentum densities,
radial expectation values, boundary-data normalization and a direct
check of the time-dependent Schroedinger equation.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import (
    Callable,
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from numpy.polynomial.legendre import leggauss

from .channels import (
    EXTERIOR,
    INTERIOR,
    flux_normalization,
    is_decaying,
    is_open,
)
from .errors import DomainError
from .matching import FloquetSolution, ScatteringRecord
from .specfun import (
    coupling_tables,
    legendre_p,
    spherical_bessel_j,
    spherical_bessel_j_derivative,
    spherical_norm_N,
)
from .waves import radial_components

logger = logging.getLogger(__name__)

INTERIOR_NODES = 40
PANEL_NODES = 16
PANEL_LENGTH = 2.0
# e^{-37} is below double precision relative to the peak
DECAY_EXPONENT = 37.0
MAX_EXTENT = 200.0
QUADRATURE_TOL = 1e-12
MAX_PANEL_DEPTH = 12
ANGULAR_NODES = 64

OPERATORS = ("identity", "Lsq", "r_vec", "r_bilinear", "r_sq")
REGIONS = (INTERIOR, EXTERIOR, "both")


def _spherical_harmonics(l_max: int, m: int, x) -> np.ndarray:
    """Y_l^m(theta, 0) for l = 0..l_max on x = cos theta; shape [l, x]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rows = np.zeros((l_max + 1, x.size))
    for l in range(m, l_max + 1):
        rows[l] = spherical_norm_N(l, m) * legendre_p(l, m, x)
    return rows


def _coefficient_map(solution: FloquetSolution, values) -> Dict:
    return dict(zip(solution.lattice, values))


def partial_waves(
    solution: FloquetSolution,
    r: float,
    times,
    side: Optional[str] = None,
    channels: Optional[Iterable[int]] = None,
) -> np.ndarray:
    """
    Periodic part of the l-components psi_l(r, t) of the solution.

    Args:
        r: Radius (side defaults to interior for r < d)
        times: Time samples
        side: Force INTERIOR or EXTERIOR evaluation
        channels: Exterior Fourier indices to include (all by default)

    Returns:
        Complex array [t, l]
    """
    problem = solution.problem
    well, drive = problem.well, problem.drive
    l_max = problem.truncation.l_max
    tables = coupling_tables(l_max, well.m)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if side is None:
        side = INTERIOR if r < well.d else EXTERIOR
    out = np.zeros((times.size, l_max + 1), dtype=complex)
    indices = problem.indices if channels is None else list(channels)

    if side == EXTERIOR:
        coefficients = _coefficient_map(solution, solution.b)
        phase = drive.phase_factor(times)
        for j in indices:
            k = solution.momenta.exterior[j]
            weights = np.array(
                [
                    coefficients.get((j, l1), 0j)
                    * flux_normalization(k, l1, well.m)
                    for l1 in range(l_max + 1)
                ]
            )
            if not np.any(weights):
                continue
            R = radial_components(k, "h1", drive, tables, r, times)
            out += (np.exp(-2j * j * times) * phase)[:, None] * np.einsum(
                "tal,a->tl", R, weights
            )
        return out

    coefficients = _coefficient_map(solution, solution.a)
    if not well.interior_driven:
        ls = np.arange(l_max + 1)
        for n in problem.indices:
            weights = np.array(
                [coefficients.get((n, l), 0j) for l in ls]
            )
            if not np.any(weights):
                continue
            radial = spherical_bessel_j(ls, solution.momenta.interior[n] * r)
            out += np.exp(-2j * n * times)[:, None] * (weights * radial)
        return out

    phase = (
        np.ones(times.size) if drive.include_VF else drive.phase_factor(times)
    )
    for n in problem.indices:
        weights = np.array(
            [
                coefficients.get((n, l1), 0j)
                * spherical_norm_N(l1, well.m)
                / (2.0 * 1j**l1)
                for l1 in range(l_max + 1)
            ]
        )
        if not np.any(weights):
            continue
        R = radial_components(
            solution.momenta.interior[n], "J", drive, tables, r, times
        )
        out += (np.exp(-2j * n * times) * phase)[:, None] * np.einsum(
            "tal,a->tl", R, weights
        )
    return out


def wavefunction(
    solution: FloquetSolution,
    r: float,
    theta: float,
    t: float,
    periodic: bool = False,
) -> complex:
    """phi(r, theta, t); the e^{-i omega t} factor is dropped if periodic."""
    psi = partial_waves(solution, r, [t])[0]
    Y = _spherical_harmonics(len(psi) - 1, solution.well.m, math.cos(theta))
    value = complex(psi @ Y[:, 0])
    if periodic:
        return value
    return value * cmath.exp(-1j * solution.omega * t)


@dataclass
class EmissionChannel:
    j: int
    k: float
    coefficients: np.ndarray
    weight: float

    @property
    def odd_fraction(self) -> float:
        """Share of the channel weight carried by odd l1."""
        power = np.abs(self.coefficients) ** 2
        total = power.sum()
        return float(power[1::2].sum() / total) if total else 0.0


@dataclass
class EmissionDensity:
    """
    Momentum distribution of the emitted particle as discrete momentum
    shells, one per open channel.
    """

    channels: List[EmissionChannel]
    normalization: float
    rate: float
    m: int = 0
    l_max: int = 0

    def channel(self, j: int) -> EmissionChannel:
        for channel in self.channels:
            if channel.j == j:
                return channel
        raise KeyError(j)

    @property
    def dominant(self) -> EmissionChannel:
        return max(self.channels, key=lambda c: c.weight)

    def shell_density(self, j: int, theta, phi=0.0) -> np.ndarray:
        """|sum_l1 b Y_l1(theta, phi)|^2 / N on the shell of channel j."""
        channel = self.channel(j)
        Y = _spherical_harmonics(self.l_max, self.m, np.cos(theta))
        amplitude = channel.coefficients @ Y * np.exp(1j * self.m * phi)
        return np.abs(amplitude) ** 2 / self.normalization

    def angular_profile(self, j: int, theta) -> np.ndarray:
        """Shell density integrated over phi."""
        return 2.0 * np.pi * self.shell_density(j, theta)

    def total_probability(self, nodes: int = ANGULAR_NODES) -> float:
        x, w = leggauss(nodes)
        theta = np.arccos(x)
        return float(
            sum(
                np.dot(w, self.angular_profile(c.j, theta))
                for c in self.channels
            )
        )

    def marginals(
        self, nodes: int = ANGULAR_NODES
    ) -> List[Tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
        """Per channel: (j, k_z, k_rho, probability weight) samples."""
        x, w = leggauss(nodes)
        theta = np.arccos(x)
        samples = []
        for channel in self.channels:
            weights = w * self.angular_profile(channel.j, theta)
            samples.append(
                (
                    channel.j,
                    channel.k * x,
                    channel.k * np.sqrt(1.0 - x * x),
                    weights,
                )
            )
        return samples

    def rate_scaled(self) -> "EmissionDensity":
        """Same shells with every weight multiplied by -Im omega."""
        return EmissionDensity(
            [
                EmissionChannel(c.j, c.k, c.coefficients, c.weight * self.rate)
                for c in self.channels
            ],
            self.normalization / self.rate if self.rate else math.inf,
            self.rate,
            self.m,
            self.l_max,
        )


def emission_density(solution: FloquetSolution) -> Optional[EmissionDensity]:
    """
    Emission shells of every open channel, normalized so the total
    probability is one.

    Returns:
        EmissionDensity, or None when no channel is open
    """
    l_max = solution.problem.truncation.l_max
    coefficients = _coefficient_map(solution, solution.b)
    channels = []
    for j in solution.open_indices():
        b = np.array(
            [coefficients.get((j, l1), 0j) for l1 in range(l_max + 1)]
        )
        channels.append(
            EmissionChannel(
                j,
                float(solution.momenta.exterior[j].real),
                b,
                float(np.sum(np.abs(b) ** 2)),
            )
        )
    normalization = sum(c.weight for c in channels)
    if not channels or normalization == 0:
        logger.info("No open emission channel at omega=%s", solution.omega)
        return None
    for channel in channels:
        channel.weight /= normalization
    return EmissionDensity(
        channels, normalization, -solution.omega.imag, solution.well.m, l_max
    )


@dataclass
class RadialQuadrature:
    """
    I_{l,l'}[r^p] = int psi_l^* psi_l' r^p r^2 dr for p = 0, 1, 2.
    """

    region: str
    moments: np.ndarray
    r_max: float
    tail: float
    times: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def matrix(self, power: int = 0) -> np.ndarray:
        return self.moments[power]


def _exterior_channels(
    solution: FloquetSolution, requested: Optional[Iterable[int]]
) -> List[int]:
    momenta = solution.momenta.exterior
    if requested is None:
        return [j for j, k in sorted(momenta.items()) if is_decaying(k)]
    requested = list(requested)
    for j in requested:
        k = momenta[j]
        if not is_decaying(k):
            raise DomainError(
                f"exterior channel {j} (k={k}) is not square-integrable"
            )
    return requested


def _accumulate(moments, psi, radius, weight):
    # psi [t, l]; average over the time samples
    gram = np.einsum("ta,tb->ab", psi.conj(), psi) / psi.shape[0]
    for power in range(moments.shape[0]):
        moments[power] += weight * radius ** (power + 2) * gram


def _panel_moments(
    profile: Callable[[float], np.ndarray],
    lo: float,
    hi: float,
    nodes: int,
    size: int,
) -> np.ndarray:
    """Fixed-order Gauss-Legendre moments of one radial panel."""
    x, w = leggauss(nodes)
    half = 0.5 * (hi - lo)
    moments = np.zeros((3, size, size), dtype=complex)
    for node, weight in zip(x, w):
        radius = lo + half * (node + 1.0)
        _accumulate(moments, profile(radius), radius, half * weight)
    return moments


def adaptive_moments(
    profile: Callable[[float], np.ndarray],
    edges: Sequence[float],
    nodes: int,
    size: int,
    tol: float = QUADRATURE_TOL,
    max_depth: int = MAX_PANEL_DEPTH,
) -> np.ndarray:
    """
    Moment matrices over consecutive panels, halving each panel until the
    sum over its halves agrees with the whole.

    Args:
        profile: radius -> partial waves [t, l]
        edges: Initial panel boundaries
        nodes: Gauss-Legendre nodes per panel
        size: Number of partial waves
        tol: Accepted change relative to the largest coarse moment
        max_depth: Halvings allowed per initial panel

    Returns:
        Complex array [power, l, l'] for powers 0, 1, 2
    """
    edges = list(edges)
    panels = [
        (lo, hi, _panel_moments(profile, lo, hi, nodes, size), 0)
        for lo, hi in zip(edges, edges[1:])
    ]
    scale = max(
        (float(np.max(np.abs(whole))) for _, _, whole, _ in panels),
        default=0.0,
    )
    total = np.zeros((3, size, size), dtype=complex)
    capped = 0
    while panels:
        lo, hi, whole, depth = panels.pop()
        mid = 0.5 * (lo + hi)
        left = _panel_moments(profile, lo, mid, nodes, size)
        right = _panel_moments(profile, mid, hi, nodes, size)
        change = float(np.max(np.abs(left + right - whole)))
        if change <= tol * max(scale, 1e-300):
            total += left + right
        elif depth >= max_depth:
            capped += 1
            total += left + right
        else:
            panels.append((lo, mid, left, depth + 1))
            panels.append((mid, hi, right, depth + 1))
    if capped:
        logger.warning(
            "%d radial panels hit the refinement cap of %d halvings",
            capped,
            max_depth,
        )
    return total


def radial_quadrature(
    solution: FloquetSolution,
    region: str = "both",
    t: float = 0.0,
    time_average: bool = False,
    exterior_channels: Optional[Iterable[int]] = None,
    interior_nodes: int = INTERIOR_NODES,
) -> RadialQuadrature:
    """Radial moment matrices on the interior and/or exterior."""
    if region not in REGIONS:
        raise DomainError(f"unknown region {region!r}")
    well = solution.well
    truncation = solution.problem.truncation
    if time_average:
        times = np.pi * np.arange(truncation.samples) / truncation.samples
    else:
        times = np.array([float(t)])
    size = truncation.l_max + 1
    moments = np.zeros((3, size, size), dtype=complex)
    r_max, tail = well.d, 0.0

    if region in (INTERIOR, "both"):
        moments += adaptive_moments(
            lambda radius: partial_waves(solution, radius, times, INTERIOR),
            [0.0, well.d],
            interior_nodes,
            size,
        )

    if region in (EXTERIOR, "both"):
        channels = _exterior_channels(solution, exterior_channels)
        if channels:
            decay = min(solution.momenta.exterior[j].imag for j in channels)
            r_max = min(
                well.d + DECAY_EXPONENT / (2.0 * decay), well.d + MAX_EXTENT
            )
            panels = max(1, math.ceil((r_max - well.d) / PANEL_LENGTH))
            moments += adaptive_moments(
                lambda radius: partial_waves(
                    solution, radius, times, EXTERIOR, channels
                ),
                np.linspace(well.d, r_max, panels + 1),
                PANEL_NODES,
                size,
            )
            edge = partial_waves(solution, r_max, times, EXTERIOR, channels)
            last = float(np.sum(np.abs(edge) ** 2) / edge.shape[0] * r_max**2)
            # exponential remainder beyond r_max
            tail = last / (2.0 * decay)
            if tail > 1e-10 * max(np.trace(moments[0]).real, 1e-300):
                logger.warning("Exterior tail beyond r_max is %.2e", tail)
    return RadialQuadrature(region, moments, r_max, tail, times)


@dataclass
class Expectation:
    operator: str
    functional: Union[float, np.ndarray]
    norm: float
    quadrature: RadialQuadrature

    @property
    def value(self):
        return self.functional / self.norm


def expectation_radial(
    solution: FloquetSolution,
    operator: str = "identity",
    region: str = "both",
    t: float = 0.0,
    alpha: int = 2,
    time_average: bool = False,
    exterior_channels: Optional[Iterable[int]] = None,
) -> Expectation:
    """
    Radial functionals of the solution and their ratio to the norm.

    Args:
        operator: identity, Lsq, r_vec (vector, only z survives),
            r_bilinear (r_alpha^2, alpha = 0, 1, 2 for x, y, z) or r_sq
        region: interior, exterior or both
        time_average: Average over one drive period instead of time t
        exterior_channels: Closed channels to integrate outside the well
            (all closed channels by default)

    Raises:
        DomainError: if an exterior channel is not square-integrable
    """
    if operator not in OPERATORS:
        raise DomainError(f"unknown operator {operator!r}")
    quadrature = radial_quadrature(
        solution, region, t, time_average, exterior_channels
    )
    tables = coupling_tables(solution.problem.truncation.l_max, 0)
    I0, I1, I2 = quadrature.moments
    ls = np.arange(I0.shape[0])
    norm = float(np.trace(I0).real)

    if operator == "identity":
        functional = norm
    elif operator == "Lsq":
        functional = float(np.sum(ls * (ls + 1) * np.diag(I0)).real)
    elif operator == "r_vec":
        z = float(np.sum(tables.p_table * I1).real)
        functional = np.array([0.0, 0.0, z])
    elif operator == "r_sq":
        functional = float(np.trace(I2).real)
    else:
        if alpha not in (0, 1, 2):
            raise DomainError(f"alpha must be 0, 1 or 2, got {alpha}")
        functional = float(np.sum(tables.q_table[alpha] * I2).real)
    return Expectation(operator, functional, norm, quadrature)


def _wronskian(l: int, kappa1: complex, kappa2: complex, d: float):
    """[u1^* u2' - u2 u1^*']_d with u = r j_l(kappa r)."""

    def boundary(kappa):
        j = spherical_bessel_j(l, kappa * d)
        dj = spherical_bessel_j_derivative(l, kappa * d)
        return d * j, j + d * kappa * dj

    u1, du1 = boundary(kappa1)
    u2, du2 = boundary(kappa2)
    return u1.conjugate() * du2 - u2 * du1.conjugate()


def _shifted_kappa(kappa: complex, h: float) -> complex:
    root = cmath.sqrt(kappa * kappa + 2.0 * h)
    return root if abs(root - kappa) <= abs(root + kappa) else -root


def wronskian_projection(
    l: int,
    kappa1: complex,
    kappa2: complex,
    d: float,
    limit_tol: float = 1e-6,
) -> complex:
    """
    int_0^d u1^* u2 dr for u = r j_l(kappa r) from boundary data alone.

    Equal conjugate energies go through the Richardson-extrapolated limit
    of a symmetric real energy shift.
    """
    e1 = 0.5 * complex(kappa1) ** 2
    e2 = 0.5 * complex(kappa2) ** 2
    gap = e1.conjugate() - e2
    scale = max(1.0, abs(e2))
    if abs(gap) > limit_tol * scale:
        return _wronskian(l, kappa1, kappa2, d) / (2.0 * gap)

    def shifted(h):
        values = []
        for sign in (1.0, -1.0):
            k2 = _shifted_kappa(kappa2, sign * h)
            g = e1.conjugate() - 0.5 * k2 * k2
            values.append(_wronskian(l, kappa1, k2, d) / (2.0 * g))
        return 0.5 * (values[0] + values[1])

    h = 1e-3 * scale
    return (4.0 * shifted(0.5 * h) - shifted(h)) / 3.0


@dataclass
class BoundaryNorm:
    value: float
    terms: Dict[Tuple[int, int, int], complex]


def boundary_normalization(
    solution: FloquetSolution, t: Optional[float] = None
) -> BoundaryNorm:
    """
    Interior norm sum_l int |psi_l|^2 r^2 dr from the boundary values of
    the interior waves. With t=None the period average is returned.

    Raises:
        DomainError: for variants whose interior is driven
    """
    if solution.well.interior_driven:
        raise DomainError("boundary normalization needs variant 1 or 3")
    coefficients = _coefficient_map(solution, solution.a)
    kappas = solution.momenta.interior
    d = solution.well.d
    terms = {}
    total = 0j
    by_l: Dict[int, List[int]] = {}
    for n, l in solution.lattice:
        by_l.setdefault(l, []).append(n)
    for l, ns in by_l.items():
        for n1 in ns:
            partners = [n1] if t is None else ns
            for n2 in partners:
                overlap = wronskian_projection(l, kappas[n1], kappas[n2], d)
                terms[(l, n1, n2)] = overlap
                weight = coefficients[(n1, l)].conjugate() * coefficients[
                    (n2, l)
                ]
                if t is not None:
                    weight *= cmath.exp(2j * (n1 - n2) * t)
                total += weight * overlap
    return BoundaryNorm(float(total.real), terms)


def _five_point(values: Sequence[complex], h: float):
    fm2, fm1, f0, fp1, fp2 = values
    first = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h)
    second = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h)
    return first, second


def _potential(solution: FloquetSolution, r: float, x: float, t: float, side):
    well, drive = solution.well, solution.drive
    driven = side == EXTERIOR or well.interior_driven
    value = -well.V0 if side == INTERIOR else 0.0
    if driven:
        value += -float(drive.F_ddot(t)) * r * x
        if drive.include_VF:
            value += float(drive.V_F(t))
    return value


def residual_verify(
    solution: FloquetSolution,
    points: Iterable[Tuple[float, float, float]],
    h_r: float = 1e-2,
    h_t: float = 1e-2,
    floor: float = 1e-3,
) -> float:
    """
    Largest relative residual of i d/dt phi - H phi at (r, theta, t)
    points, with finite differences in r and t and the exact angular
    term.
    """
    well = solution.well
    omega = solution.omega
    offsets = np.arange(-2, 3)
    records = []
    for r, theta, t in points:
        side = INTERIOR if r < well.d else EXTERIOR
        step = min(h_r, abs(r - well.d) / 3.0)
        if side == INTERIOR:
            step = min(step, r / 3.0)
        x = math.cos(theta)
        l_max = solution.problem.truncation.l_max
        Y = _spherical_harmonics(l_max, well.m, x)[:, 0]
        ls = np.arange(l_max + 1)

        psi_t = partial_waves(solution, r, t + h_t * offsets, side)
        dpsi_dt, _ = _five_point(psi_t, h_t)
        radial = np.array(
            [
                (r + step * o)
                * partial_waves(solution, r + step * o, [t], side)[0]
                for o in offsets
            ]
        )
        _, second = _five_point(radial, step)
        psi = psi_t[2]

        laplacian = second / r - ls * (ls + 1) / (r * r) * psi
        potential = _potential(solution, r, x, t, side)
        # equation for the periodic part, evaluated at theta
        residual = (
            omega * psi + 1j * dpsi_dt + 0.5 * laplacian - potential * psi
        ) @ Y
        phi = psi @ Y
        scale = max(1.0, abs(omega.real) + abs(potential))
        records.append((abs(residual), abs(phi), scale))
        logger.debug("residual at r=%.3f: %.2e", r, abs(residual))

    if not records:
        return 0.0
    peak = max(rec[1] for rec in records)
    return max(
        res / (scale * max(phi, floor * peak))
        for res, phi, scale in records
    )


@dataclass
class FluxBalance:
    inward: float
    outward: float

    @property
    def imbalance(self) -> float:
        total = max(self.inward, self.outward, 1e-300)
        return abs(self.outward - self.inward) / total


def flux_balance(
    result: Union[FloquetSolution, ScatteringRecord]
) -> FluxBalance:
    """
    Flux through a large sphere, summed over open channels.

    For a scattering record the incoming flux is the unit input wave; for
    a solution, channels with Re k < 0 carry flux inward.
    """
    if isinstance(result, ScatteringRecord):
        return FluxBalance(1.0, result.unitarity_sum)
    coefficients = _coefficient_map(result, result.b)
    inward = outward = 0.0
    for (j, _), b in coefficients.items():
        k = result.momenta.exterior[j]
        if not is_open(k):
            continue
        if k.real > 0:
            outward += abs(b) ** 2
        else:
            inward += abs(b) ** 2
    return FluxBalance(inward, outward)
