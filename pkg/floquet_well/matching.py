"""
Boundary matching at r = d: assembly of the C, D, F, G blocks, quasi-bound
pole search, inelastic scattering solves and S-matrix bookkeeping.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channels import (
    CLOSED,
    EMISSION,
    EXTERIOR,
    MomentumState,
    WellModel,
    channel_energy,
    flux_normalization,
    initial_momenta,
    is_open,
    track_momenta,
)
from .errors import (
    ConfigError,
    DomainError,
    FloquetWellError,
    RegularizationError,
    SolverError,
    StepSizeError,
    TruncationLimitedError,
)
from .muller import muller
from .specfun import spherical_norm_N
from .waves import (
    TruncationScheme,
    fourier_blocks,
    interior_basis,
    interior_driven_blocks,
)

logger = logging.getLogger(__name__)

DEGENERACY_RATIO = 1e-6
REGULARIZATION_RATIO = 1e-13
INTERIOR_COND_MAX = 1e13

Lattice = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances of the pole and scattering solvers."""

    tol_sv: float = 1e-10
    max_iter: int = 60
    restarts: int = 3
    xtol: float = 1e-13
    cond_max: float = 1e14

    def __post_init__(self):
        for name in ("tol_sv", "xtol", "cond_max"):
            if getattr(self, name) <= 0:
                raise ConfigError("must be positive", key=f"solver.{name}")
        if self.max_iter < 1:
            raise ConfigError("must be at least 1", key="solver.max_iter")
        if self.restarts < 0:
            raise ConfigError("must be nonnegative", key="solver.restarts")


@dataclass(frozen=True)
class MatchingProblem:
    """Everything a solve needs apart from omega and the momenta."""

    well: WellModel
    F2: float = 0.0
    truncation: TruncationScheme = field(default_factory=TruncationScheme)
    boundary: str = EMISSION
    solver: SolverSettings = field(default_factory=SolverSettings)

    @property
    def drive(self):
        return self.well.drive(self.F2)

    @property
    def indices(self) -> Tuple[int, ...]:
        return self.truncation.fourier_indices

    def with_F2(self, F2: float) -> "MatchingProblem":
        return replace(self, F2=float(F2))

    def with_truncation(self, truncation: TruncationScheme):
        return replace(self, truncation=truncation)

    def to_dict(self) -> dict:
        return {
            "well": asdict(self.well),
            "F2": self.F2,
            "truncation": asdict(self.truncation),
            "boundary": self.boundary,
            "solver": asdict(self.solver),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MatchingProblem":
        return cls(
            well=WellModel(**data["well"]),
            F2=float(data["F2"]),
            truncation=TruncationScheme(**data["truncation"]),
            boundary=data["boundary"],
            solver=SolverSettings(**data["solver"]),
        )


@dataclass
class MatchingSystem:
    """
    Matching blocks at one omega. Rows are (n, l), columns (j, l1).

    C a = D b (continuity) and F a = G b (continuity of the derivative).
    D2/G2 hold the incoming-wave blocks of a scattering solve.
    """

    omega: complex
    rows: Lattice
    cols: Lattice
    C: np.ndarray
    F: np.ndarray
    D: np.ndarray
    G: np.ndarray
    momenta: MomentumState
    diagonal_interior: bool = True
    D2: Optional[np.ndarray] = None
    G2: Optional[np.ndarray] = None

    def interior_solve(self, rhs: np.ndarray) -> np.ndarray:
        """C^{-1} rhs."""
        if self.diagonal_interior:
            c = np.diag(self.C)
            return rhs / (c[:, None] if rhs.ndim == 2 else c)
        return np.linalg.solve(self.C, rhs)

    def reduce(self, D: np.ndarray, G: np.ndarray) -> np.ndarray:
        return G - self.F @ self.interior_solve(D)

    def term_magnitudes(self, D: np.ndarray, G: np.ndarray) -> np.ndarray:
        """|G| + |F C^{-1} D|, the reduced entries before cancellation."""
        return np.abs(G) + np.abs(self.F @ self.interior_solve(D))

    @property
    def M(self) -> np.ndarray:
        """Reduced matrix G - F C^{-1} D."""
        return self.reduce(self.D, self.G)

    @property
    def K(self) -> np.ndarray:
        """Full matrix acting on (a; b)."""
        return np.block([[self.C, -self.D], [self.F, -self.G]])


def _check_interior(C: np.ndarray, F: np.ndarray, kappas, diagonal: bool):
    if diagonal:
        c = np.abs(np.diag(C))
        f = np.abs(np.diag(F)) / np.abs(kappas)
        bad = np.nonzero(c < REGULARIZATION_RATIO * (c + f))[0]
        if bad.size:
            raise RegularizationError(
                f"interior node on the matching sphere in row {bad[0]}; "
                "perturb omega"
            )
        return
    # scale by the entry sizes of C and F together so a vanishing
    # diagonal of C is not normalized away
    source = np.abs(C) + np.abs(F) / np.abs(kappas)[:, None]
    row_scale, col_scale = _equilibration(source)
    cond = np.linalg.cond(row_scale[:, None] * C * col_scale[None, :])
    if not np.isfinite(cond) or cond > INTERIOR_COND_MAX:
        raise RegularizationError(
            f"driven interior block is singular (cond={cond:.2e})"
        )


def assemble(
    omega: complex,
    problem: MatchingProblem,
    momenta: Optional[MomentumState] = None,
    incoming: bool = False,
    flux_normalized: bool = False,
    parity_filter: bool = True,
) -> MatchingSystem:
    """
    Build the matching blocks at omega.

    Args:
        omega: Complex quasi-energy
        problem: Well, drive amplitude, truncation and boundary choice
        momenta: Tracked channel momenta (fresh ones when omitted)
        incoming: Also build the h^(2) blocks D2, G2
        flux_normalized: Exterior columns use sqrt(|Re k|) N_l1
        parity_filter: Restrict to the truncation parity sector

    Raises:
        RegularizationError: if C is numerically singular
    """
    omega = complex(omega)
    well, drive = problem.well, problem.drive
    truncation = problem.truncation
    if momenta is None:
        momenta = initial_momenta(
            omega, well, drive, truncation.fourier_indices, problem.boundary
        )
    elif momenta.omega != omega:
        momenta = track_momenta(
            momenta, omega, well, drive, truncation.fourier_indices,
            problem.boundary,
        )
    lattice = (
        truncation.lattice
        if parity_filter
        else truncation.with_parity(None).lattice
    )

    outgoing = fourier_blocks(
        well, drive, omega, truncation, momenta, "h1", flux_normalized
    )
    D = outgoing.matrix(lattice, lattice, "d")
    G = outgoing.matrix(lattice, lattice, "g")
    D2 = G2 = None
    if incoming:
        incoming_blocks = fourier_blocks(
            well, drive, omega, truncation, momenta, "h2", flux_normalized
        )
        D2 = incoming_blocks.matrix(lattice, lattice, "d")
        G2 = incoming_blocks.matrix(lattice, lattice, "g")

    kappas = np.array([momenta.interior[n] for n, _ in lattice])
    if well.interior_driven:
        inner = interior_driven_blocks(well, drive, omega, truncation, momenta)
        C = inner.matrix(lattice, lattice, "d")
        F = inner.matrix(lattice, lattice, "g")
        diagonal = False
    else:
        basis = interior_basis(well, omega, truncation, momenta)
        C, F = basis.diagonal_blocks(lattice)
        diagonal = True
    _check_interior(C, F, kappas, diagonal)

    return MatchingSystem(
        omega, lattice, lattice, C, F, D, G, momenta, diagonal, D2, G2
    )


def full_singular_values(system: MatchingSystem) -> np.ndarray:
    """Singular values of the row/column-equilibrated full matrix K."""
    return np.linalg.svd(_equilibrate(system.K)[0], compute_uv=False)


def _equilibration(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.max(np.abs(matrix), axis=1)
    row_scale = 1.0 / np.where(rows == 0, 1.0, rows)
    cols = np.max(np.abs(matrix * row_scale[:, None]), axis=0)
    col_scale = 1.0 / np.where(cols == 0, 1.0, cols)
    return row_scale, col_scale


def _equilibrate(matrix: np.ndarray):
    row_scale, col_scale = _equilibration(matrix)
    scaled = row_scale[:, None] * matrix * col_scale[None, :]
    return scaled, row_scale, col_scale


def channel_kinds(
    problem: MatchingProblem, momenta: MomentumState
) -> Dict[int, str]:
    """Closed below threshold, the problem's boundary kind above it."""
    kinds = {}
    for j in momenta.exterior:
        energy = channel_energy(
            momenta.omega, j, EXTERIOR, problem.well, problem.drive
        )
        kinds[j] = CLOSED if energy.real < 0 else problem.boundary
    return kinds


@dataclass
class SolveDiagnostics:
    """
    Convergence record of one pole solve.

    Attributes:
        sigma_min: Smallest singular value of the scaled M
        sigma_ratio: sigma_min over the largest singular value
        second_ratio: Next-smallest singular value over the largest
        degenerate: Whether second_ratio fell below DEGENERACY_RATIO
        iterations: Muller iterations over all restarts
        restarts: Surrogate rebuilds
        residual: Componentwise residual of the full kernel equations
    """

    sigma_min: float
    sigma_ratio: float
    second_ratio: float
    degenerate: bool
    iterations: int
    restarts: int
    residual: float


@dataclass
class FloquetSolution:
    """A converged quasi-bound solution and the problem it solves."""

    problem: MatchingProblem
    omega: complex
    lattice: Lattice
    a: np.ndarray
    b: np.ndarray
    momenta: MomentumState
    kinds: Dict[int, str]
    diagnostics: SolveDiagnostics
    alternate_b: Optional[np.ndarray] = None

    @property
    def F2(self) -> float:
        return self.problem.F2

    @property
    def well(self) -> WellModel:
        return self.problem.well

    @property
    def drive(self):
        return self.problem.drive

    def coefficient(self, j: int, l1: int) -> complex:
        try:
            return complex(self.b[self.lattice.index((j, l1))])
        except ValueError:
            return 0j

    def open_indices(self) -> List[int]:
        """Exterior Fourier indices whose channel carries flux."""
        return [
            j for j, k in sorted(self.momenta.exterior.items()) if is_open(k)
        ]

    def to_dict(self) -> dict:
        def pairs(values):
            return [[float(z.real), float(z.imag)] for z in values]

        return {
            "problem": self.problem.to_dict(),
            "omega": [self.omega.real, self.omega.imag],
            "lattice": [list(site) for site in self.lattice],
            "a": pairs(self.a),
            "b": pairs(self.b),
            "momenta": {
                "exterior": {
                    str(j): [k.real, k.imag]
                    for j, k in self.momenta.exterior.items()
                },
                "interior": {
                    str(n): [k.real, k.imag]
                    for n, k in self.momenta.interior.items()
                },
            },
            "kinds": {str(j): kind for j, kind in self.kinds.items()},
            "diagnostics": asdict(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FloquetSolution":
        def unpair(values):
            return np.array([complex(re, im) for re, im in values])

        omega = complex(*data["omega"])
        momenta = MomentumState(
            omega,
            {
                int(j): complex(*k)
                for j, k in data["momenta"]["exterior"].items()
            },
            {
                int(n): complex(*k)
                for n, k in data["momenta"]["interior"].items()
            },
        )
        return cls(
            problem=MatchingProblem.from_dict(data["problem"]),
            omega=omega,
            lattice=tuple(tuple(site) for site in data["lattice"]),
            a=unpair(data["a"]),
            b=unpair(data["b"]),
            momenta=momenta,
            kinds={int(j): kind for j, kind in data["kinds"].items()},
            diagnostics=SolveDiagnostics(**data["diagnostics"]),
        )


class _PoleSurrogate:
    """
    s(omega) = 1 / (v^H M~(omega)^{-1} u) with M~ the equilibrated reduced
    matrix and u, v its smallest singular pair at a reference omega.
    """

    def __init__(self, problem: MatchingProblem, reference: MomentumState):
        self.problem = problem
        self.reference = reference
        system = assemble(reference.omega, problem, reference)
        self.row_scale, self.col_scale = _equilibration(
            system.term_magnitudes(system.D, system.G)
        )
        scaled = self.scaled_matrix(system)
        U, _, Vh = np.linalg.svd(scaled)
        self.u = U[:, -1]
        self.v = Vh[-1].conj()

    def momenta_at(self, omega: complex) -> MomentumState:
        return track_momenta(
            self.reference,
            omega,
            self.problem.well,
            self.problem.drive,
            self.problem.indices,
            self.problem.boundary,
        )

    def scaled_matrix(self, system: MatchingSystem) -> np.ndarray:
        return self.row_scale[:, None] * system.M * self.col_scale[None, :]

    def __call__(self, omega: complex) -> complex:
        system = assemble(omega, self.problem, self.momenta_at(omega))
        try:
            x = np.linalg.solve(self.scaled_matrix(system), self.u)
        except np.linalg.LinAlgError:
            return 0j
        return 1.0 / np.vdot(self.v, x)


def _gauge(b_flux: np.ndarray) -> complex:
    return complex(b_flux[int(np.argmax(np.abs(b_flux)))])


def _flux_factors(lattice: Lattice, momenta: MomentumState, m: int):
    """N_l1 / N_flux per column."""
    return np.array(
        [
            spherical_norm_N(l1, m)
            / flux_normalization(momenta.exterior[j], l1, m)
            for j, l1 in lattice
        ]
    )


def _componentwise_residual(K: np.ndarray, x: np.ndarray) -> float:
    scale = np.abs(K) @ np.abs(x)
    scale = np.where(scale == 0, 1.0, scale)
    return float(np.max(np.abs(K @ x) / scale))


def _build_solution(
    problem: MatchingProblem,
    surrogate: _PoleSurrogate,
    omega: complex,
    iterations: int,
    restarts: int,
) -> FloquetSolution:
    momenta = surrogate.momenta_at(omega)
    system = assemble(omega, problem, momenta)
    scaled = surrogate.scaled_matrix(system)
    _, sigmas, Vh = np.linalg.svd(scaled)
    sigma_max = sigmas[0] if sigmas[0] > 0 else 1.0
    second = sigmas[-2] / sigma_max if sigmas.size > 1 else 1.0
    degenerate = bool(second < DEGENERACY_RATIO)

    factors = _flux_factors(system.cols, momenta, problem.well.m)
    b_raw = surrogate.col_scale * Vh[-1].conj()
    gauge = _gauge(b_raw * factors)
    b_raw = b_raw / gauge
    a = system.interior_solve(system.D @ b_raw)
    residual = _componentwise_residual(system.K, np.concatenate([a, b_raw]))

    alternate = None
    if degenerate:
        logger.warning(
            "Near-degenerate smallest singular values at omega=%s "
            "(ratio %.2e); both vectors kept",
            omega,
            second,
        )
        b_alt = surrogate.col_scale * Vh[-2].conj() * factors
        alternate = b_alt / _gauge(b_alt)

    diagnostics = SolveDiagnostics(
        sigma_min=float(sigmas[-1]),
        sigma_ratio=float(sigmas[-1] / sigma_max),
        second_ratio=float(second),
        degenerate=degenerate,
        iterations=iterations,
        restarts=restarts,
        residual=residual,
    )
    return FloquetSolution(
        problem=problem,
        omega=complex(omega),
        lattice=system.cols,
        a=a,
        b=b_raw * factors,
        momenta=momenta,
        kinds=channel_kinds(problem, momenta),
        diagnostics=diagnostics,
        alternate_b=alternate,
    )


def pole_solve(
    omega_guess: complex,
    problem: MatchingProblem,
    momenta: Optional[MomentumState] = None,
) -> FloquetSolution:
    """
    Find the quasi-energy where M(omega) becomes singular, starting from
    omega_guess.

    Muller iteration on a deflated determinant surrogate; when the smallest
    singular value is still above tol_sv the surrogate is rebuilt at the
    current point and the search restarted.

    Raises:
        SolverError: if the iteration does not converge
        TruncationLimitedError: if sigma_min plateaus above tol_sv
    """
    settings = problem.solver
    omega = complex(omega_guess)
    if momenta is None:
        state = initial_momenta(
            omega, problem.well, problem.drive, problem.indices,
            problem.boundary,
        )
    else:
        state = track_momenta(
            momenta, omega, problem.well, problem.drive, problem.indices,
            problem.boundary,
        )

    trace: List = []
    iterations = 0
    converged = False
    ratio = math.inf
    for attempt in range(settings.restarts + 1):
        try:
            surrogate = _PoleSurrogate(problem, state)
            result = muller(
                surrogate,
                omega,
                xtol=settings.xtol,
                max_iter=settings.max_iter,
            )
        except StepSizeError as e:
            raise SolverError(
                f"branch tracking failed near omega={omega}: {e}", trace
            ) from e
        trace.extend(result.trace)
        iterations += result.iterations
        converged = result.converged
        omega = result.root
        solution = _build_solution(
            problem, surrogate, omega, iterations, attempt
        )
        ratio = solution.diagnostics.sigma_ratio
        logger.debug(
            "pole attempt %d: omega=%s sigma ratio %.2e",
            attempt,
            omega,
            ratio,
        )
        if converged and ratio < settings.tol_sv:
            logger.info(
                "Pole at omega=%.12g%+.12gj (F2=%g, %d iterations)",
                omega.real,
                omega.imag,
                problem.F2,
                iterations,
            )
            return solution
        state = solution.momenta

    if converged:
        raise TruncationLimitedError(
            f"sigma_min/sigma_max plateaued at {ratio:.2e} "
            f"(tolerance {settings.tol_sv:.1e}) near omega={omega}",
            trace,
        )
    raise SolverError(
        f"pole search did not converge in {iterations} iterations "
        f"near omega={omega}",
        trace,
    )


def time_reversed(solution: FloquetSolution) -> FloquetSolution:
    """
    Partner pole at omega* reached through the momenta k -> -k*.

    Args:
        solution: Converged pole of a real drive

    Returns:
        The converged partner solution on the same problem

    Raises:
        SolverError: if the partner does not converge
    """
    return pole_solve(
        solution.omega.conjugate(),
        solution.problem,
        solution.momenta.conjugate_pair(),
    )


def radiating_solution(solution: FloquetSolution) -> FloquetSolution:
    """
    The member of the conjugate pair with Im omega <= 0.

    Once a followed pole crosses into the upper half plane it captures
    rather than emits; its time-reversed partner is the one that radiates.
    """
    if solution.omega.imag <= 0:
        return solution
    logger.debug(
        "Using the time-reversed partner of omega=%s for emission",
        solution.omega,
    )
    return time_reversed(solution)


@dataclass
class ScatteringRecord:
    """One column of the S-matrix for a given incoming channel."""

    F2: float
    omega: float
    input_channel: Tuple[int, int]
    lattice: Lattice
    S_column: np.ndarray
    open_mask: np.ndarray
    condition: float
    sigma_e: float
    sigma_r: float
    sigma_t: float

    def S(self, j: int, l1: int) -> complex:
        try:
            return complex(self.S_column[self.lattice.index((j, l1))])
        except ValueError:
            return 0j

    @property
    def S00(self) -> complex:
        return self.S(0, 0)

    @property
    def unitarity_sum(self) -> float:
        """Outgoing probability summed over open channels."""
        return float(np.sum(np.abs(self.S_column[self.open_mask]) ** 2))

    @property
    def S_elastic(self) -> complex:
        return self.S(*self.input_channel)

    def to_row(self) -> dict:
        """
        Grid row; the S00 columns hold the elastic element of the input
        channel and S21 the channel one photon and one l above it.
        """
        S00 = self.S_elastic
        j_in, l_in = self.input_channel
        return {
            "F2": self.F2,
            "omega": self.omega,
            "Re_S00": S00.real,
            "Im_S00": S00.imag,
            "abs_S00_sq": abs(S00) ** 2,
            "arg_S00": math.atan2(S00.imag, S00.real),
            "abs_S21_sq": abs(self.S(j_in + 1, l_in + 1)) ** 2,
            "sigma_e0": self.sigma_e,
            "sigma_r0": self.sigma_r,
            "sigma_t0": self.sigma_t,
        }


def cross_sections(
    S_in: complex, energy: float, l1: int = 0
) -> Tuple[float, float, float]:
    """Elastic, reaction and total cross sections divided by 2 pi."""
    weight = (2 * l1 + 1) / (4.0 * energy)
    sigma_e = weight * abs(1.0 - S_in) ** 2
    sigma_r = weight * (1.0 - abs(S_in) ** 2)
    sigma_t = weight * 2.0 * (1.0 - S_in.real)
    return sigma_e, sigma_r, sigma_t


def scattering_solve(
    omega: float,
    problem: MatchingProblem,
    input_channel: Tuple[int, int] = (0, 0),
) -> ScatteringRecord:
    """
    Solve for the outgoing amplitudes S^(1) given a unit incoming wave in
    input_channel at real omega.

    Raises:
        DomainError: if omega is complex or the input channel is closed
        SolverError: if the system is singular to working precision
    """
    if isinstance(omega, complex) and omega.imag != 0:
        raise DomainError("scattering needs a real quasi-energy")
    omega = float(np.real(omega))
    j_in, l_in = input_channel
    energy = channel_energy(omega, j_in, EXTERIOR, problem.well, problem.drive)
    if energy.real <= 0:
        raise DomainError(
            f"input channel {input_channel} is closed at omega={omega}"
        )
    parity = (-1) ** (j_in + l_in)
    if problem.truncation.parity not in (None, parity):
        problem = problem.with_truncation(
            problem.truncation.with_parity(parity)
        )
    scattering = replace(problem, boundary=EMISSION)
    system = assemble(
        omega, scattering, incoming=True, flux_normalized=True
    )
    if input_channel not in system.cols:
        raise ConfigError(
            f"input channel {input_channel} is outside the truncation",
            key="input_channel",
        )
    A1 = system.M
    A2 = system.reduce(system.D2, system.G2)
    e_in = np.zeros(len(system.cols), dtype=complex)
    e_in[system.cols.index(input_channel)] = 1.0
    rhs = -A2 @ e_in

    row_scale, col_scale = _equilibration(
        system.term_magnitudes(system.D, system.G)
    )
    scaled = row_scale[:, None] * A1 * col_scale[None, :]
    condition = float(np.linalg.cond(scaled))
    if not np.isfinite(condition) or condition > problem.solver.cond_max:
        raise SolverError(
            f"scattering system near-singular at omega={omega}, "
            f"F2={problem.F2} (cond={condition:.2e})"
        )
    S = col_scale * np.linalg.solve(scaled, row_scale * rhs)
    open_mask = np.array(
        [is_open(system.momenta.exterior[j]) for j, _ in system.cols]
    )
    sigma_e, sigma_r, sigma_t = cross_sections(
        complex(S[system.cols.index(input_channel)]), energy.real, l_in
    )
    return ScatteringRecord(
        F2=problem.F2,
        omega=omega,
        input_channel=tuple(input_channel),
        lattice=system.cols,
        S_column=S,
        open_mask=open_mask,
        condition=condition,
        sigma_e=sigma_e,
        sigma_r=sigma_r,
        sigma_t=sigma_t,
    )


@dataclass
class GridCell:
    """One (F2, omega) grid point: a record or the error text."""

    F2: float
    omega: float
    record: Optional[ScatteringRecord] = None
    error: Optional[str] = None


def _solve_cell(args) -> GridCell:
    problem, F2, omega, input_channel = args
    try:
        record = scattering_solve(omega, problem.with_F2(F2), input_channel)
        return GridCell(F2, omega, record)
    except FloquetWellError as e:
        return GridCell(F2, omega, error=f"{type(e).__name__}: {e}")


def scattering_grid(
    F2_values: Sequence[float],
    omega_values: Sequence[float],
    problem: MatchingProblem,
    input_channel: Tuple[int, int] = (0, 0),
    workers: int = 1,
    on_cell=None,
) -> List[GridCell]:
    """
    Map scattering_solve over the F2 x omega grid, F2 outermost.

    Failed cells carry the error text instead of a record.
    """
    tasks = [
        (problem, float(F2), float(omega), tuple(input_channel))
        for F2 in F2_values
        for omega in omega_values
    ]
    if not tasks:
        return []
    cells: List[GridCell] = []
    if workers > 1:
        with Pool(workers) as pool:
            for cell in pool.imap(_solve_cell, tasks):
                cells.append(cell)
                if on_cell:
                    on_cell(cell)
    else:
        for task in tasks:
            cell = _solve_cell(task)
            cells.append(cell)
            if on_cell:
                on_cell(cell)
    failures = sum(1 for cell in cells if cell.error)
    if failures:
        logger.warning("%d of %d grid cells failed", failures, len(cells))
    return cells


@dataclass
class SMatrix:
    """Open-channel S-matrix with rows and columns ordered as channels."""

    channels: List[Tuple[int, int]]
    matrix: np.ndarray

    def reciprocity_error(self) -> float:
        """Largest |S - S^T| entry."""
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    def unitarity_error(self) -> float:
        """Largest |S^H S - 1| entry."""
        product = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(product - np.eye(len(self.channels)))))


def s_matrix(omega: float, problem: MatchingProblem) -> SMatrix:
    """Open-channel S-matrix at real omega, both parity sectors."""
    lattice = problem.truncation.with_parity(None).lattice
    momenta = initial_momenta(
        omega, problem.well, problem.drive, problem.indices
    )
    channels = [
        (j, l1) for j, l1 in lattice if is_open(momenta.exterior[j])
    ]
    matrix = np.zeros((len(channels), len(channels)), dtype=complex)
    for col, channel in enumerate(channels):
        record = scattering_solve(omega, problem, channel)
        for row, (j, l1) in enumerate(channels):
            matrix[row, col] = record.S(j, l1)
    return SMatrix(channels, matrix)


@dataclass(frozen=True)
class ChannelZeros:
    j: int
    energy: complex
    pole_k: complex
    zero_k: complex
    partner_pole_k: complex
    partner_zero_k: complex


def zero_locator(solution: FloquetSolution) -> List[ChannelZeros]:
    """S-matrix zero momenta paired with a pole: -k, -k* and k*."""
    zeros = []
    for j, k in sorted(solution.momenta.exterior.items()):
        zeros.append(
            ChannelZeros(
                j=j,
                energy=0.5 * k * k,
                pole_k=k,
                zero_k=-k,
                partner_pole_k=-k.conjugate(),
                partner_zero_k=k.conjugate(),
            )
        )
    return zeros


@dataclass
class TruncationReport:
    """Pole shift when the truncation grows by one step."""

    omega: complex
    omega_enlarged: complex
    delta: float
    flagged: bool


def truncation_check(
    solution: FloquetSolution, step: int = 1, threshold: float = 1e-6
) -> TruncationReport:
    """Re-solve with J and L_max enlarged by `step`; flag |d omega|."""
    problem = solution.problem
    enlarged = problem.with_truncation(problem.truncation.enlarged(step))
    other = pole_solve(solution.omega, enlarged, solution.momenta)
    delta = abs(other.omega - solution.omega)
    flagged = delta >= threshold
    if flagged:
        logger.warning(
            "Truncation moves omega by %.2e at F2=%g", delta, problem.F2
        )
    return TruncationReport(solution.omega, other.omega, delta, flagged)
