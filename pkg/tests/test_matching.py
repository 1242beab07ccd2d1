# pylint: disable=missing-module-docstring
# pylint: disable=missing-class-docstring,missing-function-docstring
import cmath
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from floquet_well.channels import (
    CAPTURE,
    CLOSED,
    EMISSION,
    WellModel,
    well_from_A,
)
from floquet_well.errors import (
    DomainError,
    RegularizationError,
    SolverError,
)
from floquet_well.matching import (
    MatchingProblem,
    SolverSettings,
    assemble,
    channel_kinds,
    cross_sections,
    full_singular_values,
    pole_solve,
    s_matrix,
    scattering_grid,
    scattering_solve,
    truncation_check,
    zero_locator,
)
from floquet_well.waves import TruncationScheme

EVEN = TruncationScheme(j_min=-2, j_max=2, l_max=3, n_t=16, parity=1)
ODD = EVEN.with_parity(-1)
MEDIUM = TruncationScheme(j_min=-3, j_max=3, l_max=4, n_t=32, parity=1)


def _shallowest_root(func, V0, samples=4000):
    grid = np.linspace(-V0 * (1 - 1e-9), -1e-9, samples)
    values = [func(E) for E in grid]
    roots = [
        brentq(func, lo, hi, xtol=1e-15)
        for lo, hi, f_lo, f_hi in zip(grid, grid[1:], values, values[1:])
        if f_lo * f_hi < 0
    ]
    return max(roots)


def s_wave_energy(V0, d):
    """kappa cot(kappa d) = -q, written without poles."""

    def g(E):
        kappa = math.sqrt(2 * (E + V0))
        q = math.sqrt(-2 * E)
        return kappa * math.cos(kappa * d) + q * math.sin(kappa * d)

    return _shallowest_root(g, V0)


def p_wave_energy(V0, d):
    """Log-derivative match of r j_1(kappa r) and r k_1(q r) at d."""

    def g(E):
        kappa = math.sqrt(2 * (E + V0))
        q = math.sqrt(-2 * E)
        x = kappa * d
        f = math.sin(x) / x - math.cos(x)
        df = math.cos(x) / x - math.sin(x) / x**2 + math.sin(x)
        return kappa * df + (q + 1 / (d * (q * d + 1))) * f

    return _shallowest_root(g, V0)


def s_wave_phase_factor(omega, V0, d):
    k = math.sqrt(2 * omega)
    kappa = math.sqrt(2 * (omega + V0))
    delta = -k * d + math.atan(k / kappa * math.tan(kappa * d))
    return cmath.exp(2j * delta)


def shallow_problem(F2=0.0, truncation=EVEN, boundary=EMISSION):
    return MatchingProblem(
        well_from_A(-0.504, 0.557), F2, truncation, boundary
    )


# s-wave level near -0.155, far enough from threshold for large steps
DEEP = well_from_A(-0.8, 0.557)


def deep_problem(F2=0.0, truncation=EVEN, boundary=EMISSION):
    return MatchingProblem(DEEP, F2, truncation, boundary)


def deep_energy():
    return s_wave_energy(DEEP.V0, DEEP.d)


class TestAssemble:
    def test_block_shapes_and_reduction(self):
        problem = shallow_problem(0.1)
        system = assemble(-0.05 - 0.01j, problem)
        size = len(EVEN.lattice)
        for block in (system.C, system.F, system.D, system.G):
            assert block.shape == (size, size)
        assert system.K.shape == (2 * size, 2 * size)
        expected = system.G - system.F @ np.linalg.solve(system.C, system.D)
        assert np.allclose(system.M, expected)

    def test_incoming_blocks(self):
        system = assemble(0.3, shallow_problem(0.1), incoming=True)
        assert system.D2 is not None and system.G2 is not None
        assert system.D2.shape == system.D.shape

    def test_parity_filter_off(self):
        system = assemble(-0.05, shallow_problem(0.0), parity_filter=False)
        assert len(system.cols) == len(EVEN.with_parity(None).lattice)

    def test_interior_node_on_sphere(self):
        well = well_from_A(-0.504, 0.557)
        kappa = math.pi / well.d
        omega = 0.5 * kappa * kappa - well.V0
        with pytest.raises(RegularizationError):
            assemble(omega, shallow_problem(0.0))

    def test_channel_kinds(self):
        problem = shallow_problem(0.0, boundary=CAPTURE)
        system = assemble(-0.05, problem)
        kinds = channel_kinds(problem, system.momenta)
        assert kinds[0] == CLOSED
        assert kinds[1] == CAPTURE


class TestStaticPoles:
    @pytest.mark.parametrize("seed", range(10))
    def test_s_wave_matches_transcendental_root(self, seed):
        rng = np.random.default_rng(seed)
        V0 = rng.uniform(1.0, 3.0)
        d = rng.uniform(2.0, 4.5) / math.sqrt(2 * V0)
        energy = s_wave_energy(V0, d)
        problem = MatchingProblem(
            WellModel.from_depth_radius(V0, d), 0.0, EVEN
        )
        solution = pole_solve(energy + 1e-3 * abs(energy), problem)
        assert abs(solution.omega - energy) < 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_p_wave_matches_transcendental_root(self, seed):
        rng = np.random.default_rng(100 + seed)
        V0 = rng.uniform(1.0, 3.0)
        d = rng.uniform(3.6, 6.0) / math.sqrt(2 * V0)
        energy = p_wave_energy(V0, d)
        problem = MatchingProblem(
            WellModel.from_depth_radius(V0, d), 0.0, ODD
        )
        solution = pole_solve(energy + 1e-3 * abs(energy), problem)
        assert abs(solution.omega - energy) < 1e-10

    def test_solution_diagnostics(self):
        energy = deep_energy()
        solution = pole_solve(energy, deep_problem(0.0))
        diagnostics = solution.diagnostics
        assert diagnostics.sigma_ratio < 1e-10
        assert diagnostics.residual < 1e-9
        assert not diagnostics.degenerate
        # gauge: the largest flux-normalized amplitude is one
        assert np.max(np.abs(solution.b)) == pytest.approx(1.0)
        assert abs(solution.coefficient(0, 0)) > 0

    def test_full_and_reduced_singularity_agree(self):
        energy = deep_energy()
        problem = deep_problem(0.0)
        solution = pole_solve(energy, problem)
        at_pole = full_singular_values(
            assemble(solution.omega, problem, solution.momenta)
        )
        away = full_singular_values(assemble(solution.omega - 0.05, problem))
        assert at_pole[-1] / at_pole[0] < 1e-10
        assert away[-1] / away[0] > 1e-8

    def test_truncation_check_undriven(self):
        solution = pole_solve(deep_energy(), deep_problem(0.0))
        report = truncation_check(solution)
        assert report.delta < 1e-10
        assert not report.flagged

    def test_no_convergence_raises(self):
        problem = MatchingProblem(
            DEEP,
            0.0,
            EVEN,
            solver=SolverSettings(max_iter=1, restarts=0),
        )
        with pytest.raises(SolverError):
            pole_solve(-0.3, problem)


class TestDrivenPoles:
    def test_emission_pole_decays(self):
        energy = deep_energy()
        solution = pole_solve(energy, deep_problem(0.02, MEDIUM))
        assert solution.omega.imag < 0
        assert solution.diagnostics.residual < 1e-9
        assert 1 in solution.open_indices()

    def test_width_grows_quadratically(self):
        energy = deep_energy()
        first = pole_solve(energy, deep_problem(0.01, MEDIUM))
        second = pole_solve(
            first.omega, deep_problem(0.02, MEDIUM), first.momenta
        )
        slope = math.log(
            abs(second.omega.imag) / abs(first.omega.imag)
        ) / math.log(2.0)
        assert slope == pytest.approx(2.0, abs=0.1)

    def test_capture_pole_is_conjugate(self):
        energy = deep_energy()
        emission = pole_solve(energy, deep_problem(0.05))
        capture = pole_solve(
            emission.omega.conjugate(),
            deep_problem(0.05, boundary=CAPTURE),
        )
        assert abs(capture.omega - emission.omega.conjugate()) < 1e-8

    def test_zero_locator_pairs(self):
        solution = pole_solve(deep_energy(), deep_problem(0.05))
        zeros = zero_locator(solution)
        assert [z.j for z in zeros] == list(EVEN.fourier_indices)
        for entry in zeros:
            assert entry.zero_k == -entry.pole_k
            assert entry.partner_zero_k == entry.pole_k.conjugate()
            assert entry.partner_pole_k == -entry.pole_k.conjugate()


class TestScattering:
    def test_undriven_phase_shift(self):
        well = well_from_A(-0.504, 0.557)
        record = scattering_solve(0.3, shallow_problem(0.0))
        expected = s_wave_phase_factor(0.3, well.V0, well.d)
        assert record.S00 == pytest.approx(expected, abs=1e-10)
        assert abs(record.S00) == pytest.approx(1.0, abs=1e-12)
        assert record.unitarity_sum == pytest.approx(1.0, abs=1e-12)

    def test_driven_unitarity(self):
        record = scattering_solve(
            0.3,
            shallow_problem(
                0.1,
                TruncationScheme(j_min=-3, j_max=3, l_max=5, n_t=32),
            ),
        )
        assert record.unitarity_sum == pytest.approx(1.0, abs=1e-4)
        assert record.sigma_t == pytest.approx(
            record.sigma_e + record.sigma_r
        )

    def test_odd_input_channel_switches_parity(self):
        record = scattering_solve(0.3, shallow_problem(0.0), (0, 1))
        assert (0, 1) in record.lattice
        assert abs(record.S_elastic) == pytest.approx(1.0, abs=1e-12)
        row = record.to_row()
        assert row["Re_S00"] == pytest.approx(record.S_elastic.real)
        assert row["abs_S21_sq"] == pytest.approx(
            abs(record.S(1, 2)) ** 2
        )

    def test_complex_omega_rejected(self):
        with pytest.raises(DomainError):
            scattering_solve(0.3 - 0.1j, shallow_problem(0.0))

    def test_closed_input_rejected(self):
        with pytest.raises(DomainError):
            scattering_solve(-0.5, shallow_problem(0.0))

    def test_cross_sections(self):
        S = 0.3 + 0.4j
        sigma_e, sigma_r, sigma_t = cross_sections(S, 0.5)
        assert sigma_e == pytest.approx(0.5 * abs(1 - S) ** 2)
        assert sigma_r == pytest.approx(0.5 * (1 - abs(S) ** 2))
        assert sigma_t == pytest.approx(sigma_e + sigma_r)

    def test_s_matrix_undriven(self):
        matrix = s_matrix(0.3, shallow_problem(0.0))
        assert (0, 0) in matrix.channels
        assert matrix.unitarity_error() < 1e-10
        assert matrix.reciprocity_error() < 1e-10

    def test_grid_ordering_and_failures(self):
        cells = scattering_grid(
            [0.0, 0.05], [-0.5, 0.2, 0.3], shallow_problem(0.0)
        )
        assert [(c.F2, c.omega) for c in cells] == [
            (0.0, -0.5),
            (0.0, 0.2),
            (0.0, 0.3),
            (0.05, -0.5),
            (0.05, 0.2),
            (0.05, 0.3),
        ]
        failed = [c for c in cells if c.error]
        assert len(failed) == 2
        assert all("DomainError" in c.error for c in failed)
        assert all(c.record is not None for c in cells if not c.error)

    def test_empty_grid(self):
        assert not scattering_grid([], [0.1], shallow_problem(0.0))


@pytest.mark.slow
class TestLowEnergyScattering:
    def test_threshold_laws(self):
        problem = shallow_problem(
            0.1, TruncationScheme(j_min=-6, j_max=6, l_max=8, n_t=64)
        )
        omegas = [1e-5, 2e-5, 5e-5, 1e-4]
        records = [scattering_solve(omega, problem) for omega in omegas]
        elastic = [r.sigma_e for r in records]
        assert max(elastic) / min(elastic) < 1.05
        slope = np.polyfit(
            np.log(omegas), np.log([r.sigma_r for r in records]), 1
        )[0]
        assert slope == pytest.approx(-0.5, abs=0.02)


@pytest.mark.slow
class TestUnitarity:
    def test_random_real_energies(self):
        rng = np.random.default_rng(9)
        truncation = TruncationScheme(j_min=-6, j_max=6, l_max=8, n_t=64)
        for _ in range(20):
            F2 = rng.uniform(0.0, 0.3)
            omega = rng.uniform(0.05, 1.5)
            record = scattering_solve(omega, shallow_problem(F2, truncation))
            assert record.unitarity_sum == pytest.approx(1.0, abs=1e-4)

    def test_improves_with_angular_cutoff(self):
        errors = []
        for l_max in range(1, 6):
            truncation = TruncationScheme(
                j_min=-6, j_max=6, l_max=l_max, n_t=64
            )
            record = scattering_solve(0.4, shallow_problem(0.15, truncation))
            errors.append(abs(record.unitarity_sum - 1.0))
        for coarse, fine in zip(errors, errors[1:]):
            assert fine <= coarse or fine < 1e-10
        assert errors[-1] < 1e-4
