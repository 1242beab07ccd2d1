# pylint: disable=missing-module-docstring
# pylint: disable=missing-class-docstring,missing-function-docstring
import math

import numpy as np
import pytest

from floquet_well.channels import (
    Channel,
    EXTERIOR,
    initial_momenta,
    well_from_A,
)
from floquet_well.errors import AliasingError, ConfigError, DomainError
from floquet_well.specfun import (
    coupling_tables,
    spherical_hankel,
    spherical_norm_N,
)
from floquet_well.waves import (
    RadialWaveSpec,
    TruncationScheme,
    fourier_blocks,
    harmonic_orders,
    interior_basis,
    interior_driven_blocks,
    radial_components,
    radial_wave,
    radial_wave_derivative,
)

SMALL = TruncationScheme(j_min=-2, j_max=2, l_max=3, n_t=16, parity=None)


def wave_for(k, l1, l, F2, kernel="h1", truncation=SMALL):
    well = well_from_A(-0.504, 0.557)
    channel = Channel(EXTERIOR, 0, l1, k=k)
    return RadialWaveSpec(channel, l, kernel, well.drive(F2), truncation)


class TestTruncationScheme:
    def test_defaults(self):
        scheme = TruncationScheme()
        assert scheme.fourier_indices == tuple(range(-6, 7))
        assert scheme.harmonic_span == 12

    def test_parity_sector(self):
        scheme = TruncationScheme(j_min=-1, j_max=1, l_max=2, parity=1)
        assert scheme.lattice == (
            (-1, 1),
            (0, 0),
            (0, 2),
            (1, 1),
        )
        odd = scheme.with_parity(-1).lattice
        assert all((j + l) % 2 == 1 for j, l in odd)
        assert len(scheme.with_parity(None).lattice) == 9

    def test_samples_raised_above_band(self):
        scheme = TruncationScheme(j_min=-6, j_max=6, n_t=16)
        assert scheme.samples == 64
        assert TruncationScheme(j_min=0, j_max=0, n_t=4).samples == 4

    def test_enlarged(self):
        bigger = SMALL.enlarged(2)
        assert (bigger.j_min, bigger.j_max, bigger.l_max) == (-4, 4, 5)
        assert bigger.n_t == SMALL.n_t

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"j_min": 1, "j_max": 0},
            {"l_max": -1},
            {"n_t": 12},
            {"n_t": 2},
            {"parity": 0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            TruncationScheme(**kwargs)

    def test_harmonic_orders(self):
        assert list(harmonic_orders(8)) == [0, 1, 2, 3, -4, -3, -2, -1]


class TestRadialWave:
    def test_undriven_limit_is_hankel(self):
        k, r = 1.3 + 0.1j, 1.7
        for l1 in range(3):
            for l in range(3):
                value = radial_wave(wave_for(k, l1, l, 0.0), r, 0.4)
                if l == l1:
                    expected = (
                        2 * 1j**l1 * spherical_hankel(1, l1, k * r)
                        / spherical_norm_N(l1, 0)
                    )
                    assert value == pytest.approx(expected, rel=1e-12)
                else:
                    assert abs(value) < 1e-13

    def test_derivative_matches_finite_difference(self):
        rng = np.random.default_rng(3)
        h = 1e-5
        for _ in range(5):
            r = rng.uniform(1.0, 3.0)
            t = rng.uniform(0.0, math.pi)
            wave = wave_for(1.8 + 0.05j, 1, 0, 0.3)
            numeric = (
                radial_wave(wave, r + h, t) - radial_wave(wave, r - h, t)
            ) / (2 * h)
            exact = radial_wave_derivative(wave, r, t)
            assert abs(exact - numeric) <= 1e-7 * max(1.0, abs(exact))

    def test_periodic_in_time(self):
        wave = wave_for(1.4 - 0.02j, 1, 2, 0.2)
        for t in (0.0, 0.37, 2.1):
            assert radial_wave(wave, 1.9, t + math.pi) == pytest.approx(
                radial_wave(wave, 1.9, t), rel=1e-12
            )

    def test_kernels_are_linear(self):
        k, r, t = 1.1 + 0.03j, 2.2, 0.8
        for l1, l in [(0, 0), (1, 2), (2, 1)]:
            h1 = radial_wave(wave_for(k, l1, l, 0.15, "h1"), r, t)
            h2 = radial_wave(wave_for(k, l1, l, 0.15, "h2"), r, t)
            J = radial_wave(wave_for(k, l1, l, 0.15, "J"), r, t)
            assert h2 == pytest.approx(2 * J - h1, rel=1e-10, abs=1e-13)

    def test_angular_refinement(self):
        rng = np.random.default_rng(5)
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.05)
        coarse = coupling_tables(6)
        fine = coupling_tables(12)
        for _ in range(3):
            r = rng.uniform(1.5, 3.0)
            t = rng.uniform(0.0, math.pi)
            a = radial_components(1.2 + 0.0j, "h1", drive, coarse, r, [t])
            b = radial_components(1.2 + 0.0j, "h1", drive, fine, r, [t])
            assert np.allclose(a[0, :3, :3], b[0, :3, :3], atol=1e-9)

    def test_hankel_kernel_rejects_origin(self):
        tables = coupling_tables(2)
        drive = well_from_A(-0.504, 0.557).drive(0.1)
        with pytest.raises(DomainError):
            radial_components(1.0, "h1", drive, tables, 0.0, [0.0])

    def test_unknown_kernel(self):
        tables = coupling_tables(2)
        drive = well_from_A(-0.504, 0.557).drive(0.1)
        with pytest.raises(ConfigError):
            radial_components(1.0, "y", drive, tables, 1.0, [0.0])


class TestFourierBlocks:
    def _momenta(self, well, drive, omega, truncation=SMALL):
        return initial_momenta(
            omega, well, drive, truncation.fourier_indices
        )

    def test_undriven_blocks_are_diagonal(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.0)
        omega = -0.1
        momenta = self._momenta(well, drive, omega)
        blocks = fourier_blocks(well, drive, omega, SMALL, momenta)
        lattice = SMALL.lattice
        D = blocks.matrix(lattice, lattice, "d")
        off = D - np.diag(np.diag(D))
        assert np.max(np.abs(off)) < 1e-12 * np.max(np.abs(D))
        k0 = momenta.exterior[0]
        site = lattice.index((0, 0))
        assert D[site, site] == pytest.approx(
            2.0 * spherical_hankel(1, 0, k0 * well.d)
        )

    def test_reconstruct_matches_direct_evaluation(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.15)
        omega = -0.08 - 0.001j
        momenta = self._momenta(well, drive, omega)
        blocks = fourier_blocks(well, drive, omega, SMALL, momenta)
        tables = coupling_tables(SMALL.l_max)
        times = np.array([0.13, 1.1, 2.9])
        direct = radial_components(
            momenta.exterior[1], "h1", drive, tables, well.d, times
        )
        resummed = blocks.reconstruct(1, 1, 0, times)
        expected = spherical_norm_N(1, 0) * direct[:, 1, 0]
        assert np.allclose(resummed, expected, rtol=1e-8, atol=1e-12)

    def test_incoming_blocks_pair_with_outgoing(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.1)
        # every channel open, so all momenta are real
        omega = 4.5
        momenta = self._momenta(well, drive, omega)
        out = fourier_blocks(well, drive, omega, SMALL, momenta)
        inc = fourier_blocks(well, drive, omega, SMALL, momenta, "h2")
        assert out.n_t == inc.n_t
        # conj R_h1(t) = (-1)^l1 R_h2(-t), so harmonics pair at equal p
        sign = (-1.0) ** np.arange(SMALL.l_max + 1)
        for which in ("d_coeffs", "g_coeffs"):
            outgoing = getattr(out, which)
            incoming = getattr(inc, which)
            paired = sign[None, None, :, None] * outgoing.conj()
            scale = np.max(np.abs(outgoing))
            assert np.max(np.abs(incoming - paired)) < 1e-12 * scale

    def test_aliasing_detected(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.3)
        scheme = TruncationScheme(
            j_min=0, j_max=0, l_max=1, n_t=4, parity=None
        )
        momenta = self._momenta(well, drive, -0.1, scheme)
        with pytest.raises(AliasingError):
            fourier_blocks(well, drive, -0.1, scheme, momenta)

    def test_momenta_must_match_omega(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.1)
        momenta = self._momenta(well, drive, -0.1)
        with pytest.raises(DomainError):
            fourier_blocks(well, drive, -0.2, SMALL, momenta)

    def test_exterior_kernel_only(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.1)
        momenta = self._momenta(well, drive, -0.1)
        with pytest.raises(ConfigError):
            fourier_blocks(well, drive, -0.1, SMALL, momenta, kernel="J")


class TestInterior:
    def test_driven_interior_reduces_to_bessel(self):
        well = well_from_A(-0.504, 0.557, variant=2)
        drive = well.drive(0.0)
        momenta = initial_momenta(-0.1, well, drive, SMALL.fourier_indices)
        driven = interior_driven_blocks(well, drive, -0.1, SMALL, momenta)
        plain = interior_basis(
            well.with_variant(1), -0.1, SMALL, momenta
        )
        lattice = SMALL.lattice
        C_driven = driven.matrix(lattice, lattice, "d")
        C_plain, F_plain = plain.diagonal_blocks(lattice)
        assert np.allclose(C_driven, C_plain, atol=1e-12)
        assert np.allclose(
            driven.matrix(lattice, lattice, "g"), F_plain, atol=1e-12
        )

    def test_basis_rejects_driven_interior(self):
        well = well_from_A(-0.504, 0.557, variant=4)
        drive = well.drive(0.1)
        momenta = initial_momenta(-0.1, well, drive, SMALL.fourier_indices)
        with pytest.raises(DomainError):
            interior_basis(well, -0.1, SMALL, momenta)

    def test_driven_blocks_need_driven_variant(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.1)
        momenta = initial_momenta(-0.1, well, drive, SMALL.fourier_indices)
        with pytest.raises(DomainError):
            interior_driven_blocks(well, drive, -0.1, SMALL, momenta)
