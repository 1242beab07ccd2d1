# pylint: disable=missing-module-docstring
# pylint: disable=missing-class-docstring,missing-function-docstring
import cmath
import math

import numpy as np
import pytest

from floquet_well.channels import (
    CAPTURE,
    CLOSED,
    EMISSION,
    EXTERIOR,
    INTERIOR,
    DriveWaveform,
    WellModel,
    channel_energy,
    channel_momentum_init,
    channel_momentum_track,
    flux_normalization,
    initial_momenta,
    is_decaying,
    is_open,
    track_momenta,
    well_from_A,
)
from floquet_well.errors import ConfigError, StepSizeError, ThresholdError
from floquet_well.specfun import spherical_norm_N


class TestWellModel:
    def test_radius_from_strength(self):
        assert well_from_A(-0.504, 0.557).d == pytest.approx(1.5002, abs=1e-4)
        assert well_from_A(-0.504, 1.977).d == pytest.approx(0.7963, abs=1e-4)

    def test_strength_round_trip(self):
        well = well_from_A(-2.565, 6.75)
        assert well.A_over_pi == pytest.approx(-2.565)
        again = WellModel.from_depth_radius(well.V0, well.d)
        assert again.A == pytest.approx(well.A)

    def test_invalid_parameters(self):
        with pytest.raises(ConfigError):
            well_from_A(-0.5, 0.0)
        with pytest.raises(ConfigError):
            well_from_A(0.5, 1.0)
        with pytest.raises(ConfigError):
            WellModel(1.0, 1.0, -1.0, variant=5)

    @pytest.mark.parametrize(
        "variant, includes_VF, driven",
        [
            (1, True, False),
            (2, True, True),
            (3, False, False),
            (4, False, True),
        ],
    )
    def test_variant_flags(self, variant, includes_VF, driven):
        well = well_from_A(-0.504, 0.557, variant)
        assert well.includes_VF is includes_VF
        assert well.interior_driven is driven
        assert well.drive(0.1).include_VF is includes_VF


class TestDriveWaveform:
    def test_derivatives(self):
        drive = DriveWaveform(0.3)
        t = np.linspace(0.0, math.pi, 7)
        h = 1e-6
        numeric = (drive.F(t + h) - drive.F(t - h)) / (2 * h)
        assert np.allclose(drive.F_dot(t), numeric, atol=1e-8)
        numeric = (drive.F_dot(t + h) - drive.F_dot(t - h)) / (2 * h)
        assert np.allclose(drive.F_ddot(t), numeric, atol=1e-8)

    def test_frame_potential_integral(self):
        drive = DriveWaveform(0.3)
        t = np.linspace(0.1, 2.0, 5)
        h = 1e-6
        numeric = (drive.g_F(t + h) - drive.g_F(t - h)) / (2 * h)
        assert np.allclose(numeric, -drive.V_F(t), atol=1e-8)

    def test_phase_factor(self):
        t = np.linspace(0.0, math.pi, 5)
        assert np.allclose(DriveWaveform(0.3).phase_factor(t), 1.0)
        omitted = DriveWaveform(0.3, include_VF=False)
        assert np.allclose(np.abs(omitted.phase_factor(t)), 1.0)
        assert omitted.energy_shift == pytest.approx(0.09)
        assert DriveWaveform(0.3).energy_shift == 0.0


class TestChannelMomenta:
    def test_closed_branch(self):
        k = channel_momentum_init(-0.1, 0, EXTERIOR, CLOSED)
        assert k == pytest.approx(1j * math.sqrt(0.2))

    def test_emission_branch(self):
        k = channel_momentum_init(3.35e-3, 1, EXTERIOR, EMISSION)
        assert k.real == pytest.approx(math.sqrt(2 * (2 + 3.35e-3)))
        assert k.real > 0

    def test_capture_branch(self):
        k = channel_momentum_init(0.5 - 0.01j, 0, EXTERIOR, CAPTURE)
        assert k.real < 0
        assert k * k == pytest.approx(2 * (0.5 - 0.01j))

    def test_threshold_rejected(self):
        with pytest.raises(ThresholdError):
            channel_momentum_init(-2.0, 1, EXTERIOR, EMISSION)

    def test_unknown_boundary_kind(self):
        with pytest.raises(ConfigError):
            channel_momentum_init(0.5, 0, EXTERIOR, "reflecting")

    def test_interior_energy_includes_depth(self):
        well = well_from_A(-0.504, 0.557)
        energy = channel_energy(-0.1, 0, INTERIOR, well)
        assert energy == pytest.approx(0.457)
        kappa = channel_momentum_init(-0.1, 0, INTERIOR, well=well)
        assert kappa == pytest.approx(math.sqrt(0.914))

    def test_energy_shift_without_frame_potential(self):
        well = well_from_A(-0.504, 0.557, variant=3)
        drive = well.drive(0.2)
        exterior = channel_energy(0.1, 0, EXTERIOR, well, drive)
        interior = channel_energy(0.1, 0, INTERIOR, well, drive)
        assert exterior == pytest.approx(0.1 - 0.04)
        # undriven interior keeps its energy for variant 3
        assert interior == pytest.approx(0.1 + 0.557)

    def test_tracking_follows_nearest_root(self):
        k0 = channel_momentum_init(0.5 + 0.0j, 0, EXTERIOR, EMISSION)
        k1 = channel_momentum_track(k0, 0.5 - 0.01j, 0)
        assert k1.real > 0
        assert k1 == pytest.approx(cmath.sqrt(2 * (0.5 - 0.01j)))

    def test_tracking_across_the_cut(self):
        # the principal root jumps sign when omega crosses the negative
        # real axis; tracking stays continuous
        k0 = channel_momentum_init(-0.5 + 1e-3j, 0, EXTERIOR, CLOSED)
        k1 = channel_momentum_track(k0, -0.5 - 1e-3j, 0)
        assert abs(k1 - k0) < 1e-2

    def test_tracking_ambiguous_step(self):
        with pytest.raises(StepSizeError):
            channel_momentum_track(0.01 + 0j, 1e-8 + 0j, 0)

    def test_flux_normalization(self):
        assert flux_normalization(4.0 + 0j, 1) == pytest.approx(
            2.0 * spherical_norm_N(1, 0)
        )
        assert flux_normalization(0.3j, 1) == pytest.approx(
            spherical_norm_N(1, 0)
        )

    @pytest.mark.parametrize(
        "k, expected",
        [
            (2.0 - 0.01j, True),
            (-2.0 - 0.01j, True),
            (0.8 + 1e-12j, True),
            (0.4j, False),
            (0.01 + 0.5j, False),
            # past the bisector but still decaying in r
            (-0.0491 + 0.0041j, False),
        ],
    )
    def test_is_open(self, k, expected):
        assert is_open(k) is expected
        if expected:
            assert not is_decaying(k)

    def test_decaying(self):
        assert is_decaying(0.4j)
        assert is_decaying(-0.0491 + 0.0041j)
        assert not is_decaying(2.0 - 0.01j)

    @staticmethod
    def _track_loop(k, center, radius, steps=64):
        for angle in np.linspace(0.0, 2 * math.pi, steps + 1)[1:]:
            omega = center + radius * cmath.exp(1j * angle)
            k = channel_momentum_track(k, omega, 0)
        return k

    def test_loop_away_from_threshold_returns_home(self):
        k0 = channel_momentum_init(0.7, 0, EXTERIOR, EMISSION)
        k1 = self._track_loop(k0, 0.5, 0.2)
        assert k1 == pytest.approx(k0, abs=1e-12)

    def test_loop_around_threshold_changes_sheet(self):
        k0 = channel_momentum_init(0.3, 0, EXTERIOR, EMISSION)
        k1 = self._track_loop(k0, 0.0, 0.3)
        assert k1 == pytest.approx(-k0, abs=1e-12)


class TestMomentumState:
    def test_initial_kinds(self):
        well = well_from_A(-0.504, 0.557)
        state = initial_momenta(-0.1, well, well.drive(0.0), range(-1, 2))
        assert state.exterior[-1].imag > 0
        assert state.exterior[0].imag > 0
        assert state.exterior[1].real > 0
        assert set(state.interior) == {-1, 0, 1}

    def test_track_adds_missing_channels(self):
        well = well_from_A(-0.504, 0.557)
        drive = well.drive(0.0)
        state = initial_momenta(-0.1, well, drive, [0])
        moved = track_momenta(state, -0.1 - 1e-4j, well, drive, [0, 1])
        assert set(moved.exterior) == {0, 1}
        assert moved.omega == -0.1 - 1e-4j

    def test_conjugate_pair(self):
        well = well_from_A(-0.504, 0.557)
        state = initial_momenta(0.01 - 0.002j, well, well.drive(0.1), [0, 1])
        pair = state.conjugate_pair()
        assert pair.omega == pytest.approx(0.01 + 0.002j)
        for j, k in state.exterior.items():
            assert pair.exterior[j] == pytest.approx(-k.conjugate())
