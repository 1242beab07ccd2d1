"""
Well parametrization, drive waveform and channel momenta with continuous
Riemann-sheet tracking.

Units: lengths in sqrt(2 hbar / m Omega), energies in hbar Omega / 2, so the
drive period is pi and the photon energy is 2.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional

import numpy as np

from .errors import ConfigError, StepSizeError, ThresholdError
from .specfun import spherical_norm_N

logger = logging.getLogger(__name__)

INTERIOR = "interior"
EXTERIOR = "exterior"

CLOSED = "closed"
EMISSION = "emission"
CAPTURE = "capture"
BOUNDARY_KINDS = (CLOSED, EMISSION, CAPTURE)

EPS_FLUX = 1e-9
DECAY_TOLERANCE = 1e-9
EPS_THRESHOLD = 1e-8
TRACKING_RATIO = 0.5


@dataclass(frozen=True)
class DriveWaveform:
    """Axial drive F(t) = F2 cos 2t in the accelerated frame."""

    F2: float
    include_VF: bool = True
    period: float = math.pi

    def F(self, t):
        """Displacement F2 cos 2t at time(s) t."""
        return self.F2 * np.cos(2.0 * np.asarray(t))

    def F_dot(self, t):
        """First time derivative of F."""
        return -2.0 * self.F2 * np.sin(2.0 * np.asarray(t))

    def F_ddot(self, t):
        """Second time derivative of F."""
        return -4.0 * self.F2 * np.cos(2.0 * np.asarray(t))

    def V_F(self, t):
        """Frame potential -1/2 F_dot^2."""
        return -0.5 * self.F_dot(t) ** 2

    @property
    def secular_rate(self) -> float:
        """Linear growth rate of g_F(t) = int 1/2 F_dot^2 dt."""
        return self.F2**2

    def g_F_oscillating(self, t):
        """Periodic part of g_F, with period pi/2."""
        return -0.25 * self.F2**2 * np.sin(4.0 * np.asarray(t))

    def g_F(self, t):
        """
        Accumulated frame phase int_0^t 1/2 F_dot^2 dt'.

        Args:
            t: Time or array of times

        Returns:
            Secular growth plus the oscillating remainder
        """
        return self.secular_rate * np.asarray(t) + self.g_F_oscillating(t)

    def phase_factor(self, t):
        """
        Periodic factor multiplying waves when V_F is left out of the
        Hamiltonian; identically 1 otherwise.
        """
        t = np.asarray(t, dtype=float)
        if self.include_VF:
            return np.ones_like(t, dtype=complex)
        return np.exp(-1j * self.g_F_oscillating(t))

    @property
    def energy_shift(self) -> float:
        """Quasi-energy absorbed by the secular part of g_F."""
        return 0.0 if self.include_VF else self.secular_rate


@dataclass(frozen=True)
class WellModel:
    """Spherical square well of depth V0 and radius d."""

    V0: float
    d: float
    A: float
    variant: int = 1
    m: int = 0

    def __post_init__(self):
        if self.V0 <= 0:
            raise ConfigError("well depth must be positive", key="V0")
        if self.d <= 0:
            raise ConfigError("well radius must be positive", key="d")
        if self.variant not in (1, 2, 3, 4):
            raise ConfigError(
                f"variant must be one of 1, 2, 3, 4, got {self.variant}",
                key="variant",
            )

    @classmethod
    def from_depth_radius(
        cls, V0: float, d: float, variant: int = 1, m: int = 0
    ) -> "WellModel":
        """
        Build a well from its depth and radius.

        Args:
            V0: Depth, positive
            d: Radius
            variant: Drive variant 1-4
            m: Magnetic quantum number

        Raises:
            ConfigError: nonpositive V0 or d
        """
        if V0 <= 0:
            raise ConfigError("well depth must be positive", key="V0")
        return cls(V0, d, -math.sqrt(2.0 * V0 * d * d), variant, m)

    @property
    def A_over_pi(self) -> float:
        return self.A / math.pi

    @property
    def includes_VF(self) -> bool:
        return self.variant in (1, 2)

    @property
    def interior_driven(self) -> bool:
        return self.variant in (2, 4)

    def drive(self, F2: float) -> DriveWaveform:
        """Drive of amplitude F2 with this variant's V_F choice."""
        return DriveWaveform(F2, include_VF=self.includes_VF)

    def with_variant(self, variant: int) -> "WellModel":
        """Same well under another drive variant."""
        return replace(self, variant=variant)


def well_from_A(
    A_over_pi: float, V0: float, variant: int = 1, m: int = 0
) -> WellModel:
    """
    Build a well from A/pi and V0 using A = -sqrt(2 V0 d^2).

    Raises:
        ConfigError: nonpositive V0 or nonnegative A_over_pi
    """
    if V0 <= 0:
        raise ConfigError("well depth must be positive", key="V0")
    if A_over_pi >= 0:
        raise ConfigError("A_over_pi must be negative", key="A_over_pi")
    A = A_over_pi * math.pi
    return WellModel(V0, abs(A) / math.sqrt(2.0 * V0), A, variant, m)


@dataclass
class Channel:
    """One Fourier x angular momentum channel of the expansion."""

    side: str
    fourier_index: int
    l1: int
    kind: str = "1"
    k: complex = 0j
    S1: complex = 1.0 + 0j
    S2: complex = 0j
    flux_norm: float = 1.0


def channel_energy(
    omega: complex,
    index: int,
    side: str = EXTERIOR,
    well: Optional[WellModel] = None,
    drive: Optional[DriveWaveform] = None,
) -> complex:
    """Kinetic energy 1/2 k^2 carried by a channel."""
    energy = complex(omega) + 2 * index
    if side == INTERIOR and well is not None:
        energy += well.V0
    if drive is not None and (
        side == EXTERIOR or (well is not None and well.interior_driven)
    ):
        energy -= drive.energy_shift
    return energy


def channel_momentum_init(
    omega: complex,
    j: int,
    side: str = EXTERIOR,
    boundary_kind: str = CLOSED,
    well: Optional[WellModel] = None,
    drive: Optional[DriveWaveform] = None,
    eps_threshold: float = EPS_THRESHOLD,
) -> complex:
    """
    Pick the square root of 2(omega + 2j) dictated by the boundary kind.

    Closed channels take Im k > 0, emission channels Re k > 0 and capture
    channels Re k < 0. Interior momenta take the principal root since the
    regular solution has definite parity in k.

    Raises:
        ThresholdError: if the channel energy is exactly zero
    """
    if boundary_kind not in BOUNDARY_KINDS:
        raise ConfigError(f"unknown boundary kind {boundary_kind!r}")
    energy = channel_energy(omega, j, side, well, drive)
    if energy == 0:
        raise ThresholdError(f"channel {side} {j} sits on its threshold")
    if abs(energy) < eps_threshold:
        logger.warning(
            "Channel %s %d is %.2e from threshold", side, j, abs(energy)
        )
    k = cmath.sqrt(2.0 * energy)
    if side == INTERIOR:
        return k
    if boundary_kind == CLOSED:
        return k if k.imag >= 0 else -k
    if boundary_kind == EMISSION:
        return k if k.real >= 0 else -k
    return -k if k.real > 0 else k


def channel_momentum_track(
    previous_k: complex,
    new_omega: complex,
    j: int,
    side: str = EXTERIOR,
    well: Optional[WellModel] = None,
    drive: Optional[DriveWaveform] = None,
    ratio: float = TRACKING_RATIO,
) -> complex:
    """
    Return the root of 2(omega + 2j) nearest to previous_k.

    Raises:
        StepSizeError: if both roots are comparably close to previous_k
    """
    energy = channel_energy(new_omega, j, side, well, drive)
    root = cmath.sqrt(2.0 * energy)
    near, far = root, -root
    if abs(far - previous_k) < abs(near - previous_k):
        near, far = far, near
    d_near = abs(near - previous_k)
    d_far = abs(far - previous_k)
    if d_near > 0 and d_near > ratio * d_far:
        raise StepSizeError(
            f"ambiguous branch for {side} channel {j}: "
            f"|dk| = {d_near:.3e} vs {d_far:.3e}"
        )
    return near


def flux_normalization(
    k: complex, l1: int, m: int = 0, eps_flux: float = EPS_FLUX
) -> float:
    """N_{2j,l1}^m = sqrt(|Re k|) N_l1^m, or N_l1^m for evanescent waves."""
    norm = spherical_norm_N(l1, m)
    if abs(k.real) > eps_flux:
        return math.sqrt(abs(k.real)) * norm
    return norm


@dataclass(frozen=True)
class MomentumState:
    """Tracked channel momenta at one quasi-energy."""

    omega: complex
    exterior: Dict[int, complex] = field(default_factory=dict)
    interior: Dict[int, complex] = field(default_factory=dict)

    def conjugate_pair(self) -> "MomentumState":
        """Momenta of the time-reversed partner: k -> -k*."""
        return MomentumState(
            self.omega.conjugate(),
            {j: -k.conjugate() for j, k in self.exterior.items()},
            {n: k.conjugate() for n, k in self.interior.items()},
        )


def initial_momenta(
    omega: complex,
    well: WellModel,
    drive: DriveWaveform,
    indices: Iterable[int],
    boundary: str = EMISSION,
    eps_threshold: float = EPS_THRESHOLD,
) -> MomentumState:
    """Fresh momenta: closed below threshold, `boundary` above it."""
    exterior, interior = {}, {}
    for j in indices:
        energy = channel_energy(omega, j, EXTERIOR, well, drive)
        kind = CLOSED if energy.real < 0 else boundary
        exterior[j] = channel_momentum_init(
            omega, j, EXTERIOR, kind, well, drive, eps_threshold
        )
        interior[j] = channel_momentum_init(
            omega, j, INTERIOR, CLOSED, well, drive, eps_threshold
        )
    return MomentumState(complex(omega), exterior, interior)


def track_momenta(
    state: MomentumState,
    new_omega: complex,
    well: WellModel,
    drive: DriveWaveform,
    indices: Optional[Iterable[int]] = None,
    boundary: str = EMISSION,
) -> MomentumState:
    """
    Follow every exterior momentum to new_omega by nearest root; channels
    missing from `state` are initialized fresh.
    """
    if indices is None:
        indices = sorted(state.exterior)
    exterior, interior = {}, {}
    for j in indices:
        if j in state.exterior:
            exterior[j] = channel_momentum_track(
                state.exterior[j], new_omega, j, EXTERIOR, well, drive
            )
        else:
            energy = channel_energy(new_omega, j, EXTERIOR, well, drive)
            kind = CLOSED if energy.real < 0 else boundary
            exterior[j] = channel_momentum_init(
                new_omega, j, EXTERIOR, kind, well, drive
            )
        interior[j] = channel_momentum_init(
            new_omega, j, INTERIOR, CLOSED, well, drive
        )
    return MomentumState(complex(new_omega), exterior, interior)


def is_open(
    k: complex,
    eps_flux: float = EPS_FLUX,
    decay_tolerance: float = DECAY_TOLERANCE,
) -> bool:
    """
    Current-carrying channel: the wave neither vanishes asymptotically nor
    lacks a real momentum.

    A channel with Re k != 0 and Im k > 0 still decays in r, so it counts
    as closed whatever the size of its real part. Re k > 0 radiates
    outward, Re k < 0 inward.
    """
    return abs(k.real) > eps_flux and k.imag <= decay_tolerance * abs(k)


def is_decaying(k: complex, decay_tolerance: float = DECAY_TOLERANCE) -> bool:
    """Square-integrable exterior wave: Im k > 0 beyond the tolerance."""
    return k.imag > decay_tolerance * abs(k)
