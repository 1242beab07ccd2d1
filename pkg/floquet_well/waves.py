"""
Driven radial Floquet waves, their radial derivatives and their
time-Fourier coefficients on the matching sphere r = d.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .channels import (
    EXTERIOR,
    INTERIOR,
    Channel,
    DriveWaveform,
    MomentumState,
    WellModel,
    flux_normalization,
)
from .errors import AliasingError, ConfigError, DomainError
from .specfun import (
    CouplingTables,
    coupling_tables,
    spherical_bessel_j,
    spherical_bessel_j_derivative,
    spherical_hankel,
    spherical_norm_N,
)

logger = logging.getLogger(__name__)

KERNELS = ("h1", "h2", "J")
ALIASING_TOLERANCE = 1e-8
MAX_SAMPLES = 1024


@dataclass(frozen=True)
class TruncationScheme:
    """Finite Fourier x angular basis kept in the matching system."""

    j_min: int = -6
    j_max: int = 6
    l_max: int = 8
    n_t: int = 64
    parity: Optional[int] = 1

    def __post_init__(self):
        if self.j_min > self.j_max:
            raise ConfigError("j_min must not exceed j_max", key="j_min")
        if self.l_max < 0:
            raise ConfigError("l_max must be nonnegative", key="l_max")
        if self.n_t < 4 or self.n_t & (self.n_t - 1):
            raise ConfigError("n_t must be a power of two >= 4", key="n_t")
        if self.parity not in (1, -1, None):
            raise ConfigError("parity must be +1, -1 or null", key="parity")

    @property
    def fourier_indices(self) -> Tuple[int, ...]:
        return tuple(range(self.j_min, self.j_max + 1))

    @property
    def harmonic_span(self) -> int:
        """Largest |n - j| coupling two retained Fourier indices."""
        return self.j_max - self.j_min

    @property
    def lattice(self) -> Tuple[Tuple[int, int], ...]:
        """(Fourier index, angular index) pairs in the parity sector."""
        return tuple(
            (j, l)
            for j in self.fourier_indices
            for l in range(self.l_max + 1)
            if self.parity is None or (-1) ** (j + l) == self.parity
        )

    @property
    def samples(self) -> int:
        """n_t raised until it exceeds twice the retained harmonics."""
        n_t = self.n_t
        while n_t <= 2 * (2 * self.harmonic_span + 1):
            n_t *= 2
        return n_t

    def enlarged(self, step: int = 1) -> "TruncationScheme":
        return replace(
            self,
            j_min=self.j_min - step,
            j_max=self.j_max + step,
            l_max=self.l_max + step,
        )

    def with_parity(self, parity: Optional[int]) -> "TruncationScheme":
        return replace(self, parity=parity)


@dataclass(frozen=True)
class RadialWaveSpec:
    """One radial function R^{(a)}_{2j,l1,l}."""

    channel: Channel
    l: int
    kernel: str
    drive: DriveWaveform
    truncation: TruncationScheme = field(default_factory=TruncationScheme)


def _kernel_values(kernel: str, orders: np.ndarray, z: complex) -> np.ndarray:
    if kernel == "h1":
        return spherical_hankel(1, orders, z)
    if kernel == "h2":
        return spherical_hankel(2, orders, z)
    if kernel == "J":
        return spherical_bessel_j(orders, z)
    raise ConfigError(f"unknown kernel {kernel!r}", key="kernel")


def radial_components(
    k: complex,
    kernel: str,
    drive: DriveWaveform,
    tables: CouplingTables,
    r: float,
    times,
    derivative: bool = False,
) -> np.ndarray:
    """
    Evaluate R_{l1,l}(r, t) (or its radial derivative) for every l1, l up
    to tables.max_l at the given times.

    Returns:
        Complex array of shape (len(times), max_l + 1, max_l + 1) indexed
        [t, l1, l]
    """
    if r <= 0 and kernel != "J":
        raise DomainError("Hankel kernels are singular at r = 0")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ls = np.arange(tables.max_l + 1)
    A = spherical_bessel_j(ls[None, :], drive.F(times)[:, None] * k)
    f_dot = drive.F_dot(times)
    B = spherical_bessel_j(ls[None, :], f_dot[:, None] * r + 0j)
    H = _kernel_values(kernel, ls, k * r)
    c5 = tables.c5_table
    if not derivative:
        return np.einsum(
            "abcde,tb,td,c->tae", c5, A, B, H, optimize="greedy"
        )

    B_next = spherical_bessel_j(ls[None, :] + 1, f_dot[:, None] * r + 0j)
    H_next = _kernel_values(kernel, ls + 1, k * r)
    dH = ls / r * H - k * H_next
    dB = ls[None, :] / r * B - f_dot[:, None] * B_next
    return np.einsum(
        "abcde,tb,td,c->tae", c5, A, dB, H, optimize="greedy"
    ) + np.einsum("abcde,tb,td,c->tae", c5, A, B, dH, optimize="greedy")


def radial_wave(wave: RadialWaveSpec, r: float, t: float) -> complex:
    """
    R^{(a)}_{2j,l1,l}(r,t) = sum c_{l1,l2,l3,l4,l} j_l2(F k) j_l4(F_dot r)
    h^{(a)}_l3(k r); the J kernel replaces h^{(a)} by j.
    """
    tables = coupling_tables(wave.truncation.l_max, 0)
    values = radial_components(
        wave.channel.k, wave.kernel, wave.drive, tables, r, [t]
    )
    return complex(values[0, wave.channel.l1, wave.l])


def radial_wave_derivative(wave: RadialWaveSpec, r: float, t: float):
    """Radial derivative of radial_wave, same kernel rules."""
    tables = coupling_tables(wave.truncation.l_max, 0)
    values = radial_components(
        wave.channel.k,
        wave.kernel,
        wave.drive,
        tables,
        r,
        [t],
        derivative=True,
    )
    return complex(values[0, wave.channel.l1, wave.l])


def harmonic_orders(n_t: int) -> np.ndarray:
    """Signed harmonic p for each FFT slot."""
    slots = np.arange(n_t)
    return np.where(slots < n_t // 2, slots, slots - n_t)


@dataclass(frozen=True)
class FourierBlocks:
    """
    Fourier coefficients d_{2p,l,2j,l1} (values) and g_{2p,l,2j,l1}
    (radial derivatives) on the matching sphere.

    Arrays are indexed [channel, p mod n_t, l1, l].
    """

    indices: Tuple[int, ...]
    n_t: int
    d_coeffs: np.ndarray
    g_coeffs: np.ndarray
    side: str = EXTERIOR
    kernel: str = "h1"

    def _position(self, index: int) -> int:
        return self.indices.index(index)

    def matrix(
        self,
        rows: Sequence[Tuple[int, int]],
        cols: Sequence[Tuple[int, int]],
        which: str = "d",
    ) -> np.ndarray:
        """Entry [(n,l),(j,l1)] = coefficient with p = n - j."""
        coeffs = self.d_coeffs if which == "d" else self.g_coeffs
        row_n = np.array([n for n, _ in rows])[:, None]
        row_l = np.array([l for _, l in rows])[:, None]
        col_j = np.array([j for j, _ in cols])[None, :]
        col_l1 = np.array([l1 for _, l1 in cols])[None, :]
        col_pos = np.array([self._position(j) for j, _ in cols])[None, :]
        p_slot = (row_n - col_j) % self.n_t
        return coeffs[col_pos, p_slot, col_l1, row_l]

    def reconstruct(
        self, index: int, l1: int, l: int, t, which: str = "d"
    ) -> np.ndarray:
        """Resum the Fourier series sum_p coeff_p e^{-2ipt}."""
        coeffs = self.d_coeffs if which == "d" else self.g_coeffs
        series = coeffs[self._position(index), :, l1, l]
        p = harmonic_orders(self.n_t)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.exp(-2j * np.outer(t, p)) @ series


def _aliasing_level(coeffs: np.ndarray, span: int) -> float:
    n_t = coeffs.shape[1]
    p = np.abs(harmonic_orders(n_t))
    outside = p > min(2 * span, n_t // 2 - 1)
    if not np.any(outside):
        outside = p == n_t // 2
    peak = np.max(np.abs(coeffs))
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(coeffs[:, outside])) / peak)


def channel_normalizations(
    k: complex,
    l_max: int,
    side: str,
    flux_normalized: bool,
    m: int = 0,
) -> np.ndarray:
    """Per-l1 prefactor multiplying R in one channel."""
    ls = range(l_max + 1)
    if side == INTERIOR:
        # chosen so the undriven limit is exactly j_l1(kappa r)
        return np.array(
            [spherical_norm_N(l1, m) / (2.0 * 1j**l1) for l1 in ls]
        )
    if flux_normalized:
        return np.array([flux_normalization(k, l1, m) for l1 in ls])
    return np.array([spherical_norm_N(l1, m) for l1 in ls], dtype=complex)


def _sample_blocks(
    momenta: Dict[int, complex],
    kernel: str,
    side: str,
    well: WellModel,
    drive: DriveWaveform,
    truncation: TruncationScheme,
    n_t: int,
    flux_normalized: bool,
) -> Tuple[np.ndarray, np.ndarray]:
    tables = coupling_tables(truncation.l_max, well.m)
    times = np.pi * np.arange(n_t) / n_t
    phased = not drive.include_VF and (
        side == EXTERIOR or well.interior_driven
    )
    phase = drive.phase_factor(times) if phased else np.ones(n_t)
    size = truncation.l_max + 1
    shape = (len(truncation.fourier_indices), n_t, size, size)
    values = np.empty(shape, dtype=complex)
    slopes = np.empty(shape, dtype=complex)
    for pos, j in enumerate(truncation.fourier_indices):
        k = momenta[j]
        norms = channel_normalizations(
            k, truncation.l_max, side, flux_normalized, well.m
        )
        weight = phase[:, None, None] * norms[None, :, None]
        values[pos] = weight * radial_components(
            k, kernel, drive, tables, well.d, times
        )
        slopes[pos] = weight * radial_components(
            k, kernel, drive, tables, well.d, times, derivative=True
        )
    return np.fft.ifft(values, axis=1), np.fft.ifft(slopes, axis=1)


def _blocks(
    momenta: Dict[int, complex],
    kernel: str,
    side: str,
    well: WellModel,
    drive: DriveWaveform,
    truncation: TruncationScheme,
    flux_normalized: bool,
) -> FourierBlocks:
    n_t = truncation.samples
    while True:
        d_coeffs, g_coeffs = _sample_blocks(
            momenta, kernel, side, well, drive, truncation, n_t,
            flux_normalized,
        )
        level = max(
            _aliasing_level(d_coeffs, truncation.harmonic_span),
            _aliasing_level(g_coeffs, truncation.harmonic_span),
        )
        if level <= ALIASING_TOLERANCE:
            break
        if n_t >= MAX_SAMPLES:
            raise AliasingError(
                f"harmonics beyond the retained band at {level:.1e} of "
                f"the peak with n_t={n_t}; raise n_t or lower F2"
            )
        n_t *= 2
        logger.info("Aliasing level %.1e, doubling n_t to %d", level, n_t)
    return FourierBlocks(
        truncation.fourier_indices, n_t, d_coeffs, g_coeffs, side, kernel
    )


def fourier_blocks(
    well: WellModel,
    drive: DriveWaveform,
    omega: complex,
    truncation: TruncationScheme,
    momenta: MomentumState,
    kernel: str = "h1",
    flux_normalized: bool = False,
) -> FourierBlocks:
    """
    Sample phi^pi_out,2j,l1,l(d, t) and its radial derivative on n_t
    points of one period and Fourier-analyze them.

    Args:
        omega: Quasi-energy the momenta were tracked to
        kernel: "h1" (outgoing) or "h2" (incoming)
        flux_normalized: Use sqrt(|Re k|) N_l1 instead of N_l1

    Returns:
        FourierBlocks for the exterior side
    """
    if kernel not in ("h1", "h2"):
        raise ConfigError(f"exterior kernel must be h1 or h2, not {kernel}")
    if abs(momenta.omega - omega) > 1e-12 * max(1.0, abs(omega)):
        raise DomainError("momenta were tracked to a different omega")
    return _blocks(
        momenta.exterior, kernel, EXTERIOR, well, drive, truncation,
        flux_normalized,
    )


@dataclass(frozen=True)
class InteriorBasis:
    """Regular interior solutions j_l(kappa_2n r) on the sphere r = d."""

    indices: Tuple[int, ...]
    kappa: Dict[int, complex]
    c_values: np.ndarray
    f_values: np.ndarray

    def diagonal_blocks(
        self, rows: Sequence[Tuple[int, int]]
    ) -> Tuple[np.ndarray, np.ndarray]:
        pos = [self.indices.index(n) for n, _ in rows]
        ls = [l for _, l in rows]
        return (
            np.diag(self.c_values[pos, ls]),
            np.diag(self.f_values[pos, ls]),
        )


def interior_basis(
    well: WellModel,
    omega: complex,
    truncation: TruncationScheme,
    momenta: MomentumState,
) -> InteriorBasis:
    """c_{2n,l} = j_l(kappa d) and f_{2n,l} = d/dr j_l(kappa r) at r = d."""
    if well.interior_driven:
        raise DomainError("interior_basis needs an undriven interior")
    ls = np.arange(truncation.l_max + 1)
    c_rows, f_rows = [], []
    for n in truncation.fourier_indices:
        kappa = momenta.interior[n]
        c_rows.append(spherical_bessel_j(ls, kappa * well.d))
        f_rows.append(
            kappa * spherical_bessel_j_derivative(ls, kappa * well.d)
        )
    return InteriorBasis(
        truncation.fourier_indices,
        dict(momenta.interior),
        np.array(c_rows),
        np.array(f_rows),
    )


def interior_driven_blocks(
    well: WellModel,
    drive: DriveWaveform,
    omega: complex,
    truncation: TruncationScheme,
    momenta: MomentumState,
) -> FourierBlocks:
    """Fourier blocks of the driven interior (J kernel, kappa_2n)."""
    if not well.interior_driven:
        raise DomainError("interior_driven_blocks needs variant 2 or 4")
    if abs(momenta.omega - omega) > 1e-12 * max(1.0, abs(omega)):
        raise DomainError("momenta were tracked to a different omega")
    return _blocks(
        momenta.interior, "J", INTERIOR, well, drive, truncation, False
    )
