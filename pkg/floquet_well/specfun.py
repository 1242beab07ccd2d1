"""
Complex spherical Bessel/Hankel functions, associated Legendre values and
the static angular coupling tables used by the driven-wave expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln, lpmv, spherical_jn

from .errors import ConfigError, DomainError, RangeError

# Floor of the |z| below which the ascending series is used for j_l.
SERIES_CROSSOVER = 1.0
SERIES_TERMS = 30


def _as_complex(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def _check_finite(values: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise RangeError(f"{name} overflowed for the requested argument")
    return values


def series_crossover(l) -> np.ndarray:
    """
    |z| below which j_l comes from the ascending series: min(l, 2 sqrt l),
    never below SERIES_CROSSOVER. Up to it the series terms stay below
    e^(|z|^2 / 4l) and 30 of them reach machine precision.
    """
    l = np.asarray(l, dtype=float)
    return np.maximum(SERIES_CROSSOVER, np.minimum(l, 2.0 * np.sqrt(l)))


def _bessel_j_series(l: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Ascending series z^l/(2l+1)!! sum_k (-z^2/2)^k / (k! prod(2l+2i+1))."""
    l = np.asarray(l, dtype=float)
    lead = np.exp(
        l * np.log(2.0) + gammaln(l + 1.0) - gammaln(2.0 * l + 2.0)
    )
    # z**0 must be 1 even at z = 0
    power = np.where(l == 0, 1.0 + 0j, z ** l)
    term = np.ones_like(z, dtype=complex)
    total = np.ones_like(z, dtype=complex)
    half_z2 = -0.5 * z * z
    for k in range(1, SERIES_TERMS):
        term = term * half_z2 / (k * (2.0 * l + 2.0 * k + 1.0))
        total = total + term
    return lead * power * total


def spherical_bessel_j(l, z):
    """
    Spherical Bessel function j_l(z) for complex z.

    Args:
        l: Order (integer >= 0), scalar or array
        z: Complex argument, scalar or array

    Returns:
        j_l(z) broadcast over l and z
    """
    l_arr = np.asarray(l)
    z_arr = _as_complex(z)
    l_b, z_b = np.broadcast_arrays(l_arr, z_arr)
    if np.any(l_b < 0):
        raise DomainError("spherical Bessel order must be nonnegative")

    # j_l(-z) = (-1)^l j_l(z) keeps the library call off the branch cut
    flip = z_b.real < 0
    z_right = np.where(flip, -z_b, z_b)
    small = np.abs(z_right) < series_crossover(l_b)

    out = np.empty(z_b.shape, dtype=complex)
    if np.any(small):
        out[small] = _bessel_j_series(l_b[small], z_right[small])
    if np.any(~small):
        out[~small] = spherical_jn(l_b[~small].astype(int), z_right[~small])
    out = np.where(flip, out * (-1.0) ** l_b, out)
    _check_finite(out, "j_l")
    if out.ndim == 0:
        return complex(out)
    return out


@lru_cache(maxsize=None)
def _hankel_coefficients(l: int) -> np.ndarray:
    return np.array(
        [
            math.factorial(l + k)
            / (math.factorial(k) * math.factorial(l - k))
            for k in range(l + 1)
        ],
        dtype=float,
    )


def _hankel_scalar_order(kind: int, l: int, z: np.ndarray) -> np.ndarray:
    sign = 1.0 if kind == 1 else -1.0
    coeffs = _hankel_coefficients(l)
    x = sign * 1j / (2.0 * z)
    poly = np.zeros_like(z, dtype=complex)
    for c in coeffs[::-1]:
        poly = poly * x + c
    with np.errstate(over="ignore", invalid="ignore"):
        return (-sign * 1j) ** (l + 1) * np.exp(sign * 1j * z) / z * poly


def spherical_hankel(kind: int, l, z):
    """
    Spherical Hankel function h_l^(1) or h_l^(2) from the closed form
    h_l^(1)(z) = (-i)^(l+1) e^(iz)/z sum_k (i/2z)^k (l+k)!/(k!(l-k)!).

    Args:
        kind: 1 (outgoing e^{ikr}) or 2 (incoming e^{-ikr})
        l: Order (integer >= 0), scalar or array
        z: Nonzero complex argument, scalar or array

    Returns:
        h_l^(kind)(z) broadcast over l and z
    """
    if kind not in (1, 2):
        raise DomainError(f"Hankel kind must be 1 or 2, got {kind}")
    l_b, z_b = np.broadcast_arrays(np.asarray(l), _as_complex(z))
    if np.any(z_b == 0):
        raise DomainError("spherical Hankel function is singular at z = 0")
    if np.any(l_b < 0):
        raise DomainError("spherical Hankel order must be nonnegative")

    out = np.empty(z_b.shape, dtype=complex)
    for order in np.unique(l_b):
        mask = l_b == order
        out[mask] = _hankel_scalar_order(kind, int(order), z_b[mask])
    _check_finite(out, f"h_l^({kind})")
    if out.ndim == 0:
        return complex(out)
    return out


def spherical_bessel_j_derivative(l, z):
    """d/dz j_l(z) = (l j_{l-1} - (l+1) j_{l+1}) / (2l+1)."""
    l_arr = np.asarray(l)
    upper = spherical_bessel_j(l_arr + 1, z)
    lower = spherical_bessel_j(np.maximum(l_arr - 1, 0), z)
    return (l_arr * lower - (l_arr + 1) * upper) / (2 * l_arr + 1)


def spherical_hankel_derivative(kind: int, l, z):
    """d/dz h_l(z) = (l h_{l-1} - (l+1) h_{l+1}) / (2l+1)."""
    l_arr = np.asarray(l)
    upper = spherical_hankel(kind, l_arr + 1, z)
    lower = spherical_hankel(kind, np.maximum(l_arr - 1, 0), z)
    return (l_arr * lower - (l_arr + 1) * upper) / (2 * l_arr + 1)


def legendre_p(l: int, m: int, x):
    """
    Associated Legendre function P_l^m(x) including the Condon-Shortley
    phase.

    Raises:
        DomainError: if |x| > 1 or m is outside [0, l]
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > 1.0):
        raise DomainError("legendre_p requires |x| <= 1")
    if m < 0 or m > l:
        raise DomainError(f"legendre_p requires 0 <= m <= l, got {l, m}")
    out = lpmv(m, l, x_arr)
    if out.ndim == 0:
        return float(out)
    return out


def spherical_norm_N(l: int, m: int) -> float:
    """N_l^m = (-1)^m sqrt((2l+1)/4pi) sqrt((l-m)!/(l+m)!)."""
    ratio = math.exp(gammaln(l - m + 1) - gammaln(l + m + 1))
    return (-1) ** m * math.sqrt((2 * l + 1) / (4 * math.pi)) * math.sqrt(
        ratio
    )


def _w_prefactor(l3: int, m3: int) -> float:
    log_ratio = gammaln(l3 + m3 + 1) - gammaln(l3 - m3 + 1)
    return 2.0 * math.exp(log_ratio) / (2 * l3 + 1)


def _node_count(l_total: int, m_total: int) -> int:
    nodes = l_total // 2 + 2
    # odd total m leaves a sqrt(1-w^2) factor, which is not polynomial
    if m_total % 2:
        nodes += 64
    return nodes


def triple_overlap_W(
    l1: int,
    m1: int,
    l2: int,
    m2: int,
    l3: int,
    m3: int,
    nodes: Optional[int] = None,
) -> float:
    """
    Overlap of three associated Legendre functions, normalized by the
    squared norm of the third one.

    Args:
        nodes: Gauss-Legendre node count (default integrates exactly)

    Returns:
        W(P_l1^m1, P_l2^m2, P_l3^m3)
    """
    for l, m in ((l1, m1), (l2, m2), (l3, m3)):
        if l < 0 or m < 0 or m > l:
            raise DomainError(f"invalid Legendre indices (l={l}, m={m})")
    if nodes is None:
        nodes = _node_count(l1 + l2 + l3, m1 + m2 + m3)
    x, w = leggauss(nodes)
    integrand = lpmv(m1, l1, x) * lpmv(m2, l2, x) * lpmv(m3, l3, x)
    return float(np.dot(w, integrand) / _w_prefactor(l3, m3))


@dataclass(frozen=True)
class CouplingTables:
    """Static angular tables shared read-only by every expansion."""

    max_l: int
    m: int
    W_table: np.ndarray
    W_mm_table: np.ndarray
    c3_table: np.ndarray
    c5_table: np.ndarray
    N_table: np.ndarray
    p_table: np.ndarray
    q_table: np.ndarray

    def c5(self, l1: int, l2: int, l3: int, l4: int, l: int) -> complex:
        """Look up c_{l1,l2,l3,l4,l}, rejecting indices beyond max_l."""
        indices = (l1, l2, l3, l4, l)
        if min(indices) < 0 or max(indices) > self.max_l:
            raise ConfigError(
                f"indices {indices} exceed the table range 0..{self.max_l}",
                key="max_l",
            )
        return complex(self.c5_table[l1, l2, l3, l4, l])


def _legendre_rows(max_l: int, m: int, x: np.ndarray) -> np.ndarray:
    rows = np.zeros((max_l + 1, x.size))
    for l in range(m, max_l + 1):
        rows[l] = lpmv(m, l, x)
    return rows


@lru_cache(maxsize=16)
def coupling_tables(max_l: int, m: int = 0) -> CouplingTables:
    """
    Precompute W, c_{l1,l2,l3}, c_{l1,l2,l3,l4,l}, N_l^m, p_{l,l'} and
    q_{alpha,l,l'} for all indices up to max_l.
    """
    if max_l < 0 or m < 0 or m > max_l:
        raise ConfigError(f"invalid table size max_l={max_l}, m={m}")
    x, w = leggauss(_node_count(3 * max_l + 2, m))
    P = _legendre_rows(max_l, 0, x)
    Pm = _legendre_rows(max_l, m, x)
    ls = np.arange(max_l + 1)

    pref = np.ones(max_l + 1)
    N = np.zeros(max_l + 1)
    for l in range(m, max_l + 1):
        pref[l] = _w_prefactor(l, m)
        N[l] = spherical_norm_N(l, m)

    W = np.einsum("ax,bx,cx,x->abc", P, P, Pm, w) / pref[None, None, :]
    W_mm = np.einsum("ax,bx,cx,x->abc", Pm, P, Pm, w) / pref[None, None, :]

    c3 = (
        2.0
        * (2 * ls[None, :, None] + 1)
        * (-1j) ** ls[None, :, None]
        * 1j ** (ls[None, None, :] - m)
        * W
    )
    N_safe = np.where(N == 0.0, 1.0, N)
    c5 = (
        c3[:, :, :, None, None]
        * ((2 * ls + 1) * 1j**ls)[None, None, None, :, None]
        * W_mm[None, None, :, :, :]
        / N_safe[None, None, None, None, :]
    )

    N0 = np.array([spherical_norm_N(l, 0) for l in ls])
    norm = 2.0 * np.pi * np.outer(N0, N0)
    p = norm * np.einsum("ax,bx,x->ab", P, P, w * x)
    q_z = norm * np.einsum("ax,bx,x->ab", P, P, w * x * x)
    q_xy = norm * np.einsum("ax,bx,x->ab", P, P, w * 0.5 * (1.0 - x * x))
    q = np.stack([q_xy, q_xy, q_z])

    arrays = [W, W_mm, c3, c5, N, p, q]
    for array in arrays:
        array.setflags(write=False)
    return CouplingTables(max_l, m, *arrays)


def coupling_c5(
    l1: int,
    l2: int,
    l3: int,
    l4: int,
    l: int,
    m: int = 0,
    tables: Optional[CouplingTables] = None,
) -> complex:
    """
    c_{l1,l2,l3,l4,l} = c_{l1,l2,l3} (2l4+1) i^l4 W(P_l3^m, P_l4, P_l^m)
    / N_l^m, served from the cached tables.
    """
    if tables is None:
        tables = coupling_tables(max(l1, l2, l3, l4, l, m), m)
    elif tables.m != m:
        raise ConfigError(
            f"tables were built for m={tables.m}, requested m={m}", key="m"
        )
    return tables.c5(l1, l2, l3, l4, l)
