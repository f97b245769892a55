"""Laguerre-Gaussian modes in normalized cylindrical coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import gammaincc

from .exceptions import DomainError, SamplingError
from .grid import GridSpec, SampledField

#: Largest fraction of mode power allowed outside the inscribed circle of the window.
MAX_CLIPPED_POWER = 1e-6


@dataclass(frozen=True)
class LGModeSpec:
    """Indices and beam parameters of one Laguerre-Gaussian mode.

    ``z`` is the distance from the waist plane; ``t = z / z_R``.
    """

    ell: int
    p: int = 0
    waist: float = 0.1
    wavelength: float = 1550e-9
    z: float = 0.0

    def __post_init__(self):
        if int(self.ell) != self.ell:
            raise DomainError(f"ell must be an integer, got {self.ell!r}")
        if int(self.p) != self.p or self.p < 0:
            raise DomainError(f"p must be a non-negative integer, got {self.p!r}")
        if not self.waist > 0:
            raise DomainError(f"waist must be positive, got {self.waist!r}")
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength!r}")

    @property
    def rayleigh_range(self) -> float:
        return np.pi * self.waist**2 / self.wavelength

    @property
    def t(self) -> float:
        return self.z / self.rayleigh_range

    @property
    def normalization(self) -> float:
        """Dimensionless prefactor ``sqrt(p! 2^(|l|+1) / (pi (p+|l|)!))``."""
        m = abs(self.ell)
        return np.sqrt(factorial(self.p) * 2.0 ** (m + 1) / (np.pi * factorial(self.p + m)))

    def at(self, z) -> LGModeSpec:
        return LGModeSpec(self.ell, self.p, self.waist, self.wavelength, z)


def laguerre(p: int, alpha: float, x):
    """Generalized Laguerre polynomial ``L_p^alpha(x)`` by three-term recurrence."""
    x = np.asarray(x, dtype=np.result_type(x, float))
    prev = np.ones_like(x)
    if p == 0:
        return prev
    cur = 1.0 + alpha - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def clipped_power(spec: LGModeSpec, grid: GridSpec) -> float:
    """Upper estimate of the mode power outside radius ``side / 2`` at the waist.

    For p = 0 the radial intensity ``u = 2 r^2`` is Gamma(|l| + 1) distributed;
    for p > 0 the shape ``|l| + 2p + 1`` is used as a conservative proxy.
    """
    u = 2 * (grid.side / 2 / spec.waist) ** 2
    return float(gammaincc(abs(spec.ell) + 2 * spec.p + 1, u))


def check_mode_sampling(spec: LGModeSpec, grid: GridSpec):
    """Raise :class:`SamplingError` if the grid cannot hold the mode."""
    grid.check_waist(spec.waist)
    width = np.sqrt(1 + spec.t**2)
    clipped = clipped_power(LGModeSpec(spec.ell, spec.p, spec.waist * width), grid)
    if clipped > MAX_CLIPPED_POWER:
        raise SamplingError(
            f"LG(l={spec.ell}, p={spec.p}) loses {clipped:.2e} of its power outside "
            f"the {grid.side:g} m window"
        )


def evaluate_lg(spec: LGModeSpec, grid: GridSpec, check=True) -> SampledField:
    """Sample ``M_lp(r, phi, t)`` on ``grid``.

    Uses ``r = rho / w0`` and carries an extra ``1 / w0`` so that the discrete
    norm ``sum |M|^2 pitch^2`` is one in physical units.
    """
    if check:
        check_mode_sampling(spec, grid)
    m = abs(spec.ell)
    t = spec.t
    rho, phi = grid.polar()
    r = rho / spec.waist
    values = (
        spec.normalization
        / spec.waist
        * r**m
        * np.exp(1j * spec.ell * phi)
        * (1 + 1j * t) ** spec.p
        / (1 - 1j * t) ** (spec.p + m + 1)
        * laguerre(spec.p, m, 2 * r**2 / (1 + t**2))
        * np.exp(-(r**2) / (1 - 1j * t))
    )
    return SampledField(grid, values, spec.wavelength, spec.z)


def lg_basis(q: int, grid: GridSpec, waist: float, wavelength: float, z: float = 0.0):
    """Return the ``(l = +q, l = -q)`` pair of p = 0 modes spanning one qubit."""
    if int(q) != q or q < 1:
        raise DomainError(f"q must be a positive integer, got {q!r}")
    plus = evaluate_lg(LGModeSpec(q, 0, waist, wavelength, z), grid)
    minus = evaluate_lg(LGModeSpec(-q, 0, waist, wavelength, z), grid)
    return plus, minus
