"""Sampled scalar fields on square grids and free-space propagation.

Fields are stored with the beam axis at sample ``(n // 2, n // 2)``; the
FFT shift is applied around every transform so that analytic and numerical
fields stay index-aligned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, DomainError, SamplingError

#: Minimum number of samples across one beam waist.
MIN_SAMPLES_PER_WAIST = 16
#: Minimum grid side length in units of the beam waist.
MIN_WINDOW_WAISTS = 6.0


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid.

    Parameters
    ----------
    n_samples : int
        Samples per side, a power of two no smaller than 64.
    pitch : float
        Sample spacing in meters.
    """

    n_samples: int = 256
    pitch: float = 0.1 * 8.0 / 256

    def __post_init__(self):
        n = self.n_samples
        if not isinstance(n, (int, np.integer)) or n < 64 or n & (n - 1):
            raise SamplingError(f"n_samples must be a power of two >= 64, got {n!r}")
        if not np.isfinite(self.pitch) or self.pitch <= 0:
            raise DomainError(f"pitch must be positive, got {self.pitch!r}")

    @classmethod
    def for_waist(cls, waist, n_samples=256, window_over_waist=8.0):
        """Grid whose side length is ``window_over_waist`` beam waists."""
        if waist <= 0:
            raise DomainError(f"waist must be positive, got {waist!r}")
        grid = cls(n_samples, waist * window_over_waist / n_samples)
        grid.check_waist(waist)
        return grid

    @property
    def side(self) -> float:
        return self.n_samples * self.pitch

    @property
    def cell_area(self) -> float:
        return self.pitch * self.pitch

    def coords(self) -> np.ndarray:
        """1-D sample positions with the origin at index ``n // 2``."""
        return (np.arange(self.n_samples) - self.n_samples // 2) * self.pitch

    def mesh(self):
        """``(x, y)`` arrays indexed as ``[ix, iy]``."""
        x = self.coords()
        return np.meshgrid(x, x, indexing="ij")

    def polar(self):
        """``(rho, phi)`` arrays in meters and radians."""
        x, y = self.mesh()
        return np.hypot(x, y), np.arctan2(y, x)

    def wavenumbers(self) -> np.ndarray:
        """Angular spatial frequencies in unshifted FFT order (rad/m)."""
        return 2 * np.pi * np.fft.fftfreq(self.n_samples, self.pitch)

    def check_waist(self, waist):
        """Raise :class:`SamplingError` unless the waist is adequately sampled."""
        if waist / self.pitch < MIN_SAMPLES_PER_WAIST:
            raise SamplingError(
                f"waist {waist:g} m spans {waist / self.pitch:.1f} samples, "
                f"need at least {MIN_SAMPLES_PER_WAIST}"
            )
        if self.side < MIN_WINDOW_WAISTS * waist:
            raise SamplingError(
                f"grid side {self.side:g} m is shorter than "
                f"{MIN_WINDOW_WAISTS:g} waists ({MIN_WINDOW_WAISTS * waist:g} m)"
            )


@dataclass(frozen=True, eq=False)
class SampledField:
    """Complex scalar field on a grid at longitudinal position ``z``."""

    grid: GridSpec
    values: np.ndarray
    wavelength: float
    z: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        n = self.grid.n_samples
        if values.shape != (n, n):
            raise DimensionError(f"values must have shape {(n, n)}, got {values.shape}")
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    def power(self) -> float:
        """Discrete L2 norm squared, ``sum |g|^2 * pitch^2``."""
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_area)

    def second_moment(self) -> float:
        """Power-weighted mean of ``x^2 + y^2`` about the grid origin."""
        rho, _ = self.grid.polar()
        intensity = np.abs(self.values) ** 2
        return float(np.sum(intensity * rho**2) / np.sum(intensity))

    def replace(self, values, z=None) -> SampledField:
        return SampledField(self.grid, values, self.wavelength, self.z if z is None else z)

    def __mul__(self, scalar):
        return self.replace(self.values * scalar)

    __rmul__ = __mul__


def _check_compatible(a: SampledField, b: SampledField):
    if a.grid != b.grid:
        raise DimensionError(f"grid mismatch: {a.grid} vs {b.grid}")
    if not np.isclose(a.wavelength, b.wavelength, rtol=1e-12, atol=0):
        raise DimensionError(f"wavelength mismatch: {a.wavelength} vs {b.wavelength}")


def inner_product(a: SampledField, b: SampledField) -> complex:
    """Return ``<a|b> = sum conj(a) * b * pitch^2``."""
    _check_compatible(a, b)
    return complex(np.vdot(a.values, b.values) * a.grid.cell_area)


def _transfer_function(grid: GridSpec, wavenumber: float, dz: float) -> np.ndarray:
    k = grid.wavenumbers()
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    return np.exp(1j * k2 * dz / (2 * wavenumber))


def _spectral_second_moment(f: SampledField) -> float:
    spectrum = np.abs(np.fft.fft2(np.fft.ifftshift(f.values))) ** 2
    k = f.grid.wavenumbers()
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    return float(np.sum(spectrum * k2) / np.sum(spectrum))


def check_propagation_window(f: SampledField, dz: float):
    """Raise :class:`SamplingError` if the beam may outgrow the window over ``dz``.

    Uses the second-moment bound ``sqrt(<r^2>(dz)) <= sqrt(<r^2>) + dz *
    sqrt(<k^2>) / k0``; the beam radius ``sqrt(2 <r^2>)`` must stay inside
    half the grid side.
    """
    rms = np.sqrt(f.second_moment()) + dz * np.sqrt(_spectral_second_moment(f)) / f.wavenumber
    radius = np.sqrt(2.0) * rms
    if radius > f.grid.side / 2:
        raise SamplingError(
            f"beam radius after {dz:g} m is about {radius:g} m, "
            f"exceeding half the window ({f.grid.side / 2:g} m)"
        )


def propagate_free_space(f: SampledField, dz: float, check=True) -> SampledField:
    """Paraxial angular-spectrum propagation over ``dz`` meters.

    Multiplies the spectrum by ``exp(i (kx^2 + ky^2) dz / (2 k0))``, the
    vacuum solution of ``lap_T g - 2 i k0 dg/dz = 0``.
    """
    if dz < 0:
        raise DomainError(f"propagation distance must be non-negative, got {dz!r}")
    if check:
        check_propagation_window(f, dz)
    h = _transfer_function(f.grid, f.wavenumber, dz)
    spectrum = np.fft.fft2(np.fft.ifftshift(f.values))
    out = np.fft.fftshift(np.fft.ifft2(spectrum * h))
    return f.replace(out, z=f.z + dz)


def apply_phase(f: SampledField, screen) -> SampledField:
    """Multiply ``f`` by the unimodular transmission ``exp(i theta)``.

    ``screen`` is a :class:`~oamturb.turbulence.PhaseScreen` or a real array
    with the grid's shape.
    """
    theta = getattr(screen, "theta", screen)
    grid = getattr(screen, "grid", None)
    if grid is not None and grid != f.grid:
        raise DimensionError(f"grid mismatch: {f.grid} vs {grid}")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != f.values.shape:
        raise DimensionError(f"phase shape {theta.shape} does not match field {f.values.shape}")
    return f.replace(f.values * np.exp(1j * theta))
