"""Kolmogorov phase screens and their statistical validation.

Screens are synthesized in the Fourier domain. A complex circular Gaussian
array is weighted by the square root of the two-dimensional phase spectrum

    S(K) = (2 pi)^3 k0^2 dz Phi_n(K, 0),    Phi_n(K) = 0.033 Cn2 K^(-11/3),

in the measure ``d^2K / (2 pi)^2``, then inverse transformed; the real and
imaginary parts are two independent screens. The ``(2 pi)^3`` converts the
0.033 constant, which belongs to the ``d^3k`` Fourier convention, to the
``d^3k / (2 pi)^3`` convention used for the synthesis integral.

The K^(-11/3) spectrum is singular at the origin, so plain point sampling
on the FFT lattice loses most of the low-frequency power. Bins near the
origin therefore receive a variance matched to the second moment
``int S(K) K^2 d^2K`` of their cell, and the DC cell is refined with
``subharmonic_levels`` levels of 3x3 subharmonics.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, DomainError, ResolutionError
from .grid import GridSpec

#: Kolmogorov spectral constant (d^3k Fourier convention).
KOLMOGOROV_CONSTANT = 0.033
#: Prefactor of the plane-wave Fried parameter, ``r0 = 0.185 (lambda^2 / (Cn2 z))^(3/5)``.
FRIED_PREFACTOR = 0.185
#: Structure-function coefficient in ``D(r) = 6.88 (r / r0)^(5/3)``.
STRUCTURE_COEFFICIENT = 6.88

DEFAULT_SUBHARMONIC_LEVELS = 12
# Bins with |kx|, |ky| <= this many lattice steps get moment-matched weights.
_MOMENT_MATCHED_RADIUS = 8
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class TurbulenceParams:
    """Refractive-index structure constant, medium thickness and wavelength."""

    cn2: float
    dz: float
    wavelength: float = 1550e-9

    def __post_init__(self):
        if not self.cn2 >= 0:
            raise DomainError(f"Cn2 must be non-negative, got {self.cn2!r}")
        if not self.dz > 0:
            raise DomainError(f"dz must be positive, got {self.dz!r}")
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength!r}")

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength


class SpectrumKind(str, enum.Enum):
    KOLMOGOROV = "kolmogorov"
    VON_KARMAN = "von_karman"


@dataclass(frozen=True)
class SpectrumModel:
    """Shape of the refractive-index power spectrum.

    Only the shape matters here; the strength enters through
    ``k0^2 Cn2 dz`` when a screen is drawn.
    """

    kind: SpectrumKind = SpectrumKind.KOLMOGOROV
    outer_scale: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "kind", SpectrumKind(self.kind))
        if self.kind is SpectrumKind.VON_KARMAN and not (0 < self.outer_scale < np.inf):
            raise DomainError("von Karman spectrum needs a finite positive outer scale")

    def phi(self, k, cn2=1.0):
        """``Phi_n(k)``; the Kolmogorov value at ``k = 0`` is defined as 0."""
        k = np.asarray(k, dtype=float)
        if self.kind is SpectrumKind.VON_KARMAN:
            k0 = 2 * np.pi / self.outer_scale
            return KOLMOGOROV_CONSTANT * cn2 * (k**2 + k0**2) ** (-11 / 6)
        with np.errstate(divide="ignore"):
            out = KOLMOGOROV_CONSTANT * cn2 * k ** (-11 / 3)
        return np.where(k > 0, out, 0.0)


def fried_parameter(params: TurbulenceParams, z: float, allow_infinite=False) -> float:
    """Plane-wave Fried parameter ``0.185 (lambda^2 / (Cn2 z))^(3/5)`` in meters."""
    if not z > 0:
        raise DomainError(f"path length must be positive, got {z!r}")
    if params.cn2 == 0:
        if allow_infinite:
            return np.inf
        raise DomainError("Cn2 = 0 gives an infinite Fried parameter")
    return FRIED_PREFACTOR * (params.wavelength**2 / (params.cn2 * z)) ** 0.6


def scintillation_strength(waist: float, params: TurbulenceParams, z: float) -> float:
    """``w0 / r0 = 5.4054 w0 (Cn2 z / lambda^2)^(3/5)``."""
    if not waist > 0:
        raise DomainError(f"waist must be positive, got {waist!r}")
    if not z > 0:
        raise DomainError(f"path length must be positive, got {z!r}")
    if params.cn2 == 0:
        raise DomainError("Cn2 = 0 gives zero scintillation strength by definition of r0")
    return 5.4054 * waist * (params.cn2 * z / params.wavelength**2) ** 0.6


def phase_strength_from_r0(r0: float) -> float:
    """``k0^2 Cn2 dz`` implied by a Fried parameter, inverting ``fried_parameter``."""
    if np.isinf(r0):
        return 0.0
    if not r0 > 0:
        raise DomainError(f"r0 must be positive, got {r0!r}")
    return 4 * np.pi**2 * (FRIED_PREFACTOR / r0) ** (5 / 3)


def r0_from_phase_strength(strength: float) -> float:
    if strength == 0:
        return np.inf
    return FRIED_PREFACTOR * (4 * np.pi**2 / strength) ** 0.6


@dataclass(frozen=True, eq=False)
class PhaseScreen:
    """One real random phase screen ``theta`` (radians) on ``grid``."""

    grid: GridSpec
    theta: np.ndarray
    r0: float
    seed: int
    pair_index: int = 0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (self.grid.n_samples,) * 2:
            raise DimensionError(f"theta shape {theta.shape} does not match grid")
        if self.pair_index not in (0, 1):
            raise DomainError(f"pair_index must be 0 or 1, got {self.pair_index!r}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def variance(self) -> float:
        return float(np.var(self.theta))

    def scaled(self, factor: float) -> PhaseScreen:
        """Same realization with ``theta`` multiplied by ``factor``.

        Scaling by ``s^(5/6)`` divides ``r0`` by ``s``.
        """
        r0 = self.r0 * factor ** (-6 / 5) if factor > 0 else np.inf
        return PhaseScreen(self.grid, self.theta * factor, r0, self.seed, self.pair_index)


def _spectral_density(spectrum: SpectrumModel, k):
    # Unit k0^2 Cn2 dz; density per d^2K / (2 pi)^2.
    return (2 * np.pi) ** 3 * spectrum.phi(k)


def _moment_matched_variance(spectrum, kx, ky, width):
    """Variance for cells centred at ``(kx, ky)`` whose second moment matches ``S``."""
    half = np.broadcast_to(np.asarray(width, dtype=float) / 2, np.shape(kx))[..., None, None]
    gx = kx[..., None, None] + _GAUSS_NODES[:, None] * half
    gy = ky[..., None, None] + _GAUSS_NODES[None, :] * half
    w = _GAUSS_WEIGHTS[:, None] * _GAUSS_WEIGHTS[None, :] * half * half
    k2 = gx**2 + gy**2
    moment = np.sum(w * _spectral_density(spectrum, np.sqrt(k2)) * k2, axis=(-1, -2))
    return moment / (kx**2 + ky**2) / (2 * np.pi) ** 2


@dataclass(frozen=True, eq=False)
class _SpectralWeights:
    amplitude: np.ndarray  # lattice amplitudes, FFT order, unit strength
    sub_kx: np.ndarray
    sub_ky: np.ndarray
    sub_amplitude: np.ndarray
    x: np.ndarray = field(repr=False)


@lru_cache(maxsize=16)
def _spectral_weights(grid: GridSpec, spectrum: SpectrumModel, levels: int) -> _SpectralWeights:
    n = grid.n_samples
    dk = 2 * np.pi / grid.side
    k = grid.wavenumbers()
    kx, ky = np.meshgrid(k, k, indexing="ij")
    variance = _spectral_density(spectrum, np.hypot(kx, ky)) * dk * dk / (2 * np.pi) ** 2
    near = (np.abs(kx) <= _MOMENT_MATCHED_RADIUS * dk) & (np.abs(ky) <= _MOMENT_MATCHED_RADIUS * dk)
    near[0, 0] = False
    variance[near] = _moment_matched_variance(spectrum, kx[near], ky[near], dk)
    variance[0, 0] = 0.0

    sub = []
    for level in range(1, levels + 1):
        step = dk / 3**level
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                if i or j:
                    sub.append((i * step, j * step, step))
    sub = np.array(sub).reshape(-1, 3)
    sub_var = (
        _moment_matched_variance(spectrum, sub[:, 0], sub[:, 1], sub[:, 2]) if len(sub) else np.zeros(0)
    )
    return _SpectralWeights(
        amplitude=np.sqrt(variance) * n * n,
        sub_kx=sub[:, 0],
        sub_ky=sub[:, 1],
        sub_amplitude=np.sqrt(sub_var),
        x=grid.coords(),
    )


def _resolve_strength(params, z, r0):
    if (params is None) == (r0 is None):
        raise DomainError("give exactly one of params or r0")
    if r0 is not None:
        return phase_strength_from_r0(r0), r0
    length = params.dz if z is None else z
    if not length > 0:
        raise DomainError(f"path length must be positive, got {length!r}")
    strength = params.wavenumber**2 * params.cn2 * length
    return strength, r0_from_phase_strength(strength)


def generate_screen_pair(
    grid: GridSpec,
    seed: int,
    *,
    r0: float | None = None,
    params: TurbulenceParams | None = None,
    z: float | None = None,
    spectrum: SpectrumModel = SpectrumModel(),
    subharmonic_levels: int = DEFAULT_SUBHARMONIC_LEVELS,
):
    """Draw two independent screens from one complex spectral realization.

    Parameters
    ----------
    grid : GridSpec
        Sampling grid of the screens.
    seed : int
        Seed of the spectral draw; equal seeds give bitwise-equal screens.
    r0 : float, optional
        Target Fried parameter in meters. ``np.inf`` gives flat screens.
    params, z : TurbulenceParams, float, optional
        Alternative target; the medium thickness is ``z`` if given, else
        ``params.dz``.
    spectrum : SpectrumModel
        Spectral shape, Kolmogorov by default.
    subharmonic_levels : int
        Number of 3x3 subharmonic refinements of the DC cell.

    Returns
    -------
    (PhaseScreen, PhaseScreen)
        Real and imaginary parts of the synthesized complex screen.
    """
    strength, r0_value = _resolve_strength(params, z, r0)
    if strength > 0 and r0_value < 2 * grid.pitch:
        raise ResolutionError(
            f"r0 = {r0_value:g} m is below two samples ({2 * grid.pitch:g} m); "
            "the inertial range is unresolved"
        )
    weights = _spectral_weights(grid, spectrum, int(subharmonic_levels))
    n = grid.n_samples
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    screen = np.fft.ifft2(xi * weights.amplitude)
    if weights.sub_amplitude.size:
        c = rng.standard_normal(weights.sub_amplitude.size) + 1j * rng.standard_normal(
            weights.sub_amplitude.size
        )
        ex = np.exp(1j * np.outer(weights.x, weights.sub_kx))
        ey = np.exp(1j * np.outer(weights.x, weights.sub_ky))
        screen = screen + (ex * (c * weights.sub_amplitude)) @ ey.T
    screen *= np.sqrt(strength)
    return (
        PhaseScreen(grid, screen.real, r0_value, seed, 0),
        PhaseScreen(grid, screen.imag, r0_value, seed, 1),
    )


@dataclass
class StructureFunction:
    """Mergeable accumulation of ``<[theta(X + r) - theta(X)]^2>``.

    ``sums`` and ``counts`` are indexed by the 2-D lag in FFT order on a
    ``2n x 2n`` lattice; :meth:`radial` bins them by ``|r|``.
    """

    grid: GridSpec
    sums: np.ndarray
    counts: np.ndarray
    n_screens: int = 0

    def merge(self, other: StructureFunction) -> StructureFunction:
        if other.grid != self.grid:
            raise DimensionError("cannot merge structure functions from different grids")
        return StructureFunction(
            self.grid, self.sums + other.sums, self.counts + other.counts, self.n_screens + other.n_screens
        )

    def radial(self, max_lag=None):
        """Return ``(r, D)`` with lags binned to the nearest integer sample radius."""
        n = self.grid.n_samples
        lag = np.fft.fftfreq(2 * n, 1.0 / (2 * n))
        lx, ly = np.meshgrid(lag, lag, indexing="ij")
        radius = np.hypot(lx, ly)
        bins = np.rint(radius).astype(int)
        limit = n // 2 if max_lag is None else int(max_lag)
        keep = (bins >= 1) & (bins <= limit) & (self.counts > 0)
        num = np.bincount(bins[keep], weights=self.sums[keep], minlength=limit + 1)
        den = np.bincount(bins[keep], weights=self.counts[keep], minlength=limit + 1)
        rsum = np.bincount(bins[keep], weights=radius[keep] * self.counts[keep], minlength=limit + 1)
        idx = np.nonzero(den[1:])[0] + 1
        return rsum[idx] / den[idx] * self.grid.pitch, num[idx] / den[idx]


def estimate_structure_function(screens) -> StructureFunction:
    """Ensemble and spatial average of squared phase differences.

    Differences are taken only between sample pairs that both lie inside the
    screen; periodic wrap-around is never used.
    """
    screens = list(screens)
    if not screens:
        raise DomainError("need at least one screen")
    grid = screens[0].grid
    n = grid.n_samples
    shape = (2 * n, 2 * n)
    ones = np.zeros(shape)
    ones[:n, :n] = 1.0
    f_ones = np.fft.rfft2(ones)
    counts = np.rint(np.fft.irfft2(np.abs(f_ones) ** 2, shape))
    sums = np.zeros(shape)
    for s in screens:
        if s.grid != grid:
            raise DimensionError("all screens must share one grid")
        # Piston drops out of D; removing it limits FFT cancellation error.
        centered = s.theta - s.theta.mean()
        theta = np.zeros(shape)
        theta[:n, :n] = centered
        sq = np.zeros(shape)
        sq[:n, :n] = centered**2
        f_t = np.fft.rfft2(theta)
        f_sq = np.fft.rfft2(sq)
        cross = np.conj(f_ones) * f_sq
        sums += np.fft.irfft2(cross + np.conj(cross) - 2 * np.abs(f_t) ** 2, shape)
    # Each screen contributes counts pairs per lag.
    return StructureFunction(grid, sums, counts * len(screens), len(screens))


def kolmogorov_structure_function(r, r0):
    """Reference law ``6.88 (r / r0)^(5/3)``."""
    return STRUCTURE_COEFFICIENT * (np.asarray(r, dtype=float) / r0) ** (5 / 3)


def loglog_slope(r, d):
    """Least-squares slope of ``log D`` against ``log r``."""
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    return float(np.polyfit(np.log(r), np.log(d), 1)[0])


_SCREEN_MAGIC = b"OAMSCRN1"
_SCREEN_HEADER = struct.Struct("<8sIdQdB")


def save_screen(screen: PhaseScreen, path):
    """Write ``screen`` as a little-endian header followed by float32 samples.

    Header: magic ``OAMSCRN1``, uint32 n, float64 pitch, uint64 seed,
    float64 r0, uint8 pair index. Samples are row-major ``theta[ix, iy]``.
    """
    header = _SCREEN_HEADER.pack(
        _SCREEN_MAGIC,
        screen.grid.n_samples,
        screen.grid.pitch,
        int(screen.seed) & 0xFFFFFFFFFFFFFFFF,
        float(screen.r0),
        screen.pair_index,
    )
    Path(path).write_bytes(header + screen.theta.astype("<f4").tobytes())


def load_screen(path) -> PhaseScreen:
    data = Path(path).read_bytes()
    magic, n, pitch, seed, r0, pair = _SCREEN_HEADER.unpack_from(data)
    if magic != _SCREEN_MAGIC:
        raise ValueError(f"{path}: not a phase-screen file")
    theta = np.frombuffer(data, dtype="<f4", offset=_SCREEN_HEADER.size)
    if theta.size != n * n:
        raise ValueError(f"{path}: expected {n * n} samples, found {theta.size}")
    return PhaseScreen(GridSpec(n, pitch), theta.reshape(n, n).astype(float), r0, seed, pair)
