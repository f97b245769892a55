"""Monte Carlo sweeps of OAM entanglement over scintillation strength.

Every ensemble member draws one complex screen realization with a seed
derived from ``(master_seed, pair_index)``; the realization is generated
once at ``w0 / r0 = 1`` and rescaled by ``s^(5/6)`` for every strength
``s`` of the sweep, so all strengths and all ``q`` share common random
numbers. Pairs are processed in fixed-size chunks and reduced in pair
order, which makes results independent of the worker count.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import DecayRangeError, DegenerateEnsembleError, DomainError, ResolutionError
from .grid import GridSpec, apply_phase, propagate_free_space
from .modes import LGModeSpec, evaluate_lg, lg_basis
from .quantum import TwoQubitDensityMatrix, concurrence_many, modal_coefficients, project_amplitudes
from .turbulence import DEFAULT_SUBHARMONIC_LEVELS, generate_screen_pair

MIN_ENSEMBLE_SIZE = 30
_CHUNK_PAIRS = 4
_BOOTSTRAP_TAG = 0x426F6F74


class Scenario(str, enum.Enum):
    SINGLE_PHOTON = "single"
    TWO_PHOTON = "two"


def default_strengths():
    """``w0 / r0`` from 0 to 4 in steps of 0.2."""
    return tuple(round(0.2 * i, 10) for i in range(21))


def derive_seed(master_seed: int, *keys: int) -> int:
    """64-bit seed for one work item, independent of scheduling."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SweepConfig:
    """Parameters of one Monte Carlo sweep.

    ``grid`` defaults to 256 x 256 samples over eight beam waists.
    ``propagation_distance`` is the vacuum distance between the screen and
    the projection plane; with 0 the overlaps are taken right behind the
    screen.
    """

    scenario: Scenario = Scenario.SINGLE_PHOTON
    q_values: tuple = (1, 3, 5, 7)
    strengths: tuple = field(default_factory=default_strengths)
    ensemble_size: int = 200
    waist: float = 0.1
    wavelength: float = 1550e-9
    grid: GridSpec | None = None
    propagation_distance: float = 0.0
    master_seed: int = 0
    subharmonic_levels: int = DEFAULT_SUBHARMONIC_LEVELS
    bootstrap_resamples: int = 200

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "q_values", tuple(int(q) for q in self.q_values))
        object.__setattr__(self, "strengths", tuple(float(s) for s in self.strengths))
        if self.grid is None:
            object.__setattr__(self, "grid", GridSpec.for_waist(self.waist))
        if not self.q_values or min(self.q_values) < 1:
            raise DomainError(f"q values must be positive integers, got {self.q_values}")
        s = self.strengths
        if not s or s[0] != 0 or any(b <= a for a, b in zip(s, s[1:])):
            raise DomainError("strengths must be strictly ascending and start at 0")
        if self.ensemble_size < MIN_ENSEMBLE_SIZE:
            raise DomainError(f"ensemble_size must be at least {MIN_ENSEMBLE_SIZE}")
        if self.propagation_distance < 0:
            raise DomainError("propagation_distance must be non-negative")
        self.grid.check_waist(self.waist)

    @property
    def n_pairs(self) -> int:
        """Screen pairs drawn; the single-photon case uses both screens of a pair."""
        if self.scenario is Scenario.TWO_PHOTON:
            return self.ensemble_size
        return (self.ensemble_size + 1) // 2


def check_resolution(grid: GridSpec, waist: float, strengths):
    """Raise :class:`ResolutionError` naming the first unresolvable strength."""
    for s in strengths:
        if s > 0 and waist / s < 2 * grid.pitch:
            raise ResolutionError(
                f"strength w0/r0 = {s:g} gives r0 = {waist / s:g} m, below two samples "
                f"({2 * grid.pitch:g} m)"
            )


@lru_cache(maxsize=8)
def _overlap_weights(grid: GridSpec, waist: float, wavelength: float, q_values: tuple) -> np.ndarray:
    """Columns ``conj(out) * in * dA`` in the order of ``ModalCoefficients``."""
    cols = []
    for q in q_values:
        plus, minus = lg_basis(q, grid, waist, wavelength)
        p, m = plus.values.ravel(), minus.values.ravel()
        cols += [p.conj() * p, m.conj() * p, p.conj() * m, m.conj() * m]
    return np.stack(cols, axis=1) * grid.cell_area


def _unit_pair(cfg, pair_index):
    return generate_screen_pair(
        cfg.grid,
        derive_seed(cfg.master_seed, pair_index),
        r0=cfg.waist,
        subharmonic_levels=cfg.subharmonic_levels,
    )


def _coefficients_fast(cfg, theta, scales):
    weights = _overlap_weights(cfg.grid, cfg.waist, cfg.wavelength, cfg.q_values)
    transmission = np.exp(1j * np.outer(scales, theta.ravel()))
    return (transmission @ weights).reshape(len(scales), len(cfg.q_values), 4)


def _coefficients_propagated(cfg, theta, scales):
    dz = cfg.propagation_distance
    out = np.empty((len(scales), len(cfg.q_values), 4), dtype=complex)
    for iq, q in enumerate(cfg.q_values):
        inputs = lg_basis(q, cfg.grid, cfg.waist, cfg.wavelength)
        basis = lg_basis(q, cfg.grid, cfg.waist, cfg.wavelength, z=dz)
        for i_s, scale in enumerate(scales):
            distorted = [
                propagate_free_space(apply_phase(f, scale * theta), dz, check=False) for f in inputs
            ]
            c = modal_coefficients(distorted[0], distorted[1], basis)
            out[i_s, iq] = (c.plus_to_plus, c.plus_to_minus, c.minus_to_plus, c.minus_to_minus)
    return out


def _pair_chunk(cfg: SweepConfig, start: int, stop: int) -> np.ndarray:
    """Coefficients of shape ``(pairs, 2, strengths, q, 4)`` for one chunk."""
    scales = np.asarray(cfg.strengths) ** (5 / 6)
    compute = _coefficients_fast if cfg.propagation_distance == 0 else _coefficients_propagated
    out = []
    with threadpool_limits(1):
        for k in range(start, stop):
            pair = _unit_pair(cfg, k)
            out.append([compute(cfg, s.theta, scales) for s in pair])
    return np.asarray(out)


def _map_chunks(func, cfg, n_items, workers):
    bounds = [(a, min(a + _CHUNK_PAIRS, n_items)) for a in range(0, n_items, _CHUNK_PAIRS)]
    if workers is None or workers <= 1:
        parts = [func(cfg, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(func, [cfg] * len(bounds), *zip(*bounds)))
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True, eq=False)
class CrosstalkMatrix:
    """Joint detection probabilities over ``(l_A, l_B)`` normalized to unit mass."""

    labels: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        total = p.sum()
        if total > 0:
            p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))

    def anti_diagonal_mass(self) -> float:
        lab = np.asarray(self.labels)
        return float(self.probabilities[lab[:, None] == -lab[None, :]].sum())

    def off_anti_diagonal_mass(self) -> float:
        return float(1.0 - self.anti_diagonal_mass())


@dataclass(frozen=True, eq=False)
class SweepEntry:
    scenario: Scenario
    q: int
    strength: float
    density: TwoQubitDensityMatrix
    concurrence: float
    stderr: float
    crosstalk: CrosstalkMatrix
    n_effective: int
    n_members: int


@dataclass(eq=False)
class SweepResult:
    """Ensemble statistics keyed by ``(scenario, q, strength)``."""

    entries: list

    def scenarios(self):
        return sorted({e.scenario for e in self.entries}, key=lambda s: s.value)

    def q_values(self, scenario):
        return sorted({e.q for e in self.entries if e.scenario is Scenario(scenario)})

    def curve(self, scenario, q):
        """``(strengths, concurrence, stderr)`` arrays for one curve."""
        rows = sorted(
            (e for e in self.entries if e.scenario is Scenario(scenario) and e.q == q),
            key=lambda e: e.strength,
        )
        if not rows:
            raise KeyError((scenario, q))
        return (
            np.array([e.strength for e in rows]),
            np.array([e.concurrence for e in rows]),
            np.array([e.stderr for e in rows]),
        )

    def entry(self, scenario, q, strength) -> SweepEntry:
        for e in self.entries:
            if e.scenario is Scenario(scenario) and e.q == q and np.isclose(e.strength, strength):
                return e
        raise KeyError((scenario, q, strength))

    def merge(self, other: SweepResult) -> SweepResult:
        return SweepResult(list(self.entries) + list(other.entries))


def _bootstrap_stderr(projectors, cfg) -> np.ndarray:
    n = projectors.shape[0]
    b = cfg.bootstrap_resamples
    if b < 2:
        return np.zeros(projectors.shape[1:3])
    rng = np.random.default_rng(derive_seed(cfg.master_seed, _BOOTSTRAP_TAG, list(Scenario).index(cfg.scenario)))
    idx = rng.integers(0, n, size=(b, n))
    counts = np.stack([np.bincount(row, minlength=n) for row in idx]).astype(float)
    sums = np.einsum("bn,nsqij->bsqij", counts, projectors)
    trace = np.einsum("bsqii->bsq", sums).real
    with np.errstate(invalid="ignore", divide="ignore"):
        rhos = sums / trace[..., None, None]
    ok = trace > 0
    conc = np.where(ok, concurrence_many(np.where(ok[..., None, None], rhos, np.eye(4) / 4)), np.nan)
    return np.nanstd(conc, axis=0, ddof=1)


def run_sweep(cfg: SweepConfig, workers: int = 1) -> SweepResult:
    """Ensemble-averaged two-qubit states for every ``(q, strength)`` of ``cfg``."""
    check_resolution(cfg.grid, cfg.waist, cfg.strengths)
    coeffs = _map_chunks(_pair_chunk, cfg, cfg.n_pairs, workers)
    n = cfg.ensemble_size
    if cfg.scenario is Scenario.TWO_PHOTON:
        amps = project_amplitudes(coeffs[:n, 0], coeffs[:n, 1])
    else:
        per_screen = coeffs.reshape((-1,) + coeffs.shape[2:])[:n]
        amps = project_amplitudes(per_screen)

    projectors = np.einsum("nsqi,nsqj->nsqij", amps, amps.conj())
    sums = projectors.sum(axis=0)
    trace = np.einsum("sqii->sq", sums).real
    norms = np.einsum("nsqi,nsqi->nsq", amps, amps.conj()).real
    n_eff = (norms > 1e-15).sum(axis=0)
    stderr = _bootstrap_stderr(projectors, cfg)

    entries = []
    for i_s, s in enumerate(cfg.strengths):
        for iq, q in enumerate(cfg.q_values):
            if trace[i_s, iq] <= 0:
                raise DegenerateEnsembleError(f"q={q}, strength={s}: no weight in the qubit subspace")
            rho = sums[i_s, iq] / trace[i_s, iq]
            rho = TwoQubitDensityMatrix(0.5 * (rho + rho.conj().T))
            joint = np.real(np.diag(rho.rho)).reshape(2, 2)  # rows l_A = (q, -q)
            crosstalk = CrosstalkMatrix((-q, q), joint[::-1, ::-1])
            entries.append(
                SweepEntry(
                    cfg.scenario,
                    q,
                    s,
                    rho,
                    float(concurrence_many(rho.rho)),
                    float(stderr[i_s, iq]),
                    crosstalk,
                    int(n_eff[i_s, iq]),
                    n,
                )
            )
    return SweepResult(entries)


@dataclass(frozen=True)
class _CrosstalkJob:
    grid: GridSpec
    waist: float
    wavelength: float
    q_max: int
    scales: tuple
    master_seed: int
    subharmonic_levels: int


@lru_cache(maxsize=4)
def _mode_matrix(grid, waist, wavelength, q_max):
    cols = [
        evaluate_lg(LGModeSpec(ell, 0, waist, wavelength), grid).values.ravel()
        for ell in range(-q_max, q_max + 1)
    ]
    return np.stack(cols, axis=1)


def _crosstalk_chunk(job: _CrosstalkJob, start: int, stop: int) -> np.ndarray:
    """Transfer matrices ``U[out, in]`` of shape ``(pairs, 2, scales, M, M)``."""
    modes = _mode_matrix(job.grid, job.waist, job.wavelength, job.q_max)
    area = job.grid.cell_area
    out = []
    with threadpool_limits(1):
        for k in range(start, stop):
            pair = generate_screen_pair(
                job.grid,
                derive_seed(job.master_seed, k),
                r0=job.waist,
                subharmonic_levels=job.subharmonic_levels,
            )
            per_screen = []
            for screen in pair:
                per_scale = []
                for scale in job.scales:
                    t = np.exp(1j * scale * screen.theta.ravel())
                    per_scale.append((modes.conj().T * t) @ modes * area)
                per_screen.append(per_scale)
            out.append(per_screen)
    return np.asarray(out)


def crosstalk_matrices(
    q_max: int,
    strengths,
    ensemble_size: int,
    seed: int,
    scenario=Scenario.TWO_PHOTON,
    waist: float = 0.1,
    wavelength: float = 1550e-9,
    grid: GridSpec | None = None,
    subharmonic_levels: int = DEFAULT_SUBHARMONIC_LEVELS,
    workers: int = 1,
):
    """Crosstalk matrices for several strengths from one shared screen ensemble.

    The input is the coherent superposition of ``|l>_A |-l>_B`` over
    ``l = -q_max .. q_max`` with equal weights. Returns one
    :class:`CrosstalkMatrix` per strength.
    """
    if int(q_max) != q_max or q_max < 1:
        raise DomainError(f"q_max must be a positive integer, got {q_max!r}")
    scenario = Scenario(scenario)
    grid = GridSpec.for_waist(waist) if grid is None else grid
    strengths = [float(s) for s in strengths]
    check_resolution(grid, waist, strengths)
    job = _CrosstalkJob(
        grid, waist, wavelength, int(q_max), tuple(s ** (5 / 6) for s in strengths), seed, subharmonic_levels
    )
    n_pairs = ensemble_size if scenario is Scenario.TWO_PHOTON else (ensemble_size + 1) // 2
    u = _map_chunks(_crosstalk_chunk, job, n_pairs, workers)
    m = 2 * q_max + 1
    flip = np.eye(m)[::-1]
    if scenario is Scenario.TWO_PHOTON:
        u_a, u_b = u[:ensemble_size, 0], u[:ensemble_size, 1]
    else:
        u_a = u.reshape((-1,) + u.shape[2:])[:ensemble_size]
        u_b = np.broadcast_to(np.eye(m), u_a.shape)
    amp = u_a @ flip @ np.swapaxes(u_b, -1, -2) / np.sqrt(m)
    prob = np.mean(np.abs(amp) ** 2, axis=0)
    labels = tuple(range(-q_max, q_max + 1))
    return [CrosstalkMatrix(labels, p) for p in prob]


def crosstalk_matrix(q_max, strength, ensemble_size, seed, **kwargs) -> CrosstalkMatrix:
    """Ensemble-averaged coincidence probabilities over ``l_A, l_B in [-q_max, q_max]``."""
    return crosstalk_matrices(q_max, [strength], ensemble_size, seed, **kwargs)[0]


@dataclass(frozen=True)
class DecayFit:
    """Straight-line fit of ``log10(Omega_0.5)`` against ``log10(l)``."""

    scenario: Scenario
    q_values: tuple
    omegas: tuple
    slope: float
    intercept: float

    @property
    def prefactor(self) -> float:
        return 10.0**self.intercept

    def predict(self, ell):
        return self.prefactor * np.asarray(ell, dtype=float) ** self.slope


def crossing_point(strengths, values, level=0.5) -> float:
    """First downward crossing of ``level`` by linear interpolation."""
    x = np.asarray(strengths, dtype=float)
    y = np.asarray(values, dtype=float)
    for i in range(1, len(y)):
        if y[i - 1] >= level > y[i]:
            return float(x[i - 1] + (y[i - 1] - level) / (y[i - 1] - y[i]) * (x[i] - x[i - 1]))
    raise DecayRangeError(f"curve never crosses {level}")


def fit_power_law(q_values, omegas, scenario=Scenario.SINGLE_PHOTON) -> DecayFit:
    slope, intercept = np.polyfit(np.log10(q_values), np.log10(omegas), 1)
    return DecayFit(Scenario(scenario), tuple(q_values), tuple(omegas), float(slope), float(intercept))


def fit_decay_scale(results: SweepResult, level=0.5) -> dict:
    """Per scenario, locate ``Omega_0.5`` for every ``q`` and fit the power law."""
    fits = {}
    for scenario in results.scenarios():
        qs = results.q_values(scenario)
        omegas = []
        for q in qs:
            s, c, _ = results.curve(scenario, q)
            try:
                omegas.append(crossing_point(s, c, level))
            except DecayRangeError:
                raise DecayRangeError(
                    f"{scenario.value}-photon q={q}: concurrence never falls below {level}"
                ) from None
        if len(qs) < 2:
            raise DomainError("need at least two q values to fit a decay law")
        fits[scenario] = fit_power_law(qs, omegas, scenario)
    return fits


#: Coefficient of the decay distance, ``0.185^(5/3)`` rounded.
DECAY_DISTANCE_COEFFICIENT = 0.06


def decay_distance(ell, waist, wavelength, cn2) -> float:
    """Distance in meters at which ``w0 / r0`` reaches ``sqrt(l)``.

    ``L_dec = 0.06 lambda^2 l^(5/6) / (w0^(5/3) Cn2)``.
    """
    for name, v in (("ell", ell), ("waist", waist), ("wavelength", wavelength), ("cn2", cn2)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v!r}")
    return DECAY_DISTANCE_COEFFICIENT * wavelength**2 * ell ** (5 / 6) / (waist ** (5 / 3) * cn2)
