import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import WAIST, WAVELENGTH
from oamturb.exceptions import DegenerateEnsembleError, DimensionError, ValidationError
from oamturb.grid import apply_phase, GridSpec
from oamturb.modes import lg_basis
from oamturb.quantum import (
    BELL_STATE,
    DensityAccumulator,
    ModalCoefficients,
    ProjectedPureState,
    TwoQubitDensityMatrix,
    accumulate_density,
    concurrence,
    concurrence_many,
    density_from_json,
    modal_coefficients,
    project_amplitudes,
    project_single_photon,
    project_to_physical,
    project_two_photon,
)
from oamturb.turbulence import generate_screen_pair

seeds = st.integers(0, 2**32 - 1)


def random_coefficients(rng, scale=1.0):
    return ModalCoefficients.from_matrix(scale * oracles.random_unitary(rng))


def random_density(rng, rank=4):
    z = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


# Modal coefficients


def test_identity_channel_coefficients(grid):
    basis = lg_basis(1, grid, WAIST, WAVELENGTH)
    c = modal_coefficients(*basis, basis)
    assert abs(c.plus_to_plus - 1) < 1e-3 and abs(c.minus_to_minus - 1) < 1e-3
    assert abs(c.plus_to_minus) < 1e-3 and abs(c.minus_to_plus) < 1e-3


def test_azimuthal_selection_rule(grid):
    q = 1
    basis = lg_basis(q, grid, WAIST, WAVELENGTH)
    rho, phi = grid.polar()
    # exp(i 2q phi) raises -q to +q; realized as a complex transmission.
    twisted = [f.replace(f.values * np.exp(2j * q * phi) * 0.5) for f in basis]
    c = modal_coefficients(*twisted, basis)
    assert abs(c.minus_to_plus) > 0.1
    # A radial phase keeps l; nothing leaks into the other helicity.
    radial = [apply_phase(f, 30 * (rho / WAIST) ** 2) for f in basis]
    c = modal_coefficients(*radial, basis)
    assert abs(c.plus_to_minus) < 1e-6 and abs(c.minus_to_plus) < 1e-6


def test_kolmogorov_screen_reduces_retained_power(grid):
    basis = lg_basis(1, grid, WAIST, WAVELENGTH)
    means = []
    for s in (0.0, 1.0, 2.0, 3.0):
        vals = []
        for k in range(30):
            screen = generate_screen_pair(grid, k, r0=WAIST / s if s else np.inf)[0]
            c = modal_coefficients(apply_phase(basis[0], screen), apply_phase(basis[1], screen), basis)
            vals.append(abs(c.plus_to_plus) ** 2)
        means.append(np.mean(vals))
    assert means[2] < 1
    assert np.all(np.diff(means) < 0)


def test_modal_coefficients_plane_mismatch(grid):
    basis = lg_basis(1, grid, WAIST, WAVELENGTH)
    moved = lg_basis(1, grid, WAIST, WAVELENGTH, z=10.0)
    with pytest.raises(DimensionError):
        modal_coefficients(*moved, basis)
    other = GridSpec.for_waist(WAIST, n_samples=512)
    with pytest.raises(DimensionError):
        modal_coefficients(*lg_basis(1, other, WAIST, WAVELENGTH), basis)


def test_coefficients_reject_power_gain():
    with pytest.raises(ValidationError):
        ModalCoefficients(1.0, 0.5, 0.0, 1.0)
    ModalCoefficients(1.0, 1e-4, 0.0, 1.0)


def test_coefficient_matrix_round_trip(rng):
    u = oracles.random_unitary(rng)
    np.testing.assert_array_equal(ModalCoefficients.from_matrix(u).as_matrix(), u)


# Projection


def test_single_photon_identity_is_bell():
    state = project_single_photon(ModalCoefficients.identity())
    np.testing.assert_allclose(state.amplitudes, [0, np.sqrt(0.5), np.sqrt(0.5), 0])


def test_single_photon_total_loss():
    state = project_single_photon(ModalCoefficients(0, 0, 0, 0))
    assert state.norm2 == 0


def test_two_photon_identity_is_bell():
    ident = ModalCoefficients.identity()
    np.testing.assert_allclose(project_two_photon(ident, ident).amplitudes, BELL_STATE.amplitudes)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_single_photon_unitary_preserves_norm(seed):
    rng = np.random.default_rng(seed)
    u = oracles.random_unitary(rng)
    state = project_single_photon(ModalCoefficients.from_matrix(u))
    assert state.norm2 == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(state.amplitudes, oracles.tensor_projection(u, np.eye(2)), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_two_photon_matches_tensor_product(seed):
    rng = np.random.default_rng(seed)
    u_a, u_b = oracles.random_unitary(rng), oracles.random_unitary(rng)
    state = project_two_photon(ModalCoefficients.from_matrix(u_a), ModalCoefficients.from_matrix(u_b))
    np.testing.assert_allclose(state.amplitudes, oracles.tensor_projection(u_a, u_b), atol=1e-14)
    assert state.norm2 == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=seeds, scale=st.floats(0.0, 1.0))
def test_two_photon_with_ideal_arm_b_reduces_to_single(seed, scale):
    rng = np.random.default_rng(seed)
    arm_a = random_coefficients(rng, scale)
    two = project_two_photon(arm_a, ModalCoefficients.identity())
    one = project_single_photon(arm_a)
    assert np.array_equal(two.amplitudes, one.amplitudes)


def test_vectorized_projection_agrees(rng):
    arms = [random_coefficients(rng, 0.9) for _ in range(6)]
    stack = np.array([[c.plus_to_plus, c.plus_to_minus, c.minus_to_plus, c.minus_to_minus] for c in arms])
    np.testing.assert_allclose(project_amplitudes(stack), [project_single_photon(c).amplitudes for c in arms])
    two = project_amplitudes(stack[:3], stack[3:])
    ref = [project_two_photon(a, b).amplitudes for a, b in zip(arms[:3], arms[3:])]
    np.testing.assert_allclose(two, ref)


# Density matrices


def test_accumulate_single_bell():
    rho = accumulate_density([BELL_STATE]).rho
    expected = np.zeros((4, 4))
    expected[1:3, 1:3] = 0.5
    np.testing.assert_allclose(rho, expected, atol=1e-15)


def test_accumulate_incoherent_mix():
    states = [ProjectedPureState([0, 1, 0, 0]), ProjectedPureState([0, 0, 1, 0])]
    np.testing.assert_allclose(accumulate_density(states).rho, np.diag([0, 0.5, 0.5, 0]), atol=1e-15)


def test_accumulate_matches_direct_sum(rng):
    amps = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    direct = np.zeros((4, 4), dtype=complex)
    for a in amps:
        for i in range(4):
            for j in range(4):
                direct[i, j] += a[i] * np.conj(a[j])
    direct /= np.trace(direct)
    rho = accumulate_density(ProjectedPureState(a) for a in amps).rho
    np.testing.assert_allclose(rho, direct, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_accumulate_empty_or_zero():
    with pytest.raises(DegenerateEnsembleError):
        accumulate_density([])
    with pytest.raises(DegenerateEnsembleError):
        accumulate_density([ProjectedPureState(np.zeros(4))])


@settings(max_examples=30, deadline=None)
@given(seed=seeds, split=st.integers(0, 12))
def test_accumulator_merge_order_independent(seed, split):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=(12, 4)) + 1j * rng.normal(size=(12, 4))
    whole = DensityAccumulator().add_many(amps)
    left = DensityAccumulator().add_many(amps[:split])
    right = DensityAccumulator().add_many(amps[split:])
    merged = right.merge(left)
    assert merged.count == 12
    np.testing.assert_allclose(merged.result().rho, whole.result().rho, atol=1e-13)


def test_density_matrix_validation():
    with pytest.raises(ValidationError):
        TwoQubitDensityMatrix(np.diag([1.0, 1.0, 0, 0]))
    with pytest.raises(ValidationError):
        TwoQubitDensityMatrix(np.diag([1.1, -0.1, 0, 0]))
    m = np.eye(4) / 4
    m[0, 1] = 0.1
    with pytest.raises(ValidationError):
        TwoQubitDensityMatrix(m)
    with pytest.raises(DimensionError):
        TwoQubitDensityMatrix(np.eye(2) / 2)


def test_density_json_round_trip(rng):
    rho = TwoQubitDensityMatrix(random_density(rng))
    doc = json.loads(json.dumps(rho.to_json()))
    assert doc["basis"] == ["q,q", "q,-q", "-q,q", "-q,-q"]
    back = density_from_json(doc, physical=False)
    np.testing.assert_array_equal(back.rho, rho.rho)


# Concurrence


def test_concurrence_bell():
    assert concurrence(BELL_STATE.projector()) == pytest.approx(1.0, abs=1e-12)


def test_concurrence_maximally_mixed():
    assert concurrence(np.eye(4) / 4) == 0.0


@pytest.mark.parametrize("p", [0.0, 1 / 3, 0.6, 0.9, 1.0])
def test_concurrence_werner(p):
    expected = max(0.0, (3 * p - 1) / 2)
    assert concurrence(oracles.werner(p)) == pytest.approx(expected, abs=1e-9)
    assert oracles.concurrence_general_eig(oracles.werner(p)) == pytest.approx(expected, abs=1e-7)


def test_concurrence_werner_point():
    assert abs(concurrence(oracles.werner(0.6)) - 0.4) < 1e-9


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_concurrence_two_routes(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, rank=int(rng.integers(1, 5)))
    assert concurrence(rho) == pytest.approx(oracles.concurrence_high_precision(rho), abs=1e-12)


def test_concurrence_local_unitary_invariance():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        rho = random_density(rng, rank=int(rng.integers(1, 5)))
        u = np.kron(oracles.random_unitary(rng), oracles.random_unitary(rng))
        assert abs(concurrence(u @ rho @ u.conj().T) - concurrence(rho)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_concurrence_qubit_swap_invariance(seed):
    rho = random_density(np.random.default_rng(seed), rank=2)
    perm = [0, 2, 1, 3]
    assert concurrence(rho[np.ix_(perm, perm)]) == pytest.approx(concurrence(rho), abs=1e-12)


def test_concurrence_rejects_non_hermitian():
    m = np.eye(4, dtype=complex) / 4
    m[0, 3] = 0.01j
    with pytest.raises(ValidationError):
        concurrence(m)


def test_concurrence_many_matches_scalar(rng):
    rhos = np.array([random_density(rng, rank=int(rng.integers(1, 5))) for _ in range(20)])
    np.testing.assert_allclose(concurrence_many(rhos), [concurrence(r) for r in rhos], atol=1e-12)


def test_concurrence_accepts_density_object():
    assert concurrence(TwoQubitDensityMatrix(BELL_STATE.projector())) == pytest.approx(1.0)


# Physical projection


def test_project_physical_idempotent(rng):
    rho = random_density(rng)
    np.testing.assert_allclose(project_to_physical(rho).rho, rho, atol=1e-12)
    once = project_to_physical(rho).rho
    np.testing.assert_allclose(project_to_physical(once).rho, once, atol=1e-12)


def test_project_physical_clips_negative_mode():
    out = project_to_physical(np.diag([1.1, -0.1, 0.0, 0.0])).rho
    np.testing.assert_allclose(out, np.diag([1.0, 0, 0, 0]), atol=1e-15)


def test_project_physical_perturbed_werner():
    rng = np.random.default_rng(7)
    base = oracles.werner(0.95)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (h + h.conj().T) / 2
    h -= np.trace(h) / 4 * np.eye(4)
    # Scale the perturbation so that the smallest eigenvalue is -0.02.
    from scipy.optimize import brentq

    t = brentq(lambda s: np.linalg.eigvalsh(base + s * h).min() + 0.02, 0, 10)
    raw = base + t * h
    assert np.linalg.eigvalsh(raw).min() == pytest.approx(-0.02, abs=1e-12)
    out = project_to_physical(raw).rho
    assert np.linalg.eigvalsh(out).min() >= -1e-12
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
    # Oracle: rebuild from an explicit eigen decomposition, eigenvector by eigenvector.
    w, v = np.linalg.eig(raw)
    w = np.clip(w.real, 0, None)
    ref = sum(w[i] * np.outer(v[:, i], v[:, i].conj()) / np.vdot(v[:, i], v[:, i]) for i in range(4))
    ref /= np.trace(ref).real
    assert np.linalg.norm(out - raw) <= np.linalg.norm(ref - raw) + 1e-12
    np.testing.assert_allclose(out, ref, atol=1e-10)


def test_project_physical_all_negative():
    with pytest.raises(DegenerateEnsembleError):
        project_to_physical(-np.eye(4))


def test_density_from_json_projects_external_matrix():
    rows = [[[v, 0.0] for v in row] for row in np.diag([1.1, -0.1, 0, 0])]
    rho = density_from_json({"rho": rows})
    np.testing.assert_allclose(rho.rho, np.diag([1.0, 0, 0, 0]), atol=1e-15)
