import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamturb.exceptions import DimensionError, DomainError, SamplingError
from oamturb.grid import GridSpec, SampledField, apply_phase, inner_product, propagate_free_space
from oamturb.modes import LGModeSpec, evaluate_lg
from oamturb.turbulence import PhaseScreen, generate_screen_pair

from conftest import WAIST, WAVELENGTH


def lg(grid, ell, p=0, z=0.0):
    return evaluate_lg(LGModeSpec(ell, p, WAIST, WAVELENGTH, z), grid)


def test_grid_defaults():
    g = GridSpec()
    assert g.n_samples == 256
    assert g.side == pytest.approx(8 * WAIST)
    assert g.coords()[128] == 0.0


@pytest.mark.parametrize("n", [32, 100, 255])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(SamplingError):
        GridSpec(n, 1e-3)


def test_grid_rejects_bad_pitch():
    with pytest.raises(DomainError):
        GridSpec(64, 0.0)


def test_waist_guards():
    with pytest.raises(SamplingError, match="samples"):
        GridSpec(256, 0.01).check_waist(0.1)
    with pytest.raises(SamplingError, match="waists"):
        GridSpec(64, 0.001).check_waist(0.02)
    GridSpec.for_waist(0.1).check_waist(0.1)


def test_inner_product_normalized_mode(grid):
    f = lg(grid, 1)
    assert abs(inner_product(f, f) - 1) < 1e-3


def test_inner_product_opposite_helicity(grid):
    assert abs(inner_product(lg(grid, 1), lg(grid, -1))) < 1e-6


def test_inner_product_radial_orthogonality_against_quadrature(grid):
    """Discrete overlap of p = 0 and p = 1 against a fine radial quadrature."""
    from scipy.integrate import quad

    # Polar-coordinate oracle: both modes are real at z = 0 with l = 0.
    def mode(r, p):
        x = 2 * r**2 / WAIST**2
        lag = 1.0 if p == 0 else 1 - x
        return np.sqrt(2 / np.pi) / WAIST * lag * np.exp(-(r**2) / WAIST**2)

    exact, _ = quad(lambda r: 2 * np.pi * r * mode(r, 0) * mode(r, 1), 0, 10 * WAIST)
    discrete = inner_product(lg(grid, 0, 0), lg(grid, 0, 1))
    assert abs(exact) < 1e-12
    assert abs(discrete - exact) < 1e-3


def test_inner_product_grid_mismatch(grid):
    other = GridSpec(128, grid.pitch * 2)
    with pytest.raises(DimensionError):
        inner_product(lg(grid, 1), lg(other, 1))


def test_inner_product_wavelength_mismatch(grid):
    f = lg(grid, 1)
    g = SampledField(grid, f.values, 2 * WAVELENGTH)
    with pytest.raises(DimensionError):
        inner_product(f, g)


@settings(max_examples=25, deadline=None)
@given(
    re=st.floats(-5, 5),
    im=st.floats(-5, 5),
    ell_a=st.integers(-3, 3),
    ell_b=st.integers(-3, 3),
)
def test_inner_product_sesquilinear_and_conjugate_symmetric(re, im, ell_a, ell_b):
    g = GridSpec.for_waist(WAIST, n_samples=128, window_over_waist=8.0)
    a, b = lg(g, ell_a), lg(g, ell_b)
    alpha = complex(re, im)
    ab = inner_product(a, b)
    assert inner_product(b, a) == pytest.approx(np.conj(ab), abs=1e-14)
    assert inner_product(alpha * a, b) == pytest.approx(np.conj(alpha) * ab, abs=1e-12)
    assert inner_product(a, alpha * b) == pytest.approx(alpha * ab, abs=1e-12)


def test_propagation_matches_analytic_mode_at_rayleigh_range(grid):
    spec = LGModeSpec(0, 0, WAIST, WAVELENGTH)
    moved = propagate_free_space(evaluate_lg(spec, grid), spec.rayleigh_range)
    analytic = evaluate_lg(spec.at(spec.rayleigh_range), grid)
    assert abs(inner_product(analytic, moved)) >= 0.999


def test_propagation_zero_distance_is_identity(grid):
    f = lg(grid, 3)
    g = propagate_free_space(f, 0.0)
    assert np.max(np.abs(g.values - f.values)) < 1e-12


def test_propagation_conserves_power(grid):
    spec = LGModeSpec(3, 0, WAIST, WAVELENGTH)
    f = evaluate_lg(spec, grid)
    g = propagate_free_space(f, spec.rayleigh_range / 2)
    assert g.power() == pytest.approx(f.power(), rel=1e-9)
    assert g.z == pytest.approx(spec.rayleigh_range / 2)


def test_propagation_composes(grid):
    f = lg(grid, 2)
    zr = LGModeSpec(2, 0, WAIST, WAVELENGTH).rayleigh_range
    two_steps = propagate_free_space(propagate_free_space(f, 0.2 * zr), 0.3 * zr)
    one_step = propagate_free_space(f, 0.5 * zr)
    diff = SampledField(grid, two_steps.values - one_step.values, WAVELENGTH).power()
    assert np.sqrt(diff) < 1e-9


def test_propagation_negative_distance(grid):
    with pytest.raises(DomainError):
        propagate_free_space(lg(grid, 1), -1.0)


def test_propagation_aliasing_guard(grid):
    zr = LGModeSpec(7, 0, WAIST, WAVELENGTH).rayleigh_range
    with pytest.raises(SamplingError):
        propagate_free_space(lg(grid, 7), 5 * zr)


def test_apply_phase_zero_and_pi(grid):
    f = lg(grid, 1)
    assert np.array_equal(apply_phase(f, np.zeros((256, 256))).values, f.values)
    g = apply_phase(f, np.full((256, 256), np.pi))
    np.testing.assert_allclose(g.values, -f.values, atol=1e-15)
    assert g.power() == pytest.approx(f.power(), rel=1e-14)


def test_apply_phase_random_screen_is_unimodular(grid):
    f = lg(grid, 1)
    screen = generate_screen_pair(grid, 4, r0=WAIST / 3)[0]
    g = apply_phase(f, screen)
    # Fields carry 1/m units; compare at unit peak amplitude.
    peak = np.max(np.abs(f.values))
    assert np.max(np.abs(np.abs(g.values) - np.abs(f.values))) / peak < 1e-15


def test_apply_phase_grid_mismatch(grid):
    other = GridSpec(128, 1e-3)
    screen = PhaseScreen(other, np.zeros((128, 128)), np.inf, 0)
    with pytest.raises(DimensionError):
        apply_phase(lg(grid, 1), screen)


def test_sampled_field_is_immutable(grid):
    f = lg(grid, 1)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0
