import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from mixbound.fields import (
    InitialDataSpec,
    VelocityFieldSpec,
    analytic_decay_character,
    as_fraction,
    grad_velocity_sup,
    lp_decay_character,
    sample_initial_data,
    sample_velocity,
    smooth_taper,
    velocity_gradient,
    velocity_l2,
    velocity_rates,
)
from mixbound.spectral import divergence_max, l2_norm, low_mode_mass, make_grid, spectral_gradient
from mixbound.spectral import SpectralField, forward, ScalarSamples

nus = st.sampled_from([Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3, 2)])


def test_as_fraction():
    assert as_fraction("1/2") == Fraction(1, 2)
    assert as_fraction(2) == 2
    assert as_fraction(0.25) == Fraction(1, 4)


# ---- initial data


def test_gaussian_l2():
    g = make_grid(2, 256, 20)
    assert l2_norm(sample_initial_data(InitialDataSpec("gaussian"), g)) == pytest.approx(
        math.sqrt(math.pi), rel=1e-6
    )


def test_dipole_zero_mode_exact():
    g = make_grid(2, 128, 10)
    f = sample_initial_data(InitialDataSpec("dipole"), g)
    assert f.zero_mode == 0
    # the closed form transform is i xi_1 * 2 pi exp(-|xi|^2/2)
    xi1, xi2 = g.frequencies()
    exact = 1j * xi1 * 2 * math.pi * np.exp(-(xi1**2 + xi2**2) / 2)
    assert np.max(np.abs(f.coeffs - exact)) < 1e-10


def test_gaussian_coefficients_match_transform():
    g = make_grid(3, 48, 7)
    f = sample_initial_data(InitialDataSpec("gaussian", amplitude=2.0), g)
    exact = 2.0 * (2 * math.pi) ** 1.5 * np.exp(-g.xi_sq / 2)
    assert np.max(np.abs(f.coeffs - exact)) < 1e-9


def test_power_law_shell_slope():
    g = make_grid(2, 512, 200)
    f = sample_initial_data(InitialDataSpec("fourier_power_law", exponent=0.5, cutoff=1.0), g)
    deltas = np.geomspace(4 * g.dxi, 0.5, 20)
    F = [low_mode_mass(f, d) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(F), 1)[0]
    assert slope == pytest.approx(2 * 0.5 + 2, abs=0.05)


def test_power_law_is_real_and_seeded():
    g = make_grid(2, 64, 40)
    spec = InitialDataSpec("fourier_power_law", exponent=0.5, cutoff=1.0, seed=3)
    a = sample_initial_data(spec, g)
    assert a.hermitian_defect() < 1e-12
    assert np.array_equal(a.coeffs, sample_initial_data(spec, g).coeffs)
    other = sample_initial_data(InitialDataSpec("fourier_power_law", exponent=0.5, cutoff=1.0, seed=4), g)
    assert not np.array_equal(a.coeffs, other.coeffs)
    # power law with a > 0 has no mean; a = 0 keeps its plateau value at the origin
    assert a.zero_mode == 0
    flat = sample_initial_data(InitialDataSpec("fourier_power_law", exponent=0.0, cutoff=1.0), g)
    assert abs(flat.zero_mode) == pytest.approx(1.0)


def test_taper():
    r = np.linspace(0, 3, 301)
    w = smooth_taper(r, 1.0, 0.5)
    assert np.all(w[r <= 1.0] == 1.0) and np.all(w[r >= 1.5] == 0.0)
    assert np.all(np.diff(w) <= 0)


@pytest.mark.parametrize(
    "spec, grid, needle",
    [
        (InitialDataSpec("gaussian", sigma=0.1), (2, 64, 10), "use n >="),
        (InitialDataSpec("gaussian", center=(8.0, 0.0)), (2, 256, 10), "half_width >="),
        (InitialDataSpec("fourier_power_law", exponent=0.5, cutoff=0.2), (2, 64, 20), "half_width >="),
        (InitialDataSpec("fourier_power_law", exponent=0.5, cutoff=3.0), (2, 64, 40), "use n >="),
    ],
)
def test_under_resolved(spec, grid, needle):
    with pytest.raises(ValueError, match=needle):
        sample_initial_data(spec, make_grid(*grid))


def test_unknown_family():
    with pytest.raises(ValueError):
        InitialDataSpec("sawtooth")
    with pytest.raises(ValueError):
        VelocityFieldSpec("cellular")


def test_analytic_decay_character():
    assert analytic_decay_character(InitialDataSpec("gaussian")) == 0
    assert analytic_decay_character(InitialDataSpec("dipole")) == 1
    assert analytic_decay_character(InitialDataSpec("fourier_power_law", exponent=0.5)) == 0.5


def test_lp_decay_character_table():
    assert lp_decay_character(2, 1.0) == 0
    assert lp_decay_character(3, 6 / 5) == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        lp_decay_character(2, 3.0)


# ---- velocity


def test_shear_at_t0_is_profile():
    g = make_grid(2, 64, 8)
    v = sample_velocity(VelocityFieldSpec("modified_shear", nu=2), 0.0, g)
    x, y = g.coords()
    w = np.exp(-(x**2 + y**2) / 2)
    assert np.allclose(v.components[0], -y * w, rtol=0, atol=1e-15)
    assert np.allclose(v.components[1], x * w, rtol=0, atol=1e-15)


def test_shear_at_t3_is_sixteenth():
    g = make_grid(2, 64, 8)
    spec = VelocityFieldSpec("modified_shear", nu=2)
    v0 = sample_velocity(spec, 0.0, g)
    v3 = sample_velocity(spec, 3.0, g)
    for a, b in zip(v0.components, v3.components):
        assert np.array_equal(b, a / 16)


@given(nu=nus, t=st.floats(0, 1e3))
def test_envelope_separable(nu, t):
    g = make_grid(2, 16, 6)
    spec = VelocityFieldSpec("modified_shear", nu=nu, amplitude=1.7)
    v0 = sample_velocity(spec, 0.0, g)
    vt = sample_velocity(spec, t, g)
    s = (1 + t) ** (-float(nu))
    for a, b in zip(v0.components, vt.components):
        assert np.allclose(b, s * a, rtol=1e-14, atol=0)


@pytest.mark.parametrize(
    "spec, grid",
    [
        (VelocityFieldSpec("modified_shear", nu=2), (2, 128, 10)),
        (VelocityFieldSpec("gaussian_swirl3d", nu=1), (3, 48, 9)),
        (VelocityFieldSpec("gaussian_swirl3d", nu=1, axis=(1.0, 2.0, -0.5)), (3, 48, 9)),
        (VelocityFieldSpec("frozen", base="modified_shear"), (2, 128, 10)),
    ],
)
def test_divergence_free(spec, grid):
    g = make_grid(*grid)
    v = sample_velocity(spec, 2.5, g)
    assert divergence_max(v) <= 1e-8 * v.sup_norm() * g.k_max


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        sample_velocity(VelocityFieldSpec("gaussian_swirl3d"), 0.0, make_grid(2, 32, 8))


def test_rates():
    assert velocity_rates(VelocityFieldSpec("modified_shear", nu=2)) == (2, 2)
    assert velocity_rates(VelocityFieldSpec("frozen", nu=3, base="modified_shear")) == (0, 0)
    assert velocity_rates(VelocityFieldSpec("modified_shear", nu="1/2")) == (Fraction(1, 2), Fraction(1, 2))
    with pytest.raises(ValueError):
        VelocityFieldSpec("frozen")


def test_shear_l2_against_polar_quadrature():
    val, _ = integrate.quad(lambda r: math.exp(-r * r) * r * r * 2 * math.pi * r, 0, np.inf)
    spec = VelocityFieldSpec("modified_shear")
    assert val == pytest.approx(math.pi, rel=1e-12)
    assert velocity_l2(spec, 0.0) == pytest.approx(math.sqrt(val), rel=1e-8)


def test_swirl_l2_against_spherical_quadrature():
    # |a x x|^2 = r^2 sin^2(theta); int sin^3 = 4/3
    val, _ = integrate.quad(lambda r: math.exp(-r * r) * r**4 * 2 * math.pi * 4 / 3, 0, np.inf)
    assert velocity_l2(VelocityFieldSpec("gaussian_swirl3d"), 0.0) == pytest.approx(math.sqrt(val), rel=1e-6)


@given(nu=nus, t=st.floats(0, 1e4))
def test_norm_envelopes(nu, t):
    spec = VelocityFieldSpec("modified_shear", nu=nu, amplitude=2.0)
    assert velocity_l2(spec, 3.0) / velocity_l2(spec, 0.0) == pytest.approx(4.0 ** (-float(nu)), rel=1e-14)
    assert grad_velocity_sup(spec, t) * (1 + t) ** float(nu) == pytest.approx(
        grad_velocity_sup(spec, 0.0), rel=1e-12
    )


def test_shear_gradient_sup_is_one():
    # the Jacobian at the origin is the unit rotation generator
    assert grad_velocity_sup(VelocityFieldSpec("modified_shear"), 0.0) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize(
    "spec, grid",
    [
        (VelocityFieldSpec("modified_shear", nu=1), (2, 96, 9)),
        (VelocityFieldSpec("gaussian_swirl3d", nu=1, axis=(0.3, -1.0, 0.6)), (3, 48, 9)),
    ],
)
def test_velocity_gradient_matches_spectral(spec, grid):
    g = make_grid(*grid)
    v = sample_velocity(spec, 1.0, g)
    jac = velocity_gradient(spec, 1.0, g)
    for i, comp in enumerate(v.components):
        grads = spectral_gradient(forward(ScalarSamples(g, comp)))
        for j in range(g.d):
            assert np.max(np.abs(grads[j] - jac[..., i, j])) < 1e-8
