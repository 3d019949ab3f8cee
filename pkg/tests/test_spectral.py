import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from mixbound.spectral import (
    ScalarSamples,
    SpectralField,
    TruncationSensitiveWarning,
    VectorSamples,
    divergence_max,
    filamentation_length,
    forward,
    grad_l2_norm,
    inv_grad_l2_norm,
    inverse,
    is_mean_free,
    l2_norm,
    low_mode_mass,
    make_grid,
)


def samples(g, values):
    return ScalarSamples(g, np.broadcast_to(values, g.shape).copy())


def gaussian(g, sigma=1.0):
    r2 = sum(x**2 for x in g.coords())
    return forward(samples(g, np.exp(-r2 / (2 * sigma**2))))


def dipole(g):
    x, y = g.coords()
    return forward(samples(g, -x * np.exp(-(x**2 + y**2) / 2)))


# ---- grid


def test_grid_spacings():
    g = make_grid(2, 64, 20)
    assert g.dx == pytest.approx(0.625)
    assert g.dxi == pytest.approx(math.pi / 20)


def test_grid_lattice_3d():
    g = make_grid(3, 16, 10)
    assert g.shape == (16, 16, 16)
    k = np.rint(g.xi1d / g.dxi).astype(int)
    assert sorted(k.tolist()) == list(range(-8, 8))


@pytest.mark.parametrize("args", [(2, 63, 20), (4, 64, 20), (1, 64, 20), (2, 64, 0), (2, 8, 1)])
def test_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


# ---- transforms


def test_constant_transform():
    g = make_grid(2, 32, 5)
    f = forward(samples(g, 1.0))
    assert f.zero_mode == pytest.approx((2 * g.half_width) ** 2)
    rest = f.coeffs.copy()
    rest[0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-10


def test_cosine_has_two_modes():
    g = make_grid(2, 32, 5)
    x, _ = g.coords()
    f = forward(samples(g, np.cos(math.pi * x / g.half_width)))
    big = np.argwhere(np.abs(f.coeffs) > 1e-8)
    assert sorted(map(tuple, big)) == [(1, 0), (31, 0)]
    assert f.coeffs[1, 0].real == pytest.approx((2 * g.half_width) ** 2 / 2)


@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3]))
def test_round_trip(seed, d):
    g = make_grid(d, 16, 3.0)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    back = inverse(forward(ScalarSamples(g, v))).values
    assert np.max(np.abs(back - v)) <= 1e-12 * np.max(np.abs(v))


@given(seed=st.integers(0, 2**32 - 1))
def test_real_field_is_conjugate_symmetric(seed):
    g = make_grid(2, 32, 4.0)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    assert forward(ScalarSamples(g, v)).hermitian_defect() < 1e-12


def test_shape_mismatch():
    g = make_grid(2, 32, 4.0)
    with pytest.raises(ValueError):
        ScalarSamples(g, np.zeros((16, 16)))
    with pytest.raises(ValueError):
        SpectralField(g, np.zeros((16, 16), complex))
    with pytest.raises(ValueError):
        ScalarSamples(g, np.full(g.shape, np.nan))


# ---- norms


def test_gaussian_l2():
    g = make_grid(2, 256, 20)
    assert l2_norm(gaussian(g)) == pytest.approx(math.sqrt(math.pi), rel=1e-6)


def test_zero_field_norms():
    g = make_grid(2, 32, 4.0)
    z = SpectralField(g, np.zeros(g.shape, complex))
    assert l2_norm(z) == 0 and grad_l2_norm(z) == 0 and inv_grad_l2_norm(z) == 0
    with pytest.raises(ValueError):
        filamentation_length(z)


def test_sine_l2_against_quadrature():
    g = make_grid(2, 64, 20)
    x, _ = g.coords()
    v = np.broadcast_to(np.sin(math.pi * x / g.half_width), g.shape)
    # brute-force midpoint sum in physical space
    direct = math.sqrt(sum(float(val) ** 2 for val in v.ravel()) * g.dx**2)
    assert l2_norm(forward(samples(g, v))) == pytest.approx(direct, rel=1e-10)
    assert direct == pytest.approx(math.sqrt((2 * g.half_width) ** 2 / 2), rel=1e-12)


@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3]))
def test_plancherel(seed, d):
    g = make_grid(d, 16, 2.5)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    physical = math.sqrt(float(np.sum(v**2)) * g.cell_volume)
    assert l2_norm(forward(ScalarSamples(g, v))) == pytest.approx(physical, rel=1e-10)


def test_grad_of_unit_mode():
    g = make_grid(2, 64, 8 * math.pi)
    x, _ = g.coords()
    f = forward(samples(g, np.sin(x)))
    assert grad_l2_norm(f) == pytest.approx(l2_norm(f), rel=1e-12)


def test_grad_of_gaussian_against_symbolic():
    r, phi = sp.symbols("r phi", positive=True)
    # |grad exp(-r^2/2)|^2 = r^2 exp(-r^2), integrated in polar coordinates
    exact = sp.integrate(sp.integrate(r**2 * sp.exp(-(r**2)) * r, (r, 0, sp.oo)), (phi, 0, 2 * sp.pi))
    g = make_grid(2, 256, 20)
    assert grad_l2_norm(gaussian(g)) == pytest.approx(math.sqrt(float(exact)), rel=1e-8)


def test_grad_of_constant():
    g = make_grid(2, 32, 4.0)
    assert grad_l2_norm(forward(samples(g, 3.0))) < 1e-12


def test_inv_grad_single_mode():
    g = make_grid(2, 64, 4 * math.pi)
    x, _ = g.coords()
    f = forward(samples(g, 0.7 * np.cos(2 * x)))
    assert inv_grad_l2_norm(f) == pytest.approx(l2_norm(f) / 2, rel=1e-12)
    assert filamentation_length(f) == pytest.approx(0.5, rel=1e-12)


def _dipole_lattice_sums(g):
    # independent evaluation from the closed-form transform of -x exp(-|x|^2/2):
    # |coeffs|^2 = 4 pi^2 xi_1^2 exp(-|xi|^2)
    k = np.arange(-g.n // 2, g.n // 2) * g.dxi
    l2 = hm1 = 0.0
    for a in k:
        for b in k:
            p = 4 * math.pi**2 * a * a * math.exp(-(a * a + b * b))
            l2 += p
            if a or b:
                hm1 += p / (a * a + b * b)
    w = (g.dxi / (2 * math.pi)) ** 2
    return math.sqrt(l2 * w), math.sqrt(hm1 * w)


def test_dipole_inverse_gradient_and_lambda():
    g = make_grid(2, 128, 12)
    f = dipole(g)
    l2_o, hm1_o = _dipole_lattice_sums(g)
    assert inv_grad_l2_norm(f) == pytest.approx(hm1_o, rel=1e-9)
    assert filamentation_length(f) == pytest.approx(hm1_o / l2_o, rel=1e-9)
    # continuum value is sqrt(pi/2); the lattice misses only the origin cell
    assert inv_grad_l2_norm(f) == pytest.approx(math.sqrt(math.pi / 2), rel=2e-2)


@given(c=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3), seed=st.integers(0, 1000))
def test_lambda_scale_invariant(c, seed):
    g = make_grid(2, 16, 3.0)
    f = forward(ScalarSamples(g, np.random.default_rng(seed).standard_normal(g.shape)))
    assert filamentation_length(c * f) == pytest.approx(filamentation_length(f), rel=1e-12)


@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3]), mean=st.booleans())
def test_interpolation_inequality(seed, d, mean):
    g = make_grid(d, 16, 2.0)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    if not mean:
        v -= v.mean()
    f = forward(ScalarSamples(g, v))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationSensitiveWarning)
        rhs = grad_l2_norm(f) * inv_grad_l2_norm(f)
    assert l2_norm(f, exclude_zero_mode=True) ** 2 <= rhs * (1 + 1e-12)


def test_mean_warning_in_2d_only():
    g2 = make_grid(2, 64, 12)
    with pytest.warns(TruncationSensitiveWarning):
        inv_grad_l2_norm(gaussian(g2))
    assert is_mean_free(dipole(g2))
    g3 = make_grid(3, 16, 6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        inv_grad_l2_norm(gaussian(g3, sigma=1.5))


# ---- low-mode mass


def test_low_mode_mass_total():
    g = make_grid(2, 64, 10)
    f = gaussian(g)
    assert low_mode_mass(f, 1e9) == pytest.approx((2 * math.pi) ** 2 * l2_norm(f) ** 2, rel=1e-12)


def test_low_mode_mass_unresolvable():
    g = make_grid(2, 64, 10)
    with pytest.raises(ValueError, match="unresolvable shell"):
        low_mode_mass(gaussian(g), g.dxi / 2)


@given(a=st.floats(1.0, 20.0), b=st.floats(1.0, 20.0))
def test_low_mode_mass_monotone_and_additive(a, b):
    g = make_grid(2, 64, 10)
    f = dipole(g)
    lo, hi = sorted((a * g.dxi, b * g.dxi))
    F_lo, F_hi = low_mode_mass(f, lo), low_mode_mass(f, hi)
    assert F_lo <= F_hi
    shell = (g.xi_abs > lo) & (g.xi_abs <= hi)
    assert F_hi - F_lo == pytest.approx(
        float(np.sum(np.abs(f.coeffs[shell]) ** 2)) * g.dxi**2, rel=1e-9, abs=1e-14 * F_hi
    )


# ---- divergence


def test_divergence_of_rotational_field():
    g = make_grid(2, 128, 10)
    x, y = g.coords()
    w = np.exp(-(x**2 + y**2) / 2)
    v = VectorSamples(g, (np.broadcast_to(-y * w, g.shape).copy(), np.broadcast_to(x * w, g.shape).copy()))
    scale = v.sup_norm() * g.k_max
    assert divergence_max(v) <= 1e-8 * scale


def test_divergence_of_compressive_field():
    # periodic stand-in for (x, 0): (L/pi) sin(pi x / L) has divergence cos(pi x / L)
    g = make_grid(2, 64, 10)
    x, _ = g.coords()
    u = np.broadcast_to(g.half_width / math.pi * np.sin(math.pi * x / g.half_width), g.shape).copy()
    v = VectorSamples(g, (u, np.zeros(g.shape)))
    assert divergence_max(v) == pytest.approx(1.0, rel=1e-10)


def test_divergence_of_zero():
    g = make_grid(2, 32, 4)
    assert divergence_max(VectorSamples(g, (np.zeros(g.shape),) * 2)) == 0.0
