"""Catalogs of initial data and decaying divergence-free velocity fields.

Initial data carry their analytic decay character r*; velocity fields are
separable, u(x, t) = A (1+t)^-nu V(x), so the L^2 decay rate alpha and the
gradient decay rate nu coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .spectral import Grid, ScalarSamples, SpectralField, VectorSamples, forward

INITIAL_FAMILIES = ("gaussian", "dipole", "fourier_power_law")
VELOCITY_FAMILIES = ("modified_shear", "gaussian_swirl3d", "frozen")

# minimum number of grid spacings per Gaussian width
POINTS_PER_SIGMA = 3.0
# minimum number of lattice shells below the power-law plateau edge
SHELLS_BELOW_CUTOFF = 8


def as_fraction(value) -> Fraction:
    """Parse ``2``, ``0.5`` or ``"1/2"`` into an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    return Fraction(str(value).strip())


@dataclass(frozen=True)
class InitialDataSpec:
    family: str
    amplitude: float = 1.0
    sigma: float = 1.0
    center: tuple[float, ...] | None = None
    exponent: float = 0.0
    cutoff: float = 1.0
    taper_width: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.family not in INITIAL_FAMILIES:
            raise ValueError(
                f"unknown initial-data family {self.family!r}; expected one of {INITIAL_FAMILIES}"
            )
        if self.sigma <= 0 or self.cutoff <= 0 or self.taper_width <= 0:
            raise ValueError("sigma, cutoff and taper_width must be positive")


@dataclass(frozen=True)
class VelocityFieldSpec:
    family: str
    nu: Fraction = Fraction(0)
    amplitude: float = 1.0
    base: str | None = None
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.family not in VELOCITY_FAMILIES:
            raise ValueError(
                f"unknown velocity family {self.family!r}; expected one of {VELOCITY_FAMILIES}"
            )
        object.__setattr__(self, "nu", as_fraction(self.nu))
        if self.family == "frozen":
            if self.base not in ("modified_shear", "gaussian_swirl3d"):
                raise ValueError("frozen velocity needs base = modified_shear or gaussian_swirl3d")
            object.__setattr__(self, "nu", Fraction(0))
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        norm = math.sqrt(sum(a * a for a in self.axis))
        if norm == 0:
            raise ValueError("swirl axis must be nonzero")
        object.__setattr__(self, "axis", tuple(float(a) / norm for a in self.axis))

    @property
    def profile(self) -> str:
        return self.base if self.family == "frozen" else self.family

    @property
    def d(self) -> int:
        return 2 if self.profile == "modified_shear" else 3

    def envelope(self, t: float) -> float:
        return self.amplitude * (1.0 + t) ** (-float(self.nu))


# ---------------------------------------------------------------- initial data


def _check_resolution(spec: InitialDataSpec, g: Grid) -> None:
    if spec.family in ("gaussian", "dipole"):
        if spec.sigma < POINTS_PER_SIGMA * g.dx:
            n_req = int(2 ** math.ceil(math.log2(POINTS_PER_SIGMA * 2 * g.half_width / spec.sigma)))
            raise ValueError(
                f"{spec.family} with sigma={spec.sigma} is under-resolved on dx={g.dx:.4g}; "
                f"use n >= {n_req} at half_width={g.half_width}"
            )
        c = np.zeros(g.d) if spec.center is None else np.asarray(spec.center, float)
        reach = float(np.max(np.abs(c))) + 6.0 * spec.sigma
        if reach > g.half_width:
            raise ValueError(
                f"{spec.family} support reaches {reach:.3g} > half_width={g.half_width}; "
                f"use half_width >= {reach:.3g}"
            )
    else:
        if spec.cutoff < SHELLS_BELOW_CUTOFF * g.dxi:
            raise ValueError(
                f"power-law plateau cutoff {spec.cutoff} spans fewer than {SHELLS_BELOW_CUTOFF} "
                f"shells; use half_width >= {SHELLS_BELOW_CUTOFF * math.pi / spec.cutoff:.4g}"
            )
        top = spec.cutoff + spec.taper_width
        if top > (2.0 / 3.0) * g.k_max:
            n_req = int(2 ** math.ceil(math.log2(1.5 * top * 2 * g.half_width / math.pi)))
            raise ValueError(
                f"power-law spectrum extends to {top:.3g}, beyond the dealiased range; "
                f"use n >= {n_req}"
            )


def smooth_taper(r: np.ndarray, start: float, width: float) -> np.ndarray:
    """C-infinity step: 1 for r <= start, 0 for r >= start + width."""
    s = np.clip((np.asarray(r, float) - start) / width, 0.0, 1.0)

    def bump(z):
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp(-1.0 / z[pos])
        return out

    a, b = bump(1.0 - s), bump(s)
    return a / (a + b)


def _hermitian_phases(g: Grid, seed: int) -> np.ndarray:
    # FFT of real white noise has odd phases, so exp(i*phase) is conjugate-symmetric
    noise = np.random.default_rng(seed).standard_normal(g.shape)
    return np.exp(1j * np.angle(np.fft.fftn(noise)))


def sample_initial_data(spec: InitialDataSpec, g: Grid) -> SpectralField:
    _check_resolution(spec, g)
    if spec.family == "fourier_power_law":
        r = g.xi_abs
        mag = np.zeros(g.shape)
        nz = r > 0
        mag[nz] = r[nz] ** spec.exponent
        if spec.exponent == 0:
            mag[~nz] = 1.0
        mag *= spec.amplitude * smooth_taper(r, spec.cutoff, spec.taper_width)
        return SpectralField(g, mag * _hermitian_phases(g, spec.seed))

    center = (0.0,) * g.d if spec.center is None else tuple(spec.center)
    if len(center) != g.d:
        raise ValueError(f"center has {len(center)} entries for a {g.d}-d grid")
    xs = [x - c for x, c in zip(g.coords(), center)]
    r2 = sum(x**2 for x in xs)
    gauss = np.exp(-r2 / (2.0 * spec.sigma**2))
    if spec.family == "gaussian":
        values = spec.amplitude * gauss
    else:
        values = -spec.amplitude * xs[0] / spec.sigma**2 * gauss
    f = forward(ScalarSamples(g, np.broadcast_to(values, g.shape).copy()))
    if spec.family == "dipole":
        f.coeffs[(0,) * g.d] = 0.0
    return f


def analytic_decay_character(spec: InitialDataSpec) -> float:
    return {"gaussian": 0.0, "dipole": 1.0}.get(spec.family, spec.exponent)


def lp_decay_character(d: int, p: float) -> float:
    """r* of generic data in L^p cap L^2, 1 <= p <= 2 (documentation only)."""
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    return -d * (1.0 - 1.0 / p)


# ---------------------------------------------------------------- velocity


def _cross_matrix(axis, d: int) -> np.ndarray:
    if d == 2:
        return np.array([[0.0, -1.0], [1.0, 0.0]])
    a1, a2, a3 = axis
    return np.array([[0.0, -a3, a2], [a3, 0.0, -a1], [-a2, a1, 0.0]])


def _profile_values(spec: VelocityFieldSpec, xs) -> list[np.ndarray]:
    """V(x) = exp(-|x|^2/2) * (a x x); in 2-d a x x = (-y, x)."""
    d = len(xs)
    g = np.exp(-0.5 * sum(x**2 for x in xs))
    m = _cross_matrix(spec.axis, d)
    return [g * sum(m[i, j] * xs[j] for j in range(d) if m[i, j] != 0.0) for i in range(d)]


def _profile_jacobian(spec: VelocityFieldSpec, xs) -> np.ndarray:
    """J[..., i, j] = d V_i / d x_j on broadcast coordinates."""
    d = len(xs)
    xs = np.broadcast_arrays(*xs)
    g = np.exp(-0.5 * sum(x**2 for x in xs))
    m = _cross_matrix(spec.axis, d)
    ax = [sum(m[i, j] * xs[j] for j in range(d)) for i in range(d)]
    jac = np.empty(xs[0].shape + (d, d))
    for i in range(d):
        for j in range(d):
            jac[..., i, j] = g * (m[i, j] - ax[i] * xs[j])
    return jac


def sample_velocity(spec: VelocityFieldSpec, t: float, g: Grid) -> VectorSamples:
    if spec.d != g.d:
        raise ValueError(f"{spec.profile} is {spec.d}-dimensional but the grid is {g.d}-d")
    env = spec.envelope(t)
    comps = _profile_values(spec, g.coords())
    return VectorSamples(g, tuple(np.broadcast_to(env * c, g.shape).copy() for c in comps))


def velocity_rates(spec: VelocityFieldSpec) -> tuple[Fraction, Fraction]:
    """(alpha, nu); equal because the envelope is separable."""
    return spec.nu, spec.nu


@lru_cache(maxsize=None)
def _profile_norms(profile: str, axis: tuple[float, ...]) -> tuple[float, float]:
    spec = VelocityFieldSpec(profile, axis=axis)
    d = spec.d
    m = 801 if d == 2 else 121
    x = np.linspace(-9.0, 9.0, m)
    h = x[1] - x[0]
    xs = np.meshgrid(*([x] * d), indexing="ij", sparse=True)
    comps = _profile_values(spec, xs)
    l2 = math.sqrt(float(sum(np.sum(np.broadcast_to(c, (m,) * d) ** 2) for c in comps)) * h**d)
    jac = _profile_jacobian(spec, xs)
    grad_sup = float(np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1))))
    return l2, grad_sup


def velocity_l2(spec: VelocityFieldSpec, t: float) -> float:
    return spec.envelope(t) * _profile_norms(spec.profile, spec.axis)[0]


def grad_velocity_sup(spec: VelocityFieldSpec, t: float) -> float:
    """sup_x of the operator norm of grad u(x, t)."""
    return spec.envelope(t) * _profile_norms(spec.profile, spec.axis)[1]


def velocity_gradient(spec: VelocityFieldSpec, t: float, g: Grid) -> np.ndarray:
    """Analytic grad u on the grid, shape grid.shape + (d, d)."""
    return spec.envelope(t) * _profile_jacobian(spec, g.coords())
