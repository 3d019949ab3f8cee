"""Periodic-box discretization of R^d, spectral transforms and mixing norms.

The whole space is replaced by the box [-L, L)^d sampled on n points per
axis.  Fourier coefficients use the continuum normalization

    coeffs[k] ~ int exp(-i xi_k . x) theta(x) dx,

so ``forward`` is the raw FFT times dx^d, with a (-1)^k phase that moves the
FFT origin from index 0 to the physical corner x = -L.  Every norm carries the
(2 pi)^-d Plancherel factor, which makes ``l2_norm`` equal to the physical
L^2 norm of the samples.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "ScalarSamples",
    "SpectralField",
    "VectorSamples",
    "TruncationSensitiveWarning",
    "make_grid",
    "forward",
    "inverse",
    "l2_norm",
    "grad_l2_norm",
    "inv_grad_l2_norm",
    "filamentation_length",
    "low_mode_mass",
    "divergence_max",
    "spectral_gradient",
    "boundary_mass_fraction",
    "is_mean_free",
]


class TruncationSensitiveWarning(UserWarning):
    """A d=2 inverse-gradient norm was requested on data with nonzero mean."""


@dataclass(frozen=True)
class Grid:
    d: int
    n: int
    half_width: float

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.n % 2 or self.n < 16:
            raise ValueError(f"n must be even and >= 16, got {self.n}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def dxi(self) -> float:
        return math.pi / self.half_width

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def k_max(self) -> float:
        """Largest resolved frequency magnitude along one axis (Nyquist)."""
        return self.dxi * (self.n // 2)

    @cached_property
    def x1d(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    @cached_property
    def xi1d(self) -> np.ndarray:
        # integer index k in [-n/2, n/2-1], FFT ordering
        return self.dxi * np.fft.fftfreq(self.n, d=1.0 / self.n)

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.x1d] * self.d), indexing="ij", sparse=True)

    def frequencies(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.xi1d] * self.d), indexing="ij", sparse=True)

    @cached_property
    def xi_sq(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for xi in self.frequencies():
            out = out + xi**2
        return out

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi_sq)

    @cached_property
    def inv_xi_sq(self) -> np.ndarray:
        """1/|xi|^2 with the zero mode set to 0."""
        out = np.zeros(self.shape)
        nz = self.xi_sq > 0
        out[nz] = 1.0 / self.xi_sq[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every |k_i| < n/3."""
        k = np.abs(np.fft.fftfreq(self.n, d=1.0 / self.n))
        keep = k < self.n / 3.0
        masks = np.meshgrid(*([keep] * self.d), indexing="ij", sparse=True)
        out = np.ones(self.shape, dtype=bool)
        for m in masks:
            out = out & m
        return out

    @cached_property
    def phase(self) -> np.ndarray:
        """exp(i xi L) = (-1)^(k_1 + ... + k_d): shifts the FFT origin to x = -L."""
        sign = np.where(np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int) % 2, -1.0, 1.0)
        out = np.ones(self.shape)
        for s in np.meshgrid(*([sign] * self.d), indexing="ij", sparse=True):
            out = out * s
        return out

    @property
    def plancherel(self) -> float:
        """(2 pi)^-d dxi^d: turns sums of |coeffs|^2 into physical L^2 integrals."""
        return (self.dxi / (2.0 * math.pi)) ** self.d


def make_grid(d: int, n: int, half_width: float) -> Grid:
    return Grid(int(d), int(n), float(half_width))


@dataclass(frozen=True)
class ScalarSamples:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"samples have shape {self.values.shape}, grid expects {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("samples contain non-finite values")


@dataclass(frozen=True)
class VectorSamples:
    grid: Grid
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.components) != self.grid.d:
            raise ValueError(
                f"expected {self.grid.d} components, got {len(self.components)}"
            )
        for c in self.components:
            if c.shape != self.grid.shape:
                raise ValueError(f"component shape {c.shape} != {self.grid.shape}")

    def sup_norm(self) -> float:
        mag2 = sum(c**2 for c in self.components)
        return float(np.sqrt(np.max(mag2)))

    def l2_norm(self) -> float:
        total = sum(np.sum(c**2) for c in self.components)
        return float(np.sqrt(total * self.grid.cell_volume))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients on the lattice, FFT index order."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficients have shape {self.coeffs.shape}, grid expects {self.grid.shape}"
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    @property
    def zero_mode(self) -> complex:
        return complex(self.coeffs[(0,) * self.grid.d])

    def physical(self) -> np.ndarray:
        return inverse(self).values

    def hermitian_defect(self) -> float:
        """max |c[-k] - conj(c[k])|, relative to max |c|."""
        c = self.coeffs
        flipped = np.roll(np.flip(c), 1, axis=tuple(range(c.ndim)))
        scale = np.max(np.abs(c))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(flipped - np.conj(c))) / scale)


def _same_grid(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def forward(s: ScalarSamples) -> SpectralField:
    raw = sfft.fftn(s.values, workers=-1)
    return SpectralField(s.grid, raw * (s.grid.cell_volume * s.grid.phase))


def inverse(f: SpectralField) -> ScalarSamples:
    raw = sfft.ifftn(f.coeffs * (f.grid.phase / f.grid.cell_volume), workers=-1)
    return ScalarSamples(f.grid, raw.real.copy())


def _weighted_sum(f: SpectralField, weight: np.ndarray | None) -> float:
    p = np.abs(f.coeffs) ** 2
    if weight is not None:
        p = p * weight
    return float(np.sum(p)) * f.grid.plancherel


def l2_norm(f: SpectralField, exclude_zero_mode: bool = False) -> float:
    total = _weighted_sum(f, None)
    if exclude_zero_mode:
        total -= abs(f.zero_mode) ** 2 * f.grid.plancherel
    return math.sqrt(max(total, 0.0))


def grad_l2_norm(f: SpectralField) -> float:
    return math.sqrt(_weighted_sum(f, f.grid.xi_sq))


def is_mean_free(f: SpectralField, rtol: float = 1e-8) -> bool:
    scale = float(np.max(np.abs(f.coeffs)))
    return abs(f.zero_mode) <= rtol * scale


def inv_grad_l2_norm(f: SpectralField) -> float:
    """Lattice H^-1 norm, zero mode always dropped.

    In two dimensions the continuum norm of data with nonzero mean diverges
    at the origin; the lattice value is then set by the box size, and a
    ``TruncationSensitiveWarning`` is emitted.
    """
    if f.grid.d == 2 and not is_mean_free(f):
        warnings.warn(
            "inverse-gradient norm of a 2-d field with nonzero mean depends on the box size",
            TruncationSensitiveWarning,
            stacklevel=2,
        )
    return math.sqrt(_weighted_sum(f, f.grid.inv_xi_sq))


def filamentation_length(f: SpectralField) -> float:
    denom = l2_norm(f, exclude_zero_mode=True)
    if denom == 0.0:
        raise ValueError("filamentation length is undefined for a field with no nonzero modes")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationSensitiveWarning)
        return inv_grad_l2_norm(f) / denom


def low_mode_mass(f: SpectralField, delta: float) -> float:
    """sum_{|xi_k| <= delta} |coeffs[k]|^2 dxi^d (no 2 pi factor)."""
    if delta < f.grid.dxi:
        raise ValueError(
            f"unresolvable shell: delta={delta} is below the lattice spacing {f.grid.dxi}"
        )
    inside = f.grid.xi_abs <= delta
    return float(np.sum(np.abs(f.coeffs[inside]) ** 2)) * f.grid.dxi**f.grid.d


def spectral_gradient(f: SpectralField) -> tuple[np.ndarray, ...]:
    """Physical-space components of grad f."""
    out = []
    for xi in f.grid.frequencies():
        out.append(inverse(SpectralField(f.grid, 1j * xi * f.coeffs)).values)
    return tuple(out)


def divergence_max(v: VectorSamples) -> float:
    g = v.grid
    div_hat = np.zeros(g.shape, dtype=complex)
    for xi, comp in zip(g.frequencies(), v.components):
        div_hat += 1j * xi * sfft.fftn(comp, workers=-1)
    return float(np.max(np.abs(sfft.ifftn(div_hat, workers=-1).real)))


def boundary_mass_fraction(s: ScalarSamples, shell: float = 0.1) -> float:
    """Fraction of sum |theta|^2 lying where max_i |x_i| >= (1 - shell) L."""
    g = s.grid
    cut = (1.0 - shell) * g.half_width
    outer = np.zeros(g.shape, dtype=bool)
    for x in g.coords():
        outer = outer | (np.abs(x) >= cut)
    w = s.values**2
    total = float(np.sum(w))
    if total == 0.0:
        return 0.0
    return float(np.sum(w[outer])) / total
