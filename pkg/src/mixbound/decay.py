"""Decay-character estimation from the low-frequency shell mass F(delta).

At the decay character r*, F(delta) = int_{|xi|<=delta} |theta0^(xi)|^2 behaves
like delta^(2 r* + d); the estimator fits that slope in log-log coordinates
over a finite window of resolvable shells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gamma

from .spectral import SpectralField, low_mode_mass

MIN_POINTS = 4


@dataclass(frozen=True)
class ShellProfile:
    d: int
    delta: np.ndarray
    F: np.ndarray
    dxi: float | None = None


@dataclass
class DecayCharacterEstimate:
    r_star: float
    stderr: float
    window: tuple[float, float]
    delta: np.ndarray
    F: np.ndarray
    d: int = 2
    flags: list[str] = field(default_factory=list)

    @property
    def slope(self) -> float:
        """Fitted log-log slope of F, i.e. 2 r* + d."""
        return 2.0 * self.r_star + self.d

    def to_json(self) -> dict:
        return {
            "r_star": self.r_star,
            "stderr": self.stderr,
            "window": list(self.window),
            "n_points": int(len(self.delta)),
            "flags": list(self.flags),
        }


def shell_profile(f: SpectralField, deltas) -> ShellProfile:
    deltas = np.asarray(deltas, float)
    if np.any(np.diff(deltas) < 0):
        raise ValueError("deltas must be sorted")
    F = np.array([low_mode_mass(f, d) for d in deltas])
    return ShellProfile(f.grid.d, deltas, F, f.grid.dxi)


def default_window(f: SpectralField, upper: float, count: int = 24) -> np.ndarray:
    """Log-spaced radii from 4 lattice spacings up to ``upper``."""
    lo = 4.0 * f.grid.dxi
    if upper <= lo:
        raise ValueError(f"window top {upper:.4g} is not above 4*dxi = {lo:.4g}; enlarge the box")
    return np.geomspace(lo, upper, count)


def estimate_decay_character(profile: ShellProfile) -> DecayCharacterEstimate:
    d = profile.d
    delta = np.asarray(profile.delta, float)
    F = np.asarray(profile.F, float)
    flags = []
    ok = F > 0
    if not np.all(ok):
        flags.append("zero_mass_points_dropped")
    delta, F = delta[ok], F[ok]
    if len(delta) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} shells with positive mass, got {len(delta)}")
    if profile.dxi is not None and delta[0] < 4.0 * profile.dxi * (1 - 1e-12):
        flags.append("window_below_4dxi")
    fit = stats.linregress(np.log(delta), np.log(F))
    r = (fit.slope - d) / 2.0
    se = fit.stderr / 2.0
    if not r > -d / 2:
        flags.append("outside_admissible_range")
    # curvature in log-log shows up as residuals far above a clean power law
    if se > 0.05:
        flags.append("non_power_law")
    return DecayCharacterEstimate(
        float(r), float(se), (float(delta[0]), float(delta[-1])), delta, F, d, flags
    )


def unit_sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2) / gamma(d / 2)


def oracle_F_power_law(a: float, delta: float, d: int) -> float:
    """int_{|xi| <= delta} |xi|^(2a) d xi in R^d."""
    if 2 * a + d <= 0:
        raise ValueError(f"shell integral diverges for 2a + d = {2 * a + d} <= 0")
    return unit_sphere_area(d) * delta ** (2 * a + d) / (2 * a + d)
