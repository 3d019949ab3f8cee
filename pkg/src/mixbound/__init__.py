"""Pseudo-spectral passive-scalar mixing simulator and decay-bound checker."""
from .spectral import (
    Grid,
    ScalarSamples,
    SpectralField,
    VectorSamples,
    filamentation_length,
    forward,
    grad_l2_norm,
    inv_grad_l2_norm,
    inverse,
    l2_norm,
    low_mode_mass,
    make_grid,
)
from .fields import InitialDataSpec, VelocityFieldSpec, sample_initial_data, sample_velocity
from .solver import NormSeries, RunConfig, SolverState, run, step_ad, heat_evolve
from .decay import estimate_decay_character, shell_profile
from .bounds import BoundCurve, BoundParams, accumulated_decay, asymptotic_class

__version__ = "0.1.0"
