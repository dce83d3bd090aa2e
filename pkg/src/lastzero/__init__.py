"""Optimal L^p prediction of the last zero of a spectrally negative
Levy process drifting to +infinity.

The package solves, numerically, the problem of stopping a path as
close as possible (in L^p, p > 1) to the last time it touches zero:
an optimal stopping problem over the excursion clock, whose solution
is the first entrance of (age, height) into the region above a
decreasing boundary curve.

Layers
------
``levy_model``
    Model definitions (Brownian drift, jump diffusion,
    Cramer-Lundberg), Laplace exponents, validation.
``scale_kit``
    Scale functions W, W^{(q)}, Z^{(q)} and fluctuation identities.
``stopping_core``
    The gain/penalty structure of the prediction problem: the running
    gain G, the sign-change level h(u), closed-form moments of g.
``boundary_solver``
    The solver: anchor search for V(0,0), triangular construction of
    the boundary b(u), value surface, smooth-fit diagnostics.
``path_sim``
    Exact-skeleton Monte Carlo: path simulation, last-zero extraction,
    stopping rules, loss and functional estimation.
``validation``
    The end-to-end acceptance battery.
``cli``
    Command-line front end (``lastzero`` console script).
"""

from __future__ import annotations

from .boundary_solver import (
    BoundaryCurve,
    SolverConfig,
    SolverError,
    ValueSurface,
    default_config,
    smooth_fit_residual,
    solve,
)
from .levy_model import (
    BrownianDrift,
    CramerLundberg,
    JumpDiffusion,
    LevyModel,
    laplace_exponent,
    phi,
    validate,
)
from .path_sim import (
    BarrierRule,
    BoundaryRule,
    ImmediateRule,
    MCEstimate,
    OracleRule,
    estimate_prediction_error,
)
from .scale_kit import ScaleFamily
from .stopping_core import GainSpec, gain, h_curve
from .validation import run_acceptance

__all__ = [
    "BarrierRule",
    "BoundaryCurve",
    "BoundaryRule",
    "BrownianDrift",
    "CramerLundberg",
    "GainSpec",
    "ImmediateRule",
    "JumpDiffusion",
    "LevyModel",
    "MCEstimate",
    "OracleRule",
    "ScaleFamily",
    "SolverConfig",
    "SolverError",
    "ValueSurface",
    "default_config",
    "estimate_prediction_error",
    "gain",
    "h_curve",
    "laplace_exponent",
    "phi",
    "run_acceptance",
    "smooth_fit_residual",
    "solve",
    "validate",
]

__version__ = "0.1.0"
