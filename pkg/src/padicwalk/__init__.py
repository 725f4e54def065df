"""Random walks on Z_p / p^m Z_p and their convergence to Brownian motion in Z_p."""

from .core import (
    Ball,
    Digits,
    DomainError,
    DualElement,
    GroupElement,
    Params,
    PreconditionError,
    RadialProfile,
    valuation,
)
from .kernel import LimitKernel, ball_mass, char_function, cylinder_prob_limit, radial_density
from .walk import (
    History,
    RngStream,
    StepLaw,
    beta,
    cylinder_prob_discrete,
    exact_moment,
    moment_bound,
    nstep_density,
    phi_closed,
    step_law,
    thresholds,
    time_scale,
)

__version__ = "0.1.0"
