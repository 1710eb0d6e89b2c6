"""Induced oscillation for the perturbed equation h'' + p (h' - h/s) + q/s = 0.

Builds the sin^2-bump perturbation q(alpha, beta), certifies the hypotheses
that force oscillation, and evaluates the explicit oscillatory solutions.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DEFAULT_TOL,
    CoefficientP,
    ExampleParams,
    InverseSquareCoefficient,
    InvalidParameters,
    SwitchSequence,
    TableCoefficient,
    ToleranceConfig,
    ZeroCoefficient,
    coefficient_inverse_square,
    validate_params,
)
from .construct import Perturbation, admissible_epsilon, epsilon_zero  # noqa: E402
from .certify import certify_all  # noqa: E402
from .solve import SolutionModel, solve_grid  # noqa: E402
