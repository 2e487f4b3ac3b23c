"""Numerical pipeline from the completed xi function to a canonical system.

Modules
-------
specfun
    xi, zeta, log-gamma and the structure function Theta_omega.
kernel
    The kernels h_omega and h1_omega and their Mellin transforms.
operator
    Nystrom discretization of the truncated Hankel-type operators,
    Fredholm determinants and the resolvent equations.
canonical
    The m-curve, the canonical system in a, direct formulas, potentials
    and zeros.
verification, cli
    The verification suite and the command-line harness.
"""

from .errors import (ConfigError, ContourError, ConvergenceError, DomainError, NonFiniteError, PoleError,
                     RangeError, RegimeError, SingularError, SolveError, StepError, TruncationError,
                     XiCanonError)
from .specfun import ab_omega, theta_omega, xi, zeta
from .kernel import KernelContext, h1_omega, h_omega
from .operator import det_pair, discretize, build_grid, log_det_pair, operator_at, solve_phi
from .canonical import MCurve, ab_initial, direct_ab, evolve, m_curve, potentials, zeros_of_A

__version__ = "0.1.0"
