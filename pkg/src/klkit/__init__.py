"""Karhunen-Loève expansions on an interval and the equicontinuity test
for synthesizing a continuous kernel from an orthonormal family."""

from .counterexamples import (
    analytic_brownian_spectrum,
    constant_spectrum,
    failing_family,
    passing_family,
)
from .diagnostics import (
    ModulusReport,
    epsilon_delta_certificate,
    equicontinuity_report,
    modulus,
    necessity_bound_residual,
)
from .eigensolve import EigenResult, JacobiNotConverged, Spectrum, eigen_residual, jacobi_eigen, nystrom_decompose
from .expansion import l1_gap, partial_kernel, sup_gap, vn_sequence
from .grid import DomainError, Grid, integrate, refine_with, uniform_grid
from .kernels import KernelSpec, brownian, exponential, gram_matrix, second_difference, squared_exponential
from .sampling import PathEnsemble, empirical_covariance, sample_paths

__version__ = "0.1.0"
