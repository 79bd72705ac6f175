"""Bayesian polynomial chaos surrogates.

Orthonormal polynomial bases over independent input distributions, Gaussian
and sparsity-promoting coefficient posteriors, closed-form and sampled
moment propagation, conditioning on linear functionals of the output, and
coregional multi-output models.
"""

from .basis import (
    BasisFamily,
    DesignMatrix,
    DistributionKind,
    IndexScheme,
    InputDistribution,
    InputSpace,
    MultiIndexSet,
    UnivariateBasis,
    build_index_set,
    design_matrix,
    eval_univariate,
    gauss_quadrature,
)
from .errors import ConfigError, ConvergenceError, DataError, NumericalError

__version__ = "0.1.0"
