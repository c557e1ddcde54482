"""Integrity-optimal training/test split sizes for ordinary least squares.

>>> from splitmetric import SplitProblem, optimal_p
>>> optimal_p(SplitProblem(m=299, n=12))
161
"""
from .errors import DataError, DivergentMomentError, DomainError, NumericalError, SplitMetricError
from .integrity import (
    IntegrityCurve,
    QuarticCoeffs,
    SplitProblem,
    asymptotic_p,
    delta_eval,
    integrity_curve,
    integrity_f,
    integrity_f_unsimplified,
    optimal_p,
    quartic_coeffs,
    solve_real_root,
)
from .jacobi_moments import (
    JacobiParams,
    aomoto_product,
    inv_cross_moment,
    inv_moment_1,
    inv_moment_2,
    log_selberg,
    params_from_split,
    sample_jacobi,
)

__version__ = "0.1.0"
