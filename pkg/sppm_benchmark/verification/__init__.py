"""
Independent oracles and empirical checks of the convergence theory.
"""

from .checks import (
    check_assumption5,
    check_certificate_cross_validation,
    check_contraction,
    check_lyapunov_recursion,
    check_one_step_bound,
    check_prox_identity,
    check_prox_oracle,
    check_recurrence_unrolling,
    check_similarity_constants,
    check_unbiased_correction,
)
from .oracles import prox_oracle
from .suite import SCALES, verify_all

__all__ = [
    'prox_oracle',
    'check_assumption5',
    'check_certificate_cross_validation',
    'check_contraction',
    'check_lyapunov_recursion',
    'check_one_step_bound',
    'check_prox_identity',
    'check_prox_oracle',
    'check_recurrence_unrolling',
    'check_similarity_constants',
    'check_unbiased_correction',
    'SCALES',
    'verify_all',
]
