"""Desk-scale simulation of quantum α-affinity and Tsallis relative entropy estimators."""

from .densityops import (DensityOperator, affinity_exact, divergence_report, hellinger_exact,
                         random_low_rank_state, tsallis_exact)
from .errors import (CertificationError, ConstructionError, DimensionMismatchError,
                     InvalidArgumentError, TsallisLabError)
from .estimators import affinity_est_q, hellinger_certify_q, tsallis_est_q
from .samplizer import affinity_est_s, hellinger_certify_s, tsallis_est_s

__version__ = "0.1.0"

__all__ = [
    "DensityOperator", "affinity_exact", "divergence_report", "hellinger_exact",
    "random_low_rank_state", "tsallis_exact", "CertificationError", "ConstructionError",
    "DimensionMismatchError", "InvalidArgumentError", "TsallisLabError", "affinity_est_q",
    "hellinger_certify_q", "tsallis_est_q", "affinity_est_s", "hellinger_certify_s",
    "tsallis_est_s",
]
