"""Fairness-distortion trade-offs for classifiers over finite alphabets.

Optimal pre- and post-processing channels are computed by linear programs
solved with a self-contained simplex implementation.
"""

from .errors import (
    ConventionViolated,
    FairLPError,
    InfeasibleBudget,
    InvalidInput,
    ParseError,
    SubstitutionUnavailable,
    TooLarge,
)
from .fair_post import PostProblem, d_min_post, derive_pred_joint, disc_post, exact_eo_post, tradeoff_curve_post
from .fair_pre import PreProblem, d_max_bound_pre, d_max_exact, d_min_pre, disc_pre, tradeoff_curve
from .prob_core import Channel, Criterion, DistortionMatrix, DistortionMode, JointDistribution, PredictionJoint

__all__ = [
    "Channel",
    "ConventionViolated",
    "Criterion",
    "DistortionMatrix",
    "DistortionMode",
    "FairLPError",
    "InfeasibleBudget",
    "InvalidInput",
    "JointDistribution",
    "ParseError",
    "PostProblem",
    "PredictionJoint",
    "PreProblem",
    "SubstitutionUnavailable",
    "TooLarge",
    "d_max_bound_pre",
    "d_max_exact",
    "d_min_post",
    "d_min_pre",
    "derive_pred_joint",
    "disc_post",
    "disc_pre",
    "exact_eo_post",
    "tradeoff_curve",
    "tradeoff_curve_post",
]
