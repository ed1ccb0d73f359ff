"""Exact variable-length motif and discord discovery."""

from .bounds import LowerBoundEntry, LowerBoundState, lb_eval, lb_from_keys, lb_init
from .engine import (
    DiscordGrid,
    Discovery,
    MotifEntry,
    MotifResult,
    PartialDistanceProfile,
    default_candidates,
    discover_range,
    exact_discords_at,
    exact_motif_at,
    partial_profile,
    validity_check,
)
from .profile import DistanceProfile, MatrixProfile, distance_profile, matrix_profile

__all__ = [
    "LowerBoundEntry", "LowerBoundState", "lb_eval", "lb_from_keys", "lb_init",
    "DiscordGrid", "Discovery", "MotifEntry", "MotifResult", "PartialDistanceProfile",
    "default_candidates", "discover_range", "exact_discords_at", "exact_motif_at",
    "partial_profile", "validity_check",
    "DistanceProfile", "MatrixProfile", "distance_profile", "matrix_profile",
]

from .estimator import MatrixProfileTransformer, VariableLengthMiner  # noqa: E402

__all__ += ["MatrixProfileTransformer", "VariableLengthMiner"]
