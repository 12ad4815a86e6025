"""Evaluation toolkit for cross-modal face-voice verification challenges."""

from .metrics import (ConfigurationGrid, DetCurve, EerResult, ScoreFile, compute_det, compute_eer,
                      display_round, overall_score, parse_scores)
from .trials import (SPLITS, Condition, GroundTruth, Label, SplitSpec, TrialList, TrialPair,
                     check_alignment, parse_ground_truth, parse_trial_list)

__version__ = "0.1.0"

__all__ = [
    "SPLITS", "Condition", "ConfigurationGrid", "DetCurve", "EerResult", "GroundTruth", "Label",
    "ScoreFile", "SplitSpec", "TrialList", "TrialPair", "check_alignment", "compute_det",
    "compute_eer", "display_round", "overall_score", "parse_ground_truth", "parse_scores",
    "parse_trial_list",
]
