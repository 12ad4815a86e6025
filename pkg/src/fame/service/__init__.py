"""Submission service: phase windows, quotas, scoring and leaderboards."""

from .config import PhaseConfig, ServiceConfig, load_config
from .store import AuthError, PhaseService, SubmissionRecord

__all__ = ["AuthError", "PhaseConfig", "PhaseService", "ServiceConfig", "SubmissionRecord",
           "load_config"]
