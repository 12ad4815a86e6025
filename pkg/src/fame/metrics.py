"""FAR/FRR, DET curves, equal error rate and the challenge overall score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Mapping

import numpy as np

from . import kernels
from .errors import ArityError, CoverageError, DegenerateLabelsError, DuplicateIdError, FormatError
from .trials import GroundTruth, Label, iter_fields


@dataclass(frozen=True)
class ScoreFile:
    scores: Mapping[str, float]

    def __post_init__(self):
        clean = {}
        for key, value in dict(self.scores).items():
            value = float(value)
            if not math.isfinite(value):
                raise FormatError(f"score for {key!r} is not finite")
            clean[key] = value
        object.__setattr__(self, "scores", clean)

    def __len__(self):
        return len(self.scores)

    def __getitem__(self, pair_id):
        return self.scores[pair_id]

    def __contains__(self, pair_id):
        return pair_id in self.scores


def parse_scores(text: "str | bytes") -> ScoreFile:
    scores = {}
    for lineno, (pair_id, raw) in iter_fields(text, 2):
        try:
            value = float(raw)
        except ValueError:
            raise FormatError(f"score {raw!r} is not a number", line=lineno) from None
        if not math.isfinite(value):
            raise FormatError(f"score {raw!r} is not finite", line=lineno)
        if pair_id in scores:
            raise DuplicateIdError(pair_id, line=lineno)
        scores[pair_id] = value
    return ScoreFile(scores)


def format_scores(scores: ScoreFile) -> str:
    return "".join(f"{k} {v!r}\n" for k, v in scores.scores.items())


@dataclass(frozen=True)
class DetCurve:
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray
    n_match: int
    n_nonmatch: int
    n_ignored: int = 0

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist()))

    def at(self, threshold: float) -> tuple[float, float]:
        """(far, frr) for the ``score >= threshold`` rule at any threshold."""
        k = int(np.searchsorted(self.thresholds, threshold, side="left"))
        return float(self.far[k]), float(self.frr[k])

    def __len__(self):
        return self.thresholds.shape[0]


@dataclass(frozen=True)
class EerResult:
    eer: float  # percent
    threshold: float
    n_match: int = 0
    n_nonmatch: int = 0
    n_ignored: int = 0

    @property
    def display(self) -> str:
        return display_round(self.eer)


def align_scores(scores: ScoreFile, gt: GroundTruth) -> tuple[np.ndarray, np.ndarray, int]:
    """Score and label vectors over the ground-truth ids.

    Returns ``(scores, labels, n_ignored)`` where ``n_ignored`` counts scored
    ids outside the evaluated trial set.
    """
    n_match = gt.n_match
    if n_match == 0 or n_match == len(gt):
        raise DegenerateLabelsError(
            f"need at least one match and one non-match label "
            f"(got {n_match} match, {len(gt) - n_match} non-match)")
    missing = [pid for pid in gt.labels if pid not in scores.scores]
    if missing:
        raise CoverageError({None: missing})
    ids = list(gt.labels)
    s = np.fromiter((scores.scores[i] for i in ids), dtype=np.float64, count=len(ids))
    y = np.fromiter((int(gt.labels[i]) for i in ids), dtype=np.int64, count=len(ids))
    n_ignored = len(scores.scores) - len(ids)
    return s, y, n_ignored


def det_from_arrays(scores, labels) -> DetCurve:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_match = int(labels.sum())
    if n_match == 0 or n_match == labels.shape[0]:
        raise DegenerateLabelsError("need at least one match and one non-match label")
    order = np.argsort(scores, kind="stable")
    thresholds, far, frr = kernels.det_sweep(scores[order], labels[order])
    return DetCurve(thresholds, far, frr, n_match, labels.shape[0] - n_match)


def compute_det(scores: ScoreFile, gt: GroundTruth) -> DetCurve:
    s, y, n_ignored = align_scores(scores, gt)
    curve = det_from_arrays(s, y)
    return DetCurve(curve.thresholds, curve.far, curve.frr, curve.n_match,
                    curve.n_nonmatch, n_ignored)


def eer_from_det(curve: DetCurve) -> EerResult:
    eer, k, u = kernels.eer_crossing(curve.far, curve.frr)
    t0 = curve.thresholds[k]
    t1 = curve.thresholds[k + 1] if u > 0.0 else t0
    # the +inf sentinel has no meaningful interpolation; report the last finite score
    threshold = float(t0 + u * (t1 - t0)) if math.isfinite(t1) else float(t0)
    return EerResult(100.0 * eer, threshold, curve.n_match, curve.n_nonmatch, curve.n_ignored)


def eer_from_arrays(scores, labels) -> EerResult:
    return eer_from_det(det_from_arrays(scores, labels))


def compute_eer(scores: ScoreFile, gt: GroundTruth) -> EerResult:
    return eer_from_det(compute_det(scores, gt))


def display_round(value: float, places: int = 1) -> str:
    """Round the shortest decimal form of ``value`` half-to-even.

    33.35 -> "33.4" and 40.25 -> "40.2".
    """
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_EVEN))


def _eer_value(entry) -> float:
    return float(entry.eer if isinstance(entry, EerResult) else entry)


def overall_score(grid) -> float:
    """Mean of the four EER percentages of a 2x2 train/test grid.

    Accepts a ``ConfigurationGrid``, a mapping, or a sequence of EERs.
    """
    if isinstance(grid, ConfigurationGrid):
        values = [_eer_value(v) for v in grid.entries.values()]
    elif isinstance(grid, Mapping):
        values = [_eer_value(v) for v in grid.values()]
    else:
        values = [_eer_value(v) for v in grid]
    if len(values) != 4:
        raise ArityError(f"overall score needs exactly 4 EERs, got {len(values)}")
    # fsum keeps the result independent of input order
    return math.fsum(values) / 4


@dataclass(frozen=True)
class ConfigurationGrid:
    """EERs keyed by ``(train_language, test_language)``."""

    languages: tuple[str, str]
    entries: Mapping[tuple[str, str], EerResult]

    def __post_init__(self):
        a, b = self.languages
        expected = {(a, a), (a, b), (b, a), (b, b)}
        if a == b or set(self.entries) != expected or len(self.entries) != 4:
            raise ArityError(f"grid must hold the four (train, test) combinations of {a!r}/{b!r}")
        object.__setattr__(self, "languages", tuple(self.languages))
        object.__setattr__(self, "entries", {k: self.entries[k] for k in
                                             [(a, a), (a, b), (b, a), (b, b)]})

    @property
    def overall(self) -> float:
        return overall_score(self)

    def heard(self, train: str) -> float:
        return _eer_value(self.entries[(train, train)])

    def unheard(self, train: str) -> float:
        other = self.languages[1] if train == self.languages[0] else self.languages[0]
        return _eer_value(self.entries[(train, other)])

    def to_dict(self) -> dict:
        return {
            "languages": list(self.languages),
            "entries": [
                {"train": tr, "test": te, "eer": round(_eer_value(v), 4),
                 "eer_full": _eer_value(v), "display": display_round(_eer_value(v))}
                for (tr, te), v in self.entries.items()
            ],
            "overall": round(self.overall, 4),
            "overall_full": self.overall,
            "overall_display": display_round(self.overall),
        }

    def format_table(self) -> str:
        a, b = self.languages
        rows = [f"{'':<14}{a + ' test':>14}{b + ' test':>14}{'Overall':>10}"]
        for i, train in enumerate(self.languages):
            cells = [display_round(_eer_value(self.entries[(train, t)])) for t in (a, b)]
            overall = display_round(self.overall) if i == 0 else ""
            rows.append(f"{train + ' train':<14}{cells[0]:>14}{cells[1]:>14}{overall:>10}")
        return "\n".join(rows)


def eer_report(result: EerResult) -> dict:
    return {
        "eer": round(result.eer, 4),
        "eer_full": result.eer,
        "display": result.display,
        "threshold": result.threshold,
        "n_match": result.n_match,
        "n_nonmatch": result.n_nonmatch,
        "ignored_ids": result.n_ignored,
    }


__all__ = [
    "ConfigurationGrid", "DetCurve", "EerResult", "Label", "ScoreFile", "compute_det",
    "compute_eer", "det_from_arrays", "display_round", "eer_from_arrays", "eer_from_det",
    "eer_report", "format_scores", "overall_score", "parse_scores",
]
