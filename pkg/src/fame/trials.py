"""Trial lists, ground-truth files and split descriptions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import DuplicateIdError, FormatError, LabelError


class Condition(str, enum.Enum):
    HEARD = "heard"
    UNHEARD = "unheard"

    @classmethod
    def parse(cls, value: "str | Condition") -> "Condition":
        if isinstance(value, Condition):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"condition must be 'heard' or 'unheard', got {value!r}") from None


class Label(enum.IntEnum):
    NONMATCH = 0
    MATCH = 1


def _check_token(value: str, what: str) -> None:
    if not isinstance(value, str) or not value:
        raise ValueError(f"{what} must be a non-empty string")
    if any(ch.isspace() for ch in value):
        raise ValueError(f"{what} must not contain whitespace: {value!r}")


def decode_text(data: "str | bytes") -> str:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if data.startswith("﻿"):
        data = data[1:]
    return data


def iter_fields(data: "str | bytes", n_fields: int) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(physical_line_number, fields)`` for every record line.

    Blank lines and ``#`` comments are skipped; numbering still counts them.
    """
    text = decode_text(data)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != n_fields:
            raise FormatError(f"expected {n_fields} fields, found {len(fields)}", line=lineno)
        yield lineno, fields


@dataclass(frozen=True)
class TrialPair:
    id: str
    voice_path: str
    face_path: str

    def __post_init__(self):
        _check_token(self.id, "pair id")
        _check_token(self.voice_path, "voice path")
        _check_token(self.face_path, "face path")


@dataclass(frozen=True)
class TrialList:
    language: str
    condition: Condition
    pairs: tuple[TrialPair, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "condition", Condition.parse(self.condition))
        object.__setattr__(self, "pairs", tuple(self.pairs))
        seen = set()
        for pair in self.pairs:
            if pair.id in seen:
                raise DuplicateIdError(pair.id)
            seen.add(pair.id)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class GroundTruth:
    labels: Mapping[str, Label] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, value in dict(self.labels).items():
            _check_token(key, "pair id")
            if value not in (0, 1):
                raise LabelError(f"label for {key!r} must be 0 or 1, got {value!r}")
            clean[key] = Label(int(value))
        object.__setattr__(self, "labels", clean)

    def __len__(self):
        return len(self.labels)

    def __contains__(self, pair_id):
        return pair_id in self.labels

    @property
    def ids(self) -> set[str]:
        return set(self.labels)

    @property
    def n_match(self) -> int:
        return sum(1 for v in self.labels.values() if v == Label.MATCH)

    @property
    def n_nonmatch(self) -> int:
        return len(self.labels) - self.n_match


@dataclass(frozen=True)
class SplitSpec:
    name: str
    languages: tuple[str, str]
    n_train_speakers: int
    n_test_speakers: int

    def __post_init__(self):
        if self.n_train_speakers <= 0 or self.n_test_speakers <= 0:
            raise ValueError("speaker counts must be positive")
        if len(self.languages) != 2 or self.languages[0] == self.languages[1]:
            raise ValueError(f"a split needs two distinct languages, got {self.languages!r}")
        object.__setattr__(self, "languages", tuple(self.languages))

    @property
    def n_speakers(self) -> int:
        return self.n_train_speakers + self.n_test_speakers


SPLITS = {
    "V1-EU": SplitSpec("V1-EU", ("English", "Urdu"), 64, 6),
    "V3-EG": SplitSpec("V3-EG", ("English", "German"), 50, 8),
}


def parse_trial_list(text: "str | bytes", language: str, condition) -> TrialList:
    pairs = []
    seen = set()
    for lineno, (pair_id, voice, face) in iter_fields(text, 3):
        if pair_id in seen:
            raise DuplicateIdError(pair_id, line=lineno)
        seen.add(pair_id)
        pairs.append(TrialPair(pair_id, voice, face))
    return TrialList(language, Condition.parse(condition), tuple(pairs))


def format_trial_list(trials: TrialList) -> str:
    return "".join(f"{p.id} {p.voice_path} {p.face_path}\n" for p in trials.pairs)


def parse_ground_truth(text: "str | bytes") -> GroundTruth:
    labels = {}
    for lineno, (pair_id, raw) in iter_fields(text, 2):
        if raw not in ("0", "1"):
            raise LabelError(f"label must be 0 or 1, got {raw!r}", line=lineno)
        if pair_id in labels:
            raise DuplicateIdError(pair_id, line=lineno)
        labels[pair_id] = Label(int(raw))
    return GroundTruth(labels)


def format_ground_truth(gt: GroundTruth) -> str:
    return "".join(f"{k} {int(v)}\n" for k, v in gt.labels.items())


@dataclass(frozen=True)
class AlignmentReport:
    missing_in_gt: frozenset = frozenset()
    extra_in_gt: frozenset = frozenset()

    @property
    def ok(self) -> bool:
        return not self.missing_in_gt and not self.extra_in_gt

    def __bool__(self):
        # truthy when there is something to report
        return not self.ok


def check_alignment(trials: TrialList, gt: GroundTruth) -> AlignmentReport:
    list_ids = set(trials.ids)
    gt_ids = gt.ids
    return AlignmentReport(frozenset(list_ids - gt_ids), frozenset(gt_ids - list_ids))
