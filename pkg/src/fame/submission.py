"""Zipped submission bundles: layout, validation and scoring."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import ArchiveError, CoverageError, FameError, FormatError, MissingFilesError
from .metrics import (ConfigurationGrid, EerResult, ScoreFile, compute_eer, display_round,
                      eer_report, format_scores, overall_score, parse_scores)
from .trials import (SPLITS, Condition, GroundTruth, check_alignment, format_ground_truth,
                     format_trial_list, parse_ground_truth, parse_trial_list, TrialList)

CONDITIONS = (Condition.HEARD, Condition.UNHEARD)


def config_name(language: str, condition) -> str:
    return f"{language}_{Condition.parse(condition).value}"


@dataclass(frozen=True)
class BundleLayout:
    languages: tuple[str, str] = SPLITS["V1-EU"].languages

    def __post_init__(self):
        langs = tuple(self.languages)
        if len(langs) != 2 or langs[0] == langs[1]:
            raise ValueError(f"layout needs two distinct languages, got {langs!r}")
        for lang in langs:
            if not lang or any(ch.isspace() or ch in "/\\" for ch in lang):
                raise ValueError(f"unusable language name {lang!r}")
        object.__setattr__(self, "languages", langs)

    @classmethod
    def for_split(cls, name: str) -> "BundleLayout":
        return cls(SPLITS[name].languages)

    @property
    def configurations(self) -> list[tuple[str, Condition]]:
        """Fixed scoring order: each language heard, then unheard."""
        return [(lang, cond) for lang in self.languages for cond in CONDITIONS]

    @staticmethod
    def filename(language: str, condition) -> str:
        return f"sub_score_{config_name(language, condition)}.txt"

    @property
    def expected_filenames(self) -> dict[str, tuple[str, Condition]]:
        return {self.filename(l, c): (l, c) for l, c in self.configurations}

    def other(self, language: str) -> str:
        a, b = self.languages
        return b if language == a else a

    def train_language(self, language: str, condition) -> str:
        """Language of the model that produced a given file.

        The model trained on A yields A_heard and B_unheard.
        """
        return language if Condition.parse(condition) is Condition.HEARD else self.other(language)


@dataclass(frozen=True)
class SubmissionBundle:
    files: Mapping[tuple[str, Condition], ScoreFile]
    warnings: tuple[str, ...] = ()


def _member_map(zf: zipfile.ZipFile, layout: BundleLayout):
    wanted = layout.expected_filenames
    found: dict[str, zipfile.ZipInfo] = {}
    extras = []
    for info in zf.infolist():
        if info.is_dir():
            continue
        parts = [p for p in info.filename.replace("\\", "/").split("/") if p]
        base = parts[-1] if parts else ""
        if base in wanted and len(parts) <= 2:
            if base in found:
                raise ArchiveError(f"{base} appears more than once in the archive")
            found[base] = info
        else:
            extras.append(info.filename)
    return found, extras


def open_bundle(archive: bytes, layout: BundleLayout) -> SubmissionBundle:
    try:
        zf = zipfile.ZipFile(io.BytesIO(archive))
    except (zipfile.BadZipFile, OSError, ValueError) as exc:
        raise ArchiveError(f"not a readable zip archive: {exc}") from None
    with zf:
        found, extras = _member_map(zf, layout)
        missing = set(layout.expected_filenames) - set(found)
        if missing:
            raise MissingFilesError(missing)
        files = {}
        for name, key in layout.expected_filenames.items():
            try:
                raw = zf.read(found[name])
            except (zipfile.BadZipFile, OSError, RuntimeError) as exc:
                raise ArchiveError(f"cannot read {name}: {exc}") from None
            try:
                files[key] = parse_scores(raw)
            except UnicodeDecodeError:
                raise FormatError(f"{name}: not valid UTF-8") from None
            except FameError as exc:
                raise _in_file(exc, name) from None
    warnings = tuple(f"unexpected file in archive: {e}" for e in sorted(extras))
    return SubmissionBundle(files, warnings)


def _in_file(exc: FameError, name: str) -> FameError:
    err = FormatError(f"{name}: {exc}")
    err.line = getattr(exc, "line", None)
    err.file = name
    return err


def make_bundle(files: Mapping, layout: BundleLayout, folder: str = "") -> bytes:
    """Build a deterministic zip from per-configuration scores.

    ``files`` values may be ``ScoreFile`` objects, mappings or raw text.
    """
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for lang, cond in layout.configurations:
            content = files[(lang, cond)] if (lang, cond) in files else files[config_name(lang, cond)]
            if isinstance(content, Mapping):
                content = ScoreFile(content)
            if isinstance(content, ScoreFile):
                content = format_scores(content)
            name = layout.filename(lang, cond)
            if folder:
                name = f"{folder.strip('/')}/{name}"
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, content)
    return buf.getvalue()


# -- keys ---------------------------------------------------------------------


@dataclass(frozen=True)
class TrialIndex:
    """Label-free view of the scoring keys: which ids each file must cover."""

    ids: Mapping[tuple[str, Condition], frozenset]


@dataclass(frozen=True)
class KeyEntry:
    trials: TrialList
    truth: GroundTruth


@dataclass(frozen=True)
class ScoringKeys:
    entries: Mapping[tuple[str, Condition], KeyEntry]

    def __post_init__(self):
        for (lang, cond), entry in self.entries.items():
            report = check_alignment(entry.trials, entry.truth)
            if not report.ok:
                raise FormatError(
                    f"{config_name(lang, cond)}: trial list and ground truth disagree "
                    f"({len(report.missing_in_gt)} ids without label, "
                    f"{len(report.extra_in_gt)} labels without trial)")
            if len(entry.trials) == 0 or entry.truth.n_match == 0 or entry.truth.n_nonmatch == 0:
                raise FormatError(f"{config_name(lang, cond)}: keys need both match and "
                                  "non-match trials")

    def id_index(self) -> TrialIndex:
        return TrialIndex({k: frozenset(e.trials.ids) for k, e in self.entries.items()})

    @classmethod
    def from_texts(cls, texts: Mapping[str, Mapping[str, str]], layout: BundleLayout):
        """``texts[config_name] = {"trials": ..., "truth": ...}``."""
        entries = {}
        for lang, cond in layout.configurations:
            name = config_name(lang, cond)
            if name not in texts:
                raise FormatError(f"keys for {name} are missing")
            entries[(lang, cond)] = KeyEntry(
                parse_trial_list(texts[name]["trials"], lang, cond),
                parse_ground_truth(texts[name]["truth"]))
        return cls(entries)

    def to_texts(self) -> dict[str, dict[str, str]]:
        return {config_name(l, c): {"trials": format_trial_list(e.trials),
                                    "truth": format_ground_truth(e.truth)}
                for (l, c), e in self.entries.items()}


def keys_filenames(language: str, condition) -> tuple[str, str]:
    name = config_name(language, condition)
    return f"trials_{name}.txt", f"truth_{name}.txt"


def load_keys(directory, layout: BundleLayout) -> ScoringKeys:
    directory = Path(directory)
    texts = {}
    for lang, cond in layout.configurations:
        t_name, g_name = keys_filenames(lang, cond)
        t_path, g_path = directory / t_name, directory / g_name
        for p in (t_path, g_path):
            if not p.is_file():
                raise FormatError(f"keys file not found: {p}")
        texts[config_name(lang, cond)] = {"trials": t_path.read_bytes(), "truth": g_path.read_bytes()}
    return ScoringKeys.from_texts(texts, layout)


def write_keys(keys: ScoringKeys, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for (lang, cond), entry in keys.entries.items():
        t_name, g_name = keys_filenames(lang, cond)
        (directory / t_name).write_text(format_trial_list(entry.trials), encoding="utf-8")
        (directory / g_name).write_text(format_ground_truth(entry.truth), encoding="utf-8")


# -- validation and scoring ----------------------------------------------------


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {"status": "ok" if self.ok else "invalid",
                "errors": list(self.errors), "warnings": list(self.warnings)}


def _coverage(bundle: SubmissionBundle, index: TrialIndex, layout: BundleLayout):
    missing, warnings = {}, []
    for lang, cond in layout.configurations:
        name = config_name(lang, cond)
        scored = bundle.files[(lang, cond)].scores
        required = index.ids[(lang, cond)]
        absent = sorted(i for i in required if i not in scored)
        if absent:
            missing[name] = absent
        extra = sum(1 for i in scored if i not in required)
        if extra:
            warnings.append(f"{name}: {extra} score(s) for unknown ids ignored")
    return missing, warnings


def validate_only(archive: bytes, layout: BundleLayout, keys) -> ValidationReport:
    """Check layout, formats and id coverage without looking at labels."""
    index = keys.id_index() if isinstance(keys, ScoringKeys) else keys
    report = ValidationReport()
    try:
        bundle = open_bundle(archive, layout)
    except FameError as exc:
        report.errors.append(str(exc))
        return report
    report.warnings.extend(bundle.warnings)
    missing, warnings = _coverage(bundle, index, layout)
    for name, ids in missing.items():
        for pid in ids:
            report.errors.append(f"{name}: no score for id {pid}")
    report.warnings.extend(warnings)
    return report


@dataclass(frozen=True)
class BundleReport:
    layout: BundleLayout
    results: Mapping[tuple[str, Condition], EerResult]
    overall: float
    warnings: tuple[str, ...] = ()

    @property
    def grid(self) -> ConfigurationGrid:
        return ConfigurationGrid(self.layout.languages, {
            (self.layout.train_language(l, c), l): r for (l, c), r in self.results.items()})

    def to_dict(self) -> dict:
        return {
            "languages": list(self.layout.languages),
            "configurations": {
                config_name(l, c): dict(eer_report(r), train=self.layout.train_language(l, c),
                                        test=l)
                for (l, c), r in self.results.items()},
            "overall": round(self.overall, 4),
            "overall_full": self.overall,
            "overall_display": display_round(self.overall),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def score_bundle(bundle: SubmissionBundle, keys: ScoringKeys,
                 layout: BundleLayout | None = None) -> BundleReport:
    layout = layout or BundleLayout(tuple(dict.fromkeys(l for l, _ in bundle.files)))
    missing, warnings = _coverage(bundle, keys.id_index(), layout)
    if missing:
        # fail fast per file: one id per configuration
        raise CoverageError({name: ids[:1] for name, ids in missing.items()})
    results = {}
    for lang, cond in layout.configurations:
        results[(lang, cond)] = compute_eer(bundle.files[(lang, cond)], keys.entries[(lang, cond)].truth)
    overall = overall_score([r.eer for r in results.values()])
    return BundleReport(layout, results, overall, tuple(bundle.warnings) + tuple(warnings))


def score_archive(archive: bytes, layout: BundleLayout, keys: ScoringKeys) -> BundleReport:
    """open_bundle + score_bundle; the single path used by the CLI and the service."""
    return score_bundle(open_bundle(archive, layout), keys, layout)


def format_report(report: BundleReport) -> str:
    lines = []
    for (lang, cond), r in report.results.items():
        lines.append(f"{config_name(lang, cond):<24} EER {r.eer:8.4f}  ({r.display})")
    lines.append(f"{'overall':<24}     {report.overall:8.4f}  ({display_round(report.overall)})")
    lines.extend(f"warning: {w}" for w in report.warnings)
    return "\n".join(lines)
