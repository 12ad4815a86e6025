"""Synthetic multilingual face/voice embeddings mirroring the challenge protocol.

Each speaker has a unit-norm latent identity. Faces and voices are fixed
random linear maps of that identity plus isotropic noise; voices in each
language additionally carry a constant language offset. Train and test
speakers are disjoint and every speaker has data in both languages.
"""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable, write_table
from .fop import FopConfig, train
from .metrics import ConfigurationGrid, eer_from_arrays
from .submission import BundleLayout, KeyEntry, ScoringKeys, write_keys
from .trials import Condition, GroundTruth, Label, TrialList, TrialPair, format_ground_truth, format_trial_list

ID_ALPHABET = np.array(list(string.ascii_lowercase + string.digits))


@dataclass(frozen=True)
class SynthConfig:
    n_speakers: int = 58
    languages: tuple[str, str] = ("English", "German")
    d_face: int = 512
    d_voice: int = 512
    identity_dim: int = 16
    language_shift: float = 6.0
    noise_sigma: float = 2.0
    utterances_per_speaker_per_language: int = 8
    faces_per_speaker: int = 4
    n_train: int | None = 50
    n_test: int | None = 8
    train_fraction: float | None = None
    n_trials: int = 600
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "languages", tuple(self.languages))
        if len(self.languages) != 2 or self.languages[0] == self.languages[1]:
            raise ValueError("two distinct languages are required")
        if self.language_shift < 0:
            raise ValueError("language_shift must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for name in ("d_face", "d_voice", "identity_dim", "utterances_per_speaker_per_language",
                     "faces_per_speaker", "n_trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        n_train, n_test = self.split_sizes
        if n_train < 2 or n_test < 2 or n_train + n_test != self.n_speakers:
            raise ValueError(f"invalid train/test split {n_train}/{n_test} of {self.n_speakers} speakers")

    @property
    def split_sizes(self) -> tuple[int, int]:
        if self.train_fraction is not None:
            n_train = int(round(self.train_fraction * self.n_speakers))
            return n_train, self.n_speakers - n_train
        n_train = self.n_train if self.n_train is not None else self.n_speakers - self.n_test
        n_test = self.n_test if self.n_test is not None else self.n_speakers - n_train
        return n_train, n_test

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["languages"] = list(self.languages)
        return d


@dataclass
class SynthDataset:
    config: SynthConfig
    table: EmbeddingTable
    train_speakers: tuple[str, ...]
    test_speakers: tuple[str, ...]
    trials: dict[str, tuple[TrialList, GroundTruth]] = field(default_factory=dict)

    @property
    def languages(self) -> tuple[str, str]:
        return self.config.languages

    def keys(self) -> ScoringKeys:
        """Scoring keys where heard and unheard files share a language's trial list."""
        entries = {}
        for lang in self.languages:
            tl, gt = self.trials[lang]
            for cond in (Condition.HEARD, Condition.UNHEARD):
                entries[(lang, cond)] = KeyEntry(TrialList(lang, cond, tl.pairs), gt)
        return ScoringKeys(entries)


def _unit(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def generate(config: SynthConfig) -> SynthDataset:
    rng = np.random.default_rng(config.seed)
    n, k = config.n_speakers, config.identity_dim
    identities = _unit(rng, n, k)
    # maps scaled so a unit identity lands at norm ~1; noise norm ~noise_sigma
    face_map = rng.normal(0.0, 1.0 / np.sqrt(config.d_face), size=(config.d_face, k))
    voice_map = rng.normal(0.0, 1.0 / np.sqrt(config.d_voice), size=(config.d_voice, k))
    offsets = {lang: _unit(rng, 1, config.d_voice)[0] for lang in config.languages}
    order = rng.permutation(n)

    width = max(3, len(str(n)))
    names = [f"spk{i:0{width}d}" for i in range(n)]
    table = EmbeddingTable(config.d_face, config.d_voice)
    face_sd = config.noise_sigma / np.sqrt(config.d_face)
    voice_sd = config.noise_sigma / np.sqrt(config.d_voice)
    for lang in config.languages:
        for i, name in enumerate(names):
            faces = identities[i] @ face_map.T + rng.normal(
                0.0, face_sd, size=(config.faces_per_speaker, config.d_face))
            table.add(name, lang, "face", faces)
        for i, name in enumerate(names):
            voices = (identities[i] @ voice_map.T + config.language_shift * offsets[lang]
                      + rng.normal(0.0, voice_sd,
                                   size=(config.utterances_per_speaker_per_language, config.d_voice)))
            table.add(name, lang, "voice", voices)

    n_train, _ = config.split_sizes
    train_speakers = tuple(sorted(names[i] for i in order[:n_train]))
    test_speakers = tuple(sorted(names[i] for i in order[n_train:]))
    dataset = SynthDataset(config, table, train_speakers, test_speakers)
    for j, lang in enumerate(config.languages):
        dataset.trials[lang] = make_trials(dataset, lang, config.n_trials,
                                           seed=config.seed * 1000 + 17 + j)
    return dataset


def _new_id(rng, taken: set) -> str:
    while True:
        candidate = "".join(rng.choice(ID_ALPHABET, size=8))
        if candidate not in taken:
            taken.add(candidate)
            return candidate


def make_trials(dataset: SynthDataset, language: str, n_trials: int, seed: int,
                condition=Condition.HEARD, taken_ids: set | None = None) -> tuple[TrialList, GroundTruth]:
    """Balanced match/non-match trials over the test speakers of one language."""
    if n_trials < 2:
        raise ValueError("n_trials must be at least 2")
    speakers = list(dataset.test_speakers)
    if len(speakers) < 2:
        raise ValueError("non-match trials need at least two test speakers")
    table = dataset.table
    face_rows = {s: table.rows(language, "face", s) for s in speakers}
    voice_rows = {s: table.rows(language, "voice", s) for s in speakers}
    for s in speakers:
        if face_rows[s].size == 0 or voice_rows[s].size == 0:
            raise ValueError(f"test speaker {s!r} has no {language} data")

    rng = np.random.default_rng(seed)
    n_match = (n_trials + 1) // 2
    kinds = np.array([1] * n_match + [0] * (n_trials - n_match))
    rng.shuffle(kinds)
    taken = set() if taken_ids is None else taken_ids
    pairs, labels = [], {}
    for is_match in kinds:
        s = speakers[rng.integers(len(speakers))]
        if is_match:
            other = s
        else:
            other = speakers[rng.integers(len(speakers) - 1)]
            if other == s:
                other = speakers[-1]
        v = int(rng.choice(voice_rows[s]))
        f = int(rng.choice(face_rows[other]))
        pid = _new_id(rng, taken)
        pairs.append(TrialPair(pid, table.path(language, "voice", v), table.path(language, "face", f)))
        labels[pid] = Label(int(is_match))
    return TrialList(language, condition, tuple(pairs)), GroundTruth(labels)


def write_dataset(dataset: SynthDataset, directory) -> dict[str, Path]:
    """Write embeddings, split, trial lists and scoring keys under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"embeddings": directory / "embeddings.txt", "split": directory / "split.json",
             "keys": directory / "keys"}
    write_table(dataset.table, paths["embeddings"])
    paths["split"].write_text(json.dumps({
        "languages": list(dataset.languages),
        "train_speakers": list(dataset.train_speakers),
        "test_speakers": list(dataset.test_speakers),
        "config": dataset.config.to_dict(),
    }, indent=2) + "\n", encoding="utf-8")
    for lang, (tl, gt) in dataset.trials.items():
        (directory / f"trials_{lang}.txt").write_text(format_trial_list(tl), encoding="utf-8")
        (directory / f"truth_{lang}.txt").write_text(format_ground_truth(gt), encoding="utf-8")
    write_keys(dataset.keys(), paths["keys"])
    return paths


# -- train / score grid --------------------------------------------------------

GRID_FOP_DEFAULTS = {"D": 128, "alpha": 1.0, "learning_rate": 0.1, "epochs": 150, "seed": 0}


def fop_config_for(table: EmbeddingTable, n_classes: int, settings: dict | None = None) -> FopConfig:
    merged = dict(GRID_FOP_DEFAULTS)
    merged.update(settings or {})
    merged.update(d_face=table.d_face, d_voice=table.d_voice, n_classes=n_classes)
    return FopConfig.from_dict(merged)


def train_language(table: EmbeddingTable, language: str, speakers, settings: dict | None = None):
    batch, _ = table.training_set(language, speakers)
    config = fop_config_for(table, len(list(speakers)), settings)
    return train(config, batch), config


def score_trials(model, table: EmbeddingTable, trials: TrialList) -> dict[str, float]:
    from .fop import score_pairs

    faces, voices = table.trial_arrays(trials)
    return dict(zip(trials.ids, score_pairs(model, faces, voices).tolist()))


@dataclass
class GridExperiment:
    grid: ConfigurationGrid
    traces: dict[str, list] = field(default_factory=dict)

    @property
    def overall(self) -> float:
        return self.grid.overall


def run_grid_experiment(config: SynthConfig, fop_config: dict | None = None,
                        dataset: SynthDataset | None = None) -> GridExperiment:
    """Train one model per language, score heard and unheard trials, return the 2x2 EER grid."""
    if isinstance(fop_config, FopConfig):
        fop_config = {k: v for k, v in asdict(fop_config).items()
                      if k not in ("d_face", "d_voice", "n_classes")}
    dataset = generate(config) if dataset is None else dataset
    entries, traces = {}, {}
    for train_lang in dataset.languages:
        result, _ = train_language(dataset.table, train_lang, dataset.train_speakers, fop_config)
        traces[train_lang] = result.trace
        for test_lang in dataset.languages:
            tl, gt = dataset.trials[test_lang]
            scores = score_trials(result.model, dataset.table, tl)
            ids = tl.ids
            entries[(train_lang, test_lang)] = eer_from_arrays(
                [scores[i] for i in ids], [int(gt.labels[i]) for i in ids])
    return GridExperiment(ConfigurationGrid(dataset.languages, entries), traces)


def default_layout(config: SynthConfig) -> BundleLayout:
    return BundleLayout(config.languages)
