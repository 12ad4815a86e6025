"""Embedding tables and the mapping from trial paths to embedding rows.

File layout::

    fame-embeddings 1 <n_rows> <d_face> <d_voice>
    <speaker_id> <language> <face|voice> <d floats>
    ...

Row ``i`` of a ``(language, modality)`` group is addressed by trial paths
``faces/<language>/<i:05d>.jpg`` and ``voices/<language>/<i:05d>.wav``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .fop import Batch
from .trials import TrialList, decode_text

MAGIC = "fame-embeddings"
VERSION = "1"
MODALITIES = ("face", "voice")
_PATH_RE = re.compile(r"^(faces|voices)/([^/]+)/(\d+)\.(jpg|wav)$")


@dataclass
class EmbeddingGroup:
    speakers: list[str] = field(default_factory=list)
    vectors: np.ndarray | None = None


@dataclass
class EmbeddingTable:
    d_face: int
    d_voice: int
    groups: dict[tuple[str, str], EmbeddingGroup] = field(default_factory=dict)

    def dim(self, modality: str) -> int:
        return self.d_face if modality == "face" else self.d_voice

    def add(self, speaker: str, language: str, modality: str, vectors) -> None:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if vectors.shape[1] != self.dim(modality):
            raise FormatError(f"{modality} vector has dim {vectors.shape[1]}, expected {self.dim(modality)}")
        group = self.groups.setdefault((language, modality), EmbeddingGroup())
        group.speakers.extend([speaker] * vectors.shape[0])
        group.vectors = vectors if group.vectors is None else np.vstack([group.vectors, vectors])

    @property
    def languages(self) -> list[str]:
        return list(dict.fromkeys(lang for lang, _ in self.groups))

    @property
    def n_rows(self) -> int:
        return sum(len(g.speakers) for g in self.groups.values())

    def speakers(self) -> list[str]:
        return list(dict.fromkeys(s for g in self.groups.values() for s in g.speakers))

    def rows(self, language: str, modality: str, speaker: str | None = None) -> np.ndarray:
        """Indices of the rows of one group, optionally for one speaker."""
        group = self.groups.get((language, modality))
        if group is None:
            return np.empty(0, dtype=np.int64)
        spk = np.asarray(group.speakers, dtype=object)
        if speaker is None:
            return np.arange(spk.shape[0])
        return np.flatnonzero(spk == speaker)

    def vector(self, language: str, modality: str, index: int) -> np.ndarray:
        group = self.groups.get((language, modality))
        if group is None or not 0 <= index < len(group.speakers):
            raise KeyError(f"no {modality} row {index} for language {language!r}")
        return group.vectors[index]

    @staticmethod
    def path(language: str, modality: str, index: int) -> str:
        if modality == "face":
            return f"faces/{language}/{index:05d}.jpg"
        return f"voices/{language}/{index:05d}.wav"

    def resolve(self, path: str) -> tuple[str, np.ndarray]:
        """``(speaker, vector)`` for a trial path."""
        m = _PATH_RE.match(path)
        if not m:
            raise FormatError(f"cannot map trial path {path!r} to an embedding row")
        modality = "face" if m.group(1) == "faces" else "voice"
        language, index = m.group(2), int(m.group(3))
        group = self.groups.get((language, modality))
        if group is None or index >= len(group.speakers):
            raise FormatError(f"trial path {path!r} points past the embedding table")
        return group.speakers[index], group.vectors[index]

    def trial_arrays(self, trials: TrialList) -> tuple[np.ndarray, np.ndarray]:
        faces = np.array([self.resolve(p.face_path)[1] for p in trials.pairs]).reshape(-1, self.d_face)
        voices = np.array([self.resolve(p.voice_path)[1] for p in trials.pairs]).reshape(-1, self.d_voice)
        return faces, voices

    def training_set(self, language: str, speakers) -> tuple[Batch, list[str]]:
        """Pair every voice row of ``speakers`` in ``language`` with one of their faces.

        Faces are cycled in table order. Labels index ``speakers`` densely.
        """
        faces, voices, labels = [], [], []
        speakers = list(speakers)
        for label, spk in enumerate(speakers):
            v_rows = self.rows(language, "voice", spk)
            f_rows = self.rows(language, "face", spk)
            if v_rows.size == 0 or f_rows.size == 0:
                raise FormatError(f"speaker {spk!r} lacks face or voice rows in {language!r}")
            v_group = self.groups[(language, "voice")].vectors
            f_group = self.groups[(language, "face")].vectors
            for j, r in enumerate(v_rows):
                voices.append(v_group[r])
                faces.append(f_group[f_rows[j % f_rows.size]])
                labels.append(label)
        return Batch(np.array(faces), np.array(voices), np.array(labels)), speakers


def format_table(table: EmbeddingTable) -> str:
    out = [f"{MAGIC} {VERSION} {table.n_rows} {table.d_face} {table.d_voice}\n"]
    for (language, modality), group in table.groups.items():
        for spk, vec in zip(group.speakers, group.vectors):
            out.append(f"{spk} {language} {modality} " + " ".join(map(repr, vec.tolist())) + "\n")
    return "".join(out)


def write_table(table: EmbeddingTable, path) -> None:
    Path(path).write_text(format_table(table), encoding="utf-8")


def parse_table(text) -> EmbeddingTable:
    lines = decode_text(text).splitlines()
    if not lines:
        raise FormatError("empty embedding table")
    header = lines[0].split()
    if len(header) != 5 or header[0] != MAGIC:
        raise FormatError("missing embedding-table header", line=1)
    if header[1] != VERSION:
        raise FormatError(f"unsupported embedding-table version {header[1]!r}", line=1)
    try:
        n_rows, d_face, d_voice = (int(x) for x in header[2:])
    except ValueError:
        raise FormatError("header counts must be integers", line=1) from None
    buckets: dict[tuple[str, str], tuple[list, list]] = {}
    count = 0
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 3:
            raise FormatError("expected '<speaker> <language> <face|voice> <floats>'", line=lineno)
        spk, language, modality = fields[:3]
        if modality not in MODALITIES:
            raise FormatError(f"modality must be face or voice, got {modality!r}", line=lineno)
        dim = d_face if modality == "face" else d_voice
        if len(fields) - 3 != dim:
            raise FormatError(f"{modality} row has {len(fields) - 3} values, expected {dim}", line=lineno)
        try:
            vec = [float(x) for x in fields[3:]]
        except ValueError:
            raise FormatError("non-numeric embedding value", line=lineno) from None
        spks, vecs = buckets.setdefault((language, modality), ([], []))
        spks.append(spk)
        vecs.append(vec)
        count += 1
    if count != n_rows:
        raise FormatError(f"header declares {n_rows} rows, found {count}")
    table = EmbeddingTable(d_face, d_voice)
    for key, (spks, vecs) in buckets.items():
        table.groups[key] = EmbeddingGroup(spks, np.array(vecs, dtype=np.float64).reshape(-1, table.dim(key[1])))
    return table


def read_table(path) -> EmbeddingTable:
    return parse_table(Path(path).read_bytes())
