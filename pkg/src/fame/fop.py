"""Two-branch fusion baseline trained with cross-entropy and an orthogonality loss.

Face and voice embeddings are linearly projected to a shared dimension,
combined through a sigmoid gate, and classified over training identities.
Gradients are written out by hand; there is no autodiff dependency.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DegenerateBatchError, FormatError, ScoringError, ShapeError

PARAM_NAMES = ("W_f", "b_f", "W_v", "b_v", "W_g", "b_g", "W_c", "b_c")
CHECKPOINT_FORMAT = "fame-fop-checkpoint"
CHECKPOINT_VERSION = 1
NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class FopConfig:
    d_face: int
    d_voice: int
    n_classes: int
    D: int = 128
    alpha: float = 1.0
    learning_rate: float = 0.1
    epochs: int = 100
    seed: int = 0
    batch_size: int | None = None  # None = full batch

    def __post_init__(self):
        for name in ("d_face", "d_voice", "n_classes", "D"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 0:
            raise ValueError(f"epochs must be a non-negative integer, got {self.epochs!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size is not None and self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")

    @classmethod
    def from_dict(cls, data: dict) -> "FopConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown FOP config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class FopModel:
    W_f: np.ndarray
    b_f: np.ndarray
    W_v: np.ndarray
    b_v: np.ndarray
    W_g: np.ndarray
    b_g: np.ndarray
    W_c: np.ndarray
    b_c: np.ndarray

    @property
    def D(self) -> int:
        return self.b_f.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "FopModel":
        return FopModel(**{k: v.copy() for k, v in self.params().items()})

    def check(self, config: FopConfig | None = None) -> None:
        D = self.D
        d_face, d_voice, n_classes = self.W_f.shape[1], self.W_v.shape[1], self.W_c.shape[0]
        if config is not None:
            D, d_face, d_voice, n_classes = config.D, config.d_face, config.d_voice, config.n_classes
        shapes = {"W_f": (D, d_face), "b_f": (D,), "W_v": (D, d_voice), "b_v": (D,),
                  "W_g": (D, 2 * D), "b_g": (D,), "W_c": (n_classes, D), "b_c": (n_classes,)}
        for name, shape in shapes.items():
            value = getattr(self, name)
            if value.shape != shape:
                raise ShapeError(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} contains non-finite values")


def init_model(config: FopConfig) -> FopModel:
    rng = np.random.default_rng(config.seed)
    D = config.D

    def dense(rows, cols):
        return rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols))

    return FopModel(
        W_f=dense(D, config.d_face), b_f=np.zeros(D),
        W_v=dense(D, config.d_voice), b_v=np.zeros(D),
        W_g=dense(D, 2 * D), b_g=np.zeros(D),
        W_c=dense(config.n_classes, D), b_c=np.zeros(config.n_classes),
    )


@dataclass(frozen=True)
class Batch:
    faces: np.ndarray
    voices: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        faces = np.atleast_2d(np.asarray(self.faces, dtype=np.float64))
        voices = np.atleast_2d(np.asarray(self.voices, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if not (faces.shape[0] == voices.shape[0] == labels.shape[0]):
            raise ShapeError("faces, voices and labels must have the same number of rows")
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "voices", voices)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "Batch":
        return Batch(self.faces[idx], self.voices[idx], self.labels[idx])


def _check_batch(model: FopModel, batch: Batch, need_pairs: bool = True) -> None:
    if batch.faces.shape[1] != model.W_f.shape[1]:
        raise ShapeError(f"face dim {batch.faces.shape[1]} != {model.W_f.shape[1]}")
    if batch.voices.shape[1] != model.W_v.shape[1]:
        raise ShapeError(f"voice dim {batch.voices.shape[1]} != {model.W_v.shape[1]}")
    n_classes = model.W_c.shape[0]
    if batch.labels.size and (batch.labels.min() < 0 or batch.labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    if need_pairs and (len(batch) < 2 or np.unique(batch.labels).size < 2):
        raise DegenerateBatchError("batch needs at least two samples and two distinct labels")


@dataclass(frozen=True)
class LossBreakdown:
    l_ce: float
    l_oc: float
    alpha: float

    @property
    def total(self) -> float:
        return self.l_ce + self.alpha * self.l_oc


# -- forward -------------------------------------------------------------------


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _linear(W, b, x, what):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"{what} input has dim {x.shape[-1]}, expected {W.shape[1]}")
    return x @ W.T + b


def project_face(model: FopModel, x) -> np.ndarray:
    return _linear(model.W_f, model.b_f, x, "face")


def project_voice(model: FopModel, x) -> np.ndarray:
    return _linear(model.W_v, model.b_v, x, "voice")


def gated_fuse(model: FopModel, f_face, f_voice) -> tuple[np.ndarray, np.ndarray]:
    f_face = np.asarray(f_face, dtype=np.float64)
    f_voice = np.asarray(f_voice, dtype=np.float64)
    D = model.D
    if f_face.shape[-1] != D or f_voice.shape[-1] != D or f_face.shape != f_voice.shape:
        raise ShapeError(f"gated fusion expects two length-{D} inputs")
    gate = _sigmoid(np.concatenate([f_face, f_voice], axis=-1) @ model.W_g.T + model.b_g)
    return gate * f_face + (1.0 - gate) * f_voice, gate


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _forward(model: FopModel, batch: Batch) -> dict:
    p_f = project_face(model, batch.faces)
    p_v = project_voice(model, batch.voices)
    fused, gate = gated_fuse(model, p_f, p_v)
    logits = fused @ model.W_c.T + model.b_c
    return {"p_f": p_f, "p_v": p_v, "gate": gate, "fused": fused, "logits": logits}


def logits(model: FopModel, batch: Batch) -> np.ndarray:
    return _forward(model, batch)["logits"]


def _ce_from_logits(logits, labels) -> float:
    logp = _log_softmax(logits)
    return float(-logp[np.arange(labels.shape[0]), labels].mean())


def loss_ce(model: FopModel, batch: Batch) -> float:
    _check_batch(model, batch, need_pairs=False)
    if len(batch) == 0:
        raise DegenerateBatchError("empty batch")
    return _ce_from_logits(_forward(model, batch)["logits"], batch.labels)


def _unit_rows(x):
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms < NORM_FLOOR):
        raise DegenerateBatchError("zero-norm fused embedding in orthogonality loss")
    return x / norms[:, None], norms


def loss_oc(fused, labels) -> float:
    """Orthogonality loss on fused embeddings.

    ``(1 - mean same-label cosine) + |mean different-label cosine|`` over
    unordered pairs. With no same-label pair the first term is dropped.
    """
    fused = np.atleast_2d(np.asarray(fused, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if fused.shape[0] != labels.shape[0]:
        raise ShapeError("fused and labels disagree in length")
    if fused.shape[0] < 2 or np.unique(labels).size < 2:
        raise DegenerateBatchError("orthogonality loss needs at least two distinct labels")
    unit, _ = _unit_rows(fused)
    pos_sum, pos_n, neg_sum, neg_n = kernels.pair_cosine_sums(unit @ unit.T, labels)
    intra = 1.0 - pos_sum / pos_n if pos_n else 0.0
    return float(intra + abs(neg_sum / neg_n))


def losses(model: FopModel, batch: Batch, alpha: float) -> LossBreakdown:
    _check_batch(model, batch)
    cache = _forward(model, batch)
    return LossBreakdown(_ce_from_logits(cache["logits"], batch.labels),
                         loss_oc(cache["fused"], batch.labels), float(alpha))


# -- backward ------------------------------------------------------------------


def _oc_grad(fused, labels):
    """Value and gradient of ``loss_oc`` with respect to the fused rows."""
    unit, norms = _unit_rows(fused)
    sim = unit @ unit.T
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(labels.shape[0], dtype=bool)
    pos = same & off_diag
    neg = ~same
    # masks count each unordered pair twice
    pos_n = pos.sum() // 2
    neg_n = neg.sum() // 2
    pos_mean = (sim[pos].sum() / 2) / pos_n if pos_n else 0.0
    neg_mean = (sim[neg].sum() / 2) / neg_n
    value = float((1.0 - pos_mean if pos_n else 0.0) + abs(neg_mean))

    coef = np.zeros_like(sim)
    if pos_n:
        coef[pos] = -1.0 / pos_n
    coef[neg] = np.sign(neg_mean) / neg_n
    # d value / d unit_i = sum_j coef_ij unit_j  (coef symmetric, zero diagonal)
    d_unit = coef @ unit
    radial = np.sum(d_unit * unit, axis=1, keepdims=True)
    d_fused = (d_unit - radial * unit) / norms[:, None]
    return value, d_fused


def loss_and_grads(model: FopModel, batch: Batch, alpha: float):
    """Return ``(LossBreakdown, grads)`` for ``l_ce + alpha * l_oc``."""
    _check_batch(model, batch)
    n = len(batch)
    cache = _forward(model, batch)
    p_f, p_v, gate, fused = cache["p_f"], cache["p_v"], cache["gate"], cache["fused"]

    logp = _log_softmax(cache["logits"])
    l_ce = float(-logp[np.arange(n), batch.labels].mean())
    d_logits = np.exp(logp)
    d_logits[np.arange(n), batch.labels] -= 1.0
    d_logits /= n

    grads = {"W_c": d_logits.T @ fused, "b_c": d_logits.sum(axis=0)}
    d_fused = d_logits @ model.W_c

    l_oc, d_fused_oc = _oc_grad(fused, batch.labels)
    if alpha:
        d_fused = d_fused + alpha * d_fused_oc

    d_pf = gate * d_fused
    d_pv = (1.0 - gate) * d_fused
    d_z = d_fused * (p_f - p_v) * gate * (1.0 - gate)
    concat = np.concatenate([p_f, p_v], axis=1)
    grads["W_g"] = d_z.T @ concat
    grads["b_g"] = d_z.sum(axis=0)
    d_concat = d_z @ model.W_g
    D = model.D
    d_pf = d_pf + d_concat[:, :D]
    d_pv = d_pv + d_concat[:, D:]

    grads["W_f"] = d_pf.T @ batch.faces
    grads["b_f"] = d_pf.sum(axis=0)
    grads["W_v"] = d_pv.T @ batch.voices
    grads["b_v"] = d_pv.sum(axis=0)
    return LossBreakdown(l_ce, l_oc, float(alpha)), {k: grads[k] for k in PARAM_NAMES}


def backward(model: FopModel, batch: Batch, config) -> dict[str, np.ndarray]:
    """Analytic gradients of the total loss. ``config`` is a FopConfig or an alpha."""
    alpha = config.alpha if isinstance(config, FopConfig) else float(config)
    return loss_and_grads(model, batch, alpha)[1]


# -- training ------------------------------------------------------------------


@dataclass
class TrainResult:
    model: FopModel
    trace: list[LossBreakdown] = field(default_factory=list)

    def totals(self) -> list[float]:
        return [t.total for t in self.trace]


def train(config: FopConfig, dataset: Batch, model: FopModel | None = None) -> TrainResult:
    """Fixed-step gradient descent; one trace entry per epoch.

    Full-batch by default. Each trace entry is the loss at the parameters the
    epoch started from (the mean over mini-batches when batching).
    """
    if len(dataset) == 0:
        raise DegenerateBatchError("empty training set")
    if np.unique(dataset.labels).size < 2:
        raise DegenerateBatchError("training needs at least two identities")
    model = init_model(config) if model is None else model.copy()
    model.check(config)
    _check_batch(model, dataset)
    rng = np.random.default_rng(config.seed + 1)
    lr = config.learning_rate
    trace = []
    for _ in range(config.epochs):
        if config.batch_size is None or config.batch_size >= len(dataset):
            batches = [dataset]
        else:
            order = rng.permutation(len(dataset))
            batches = [dataset.subset(order[i:i + config.batch_size])
                       for i in range(0, len(dataset), config.batch_size)]
            batches = [b for b in batches if len(b) >= 2 and np.unique(b.labels).size >= 2]
        parts = []
        for batch in batches:
            loss, grads = loss_and_grads(model, batch, config.alpha)
            parts.append(loss)
            if lr:
                for name, g in grads.items():
                    getattr(model, name).__isub__(lr * g)
        if len(parts) == 1:
            trace.append(parts[0])
        else:
            trace.append(LossBreakdown(float(np.mean([p.l_ce for p in parts])),
                                       float(np.mean([p.l_oc for p in parts])), config.alpha))
    return TrainResult(model, trace)


# -- scoring -------------------------------------------------------------------


def score_pairs(model: FopModel, faces, voices) -> np.ndarray:
    """Cosine similarity between projected face and voice embeddings, row-wise."""
    p_f = np.atleast_2d(project_face(model, faces))
    p_v = np.atleast_2d(project_voice(model, voices))
    nf = np.linalg.norm(p_f, axis=1)
    nv = np.linalg.norm(p_v, axis=1)
    if np.any(nf < NORM_FLOOR) or np.any(nv < NORM_FLOOR):
        raise ScoringError("zero-norm projection; cosine score undefined")
    return np.sum(p_f * p_v, axis=1) / (nf * nv)


def score_pair(model: FopModel, face_emb, voice_emb) -> float:
    return float(score_pairs(model, np.reshape(face_emb, (1, -1)),
                             np.reshape(voice_emb, (1, -1)))[0])


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(model: FopModel, config: FopConfig, path, extra: dict | None = None) -> None:
    model.check(config)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "extra": extra or {},
        "params": {name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
                   for name, arr in model.params().items()},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> tuple[FopModel, FopConfig, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{path}: not a FOP checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    config = FopConfig.from_dict(doc["config"])
    arrays = {}
    for name in PARAM_NAMES:
        entry = doc["params"][name]
        data = np.asarray(entry["data"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if data.size != int(np.prod(shape)):
            raise FormatError(f"{path}: {name} declares {shape} but holds {data.size} values")
        arrays[name] = data.reshape(shape)
    model = FopModel(**arrays)
    model.check(config)
    return model, config, doc.get("extra", {})


def with_overrides(config: FopConfig, **changes) -> FopConfig:
    return replace(config, **changes)
