"""Two-phase training, multi-scale inference and dataset-level evaluation."""
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .attention import AGGREGATORS, AttentionParams, aggregate, cross_walk_attention, init_attention
from .autodiff import Tensor, backward
from .backbone import DESK_DIMS, BackboneParams, classify, encode_batch, init_params
from .checkpoint import Checkpoint
from .decimate import decimate
from .errors import EmptyDataset, InvalidCheckpoint, NumericalFailure
from .losses import (
    ClassCenters, ClassCounts, class_balanced_ce, combined_retrieval_loss, init_centers,
    softmax_cross_entropy,
)
from .mesh import Mesh, normalize_unit_cube
from .optim import AdamState, adam_update, cyclic_lr
from .walks import (
    CachedWalk, default_walk_length, encode_walk, read_walk_cache, sample_walk, walk_from_ids,
    write_walk_cache,
)

log = logging.getLogger(__name__)

LOSS_MODES = ("classification", "retrieval", "class_balanced")


@dataclass
class TrainConfig:
    phase1_steps: int = 600
    phase2_steps: int = 300
    cycle_len: int = 200
    lr_max: float = 5e-4
    lr_min: float = 1e-6
    batch_walks: int = 64
    walks_per_mesh: int = 8
    scales: tuple = (1000, 2000, 4000)
    seed: int = 0
    loss_mode: str = "classification"
    dims: tuple = DESK_DIMS
    walk_length: Optional[int] = None  # None: default_walk_length per batch
    aggregator: str = "attention"
    freeze_head: bool = False
    beta: float = 0.9
    margin: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 0.01
    walk_cache: Optional[str] = None
    cache_walks_per_mesh: int = 16
    debug: bool = False

    def __post_init__(self):
        self.scales = tuple(int(s) for s in self.scales)
        self.dims = tuple(int(d) for d in self.dims)
        self.validate()

    def validate(self) -> None:
        if not self.lr_max > self.lr_min > 0:
            raise ValueError("need lr_max > lr_min > 0")
        if self.batch_walks < 1 or self.walks_per_mesh < 1:
            raise ValueError("batch sizes must be positive")
        if self.batch_walks % self.walks_per_mesh:
            raise ValueError("batch_walks must be divisible by walks_per_mesh")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.cycle_len < 1 or self.phase1_steps < 0 or self.phase2_steps < 0:
            raise ValueError("step counts must be non-negative and cycle_len positive")
        if not self.scales:
            raise ValueError("scales must be non-empty")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scales"], d["dims"] = list(self.scales), list(self.dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class LogRow:
    step: int
    phase: str
    lr: float
    loss: float
    accuracy: float


@dataclass
class TrainState:
    """Mutable parameters of one training run."""

    backbone: BackboneParams
    attention: Optional[AttentionParams] = None
    centers: Optional[ClassCenters] = None

    def trainables(self, phase: str, freeze_head: bool) -> dict[str, Tensor]:
        named = self.backbone.named()
        out = {}
        if phase in ("1", "single"):
            out.update({k: named[k] for k in self.backbone.encoder_names()})
        if not (phase == "2" and freeze_head):
            out["head.W"], out["head.b"] = named["head.W"], named["head.b"]
        if phase in ("2", "single") and self.attention is not None:
            out.update(self.attention.named())
        if self.centers is not None:
            out["centers"] = self.centers.centers
        return out

    def checkpoint(self, phase: str, step: int, cfg: TrainConfig, aggregator: str) -> Checkpoint:
        tensors = self.backbone.arrays()
        if self.attention is not None:
            tensors.update({k: v.data for k, v in self.attention.named().items()})
        if self.centers is not None:
            tensors["centers"] = self.centers.centers.data
        return Checkpoint({k: np.array(v) for k, v in tensors.items()}, self.backbone.dims,
                          self.backbone.n_classes, phase, step, aggregator, cfg.to_dict())


# ---------------------------------------------------------------------------
# batches

def step_rng(seed: int, phase: str, step: int) -> np.random.Generator:
    tag = {"1": 1, "2": 2, "single": 3, "init": 0}[phase]
    return np.random.default_rng([seed, tag, step])


class WalkSource:
    """Fresh walks every call, or walks drawn from a pre-sampled cache."""

    def __init__(self, meshes: Sequence[Mesh], cfg: TrainConfig):
        self.meshes = meshes
        self.cfg = cfg
        self.cache: Optional[list[list[np.ndarray]]] = None
        if cfg.walk_cache:
            self.cache = self._load_or_build(cfg.walk_cache)

    def _load_or_build(self, path: str) -> list[list[np.ndarray]]:
        k = self.cfg.cache_walks_per_mesh
        by_mesh: dict[str, list[np.ndarray]] = {}
        if os.path.exists(path):
            for rec in read_walk_cache(path):
                by_mesh.setdefault(rec.mesh_id, []).append(np.asarray(rec.vertex_ids))
        if all(len(by_mesh.get(m.name, ())) >= k for m in self.meshes):
            return [by_mesh[m.name][:k] for m in self.meshes]
        records = []
        for i, m in enumerate(self.meshes):
            for j in range(k):
                s = int(np.random.SeedSequence([self.cfg.seed, i, j]).generate_state(1)[0])
                w = sample_walk(m, self._length([m]), np.random.default_rng(s))
                records.append(CachedWalk(m.name, s, tuple(w.vertex_ids.tolist())))
        write_walk_cache(path, records)
        return self._load_or_build(path)

    def _length(self, meshes: Sequence[Mesh]) -> int:
        if self.cfg.walk_length:
            return int(self.cfg.walk_length)
        return min(default_walk_length(m) for m in meshes)

    def deltas(self, mesh_ids: Sequence[int], n_walks: int, rng: np.random.Generator) -> np.ndarray:
        """(len(mesh_ids) * n_walks, T - 1, 3) deltas, walks grouped by mesh."""
        chosen = [self.meshes[i] for i in mesh_ids]
        T = self._length(chosen)
        out = []
        for i, m in zip(mesh_ids, chosen):
            for child in rng.spawn(n_walks):
                if self.cache is not None:
                    ids = self.cache[i][int(child.integers(len(self.cache[i])))][:T]
                    walk = walk_from_ids(m, ids)
                else:
                    walk = sample_walk(m, T, child)
                out.append(encode_walk(m, walk).deltas)
        return np.stack(out)


def _pick(n_items: int, k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(n_items, size=k, replace=n_items < k)


# ---------------------------------------------------------------------------
# losses and steps

def _loss(logits: Tensor, labels: np.ndarray, cfg: TrainConfig, state: TrainState,
          counts: Optional[ClassCounts]) -> Tensor:
    if cfg.loss_mode == "retrieval":
        return combined_retrieval_loss(logits, labels, state.centers, cfg.lambda1, cfg.lambda2)
    if cfg.loss_mode == "class_balanced":
        return class_balanced_ce(logits, labels, counts)
    return softmax_cross_entropy(logits, labels)


def _check_loss(loss: Tensor, phase: str, step: int) -> float:
    value = float(loss.data)
    if not np.isfinite(value):
        raise NumericalFailure(f"non-finite loss {value} at phase {phase} step {step}")
    return value


def fuse_walks(features: Tensor, n_meshes: int, n_walks: int, aggregator: str,
               attention: Optional[AttentionParams]) -> Tensor:
    """(n_meshes * n_walks, d) walk features -> (n_meshes, d) mesh descriptors."""
    fused = []
    for j in range(n_meshes):
        rows = ad.take(features, np.arange(j * n_walks, (j + 1) * n_walks), axis=0)
        fused.append(aggregate(ad.transpose(rows), aggregator, attention))
    return ad.stack(fused)


def _class_counts(meshes: Sequence[Mesh], n_classes: int, beta: float) -> ClassCounts:
    counts = np.bincount([m.label for m in meshes], minlength=n_classes)
    return ClassCounts(np.maximum(counts, 1), beta)


def _labels(meshes: Sequence[Mesh]) -> int:
    if not meshes:
        raise EmptyDataset("training set is empty")
    if any(m.label is None for m in meshes):
        raise EmptyDataset("training meshes must be labeled")
    return int(max(m.label for m in meshes)) + 1


def init_state(meshes: Sequence[Mesh], cfg: TrainConfig, n_classes: Optional[int] = None) -> TrainState:
    n_classes = n_classes or _labels(meshes)
    rng = step_rng(cfg.seed, "init", 0)
    backbone = init_params(cfg.dims, n_classes, rng)
    centers = init_centers(n_classes, n_classes, rng, cfg.margin) if cfg.loss_mode == "retrieval" else None
    return TrainState(backbone, None, centers)


def train_phase1(meshes: Sequence[Mesh], cfg: TrainConfig, log_rows: Optional[list] = None,
                 state: Optional[TrainState] = None, on_step: Optional[Callable] = None) -> Checkpoint:
    """Per-walk training of the encoder and head; each walk from a different mesh."""
    n_classes = _labels(meshes)
    state = state or init_state(meshes, cfg, n_classes)
    counts = _class_counts(meshes, n_classes, cfg.beta)
    source = WalkSource(meshes, cfg)
    labels_all = np.array([m.label for m in meshes])
    opt = AdamState()
    params = state.trainables("1", cfg.freeze_head)
    for step in range(cfg.phase1_steps):
        rng = step_rng(cfg.seed, "1", step)
        ids = _pick(len(meshes), cfg.batch_walks, rng)
        deltas = source.deltas(ids, 1, rng)
        logits = classify(encode_batch(deltas, state.backbone), state.backbone)
        labels = labels_all[ids]
        loss = _loss(logits, labels, cfg, state, counts)
        value = _check_loss(loss, "1", step)
        lr = cyclic_lr(step, cfg.cycle_len, cfg.lr_max, cfg.lr_min)
        adam_update(params, backward(loss), opt, lr)
        acc = float(np.mean(np.argmax(logits.data, axis=1) == labels))
        if log_rows is not None:
            log_rows.append(LogRow(step, "1", lr, value, acc))
        if on_step is not None:
            on_step("1", step, ids)
    return state.checkpoint("1", cfg.phase1_steps, cfg, "avg_pool")


def _phase2_like(meshes, cfg, state: TrainState, phase: str, steps: int, log_rows, on_step,
                 reference: Optional[dict] = None) -> TrainState:
    n_classes = state.backbone.n_classes
    counts = _class_counts(meshes, n_classes, cfg.beta)
    source = WalkSource(meshes, cfg)
    labels_all = np.array([m.label for m in meshes])
    n = cfg.walks_per_mesh
    m = cfg.batch_walks // n
    opt = AdamState()
    params = state.trainables(phase, cfg.freeze_head)
    for step in range(steps):
        rng = step_rng(cfg.seed, phase, step)
        ids = _pick(len(meshes), m, rng)
        deltas = source.deltas(ids, n, rng)
        features = encode_batch(deltas, state.backbone)
        fused = fuse_walks(features, m, n, cfg.aggregator, state.attention)
        logits = classify(fused, state.backbone)
        labels = labels_all[ids]
        loss = _loss(logits, labels, cfg, state, counts)
        value = _check_loss(loss, phase, step)
        lr = cyclic_lr(step, cfg.cycle_len, cfg.lr_max, cfg.lr_min, halved=(phase == "2"))
        adam_update(params, backward(loss), opt, lr)
        if reference is not None:
            for k, v in state.backbone.arrays().items():
                if k in reference and not np.array_equal(v, reference[k]):
                    raise AssertionError(f"frozen tensor {k} changed at phase-2 step {step}")
        acc = float(np.mean(np.argmax(logits.data, axis=1) == labels))
        if log_rows is not None:
            log_rows.append(LogRow(step, phase, lr, value, acc))
        if on_step is not None:
            on_step(phase, step, ids)
    return state


def _needs_attention(aggregator: str) -> bool:
    return aggregator in ("attention", "ha_avg_pool", "ha_max_pool")


def train_phase2(checkpoint: Checkpoint, meshes: Sequence[Mesh], cfg: TrainConfig,
                 log_rows: Optional[list] = None, on_step: Optional[Callable] = None) -> Checkpoint:
    """Freeze the encoder and train the aggregator (plus head and centers)."""
    if checkpoint.phase not in ("1", "init"):
        raise InvalidCheckpoint(f"phase 2 needs a phase-1 checkpoint, got phase {checkpoint.phase!r}")
    _labels(meshes)
    backbone = checkpoint.backbone(frozen=True, head_grad=not cfg.freeze_head)
    attention = None
    if _needs_attention(cfg.aggregator):
        attention = init_attention(backbone.d, step_rng(cfg.seed, "init", 2))
    centers = None
    if cfg.loss_mode == "retrieval":
        centers = checkpoint.centers(cfg.margin, requires_grad=True)
        if centers is None:
            centers = init_centers(backbone.n_classes, backbone.n_classes, step_rng(cfg.seed, "init", 1), cfg.margin)
    state = TrainState(backbone, attention, centers)
    reference = checkpoint.encoder_tensors() if cfg.debug else None
    _phase2_like(meshes, cfg, state, "2", cfg.phase2_steps, log_rows, on_step, reference)
    return state.checkpoint("2", cfg.phase2_steps, cfg, cfg.aggregator)


def train_single(meshes: Sequence[Mesh], cfg: TrainConfig, log_rows: Optional[list] = None) -> Checkpoint:
    """End-to-end (one-phase) training with the mesh-level batch layout."""
    n_classes = _labels(meshes)
    state = init_state(meshes, cfg, n_classes)
    if _needs_attention(cfg.aggregator):
        state.attention = init_attention(state.backbone.d, step_rng(cfg.seed, "init", 2))
    steps = cfg.phase1_steps + cfg.phase2_steps
    _phase2_like(meshes, cfg, state, "single", steps, log_rows, None)
    return state.checkpoint("single", steps, cfg, cfg.aggregator)


def train_two_phase(meshes: Sequence[Mesh], cfg: TrainConfig, log_rows: Optional[list] = None):
    ck1 = train_phase1(meshes, cfg, log_rows)
    return ck1, train_phase2(ck1, meshes, cfg, log_rows)


# ---------------------------------------------------------------------------
# inference

@dataclass
class Model:
    """Frozen parameters assembled from a checkpoint for inference."""

    backbone: BackboneParams
    attention: Optional[AttentionParams]
    aggregator: str
    walk_length: Optional[int] = None

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, aggregator: Optional[str] = None) -> "Model":
        agg = aggregator or ckpt.aggregator
        attn = ckpt.attention()
        if _needs_attention(agg) and attn is None:
            raise InvalidCheckpoint(f"aggregator {agg!r} needs attention weights")
        return cls(ckpt.backbone(), attn, agg, ckpt.config.get("walk_length"))


def walk_features(mesh: Mesh, model: Model, n_walks: int, rng: np.random.Generator):
    T = int(model.walk_length) if model.walk_length else default_walk_length(mesh)
    walks, deltas = [], []
    for child in rng.spawn(n_walks):
        w = sample_walk(mesh, T, child)
        walks.append(w)
        deltas.append(encode_walk(mesh, w).deltas)
    return walks, encode_batch(np.stack(deltas), model.backbone)


def embed(mesh: Mesh, model: Model, n_walks: int, rng: np.random.Generator):
    """(mesh descriptor, logits, walks, walk contributions or None) at one scale."""
    walks, feats = walk_features(mesh, model, n_walks, rng)
    F_w = ad.transpose(feats)
    contributions = None
    if model.aggregator == "attention":
        res = cross_walk_attention(F_w, model.attention)
        desc, contributions = res.f_a, res.walk_contributions
    else:
        desc = aggregate(F_w, model.aggregator, model.attention)
    return desc.data, classify(desc, model.backbone).data, walks, contributions


def scale_rng(base: int, scale: int) -> np.random.Generator:
    return np.random.default_rng([base, scale])


def mesh_at_scale(mesh: Mesh, scale: int, cache: Optional[dict] = None) -> Mesh:
    if mesh.n_faces <= scale:
        return mesh
    key = (mesh.name, id(mesh), scale)
    if cache is not None and key in cache:
        return cache[key]
    out = normalize_unit_cube(decimate(mesh, scale))
    if cache is not None:
        cache[key] = out
    return out


def softmax_scores(logits: np.ndarray) -> np.ndarray:
    return ad.softmax_numpy(np.asarray(logits))


def multiscale_outputs(mesh: Mesh, model: Model, scales: Sequence[int], n_walks: int,
                       rng: np.random.Generator, cache: Optional[dict] = None):
    """Per-scale (descriptor, logits). Each scale's walks come from a generator
    keyed by one draw of ``rng`` and the scale value."""
    if not scales:
        raise ValueError("scales must be non-empty")
    base = int(rng.integers(2**62))
    out = []
    for s in scales:
        desc, logits, _, _ = embed(mesh_at_scale(mesh, s, cache), model, n_walks, scale_rng(base, s))
        out.append((desc, logits))
    return out


def multiscale_predict(mesh: Mesh, model: Model, scales: Sequence[int], n_walks: int,
                       rng: np.random.Generator, cache: Optional[dict] = None) -> np.ndarray:
    """Mean of the per-scale softmax score vectors."""
    outs = multiscale_outputs(mesh, model, scales, n_walks, rng, cache)
    return np.mean([softmax_scores(logits) for _, logits in outs], axis=0)


def eval_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, 7, index])


def predict_dataset(meshes: Sequence[Mesh], model: Model, scales: Sequence[int], n_walks: int,
                    seed: int = 0, cache: Optional[dict] = None) -> np.ndarray:
    return np.array([
        multiscale_predict(m, model, scales, n_walks, eval_rng(seed, i), cache)
        for i, m in enumerate(meshes)
    ])


def describe_dataset(meshes: Sequence[Mesh], model: Model, scales: Sequence[int], n_walks: int,
                     seed: int = 0, use: str = "prediction", cache: Optional[dict] = None) -> np.ndarray:
    """Retrieval descriptors: scale-averaged prediction vectors p (default) or f_a."""
    k = 1 if use == "prediction" else 0
    return np.array([
        np.mean([o[k] for o in multiscale_outputs(m, model, scales, n_walks, eval_rng(seed, i), cache)], axis=0)
        for i, m in enumerate(meshes)
    ])
