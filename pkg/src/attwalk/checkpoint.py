"""Checkpoints: a directory with ``tensors.bin`` (named float64 snapshots)
and a ``meta.json`` sidecar (dims, phase, step count, config)."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attention import AttentionParams
from .autodiff.snapshot import decode_snapshots, encode_snapshots
from .backbone import BackboneParams
from .errors import InvalidCheckpoint
from .losses import ClassCenters

TENSORS = "tensors.bin"
META = "meta.json"


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]
    dims: tuple
    n_classes: int
    phase: str  # "init", "1", "2" or "single"
    step: int = 0
    aggregator: str = "avg_pool"
    config: dict = field(default_factory=dict)

    def backbone(self, frozen: bool = True, head_grad: bool = False) -> BackboneParams:
        return BackboneParams.from_named(self.tensors, self.dims, frozen=frozen, head_grad=head_grad)

    def attention(self, requires_grad: bool = False) -> Optional[AttentionParams]:
        if "attn.W_q" not in self.tensors:
            return None
        return AttentionParams.from_named(self.tensors, requires_grad)

    def centers(self, margin: float = 1.0, requires_grad: bool = False) -> Optional[ClassCenters]:
        from .autodiff import Tensor
        if "centers" not in self.tensors:
            return None
        return ClassCenters(Tensor(self.tensors["centers"], requires_grad), margin)

    def encoder_tensors(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith(("fc", "gru"))}

    def meta(self) -> dict:
        return {
            "dims": list(self.dims),
            "n_classes": self.n_classes,
            "phase": self.phase,
            "step": self.step,
            "aggregator": self.aggregator,
            "config": self.config,
        }

    def save(self, directory: str | os.PathLike) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / TENSORS).write_bytes(encode_snapshots(self.tensors))
        (d / META).write_text(json.dumps(self.meta(), indent=2, sort_keys=True) + "\n")
        return d

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "Checkpoint":
        d = Path(directory)
        if not (d / TENSORS).is_file() or not (d / META).is_file():
            raise InvalidCheckpoint(f"{d} is not a checkpoint directory")
        try:
            meta = json.loads((d / META).read_text())
            tensors = decode_snapshots((d / TENSORS).read_bytes())
            ckpt = cls(tensors, tuple(meta["dims"]), int(meta["n_classes"]), str(meta["phase"]),
                       int(meta["step"]), meta.get("aggregator", "avg_pool"), meta.get("config", {}))
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidCheckpoint(f"bad checkpoint metadata in {d}: {exc}") from None
        if "head.W" not in tensors or "gru2.U" not in tensors:
            raise InvalidCheckpoint(f"{d} lacks backbone tensors")
        return ckpt
