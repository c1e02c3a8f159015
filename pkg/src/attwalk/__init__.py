"""Mesh classification and retrieval from random walks fused by cross-walk attention."""
from .attention import (
    AGGREGATORS, AttentionParams, AttentionResult, aggregate, aggregate_baseline,
    cross_walk_attention, init_attention, rank_walks,
)
from .backbone import BackboneParams, classify, encode_batch, gru_cell, gru_sequence, init_params, walk_forward
from .checkpoint import Checkpoint
from .decimate import decimate
from .losses import (
    ClassCenters, ClassCounts, class_balanced_ce, combined_retrieval_loss, softmax_cross_entropy,
    triplet_center_loss,
)
from .mesh import BoundingBox, Mesh, load_mesh, normalize_unit_cube, save_mesh
from .metrics import (
    MetricsReport, RankedList, average_precision, class_accuracy, instance_accuracy,
    mean_average_precision, micro_macro, ndcg, precision_recall_f1_at_n, retrieve,
)
from .optim import AdamState, adam_update, cyclic_lr
from .overlay import export_walk_overlay
from .synthetic import CATEGORIES, generate_synthetic
from .trainer import (
    Model, TrainConfig, multiscale_predict, train_phase1, train_phase2, train_single,
    train_two_phase,
)
from .walks import Walk, WalkFeatureSequence, encode_walk, sample_walk

__version__ = "0.1.0"
