"""Classification accuracy and retrieval metrics (P@N, R@N, F1@N, mAP, NDCG)."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DimMismatch, LengthMismatch


def _pair(preds, truth):
    preds, truth = np.asarray(preds), np.asarray(truth)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise LengthMismatch(f"{preds.shape} predictions vs {truth.shape} labels")
    if len(truth) == 0:
        raise LengthMismatch("no predictions")
    return preds, truth


def instance_accuracy(preds, truth) -> float:
    preds, truth = _pair(preds, truth)
    return float(np.mean(preds == truth))


def class_accuracy(preds, truth) -> float:
    """Unweighted mean over the classes present in ``truth``."""
    preds, truth = _pair(preds, truth)
    return float(np.mean([np.mean(preds[truth == c] == c) for c in np.unique(truth)]))


# ---------------------------------------------------------------------------
# retrieval

@dataclass
class RankedList:
    """Retrieved items for one query, nearest first.

    ``grades`` are 0-3 relevance grades; an item is a positive (same
    category as the query) when its grade is at least 1.
    """

    query_id: object
    ids: list
    distances: np.ndarray
    grades: np.ndarray

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=np.float64)
        self.grades = np.asarray(self.grades, dtype=np.int64)
        if len(self.ids) != len(self.distances) or len(self.ids) != len(self.grades):
            raise LengthMismatch("ids, distances and grades must have equal length")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def positives(self) -> np.ndarray:
        return self.grades >= 1


def precision_recall_f1_at_n(ranked: RankedList, n: int, positives: int) -> tuple[float, float, float]:
    if n < 1:
        raise ValueError("cutoff n must be >= 1")
    hits = int(ranked.positives[:n].sum())
    p = hits / n
    r = hits / positives if positives > 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def average_precision(ranked: RankedList, positives: int) -> float:
    """Sum of precision at each positive rank, divided by the corpus positives."""
    if positives <= 0:
        return 0.0
    pos = ranked.positives
    ranks = np.flatnonzero(pos) + 1
    if len(ranks) == 0:
        return 0.0
    precisions = np.arange(1, len(ranks) + 1) / ranks
    return float(precisions.sum() / positives)


def mean_average_precision(lists: Sequence[RankedList], positives: Sequence[int]) -> float:
    if len(lists) != len(positives):
        raise LengthMismatch("one positive count per list")
    return float(np.mean([average_precision(l, p) for l, p in zip(lists, positives)]))


def dcg(grades: np.ndarray) -> float:
    grades = np.asarray(grades, dtype=np.float64)
    return float(np.sum(grades / np.log2(np.arange(2, len(grades) + 2))))


def ndcg(ranked: RankedList, n: Optional[int] = None) -> float:
    """DCG of the top ``n`` over the DCG of the same grades sorted descending."""
    g = ranked.grades if n is None else ranked.grades[:n]
    ideal = dcg(np.sort(ranked.grades)[::-1][: len(g)])
    return dcg(g) / ideal if ideal > 0 else 0.0


def micro_macro(scores: Sequence[float], categories: Sequence) -> tuple[float, float]:
    """(micro, macro): plain mean over queries, and mean of per-category means."""
    scores = np.asarray(scores, dtype=np.float64)
    categories = np.asarray(categories)
    if scores.shape != categories.shape:
        raise LengthMismatch("one category per score")
    micro = float(scores.mean())
    macro = float(np.mean([scores[categories == c].mean() for c in np.unique(categories)]))
    return micro, macro


def retrieve(query_desc, corpus: Mapping, threshold: float = 2.0, cap: int = 1000,
             query_id=None) -> list[tuple[object, float]]:
    """(id, distance) pairs with Euclidean distance < threshold, nearest first
    (ties in corpus order), at most ``cap`` of them, excluding ``query_id``."""
    q = np.asarray(query_desc, dtype=np.float64)
    ids = [k for k in corpus if k != query_id]
    if not ids:
        return []
    X = np.array([np.asarray(corpus[k], dtype=np.float64) for k in ids])
    if X.ndim != 2 or X.shape[1] != q.shape[-1] or q.ndim != 1:
        raise DimMismatch(f"query {q.shape} vs corpus {X.shape}")
    dist = np.sqrt(((X - q) ** 2).sum(axis=1))
    keep = np.flatnonzero(dist < threshold)
    order = keep[np.argsort(dist[keep], kind="stable")][:cap]
    return [(ids[i], float(dist[i])) for i in order]


def relevance_grade(query_label: int, query_sub: int, label: int, sub: int) -> int:
    """3 for the same sub-category, 1 for the same category only, else 0."""
    if label != query_label:
        return 0
    return 3 if sub == query_sub else 1


METRICS = ("P@N", "R@N", "F1@N", "mAP", "NDCG")


@dataclass
class MetricsReport:
    values: dict = field(default_factory=dict)  # "microAll/mAP" -> value, "instance_acc" -> ...

    def rows(self) -> list[tuple[str, float]]:
        return sorted(self.values.items())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("metric", "value"))
        for k, v in self.rows():
            w.writerow((k, repr(float(v))))
        return buf.getvalue()

    def table(self) -> str:
        width = max((len(k) for k in self.values), default=6)
        return "\n".join(f"{k:<{width}}  {100 * v:6.2f}" for k, v in self.rows())


def classification_report(preds, truth) -> MetricsReport:
    return MetricsReport({"instance_acc": instance_accuracy(preds, truth),
                          "class_acc": class_accuracy(preds, truth)})


def retrieval_lists(descriptors: np.ndarray, labels: Sequence[int], sublabels: Sequence[int],
                    threshold: float = 2.0, cap: int = 1000) -> list[RankedList]:
    corpus = {i: d for i, d in enumerate(np.asarray(descriptors))}
    out = []
    for q, desc in corpus.items():
        hits = retrieve(desc, corpus, threshold, cap, query_id=q)
        ids = [i for i, _ in hits]
        grades = [relevance_grade(labels[q], sublabels[q], labels[i], sublabels[i]) for i in ids]
        out.append(RankedList(q, ids, [d for _, d in hits], grades))
    return out


def retrieval_report(descriptors: np.ndarray, labels: Sequence[int], sublabels: Sequence[int],
                     threshold: float = 2.0, cap: int = 1000) -> tuple[MetricsReport, list[RankedList]]:
    """Per-query metrics with N = length of the thresholded list, aggregated
    both over queries (microAll) and over categories (macroAll)."""
    labels = np.asarray(labels)
    lists = retrieval_lists(descriptors, labels, sublabels, threshold, cap)
    per_query = {m: [] for m in METRICS}
    for rl in lists:
        positives = int(np.sum(labels == labels[rl.query_id])) - 1
        if len(rl):
            p, r, f1 = precision_recall_f1_at_n(rl, len(rl), positives)
        else:
            p = r = f1 = 0.0
        per_query["P@N"].append(p)
        per_query["R@N"].append(r)
        per_query["F1@N"].append(f1)
        per_query["mAP"].append(average_precision(rl, positives))
        per_query["NDCG"].append(ndcg(rl))
    values = {}
    for m, scores in per_query.items():
        micro, macro = micro_macro(scores, labels)
        values[f"microAll/{m}"], values[f"macroAll/{m}"] = micro, macro
    return MetricsReport(values), lists


def ranked_lists_csv(lists: Sequence[RankedList]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("query", "rank", "id", "distance", "grade"))
    for rl in lists:
        for k, (i, d, g) in enumerate(zip(rl.ids, rl.distances, rl.grades), start=1):
            w.writerow((rl.query_id, k, i, repr(float(d)), int(g)))
    return buf.getvalue()
