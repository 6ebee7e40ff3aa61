"""Held-out, bag-level evaluation: P@N, PR curves, noise diagnostics.

A bag's score for a relation is the max over its instances' predicted
probabilities (at-least-one semantics); the NA class is excluded from
positive ranking throughout. Recall is counted over gold-positive bags.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ContractViolation
from .influence import InfluenceReport
from .model import SoftmaxModel, batch_predict_proba


@dataclass(frozen=True)
class BagPrediction:
    bag_id: int
    scores: np.ndarray          # (K,), max instance probability per relation
    top_relation: int           # argmax over non-NA relations
    top_score: float


@dataclass(frozen=True)
class PrCurve:
    thresholds: np.ndarray
    precisions: np.ndarray
    recalls: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        """(recall, precision) pairs in threshold order."""
        return list(zip(self.recalls.tolist(), self.precisions.tolist()))


@dataclass(frozen=True)
class NoiseReport:
    auroc: float
    clean_fraction_curve: list[tuple[int, float]]   # (k, clean fraction)


def bag_level_predict(model: SoftmaxModel, dataset: Dataset,
                      split: str | None = "test") -> list[BagPrediction]:
    """Score every bag in the split by max-pooling instance probabilities."""
    bags = dataset.bags_in_split(split) if split else list(dataset.bags.values())
    if not bags:
        raise ContractViolation(f"no bags in split {split!r}")
    out = []
    for bag in bags:
        X = dataset.features(list(bag.instance_ids))
        P = batch_predict_proba(model, X)
        scores = P.max(axis=0)
        positive = scores[1:]
        top_rel = int(np.argmax(positive)) + 1
        out.append(BagPrediction(bag_id=bag.bag_id, scores=scores,
                                 top_relation=top_rel,
                                 top_score=float(positive.max())))
    return out


def _ranked(predictions) -> list[BagPrediction]:
    return sorted(predictions, key=lambda p: (-p.top_score, p.bag_id))


def precision_at_n(predictions, gold_bag_relations: dict[int, int],
                   n: int) -> float:
    """Fraction of the n most confident non-NA predictions that are correct."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    ranked = _ranked(predictions)
    if len(ranked) < n:
        raise ContractViolation(
            f"only {len(ranked)} rankable predictions for n={n}"
        )
    hits = sum(1 for p in ranked[:n]
               if gold_bag_relations.get(p.bag_id) == p.top_relation)
    return hits / n


def pr_curve(predictions, gold_bag_relations: dict[int, int]) -> PrCurve:
    """Precision-recall by sweeping the score threshold over every prediction.

    Recall counts gold-positive bags (relation != NA). The curve is
    anchored at (recall 0, precision of the top prediction) so a perfect
    ranking integrates to exactly 1.
    """
    positives = sum(1 for r in gold_bag_relations.values() if r != 0)
    if positives == 0:
        raise ContractViolation("no gold-positive bags; recall is undefined")
    ranked = _ranked(predictions)
    thresholds, precisions, recalls = [], [], []
    hits = 0
    for t, pred in enumerate(ranked, start=1):
        if gold_bag_relations.get(pred.bag_id) == pred.top_relation:
            hits += 1
        thresholds.append(pred.top_score)
        precisions.append(hits / t)
        recalls.append(hits / positives)
    thresholds = [thresholds[0]] + thresholds
    precisions = [precisions[0]] + precisions
    recalls = [0.0] + recalls
    rec = np.asarray(recalls)
    prec = np.asarray(precisions)
    auc = float(np.trapz(prec, rec))
    return PrCurve(thresholds=np.asarray(thresholds), precisions=prec,
                   recalls=rec, auc=auc)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    ranks[order] = np.arange(1, len(values) + 1)
    # average the ranks inside each tie group
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = ranks[order[i:j + 1]].mean()
        i = j + 1
    return ranks


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a positive outranks a negative (rank statistic, tie-aware)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractViolation("AUROC needs both classes present")
    ranks = _average_ranks(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def noise_detection_report(report: InfluenceReport,
                           dataset: Dataset) -> NoiseReport:
    """How well high phi flags mislabeled instances (needs gold labels).

    AUROC treats gold != observed as the positive class with phi as the
    score; the curve gives the clean fraction among the k lowest-phi
    instances as k grows.
    """
    ids = sorted(report.phi)
    noisy = dataset.noise_labels(ids)
    phi = np.asarray([report.phi[i] for i in ids])
    score = auroc(phi, noisy)
    order = np.lexsort((ids, phi))
    clean_sorted = 1 - noisy[order]
    curve = []
    running = np.cumsum(clean_sorted)
    for k in range(1, len(ids) + 1):
        curve.append((k, float(running[k - 1] / k)))
    return NoiseReport(auroc=score, clean_fraction_curve=curve)


# ---- CSV emission -----------------------------------------------------------

def write_pr_csv(curve: PrCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(curve.thresholds, curve.precisions, curve.recalls):
            w.writerow([repr(float(t)), repr(float(p)), repr(float(r))])


def read_pr_csv(path) -> PrCurve:
    rows = list(csv.DictReader(open(path, newline="")))
    thresholds = np.asarray([float(r["threshold"]) for r in rows])
    precisions = np.asarray([float(r["precision"]) for r in rows])
    recalls = np.asarray([float(r["recall"]) for r in rows])
    return PrCurve(thresholds=thresholds, precisions=precisions,
                   recalls=recalls, auc=float(np.trapz(precisions, recalls)))


def write_patn_csv(rows: list[tuple[int, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "precision"])
        for n, p in rows:
            w.writerow([n, repr(float(p))])


def write_noise_csv(report: NoiseReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "clean_fraction"])
        for k, frac in report.clean_fraction_curve:
            w.writerow([k, repr(float(frac))])
