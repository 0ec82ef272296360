"""Cluster-to-class alignment and OA / AA / kappa scores."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Confusion:
    """Counts over ground-truth pixels.

    ``matrix[i, j]`` counts pixels of class ``classes[i]`` predicted as
    ``classes[j]`` after alignment; ``unmatched[i]`` counts pixels of class i
    that fell in clusters with no class assigned.
    """

    classes: np.ndarray
    matrix: np.ndarray
    unmatched: np.ndarray

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.int64)
        C = matrix.shape[0]
        return cls(np.arange(1, C + 1), matrix, np.zeros(C, dtype=np.int64))

    @property
    def row_totals(self):
        return self.matrix.sum(axis=1) + self.unmatched

    @property
    def total(self):
        return int(self.row_totals.sum())


def agreement_matrix(pred, gt):
    """Counts of (class, cluster) pairs over pixels with gt > 0."""
    pred = np.asarray(pred).ravel()
    gt = np.asarray(gt).ravel()
    mask = gt > 0
    classes = np.unique(gt[mask])
    clusters = np.unique(pred[mask]) if mask.any() else np.array([], dtype=np.int64)
    clusters = np.union1d(clusters, np.unique(pred[pred > 0]))
    ci = np.searchsorted(classes, gt[mask])
    ki = np.searchsorted(clusters, pred[mask])
    A = np.zeros((classes.size, clusters.size), dtype=np.int64)
    np.add.at(A, (ci, ki), 1)
    return A, classes, clusters


def align(pred, gt):
    """Cluster id -> class id mapping maximising agreement on gt pixels.

    Surplus clusters are mapped to fresh ids above every class id.
    """
    A, classes, clusters = agreement_matrix(pred, gt)
    if classes.size == 0:
        raise ValueError("ground truth has no labeled pixels")
    rows, cols = linear_sum_assignment(A, maximize=True)
    mapping = {int(clusters[c]): int(classes[r]) for r, c in zip(rows, cols)}
    fresh = int(max(classes.max(), clusters.max(initial=0))) + 1
    for c in clusters:
        if int(c) not in mapping:
            mapping[int(c)] = fresh
            fresh += 1
    return mapping


def apply_alignment(pred, mapping):
    pred = np.asarray(pred)
    out = np.zeros_like(pred)
    for src, dst in mapping.items():
        out[pred == src] = dst
    return out


def confusion(pred, gt, mapping=None):
    pred = np.asarray(pred).ravel()
    gt = np.asarray(gt).ravel()
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth differ in size")
    if mapping is None:
        mapping = align(pred, gt)
    aligned = apply_alignment(pred, mapping)
    mask = gt > 0
    classes = np.unique(gt[mask])
    C = classes.size
    ci = np.searchsorted(classes, gt[mask])
    a = aligned[mask]
    pos = np.searchsorted(classes, a)
    hit = (pos < C) & (classes[np.minimum(pos, C - 1)] == a)
    M = np.zeros((C, C), dtype=np.int64)
    np.add.at(M, (ci[hit], pos[hit]), 1)
    unmatched = np.bincount(ci[~hit], minlength=C).astype(np.int64)
    return Confusion(classes, M, unmatched)


def overall_accuracy(conf):
    if conf.total == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(conf.matrix)) / conf.total


def average_accuracy(conf):
    totals = conf.row_totals
    keep = totals > 0
    if not keep.all():
        log.warning("classes %s have no pixels and are left out of AA",
                    conf.classes[~keep].tolist())
    if not keep.any():
        raise ValueError("empty confusion matrix")
    recall = np.diag(conf.matrix)[keep] / totals[keep]
    return float(recall.mean())


def kappa(conf):
    n = conf.total
    if n == 0:
        raise ValueError("empty confusion matrix")
    p_o = np.trace(conf.matrix) / n
    p_e = float(conf.row_totals @ conf.matrix.sum(axis=0)) / n ** 2
    if p_e >= 1.0:
        log.warning("chance agreement is 1; kappa set to 0")
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def evaluate(pred, gt):
    """OA, AA and kappa of ``pred`` against ``gt``, ignoring gt == 0 pixels."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if not np.any(gt > 0):
        raise ValueError("ground truth has no labeled pixels")
    mapping = align(pred, gt)
    conf = confusion(pred, gt, mapping)
    return {
        "oa": overall_accuracy(conf),
        "aa": average_accuracy(conf),
        "kappa": kappa(conf),
        "confusion": conf.matrix.tolist(),
        "unmatched": conf.unmatched.tolist(),
        "classes": conf.classes.tolist(),
        "alignment": {str(k): v for k, v in sorted(mapping.items())},
    }
