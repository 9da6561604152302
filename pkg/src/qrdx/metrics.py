"""Ranking metrics: AUC via the rank statistic, ROC points, and the
subset-based uncertainty estimate used for reported scores."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateLabelsError, InsufficientDataError, ShapeError


def _check_pair(labels, scores):
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ShapeError("labels and scores must be 1-d and the same length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("need both classes to rank")
    return labels, scores, n_pos, n_neg


def compute_auc(labels, scores) -> float:
    """Area under the ROC curve from the rank-sum statistic.

    Ties get averaged ranks, making the result the probability that a random
    positive outscores a random negative, counting ties as half.
    """
    labels, scores, n_pos, n_neg = _check_pair(labels, scores)
    ranks = rankdata(scores, method="average")
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(labels, scores):
    """ROC points swept over the distinct score thresholds, descending.

    Returns (thresholds, tpr, fpr) including the (0, 0) endpoint at a
    threshold above every score.
    """
    labels, scores, n_pos, n_neg = _check_pair(labels, scores)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    distinct = np.flatnonzero(np.diff(sorted_scores)) if len(scores) > 1 else np.array([], int)
    cut = np.concatenate([distinct, [len(scores) - 1]])
    tp = np.cumsum(sorted_labels == 1)[cut]
    fp = np.cumsum(sorted_labels == 0)[cut]
    thresholds = np.concatenate([[np.inf], sorted_scores[cut]])
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    return thresholds, tpr, fpr


def subset_uncertainty(labels, scores, n_subsets: int = 5):
    """Mean and population standard deviation of the AUC over disjoint,
    class-balanced, equally sized subsets.

    Rows are chunked per class in stored order, so replicated data yields
    identical subsets and zero spread.
    """
    labels, scores, n_pos, n_neg = _check_pair(labels, scores)
    if n_subsets < 1:
        raise InsufficientDataError("need at least one subset")
    if n_pos != n_neg or n_pos % n_subsets:
        raise InsufficientDataError(
            f"cannot split {n_pos} positives / {n_neg} negatives into "
            f"{n_subsets} balanced equal subsets")
    pos_idx = np.flatnonzero(labels == 1)
    neg_idx = np.flatnonzero(labels == 0)
    per = n_pos // n_subsets
    aucs = []
    for k in range(n_subsets):
        idx = np.concatenate([pos_idx[k * per : (k + 1) * per],
                              neg_idx[k * per : (k + 1) * per]])
        aucs.append(compute_auc(labels[idx], scores[idx]))
    aucs = np.asarray(aucs)
    return float(aucs.mean()), float(aucs.std())
