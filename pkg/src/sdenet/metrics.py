"""Topology-recovery metrics: thresholded counts and ranked curves."""

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


def _edge_values(mat, exclude_diagonal):
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DataError("edge matrices must be square")
    if not exclude_diagonal:
        return mat.ravel()
    mask = ~np.eye(mat.shape[0], dtype=bool)
    return mat[mask]


def binary_metrics(s_est, s_true, exclude_diagonal=True):
    """Confusion counts plus TPR and precision for a 0/1 topology.

    Ratios with an empty denominator are reported as None rather than
    an arbitrary 0 or 1.
    """
    est = _edge_values(s_est, exclude_diagonal).astype(bool)
    true = _edge_values(s_true, exclude_diagonal).astype(bool)
    if est.shape != true.shape:
        raise DataError("estimate and truth differ in size")
    tp = int(np.sum(est & true))
    fp = int(np.sum(est & ~true))
    fn = int(np.sum(~est & true))
    tn = int(np.sum(~est & ~true))
    tpr = tp / (tp + fn) if tp + fn else None
    precision = tp / (tp + fp) if tp + fp else None
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn, "tpr": tpr, "precision": precision}


def ranked_metrics(scores, s_true, exclude_diagonal=True):
    """Area under the ROC and precision-recall curves for edge scores.

    AUROC uses midranks (the Mann-Whitney statistic), so tied scores
    contribute half credit. AUPREC integrates the precision step
    function over recall, advancing over tied scores as one block.
    Degenerate truths (no positives or no negatives) are an error.
    """
    s = np.asarray(_edge_values(scores, exclude_diagonal), dtype=float)
    t = _edge_values(s_true, exclude_diagonal).astype(bool)
    n_pos = int(t.sum())
    n_neg = int((~t).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError(
            "ranked metrics need at least one positive and one negative edge"
        )
    ranks = rankdata(s)
    auroc = (float(ranks[t].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    boundaries = np.nonzero(np.diff(s_sorted))[0]
    ends = np.append(boundaries, len(s_sorted) - 1)
    cum_tp = np.cumsum(t_sorted)
    cum_n = np.arange(1, len(s_sorted) + 1)
    tp_at = cum_tp[ends].astype(float)
    n_at = cum_n[ends].astype(float)
    recall = tp_at / n_pos
    precision = tp_at / n_at
    prev = np.concatenate([[0.0], recall[:-1]])
    auprec = float(np.sum((recall - prev) * precision))
    return {"auroc": float(auroc), "auprec": auprec}


def topology_from_probability(link_prob, threshold=0.5):
    """Threshold posterior link probabilities into a 0/1 topology."""
    return (np.asarray(link_prob, dtype=float) > threshold).astype(np.int8)
