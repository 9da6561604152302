"""Support vector machine trained on a precomputed Gram matrix.

The dual problem
    maximise  sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij
    subject to 0 <= alpha_i <= C  and  sum_i alpha_i y_i = 0
is solved by sequential minimal optimisation with maximal-violating-pair
selection. Labels arrive as 0/1 and are mapped to -1/+1 internally.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateLabelsError, IoError, FormatError, ShapeError, SolverStallError

KKT_TOLERANCE = 1e-3
MAX_PASSES = 10_000
SUPPORT_EPS = 1e-8
C_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


@dataclass
class SvmModel:
    c_value: float
    alphas: np.ndarray
    labels: np.ndarray  # original 0/1 training labels
    bias: float
    support_indices: np.ndarray
    gram_hash: str
    objective: float
    kkt_gap: float

    @property
    def signed_labels(self) -> np.ndarray:
        return np.where(self.labels > 0, 1.0, -1.0)

    def save(self, path) -> None:
        payload = {
            "C": self.c_value,
            "alphas": self.alphas.tolist(),
            "labels": self.labels.tolist(),
            "bias": self.bias,
            "support_indices": self.support_indices.tolist(),
            "gram_hash": self.gram_hash,
            "objective": self.objective,
            "kkt_gap": self.kkt_gap,
        }
        try:
            Path(path).write_text(json.dumps(payload))
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc


def load_svm(path) -> SvmModel:
    path = Path(path)
    if not path.exists():
        raise IoError(f"no such file: {path}")
    try:
        d = json.loads(path.read_text())
        return SvmModel(
            c_value=float(d["C"]),
            alphas=np.asarray(d["alphas"], dtype=np.float64),
            labels=np.asarray(d["labels"], dtype=np.uint8),
            bias=float(d["bias"]),
            support_indices=np.asarray(d["support_indices"], dtype=np.int64),
            gram_hash=str(d["gram_hash"]),
            objective=float(d["objective"]),
            kkt_gap=float(d["kkt_gap"]),
        )
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: bad model file ({exc})") from None


def gram_digest(gram: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(gram, dtype="<f8").tobytes()).hexdigest()


def _validate_gram(gram: np.ndarray, labels: np.ndarray):
    gram = np.asarray(gram, dtype=np.float64)
    labels = np.asarray(labels)
    n = labels.shape[0]
    if gram.shape != (n, n):
        raise ShapeError(f"gram must be {n}x{n}, got {gram.shape}")
    if len(np.unique(labels)) < 2:
        raise DegenerateLabelsError("training labels contain a single class")
    return gram, labels


def solve_dual(gram, labels, c_value: float, tolerance: float = KKT_TOLERANCE,
               max_passes: int = MAX_PASSES) -> SvmModel:
    """Solve the box-constrained dual on a precomputed Gram matrix.

    Each pass updates the maximal violating pair and stops when the KKT gap
    drops to the tolerance. Raises SolverStallError if the pass budget runs
    out first. The bias is averaged over unbounded support vectors, falling
    back to the midpoint of the KKT interval when every alpha sits at a
    bound.
    """
    gram, labels = _validate_gram(gram, labels)
    y = np.where(np.asarray(labels) > 0, 1.0, -1.0)
    n = y.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)  # f_t = sum_s alpha_s y_s K_st, maintained incrementally
    gap = np.inf

    for _ in range(max_passes):
        neg_e = y - f  # -E_t; KKT scores
        up = ((y > 0) & (alpha < c_value - SUPPORT_EPS)) | ((y < 0) & (alpha > SUPPORT_EPS))
        low = ((y > 0) & (alpha > SUPPORT_EPS)) | ((y < 0) & (alpha < c_value - SUPPORT_EPS))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, neg_e, -np.inf)))
        j = int(np.argmin(np.where(low, neg_e, np.inf)))
        gap = neg_e[i] - neg_e[j]
        if gap <= tolerance:
            break

        eta = max(gram[i, i] + gram[j, j] - 2.0 * gram[i, j], 1e-12)
        e_i, e_j = f[i] - y[i], f[j] - y[j]
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c_value, c_value + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c_value)
            hi = min(c_value, alpha[i] + alpha[j])
        new_j = np.clip(alpha[j] + y[j] * (e_i - e_j) / eta, lo, hi)
        new_i = alpha[i] + y[i] * y[j] * (alpha[j] - new_j)
        f += (new_i - alpha[i]) * y[i] * gram[:, i] + (new_j - alpha[j]) * y[j] * gram[:, j]
        alpha[i], alpha[j] = new_i, new_j
    else:
        raise SolverStallError(
            f"KKT gap {gap:.3e} above {tolerance} after {max_passes} passes")

    free = (alpha > SUPPORT_EPS) & (alpha < c_value - SUPPORT_EPS)
    neg_e = y - f
    if free.any():
        bias = float(neg_e[free].mean())
    else:
        up = ((y > 0) & (alpha < c_value - SUPPORT_EPS)) | ((y < 0) & (alpha > SUPPORT_EPS))
        low = ((y > 0) & (alpha > SUPPORT_EPS)) | ((y < 0) & (alpha < c_value - SUPPORT_EPS))
        hi = neg_e[up].max() if up.any() else 0.0
        lo = neg_e[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)

    objective = float(alpha.sum() - 0.5 * (alpha * y) @ gram @ (alpha * y))
    return SvmModel(
        c_value=float(c_value),
        alphas=alpha,
        labels=np.asarray(labels, dtype=np.uint8),
        bias=bias,
        support_indices=np.flatnonzero(alpha > SUPPORT_EPS),
        gram_hash=gram_digest(gram),
        objective=objective,
        kkt_gap=float(max(gap, 0.0)),
    )


def decision_values(model: SvmModel, gram_cross) -> np.ndarray:
    """Decision function for rows whose kernels against the training set
    form gram_cross of shape (n_eval, n_train)."""
    gram_cross = np.asarray(gram_cross, dtype=np.float64)
    if gram_cross.ndim != 2 or gram_cross.shape[1] != model.alphas.shape[0]:
        raise ShapeError(
            f"cross-gram must have {model.alphas.shape[0]} columns, got {gram_cross.shape}")
    return gram_cross @ (model.alphas * model.signed_labels) + model.bias


def grid_search_c(gram_train, labels_train, gram_val_cross, labels_val,
                  grid=C_GRID, tolerance: float = KKT_TOLERANCE,
                  max_passes: int = MAX_PASSES):
    """Fit one model per C and keep the best validation AUC, preferring the
    smaller C on ties. Returns (best_model, {C: auc})."""
    from .metrics import compute_auc

    results = {}
    best_model = None
    best_auc = -np.inf
    for c_value in sorted(grid):
        model = solve_dual(gram_train, labels_train, c_value,
                           tolerance=tolerance, max_passes=max_passes)
        auc = compute_auc(labels_val, decision_values(model, gram_val_cross))
        results[c_value] = auc
        if auc > best_auc:
            best_auc = auc
            best_model = model
    return best_model, results
