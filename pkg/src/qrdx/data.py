"""Labelled feature matrices: normalisation, splits, and synthetic generation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError, RangeError, ShapeError
from .events import FEATURE_NAMES, N_FEATURES


def generic_names(n: int) -> tuple[str, ...]:
    return tuple(f"f{i:02d}" for i in range(n))


@dataclass
class FeatureMatrix:
    """A dense float64 sample matrix with one integer label per row."""

    values: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.values.ndim != 2:
            raise ShapeError(f"values must be 2-d, got shape {self.values.shape}")
        if self.labels.shape != (self.values.shape[0],):
            raise ShapeError(
                f"labels shape {self.labels.shape} does not match {self.values.shape[0]} rows"
            )
        if not self.feature_names:
            self.feature_names = generic_names(self.values.shape[1])
        if len(self.feature_names) != self.values.shape[1]:
            raise ShapeError("one feature name required per column")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices)
        return FeatureMatrix(self.values[idx], self.labels[idx], self.feature_names)

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        names = self.feature_names if values.shape[1] == self.n_features else ()
        return FeatureMatrix(values, self.labels, names)


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-feature minima and maxima fitted on training data."""

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def spans(self) -> np.ndarray:
        return self.maxs - self.mins


def fit_minmax(values: np.ndarray) -> NormalizationSpec:
    """Record per-column min and max of a training matrix."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ShapeError("minmax fit needs a non-empty 2-d matrix")
    return NormalizationSpec(values.min(axis=0), values.max(axis=0))


def apply_minmax(values: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    """Scale columns to [0, 1] using a fitted spec, clipping out-of-range values.

    Columns that were constant at fit time map to 0.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != spec.mins.shape[0]:
        raise ShapeError("matrix width does not match the normalisation spec")
    spans = spec.spans
    safe = np.where(spans == 0.0, 1.0, spans)
    out = (values - spec.mins) / safe
    out[:, spans == 0.0] = 0.0
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class SplitSpec:
    """Class-balanced split request, by fractions or by absolute row counts.

    Exactly one of ``fractions`` / ``counts`` must be set. Counts are totals
    per split and must be even so each split stays balanced.
    """

    seed: int = 0
    fractions: tuple[float, ...] | None = (0.8, 0.1, 0.1)
    counts: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.fractions is None) == (self.counts is None):
            raise DomainError("specify either fractions or counts, not both")


def split_dataset(data: FeatureMatrix, spec: SplitSpec):
    """Split into (train, val, test), each class-balanced, deterministically.

    Per-class indices are shuffled with the spec seed and sliced; within a
    split, class-0 rows precede class-1 rows. Raises InsufficientDataError
    when a class cannot cover its share.
    """
    classes = (0, 1)
    per_class_idx = {}
    for c in classes:
        idx = np.flatnonzero(data.labels == c)
        if idx.size == 0:
            raise InsufficientDataError(f"class {c} has no samples")
        per_class_idx[c] = idx

    if spec.fractions is not None:
        fracs = tuple(spec.fractions)
        if len(fracs) != 3 or any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise DomainError("fractions must be three non-negative values summing to 1")
        per_class_counts = {
            c: [int(f * per_class_idx[c].size) for f in fracs] for c in classes
        }
    else:
        counts = tuple(spec.counts)
        if len(counts) not in (2, 3):
            raise DomainError("counts must list two or three splits")
        if len(counts) == 2:
            counts = (counts[0], 0, counts[1])
        if any(n < 0 or n % 2 for n in counts):
            raise DomainError("split counts must be non-negative and even")
        per_class_counts = {c: [n // 2 for n in counts] for c in classes}

    children = np.random.SeedSequence(spec.seed).spawn(len(classes))
    shuffled = {}
    for c, ss in zip(classes, children):
        rng = np.random.default_rng(ss)
        order = per_class_idx[c].copy()
        rng.shuffle(order)
        needed = sum(per_class_counts[c])
        if needed > order.size:
            raise InsufficientDataError(
                f"class {c}: requested {needed} samples, only {order.size} available"
            )
        shuffled[c] = order

    splits = []
    offsets = {c: 0 for c in classes}
    for k in range(3):
        parts = []
        for c in classes:
            n = per_class_counts[c][k]
            parts.append(shuffled[c][offsets[c] : offsets[c] + n])
            offsets[c] += n
        splits.append(data.take(np.concatenate(parts)))
    return tuple(splits)


def take_balanced(data: FeatureMatrix, count: int, offset: int = 0) -> FeatureMatrix:
    """Take ``count`` rows, half per class, in stored order, skipping
    ``offset`` rows per class first. Raises InsufficientDataError if a class
    runs short."""
    if count % 2:
        raise DomainError("balanced take needs an even count")
    half = count // 2
    skip = offset // 2
    parts = []
    for c in (0, 1):
        idx = np.flatnonzero(data.labels == c)
        if idx.size < skip + half:
            raise InsufficientDataError(
                f"class {c}: need {skip + half} samples, only {idx.size} available"
            )
        parts.append(idx[skip : skip + half])
    return data.take(np.concatenate(parts))


# --- synthetic data -------------------------------------------------------

_LATENT_DIM = 8
_LABEL_FLIP_SCALE = 0.4  # flip probability at hardness 1; caps reachable AUC near 0.6


def generate_synthetic(n_samples: int, seed: int, hardness: float,
                       return_latents: bool = False):
    """Generate a balanced two-class dataset with the canonical 67 features.

    Rows are produced by pushing a low-dimensional Gaussian latent through a
    fixed smooth random map drawn from the seed. Labels come from a linear
    score on the latent; ``hardness`` in [0, 1] bends the decision surface
    and flips labels with probability 0.4*hardness, so hardness 0 gives
    linearly separable latents and hardness 1 caps any classifier well below
    random-plus-noise levels.
    """
    if not 0.0 <= hardness <= 1.0:
        raise RangeError("hardness must lie in [0, 1]")
    if n_samples < 2 or n_samples % 2:
        raise DomainError("n_samples must be an even number >= 2")

    rng = np.random.default_rng(np.random.SeedSequence([0x51D5, seed]))
    hidden = 40
    map_a = rng.normal(size=(_LATENT_DIM, hidden)) / np.sqrt(_LATENT_DIM)
    map_bias = rng.normal(size=hidden) * 0.3
    map_b = rng.normal(size=(hidden, N_FEATURES)) / np.sqrt(hidden)
    out_bias = rng.normal(size=N_FEATURES)
    w_lin = rng.normal(size=_LATENT_DIM)
    w_lin /= np.linalg.norm(w_lin)
    w_bend = rng.normal(size=_LATENT_DIM)
    w_bend /= np.linalg.norm(w_bend)

    half = n_samples // 2
    kept_x = {0: [], 1: []}
    kept_z = {0: [], 1: []}
    flip_p = _LABEL_FLIP_SCALE * hardness

    def short() -> bool:
        return any(sum(len(v) for v in kept_x[c]) < half for c in (0, 1))

    while short():
        z = rng.normal(size=(max(n_samples, 512), _LATENT_DIM))
        score = z @ w_lin + 0.8 * hardness * np.sin(2.0 * (z @ w_bend))
        labels = (score > 0.0).astype(np.uint8)
        flips = rng.random(z.shape[0]) < flip_p
        labels = np.where(flips, 1 - labels, labels).astype(np.uint8)
        x = np.tanh(z @ map_a + map_bias) @ map_b + out_bias
        for c in (0, 1):
            mask = labels == c
            kept_x[c].append(x[mask])
            kept_z[c].append(z[mask])

    xs, zs, ys = [], [], []
    for c in (0, 1):
        xc = np.concatenate(kept_x[c])[:half]
        zc = np.concatenate(kept_z[c])[:half]
        xs.append(xc)
        zs.append(zc)
        ys.append(np.full(half, c, dtype=np.uint8))
    matrix = FeatureMatrix(np.concatenate(xs), np.concatenate(ys), FEATURE_NAMES)
    if return_latents:
        return matrix, np.concatenate(zs)
    return matrix
