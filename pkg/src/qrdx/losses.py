"""Training losses with hand-derived gradients.

Every function returns the scalar loss together with the gradients needed
for backpropagation. Reductions are means over the batch (and over features
for the reconstruction loss), so gradients already carry the 1/N factors.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError

PROB_FLOOR = 1e-7  # probabilities are clamped to [floor, 1 - floor]


def mse_loss(target: np.ndarray, prediction: np.ndarray):
    """Mean squared error over all entries.

    Returns (value, grad) with grad taken w.r.t. the prediction.
    """
    target = np.asarray(target, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    if target.shape != prediction.shape:
        raise ShapeError(f"shape mismatch {target.shape} vs {prediction.shape}")
    diff = prediction - target
    value = float((diff * diff).mean())
    grad = 2.0 * diff / diff.size
    return value, grad


def bce_loss(labels: np.ndarray, probabilities: np.ndarray):
    """Binary cross-entropy with probability clamping at 1e-7.

    labels hold 0/1 targets; probabilities must have the same number of
    entries (a trailing singleton axis on either side is fine). Returns
    (value, grad) with grad w.r.t. the probabilities, in their shape.
    """
    labels = np.asarray(labels, dtype=np.float64)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if labels.size != probabilities.size:
        raise ShapeError(f"{labels.size} labels vs {probabilities.size} probabilities")
    y = labels.reshape(probabilities.shape)
    p = np.clip(probabilities, PROB_FLOOR, 1.0 - PROB_FLOOR)
    value = float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())
    grad = (p - y) / (p * (1.0 - p)) / p.size
    return value, grad


def kl_standard_normal(mu: np.ndarray, sigma: np.ndarray):
    """KL divergence of N(mu, diag sigma^2) from the standard normal.

    Per sample the closed form is 0.5 * sum(sigma^2 + mu^2 - 1 - ln sigma^2);
    batches are averaged. Returns (value, grad_mu, grad_sigma).
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if mu.shape != sigma.shape:
        raise ShapeError(f"shape mismatch {mu.shape} vs {sigma.shape}")
    if np.any(sigma <= 0.0):
        raise DomainError("sigma must be strictly positive")
    batch = mu.shape[0]
    var = sigma * sigma
    value = float(0.5 * (var + mu * mu - 1.0 - np.log(var)).sum() / batch)
    grad_mu = mu / batch
    grad_sigma = (sigma - 1.0 / sigma) / batch
    return value, grad_mu, grad_sigma
