"""Loss functions. Each returns the mean loss and its gradient."""

import numpy as np
from scipy.special import log_softmax

from gtcnn.errors import ParameterError


def cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy of ``(B, C)`` scores against integer labels."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ParameterError(f"scores {logits.shape} do not match labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ParameterError(f"labels must lie in [0, {logits.shape[1]})")
    batch = logits.shape[0]
    log_p = log_softmax(logits, axis=1)
    rows = np.arange(batch)
    loss = -float(np.mean(log_p[rows, labels]))
    grad = np.exp(log_p)
    grad[rows, labels] -= 1.0
    return loss, grad / batch


def mse(predictions, targets) -> tuple[float, np.ndarray]:
    """Mean squared error over every entry."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).reshape(predictions.shape)
    diff = predictions - targets
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def l1_penalty(s, weight: float) -> tuple[float, np.ndarray]:
    """``weight·‖s‖₁`` with the subgradient ``weight·sign(s)`` (zero at zero)."""
    s = np.asarray(s, dtype=np.float64)
    return weight * float(np.sum(np.abs(s))), weight * np.sign(s)
