"""Evaluation metrics."""

import logging
from enum import Enum
from typing import NamedTuple

import numpy as np

from gtcnn.errors import DegenerateError, ParameterError

logger = logging.getLogger(__name__)

# Targets with smaller magnitude are left out of MAPE.
MAPE_FLOOR = 1e-8


class Metric(Enum):
    ACCURACY = "accuracy"
    MAE = "mae"
    RMSE = "rmse"
    MAPE = "mape"


class MapeResult(NamedTuple):
    value: float
    skipped: int


def _paired(predictions, targets) -> tuple[np.ndarray, np.ndarray]:
    predictions = np.asarray(predictions, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ParameterError(
            f"need equally many predictions and targets, got {predictions.size} and {targets.size}"
        )
    return predictions, targets


def accuracy(scores, labels) -> float:
    """Fraction of rows whose arg-max score equals the label."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape[0] != labels.size or labels.size == 0:
        raise ParameterError(f"scores {scores.shape} do not match {labels.size} labels")
    return float(np.mean(np.argmax(scores, axis=1) == labels))


def mae(predictions, targets) -> float:
    p, y = _paired(predictions, targets)
    return float(np.mean(np.abs(p - y)))


def rmse(predictions, targets) -> float:
    p, y = _paired(predictions, targets)
    return float(np.sqrt(np.mean((p - y) ** 2)))


def mape(predictions, targets) -> MapeResult:
    """Mean absolute percentage error in percent.

    Targets with ``|y| < 1e-8`` are skipped and counted.

    Raises:
        DegenerateError: If every target is skipped.
    """
    p, y = _paired(predictions, targets)
    keep = np.abs(y) >= MAPE_FLOOR
    skipped = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise DegenerateError("MAPE is undefined: every target is numerically zero")
    if skipped:
        logger.warning("MAPE skipped %d of %d near-zero targets", skipped, y.size)
    value = 100.0 * float(np.mean(np.abs(p[keep] - y[keep]) / np.abs(y[keep])))
    return MapeResult(value, skipped)


def compute_metric(metric: Metric, outputs, targets) -> float:
    if metric is Metric.ACCURACY:
        return accuracy(outputs, targets)
    if metric is Metric.MAE:
        return mae(outputs, targets)
    if metric is Metric.RMSE:
        return rmse(outputs, targets)
    return mape(outputs, targets).value
