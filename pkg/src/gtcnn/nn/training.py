"""Mini-batch ADAM training and evaluation."""

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from gtcnn.errors import NumericalError, ParameterError, TrainingDivergedError
from gtcnn.models import Graph
from gtcnn.nn.losses import cross_entropy, l1_penalty, mse
from gtcnn.nn.metrics import Metric, compute_metric
from gtcnn.nn.model import PRODUCT_KEY, GTCNNModel, backward, predict
from gtcnn.nn.optim import Adam

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and data-split settings."""

    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "split", tuple(float(f) for f in self.split))
        if self.epochs < 0 or self.batch_size < 1:
            raise ParameterError("need epochs >= 0 and batch_size >= 1")
        if self.learning_rate < 0:
            raise ParameterError("learning rate must be non-negative")
        if len(self.split) != 3 or any(f < 0 for f in self.split):
            raise ParameterError("split needs three non-negative fractions")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ParameterError(f"split fractions must sum to 1, got {sum(self.split)}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "split": list(self.split),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainConfig":
        defaults = cls()
        return cls(
            epochs=int(data.get("epochs", defaults.epochs)),
            batch_size=int(data.get("batch_size", defaults.batch_size)),
            learning_rate=float(data.get("learning_rate", defaults.learning_rate)),
            beta1=float(data.get("beta1", defaults.beta1)),
            beta2=float(data.get("beta2", defaults.beta2)),
            epsilon=float(data.get("epsilon", defaults.epsilon)),
            seed=int(data.get("seed", defaults.seed)),
            split=tuple(data.get("split", defaults.split)),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples on a product graph.

    ``inputs`` has shape ``(S, NT, F_0)``. ``targets`` holds integer labels
    ``(S,)`` for classification or arrays ``(S, N, C)`` for regression.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        if self.inputs.ndim != 3 or self.targets.shape[:1] != self.inputs.shape[:1]:
            raise ParameterError(
                f"inputs {self.inputs.shape} and targets {self.targets.shape} disagree"
            )

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, index) -> "Dataset":
        return Dataset(self.inputs[index], self.targets[index])


def split_dataset(data: Dataset, fractions) -> tuple[Dataset, Dataset, Dataset]:
    """Contiguous train/validation/test split; the test part takes the remainder."""
    total = len(data)
    n_train = int(round(fractions[0] * total))
    n_val = min(int(round(fractions[1] * total)), total - n_train)
    return (
        data.subset(slice(0, n_train)),
        data.subset(slice(n_train, n_train + n_val)),
        data.subset(slice(n_train + n_val, total)),
    )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_metric: float


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)

    @property
    def train_losses(self) -> list[float]:
        return [r.train_loss for r in self.records]


def default_metric(model: GTCNNModel) -> Metric:
    return Metric.ACCURACY if model.config.classifies else Metric.MAE


def data_loss(model: GTCNNModel, outputs: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    if model.config.classifies:
        return cross_entropy(outputs, targets)
    return mse(outputs, targets)


def regularized_loss(model: GTCNNModel, outputs, targets) -> tuple[float, np.ndarray]:
    """Data loss plus ``β‖s‖₁`` when the product scalars are learned."""
    loss, grad = data_loss(model, outputs, targets)
    if model.config.learns_product:
        loss += l1_penalty(model.params[PRODUCT_KEY], model.config.l1_weight)[0]
    return loss, grad


def loss_gradients(
    model: GTCNNModel, spatial: Graph, temporal: Graph, inputs, targets
) -> tuple[float, dict[str, np.ndarray]]:
    """Regularized loss and its gradient for one batch."""
    outputs, cache = predict(model, spatial, temporal, inputs)
    loss, grad_out = regularized_loss(model, outputs, targets)
    grads = backward(model, cache, grad_out)
    if model.config.learns_product:
        grads[PRODUCT_KEY] = grads[PRODUCT_KEY] + l1_penalty(
            model.params[PRODUCT_KEY], model.config.l1_weight
        )[1]
    return loss, grads


def _evaluate_loss(
    model: GTCNNModel, spatial: Graph, temporal: Graph, data: Dataset, metric: Metric
) -> tuple[float, float]:
    if len(data) == 0:
        return float("nan"), float("nan")
    outputs, _ = predict(model, spatial, temporal, data.inputs)
    loss, _ = regularized_loss(model, outputs, data.targets)
    return loss, compute_metric(metric, outputs, data.targets)


def train(
    model: GTCNNModel,
    spatial: Graph,
    temporal: Graph,
    train_set: Dataset,
    val_set: Dataset,
    tc: TrainConfig,
) -> tuple[GTCNNModel, History]:
    """Train a copy of ``model`` with mini-batch ADAM.

    Batches are drawn from a fresh permutation every epoch, seeded by
    ``tc.seed``, so a fixed seed reproduces the run exactly.

    Args:
        model: Starting point; left untouched.
        spatial: Spatial graph.
        temporal: Temporal graph the data lives on.
        train_set: Non-empty training data.
        val_set: Validation data (may be empty).
        tc: Optimizer settings.

    Returns:
        The trained model and the per-epoch history.

    Raises:
        ParameterError: If the training set is empty.
        TrainingDivergedError: If a batch loss or any activation, on a
            training batch or on the validation set, is not finite.
    """
    if len(train_set) == 0:
        raise ParameterError("training set is empty")
    model = model.copy()
    rng = np.random.default_rng(tc.seed)
    optimizer = Adam(tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon)
    metric = default_metric(model)
    history = History()

    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(train_set))
        total = 0.0
        for batch, start in enumerate(range(0, len(order), tc.batch_size)):
            index = order[start : start + tc.batch_size]
            part = train_set.subset(index)
            try:
                loss, grads = loss_gradients(model, spatial, temporal, part.inputs, part.targets)
            except NumericalError as exc:
                raise TrainingDivergedError(epoch, batch, float("nan"), exc.layer) from exc
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, batch, loss)
            logger.debug("epoch %d batch %d loss %.6g", epoch, batch, loss)
            optimizer.step(model.params, grads)
            model.touch()
            total += loss * index.size
        try:
            val_loss, val_metric = _evaluate_loss(model, spatial, temporal, val_set, metric)
        except NumericalError as exc:
            raise TrainingDivergedError(epoch, batch, float("nan"), exc.layer) from exc
        history.records.append(EpochRecord(epoch, total / len(train_set), val_loss, val_metric))
        if epoch == tc.epochs or epoch % max(1, tc.epochs // 10) == 0:
            logger.info(
                "epoch %d/%d train %.4f val %.4f %s %.4f",
                epoch,
                tc.epochs,
                total / len(train_set),
                val_loss,
                metric.value,
                val_metric,
            )
    return model, history


def evaluate(
    model: GTCNNModel,
    spatial: Graph,
    temporal: Graph,
    data: Dataset,
    metric: Metric | str | None = None,
) -> float:
    """Metric of ``model`` on ``data`` (accuracy, MAE, RMSE or MAPE in percent)."""
    if len(data) == 0:
        raise ParameterError("cannot evaluate on an empty dataset")
    metric = default_metric(model) if metric is None else Metric(metric)
    outputs, _ = predict(model, spatial, temporal, data.inputs)
    return compute_metric(metric, outputs, data.targets)
