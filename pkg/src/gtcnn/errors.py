"""Exception hierarchy for gtcnn."""


class GTCNNError(Exception):
    """Base class for every error raised by gtcnn."""


class ParameterError(GTCNNError, ValueError):
    """An argument is out of range or has an inconsistent shape."""


class ContractError(GTCNNError):
    """An operation was called on input that violates its precondition.

    Typical cases are a non-symmetric graph handed to a routine that needs a
    symmetric one, or a forward cache reused after the model changed.
    """


class NumericalError(GTCNNError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""

    def __init__(self, message: str, layer: int | None = None) -> None:
        self.layer = layer
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)


class TrainingDivergedError(NumericalError):
    """The training loss, or an activation on the way to it, became non-finite."""

    def __init__(self, epoch: int, batch: int, loss: float, layer: int | None = None) -> None:
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}", layer)


class DegenerateError(GTCNNError):
    """The input is degenerate, for example an all-zero filter or graph."""


class ConfigError(GTCNNError):
    """An experiment configuration is invalid."""


class CheckpointError(GTCNNError, OSError):
    """A checkpoint or artifact file is missing or unreadable."""
