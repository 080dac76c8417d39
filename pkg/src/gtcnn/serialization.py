"""On-disk formats: graph JSON, signal CSV, filter JSON, checkpoints and result tables."""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from gtcnn.errors import CheckpointError, ParameterError
from gtcnn.graphs import graph_from_edges
from gtcnn.linalg import to_triplets
from gtcnn.models import Graph, GraphKind, JointFilterCoeffs, PerturbationReport
from gtcnn.nn.model import GTCNNConfig, GTCNNModel
from gtcnn.nn.training import Dataset, History
from gtcnn.utils import DEFAULT_FLOAT_DIGITS, format_cell

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def _read_json(path: Path, what: str) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise CheckpointError(f"{what} not found: {path}") from exc
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read {what} {path}: {exc}") from exc


def write_json(path: Path, data: Any) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def graph_to_dict(g: Graph) -> dict[str, Any]:
    """``{"n": int, "edges": [[i, j, w], ...], "symmetric": bool}``; edges are GSO entries."""
    rows, cols, vals = to_triplets(g.gso)
    edges = [[int(i), int(j), float(w)] for i, j, w in zip(rows, cols, vals)]
    return {"n": g.n, "edges": edges, "symmetric": g.symmetric}


def graph_from_dict(data: dict[str, Any], kind: GraphKind = GraphKind.SPATIAL) -> Graph:
    try:
        edges = [(int(i), int(j), float(w)) for i, j, w in data["edges"]]
        n = int(data["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed graph description: {exc}") from exc
    g = graph_from_edges(n, edges, kind=kind)
    if data.get("symmetric", False):
        return Graph(g.gso, kind=kind, symmetric=True)
    return g


def save_graph(path: str | Path, g: Graph) -> None:
    write_json(Path(path), graph_to_dict(g))


def load_graph(path: str | Path, kind: GraphKind = GraphKind.SPATIAL) -> Graph:
    return graph_from_dict(_read_json(Path(path), "graph file"), kind)


def save_signal_csv(path: str | Path, x_matrix, digits: int = DEFAULT_FLOAT_DIGITS) -> None:
    """One row per node, one column per time step, no header."""
    x_matrix = np.atleast_2d(np.asarray(x_matrix, dtype=np.float64))
    write_csv(path, None, x_matrix.tolist(), digits)


def load_signal_csv(path: str | Path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise CheckpointError(f"cannot read signal file {path}: {exc}") from exc


def save_filter(path: str | Path, h: JointFilterCoeffs) -> None:
    write_json(Path(path), h.to_dict())


def load_filter(path: str | Path) -> JointFilterCoeffs:
    data = _read_json(Path(path), "filter file")
    try:
        return JointFilterCoeffs.from_dict(data)
    except KeyError as exc:
        raise ParameterError(f"filter file {path} lacks {exc}") from exc


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """A trained model together with the graphs it was trained on."""

    model: GTCNNModel
    spatial: Graph
    temporal: Graph
    meta: dict[str, Any]


def save_checkpoint(
    path: str | Path,
    model: GTCNNModel,
    spatial: Graph,
    temporal: Graph,
    meta: dict[str, Any] | None = None,
) -> None:
    """Write config, graphs and every parameter (as row-major nested lists)."""
    data = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "params": {name: value.tolist() for name, value in sorted(model.params.items())},
        "spatial": graph_to_dict(spatial),
        "temporal": graph_to_dict(temporal),
        "meta": meta or {},
    }
    write_json(Path(path), data)
    logger.debug("wrote checkpoint %s", path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint.

    Raises:
        CheckpointError: If the file is missing, unreadable or inconsistent.
    """
    data = _read_json(Path(path), "checkpoint")
    try:
        config = GTCNNConfig.from_dict(data["config"])
        params = {name: np.asarray(value, dtype=np.float64) for name, value in data["params"].items()}
        model = GTCNNModel(config, params)
        spatial = graph_from_dict(data["spatial"], GraphKind.SPATIAL)
        temporal = graph_from_dict(data["temporal"], GraphKind.TEMPORAL)
    except (KeyError, TypeError, ParameterError) as exc:
        raise CheckpointError(f"invalid checkpoint {path}: {exc}") from exc
    return Checkpoint(model=model, spatial=spatial, temporal=temporal, meta=data.get("meta", {}))


def write_csv(
    path: str | Path,
    header: Sequence[str] | None,
    rows: Iterable[Sequence],
    digits: int = DEFAULT_FLOAT_DIGITS,
) -> None:
    """Write a CSV with deterministic float text."""
    path = Path(path)
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v, digits) for v in row])


def write_history_csv(path: str | Path, history: History, digits: int = DEFAULT_FLOAT_DIGITS) -> None:
    rows = ((r.epoch, r.train_loss, r.val_loss, r.val_metric) for r in history.records)
    write_csv(path, ("epoch", "train_loss", "val_loss", "val_metric"), rows, digits)


def write_reports_csv(
    path: str | Path, reports: Iterable[PerturbationReport], digits: int = DEFAULT_FLOAT_DIGITS
) -> None:
    """One row per trial, columns in the field order of :class:`PerturbationReport`."""
    write_csv(path, PerturbationReport.field_names(), (r.to_row() for r in reports), digits)


def read_reports_csv(path: str | Path) -> list[PerturbationReport]:
    names = PerturbationReport.field_names()
    counts = {"L", "F", "N", "T"}
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != names:
            raise CheckpointError(f"{path} does not have the report columns")
        return [
            PerturbationReport(**{k: int(v) if k in counts else float(v) for k, v in row.items()})
            for row in reader
        ]


def save_dataset(path: str | Path, data: Dataset, **extra) -> None:
    path = Path(path)
    _ensure_parent(path)
    np.savez(path, inputs=data.inputs, targets=data.targets, **extra)


def load_dataset(path: str | Path) -> tuple[Dataset, dict[str, np.ndarray]]:
    try:
        with np.load(path) as archive:
            arrays = {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read dataset {path}: {exc}") from exc
    data = Dataset(arrays.pop("inputs"), arrays.pop("targets"))
    return data, arrays
