"""Synthetic heat-diffusion datasets on a stochastic block model."""

import logging
from dataclasses import dataclass

import numpy as np

from gtcnn.config import ExperimentConfig
from gtcnn.errors import ConfigError
from gtcnn.graphs import cyclic_graph, diffusion_operators, line_graph, path_graph, sbm_generate
from gtcnn.models import Graph
from gtcnn.nn.training import Dataset
from gtcnn.products import vectorize
from gtcnn.utils import derive_seeds

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SourceLocalizationSample:
    """An N×T diffusion window and the community of its source node."""

    x: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class GeneratedData:
    spatial: Graph
    temporal: Graph
    communities: np.ndarray
    dataset: Dataset
    sources: np.ndarray
    start_times: np.ndarray

    def samples(self) -> list[SourceLocalizationSample]:
        n, t = self.spatial.n, self.temporal.n
        return [
            SourceLocalizationSample(x=x[:, 0].reshape((n, t), order="F"), label=int(label))
            for x, label in zip(self.dataset.inputs, self.communities[self.sources])
        ]


def temporal_graph(kind: str, window: int) -> Graph:
    """Temporal graph over a window: ``line``, ``cycle`` or ``path``."""
    if kind == "line":
        return line_graph(window)
    if kind == "cycle":
        return cyclic_graph(window)
    if kind == "path":
        return path_graph(window)
    raise ConfigError(f"unknown temporal graph {kind!r}")


def spatial_graph(cfg: ExperimentConfig) -> tuple[Graph, np.ndarray]:
    """The SBM of an experiment, seeded from the experiment seed."""
    g = cfg.graph
    graph_seed = derive_seeds(cfg.seed, 2)[0]
    return sbm_generate(g.n, g.communities, g.p_in, g.p_out, graph_seed)


def _diffusion_windows(
    cfg: ExperimentConfig,
    spatial: Graph,
    length: int,
    start_time_override: int | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Windows of ``length`` consecutive states ``e^{-τ·time_step·L/λ_max} e_source``.

    Returns the windows ``(S, N, length)``, the source nodes and the start times.
    """
    d = cfg.diffusion
    samples = cfg.dataset.samples
    rng = np.random.default_rng(derive_seeds(cfg.seed, 2)[1])
    sources = rng.integers(0, spatial.n, size=samples)
    if start_time_override is None:
        if length > d.t_max - d.t_min:
            raise ConfigError(
                f"window of {length} steps does not fit in [{d.t_min}, {d.t_max}]"
            )
        starts = rng.integers(d.t_min, d.t_max - length + 1, size=samples)
    else:
        starts = np.full(samples, int(start_time_override))
    first, last = int(starts.min()), int(starts.max()) + length - 1
    kernels = diffusion_operators(spatial, np.arange(first, last + 1) * d.time_step, normalized=True)
    # kernels[τ - first][:, s] is the state at time τ for a unit source at s.
    offsets = starts[:, None] - first + np.arange(length)[None, :]
    windows = kernels[offsets, :, sources[:, None]].transpose(0, 2, 1)
    return windows, sources, starts


def _as_inputs(windows: np.ndarray) -> np.ndarray:
    return np.stack([vectorize(w).values for w in windows])[:, :, None]


def gen_source_localization(
    cfg: ExperimentConfig,
    spatial: Graph | None = None,
    start_time_override: int | None = None,
) -> GeneratedData:
    """Diffusion windows labelled by the community of their source node.

    Each sample picks a source node uniformly, diffuses a unit value from it
    with ``e^{-τ·time_step·L/λ_max(L)}`` at integer times ``τ`` and keeps
    ``T`` consecutive states starting at a time drawn uniformly from ``[t_min, t_max − T]``.

    Args:
        cfg: Experiment configuration.
        spatial: Reuse this graph instead of sampling the configured SBM.
        start_time_override: Start every window at this time (debugging).

    Raises:
        ConfigError: If the window does not fit between ``t_min`` and ``t_max``.
    """
    if spatial is None:
        spatial, communities = spatial_graph(cfg)
    else:
        communities = np.arange(spatial.n) % cfg.graph.communities
    window = cfg.diffusion.window
    windows, sources, starts = _diffusion_windows(cfg, spatial, window, start_time_override)
    dataset = Dataset(_as_inputs(windows), communities[sources].astype(np.int64))
    logger.info(
        "generated %d source-localization samples (N=%d, T=%d)", len(dataset), spatial.n, window
    )
    return GeneratedData(
        spatial=spatial,
        temporal=temporal_graph(cfg.graph.temporal, window),
        communities=communities,
        dataset=dataset,
        sources=sources,
        start_times=starts,
    )


def gen_diffusion_forecasting(
    cfg: ExperimentConfig,
    spatial: Graph | None = None,
    start_time_override: int | None = None,
) -> GeneratedData:
    """One-step forecasting: ``T`` diffusion states in, the next state out.

    Targets have shape ``(S, N, 1)``.
    """
    if spatial is None:
        spatial, communities = spatial_graph(cfg)
    else:
        communities = np.arange(spatial.n) % cfg.graph.communities
    window = cfg.diffusion.window
    windows, sources, starts = _diffusion_windows(cfg, spatial, window + 1, start_time_override)
    dataset = Dataset(_as_inputs(windows[:, :, :window]), windows[:, :, window:])
    logger.info("generated %d forecasting samples (N=%d, T=%d)", len(dataset), spatial.n, window)
    return GeneratedData(
        spatial=spatial,
        temporal=temporal_graph(cfg.graph.temporal, window),
        communities=communities,
        dataset=dataset,
        sources=sources,
        start_times=starts,
    )
