"""Graph generators, Laplacians, heat diffusion and node permutations."""

import logging

import numpy as np

from gtcnn.errors import ContractError, ParameterError
from gtcnn.linalg import clean, from_triplets, is_symmetric
from gtcnn.models import Graph, GraphKind, Permutation
from gtcnn.spectral import sym_eig

logger = logging.getLogger(__name__)


def graph_from_edges(
    n: int,
    edges,
    kind: GraphKind = GraphKind.SPATIAL,
    symmetric: bool = False,
) -> Graph:
    """Build a graph from directed GSO entries ``(i, j, w)``.

    With ``symmetric=True`` every entry is mirrored unless its mirror is
    listed too, so an undirected edge may be given once.
    """
    edges = [(int(i), int(j), float(w)) for i, j, w in edges]
    if symmetric:
        listed = {(i, j) for i, j, _ in edges}
        edges = edges + [(j, i, w) for i, j, w in edges if i != j and (j, i) not in listed]
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    vals = [e[2] for e in edges]
    return Graph(from_triplets(n, n, rows, cols, vals), kind=kind, symmetric=symmetric)


def sbm_generate(
    n: int,
    communities: int,
    p_in: float,
    p_out: float,
    seed: int | np.random.Generator | None = None,
) -> tuple[Graph, np.ndarray]:
    """Sample an undirected stochastic block model.

    Node ``i`` belongs to community ``i mod communities``. The generator draws
    one ``n × n`` block of uniforms with ``rng.random((n, n))``; the pair
    ``i < j`` is an edge iff ``u[i, j] < p`` where ``p`` is ``p_in`` inside a
    community and ``p_out`` across. The lower triangle and diagonal of the
    draw are unused, so there are no self-loops.

    Args:
        n: Number of nodes.
        communities: Number of communities.
        p_in: Intra-community edge probability.
        p_out: Inter-community edge probability.
        seed: Seed or generator.

    Returns:
        The graph (0/1 adjacency as GSO) and the community label of each node.

    Raises:
        ParameterError: If ``n < communities``, ``communities < 1`` or the
            probabilities violate ``0 <= p_out <= p_in <= 1``.
    """
    if communities < 1 or n < communities:
        raise ParameterError(f"need n >= communities >= 1, got n={n}, communities={communities}")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ParameterError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % communities
    draws = rng.random((n, n))
    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    upper = np.triu(draws < prob, k=1)
    rows, cols = np.nonzero(upper | upper.T)
    gso = from_triplets(n, n, rows, cols, np.ones(rows.size))
    logger.debug("sampled SBM: n=%d C=%d edges=%d", n, communities, rows.size // 2)
    return Graph(gso, kind=GraphKind.SPATIAL, symmetric=True), labels


def line_graph(t: int) -> Graph:
    """Directed line graph: ``[S_T]_{τ, τ-1} = 1`` so ``S_T x`` moves a signal forward in time."""
    if t < 1:
        raise ParameterError(f"temporal graph needs at least one node, got {t}")
    tau = np.arange(1, t)
    gso = from_triplets(t, t, tau, tau - 1, np.ones(t - 1))
    return Graph(gso, kind=GraphKind.TEMPORAL, symmetric=is_symmetric(gso))


def cyclic_graph(t: int) -> Graph:
    """Directed cycle: ``[S_T]_{τ, (τ-1) mod t} = 1``."""
    if t < 1:
        raise ParameterError(f"temporal graph needs at least one node, got {t}")
    tau = np.arange(t)
    gso = from_triplets(t, t, tau, (tau - 1) % t, np.ones(t))
    return Graph(gso, kind=GraphKind.TEMPORAL, symmetric=is_symmetric(gso))


def path_graph(n: int, kind: GraphKind = GraphKind.TEMPORAL) -> Graph:
    """Undirected path on ``n`` nodes."""
    if n < 1:
        raise ParameterError(f"path needs at least one node, got {n}")
    i = np.arange(n - 1)
    rows = np.concatenate([i, i + 1])
    cols = np.concatenate([i + 1, i])
    return Graph(from_triplets(n, n, rows, cols, np.ones(rows.size)), kind=kind, symmetric=True)


def _require_symmetric(g: Graph, what: str) -> None:
    if not (g.symmetric or is_symmetric(g.gso)):
        raise ContractError(f"{what} requires a symmetric graph")


def laplacian(g: Graph):
    """Combinatorial Laplacian ``L = D - A`` of a symmetric graph.

    Raises:
        ContractError: If the graph is not symmetric.
    """
    _require_symmetric(g, "laplacian")
    idx = np.arange(g.n)
    return clean(from_triplets(g.n, g.n, idx, idx, degrees(g)) - g.gso)


def _laplacian_spectrum(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    eig = sym_eig(laplacian(g))
    lam = eig.eigenvalues
    # zero modes are exact zeros so that e^{-∞·0} = 1
    lam = np.where(lam > 1e-10 * max(1.0, float(lam.max(initial=0.0))), lam, 0.0)
    return eig.eigenvectors, lam


def _heat_decay(times: np.ndarray, lam: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(lam > 0, np.exp(-times[..., None] * lam), 1.0)


def diffusion_operators(g: Graph, times, normalized: bool = False) -> np.ndarray:
    """Stack of dense heat kernels ``e^{-τL}``, one per entry of ``times``.

    All kernels share one eigendecomposition of ``L``. With ``normalized``
    the times are measured in units of ``1/λ_max(L)``, so the kernels are
    ``e^{-τL/λ_max}`` and the decay no longer grows with the node degrees.
    """
    _require_symmetric(g, "heat diffusion")
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.isnan(times)) or np.any(times < 0):
        raise ParameterError("diffusion times must be non-negative")
    v, lam = _laplacian_spectrum(g)
    if normalized and lam.max(initial=0.0) > 0:
        lam = lam / lam.max()
    return np.einsum("ik,tk,jk->tij", v, _heat_decay(times, lam), v)


def heat_diffusion(g: Graph, x0, time: float) -> np.ndarray:
    """``e^{-time·L} x0`` through the symmetric eigendecomposition of ``L``.

    ``time = inf`` gives the projection on the null space of ``L``: the
    per-component average of ``x0``.

    Raises:
        ContractError: If the graph is not symmetric.
        ParameterError: If ``time < 0`` or ``x0`` has the wrong length.
    """
    _require_symmetric(g, "heat diffusion")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (g.n,):
        raise ParameterError(f"x0 must have length {g.n}, got shape {x0.shape}")
    if not time >= 0:
        raise ParameterError(f"diffusion time must be non-negative, got {time}")
    v, lam = _laplacian_spectrum(g)
    return v @ (_heat_decay(np.asarray(float(time)), lam) * (v.T @ x0))


def permute_graph(g: Graph, p: Permutation) -> Graph:
    """``PᵀSP``."""
    if p.n != g.n:
        raise ParameterError(f"permutation of size {p.n} for a graph with {g.n} nodes")
    gso = g.gso[p.mapping][:, p.mapping]
    return Graph(gso, kind=g.kind, symmetric=g.symmetric)


def permute_signal(x, p: Permutation) -> np.ndarray:
    """``Pᵀx``; for a matrix the rows (nodes) are permuted."""
    x = np.asarray(x)
    if x.shape[0] != p.n:
        raise ParameterError(f"permutation of size {p.n} for a signal with {x.shape[0]} rows")
    return x[p.mapping]


def degrees(g: Graph) -> np.ndarray:
    return np.asarray(g.gso.sum(axis=1)).ravel()
