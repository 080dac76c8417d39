"""Product graphs and graph-time signal layout.

A product graph lives on the node set V_T × V. Its flat index for
(time t, node i) is ``t·N + i``: node index fastest, time slowest, which is
the column vectorization of ``X = [x_1 … x_T]``.
"""

import logging

import numpy as np
import scipy.sparse as sp

from gtcnn.errors import ParameterError
from gtcnn.linalg import SparseMatrix, clean, identity, is_square
from gtcnn.models import Graph, ProductGraph, ProductKind, ProductSignal, ProductSpec

logger = logging.getLogger(__name__)


def _check_factors(spatial: Graph, temporal: Graph) -> None:
    if not (is_square(spatial.gso) and is_square(temporal.gso)):
        raise ParameterError("product factors must have square GSOs")


def kronecker_product(spatial: Graph, temporal: Graph) -> SparseMatrix:
    """``S_T ⊗ S``."""
    return clean(sp.kron(temporal.gso, spatial.gso, format="csr"))


def cartesian_product(spatial: Graph, temporal: Graph) -> SparseMatrix:
    """``S_T ⊗ I_N + I_T ⊗ S``."""
    time_links = sp.kron(temporal.gso, identity(spatial.n), format="csr")
    space_links = sp.kron(identity(temporal.n), spatial.gso, format="csr")
    return clean(time_links + space_links)


def strong_product(spatial: Graph, temporal: Graph) -> SparseMatrix:
    """Union of the Kronecker and Cartesian products."""
    return clean(kronecker_product(spatial, temporal) + cartesian_product(spatial, temporal))


def parametric_product(spatial: Graph, temporal: Graph, s: np.ndarray) -> SparseMatrix:
    """``Σ_{i,j∈{0,1}} s_ij (S_T^i ⊗ S^j)`` with ``S^0 = I``.

    Zero scalars contribute no term, and cancellations are removed by the
    CSR drop rule.
    """
    temporal_powers = (identity(temporal.n), temporal.gso)
    spatial_powers = (identity(spatial.n), spatial.gso)
    size = spatial.n * temporal.n
    total = sp.csr_array((size, size), dtype=np.float64)
    for i in range(2):
        for j in range(2):
            if s[i, j] != 0.0:
                total = total + s[i, j] * sp.kron(
                    temporal_powers[i], spatial_powers[j], format="csr"
                )
    return clean(total)


def build_product(spatial: Graph, temporal: Graph, spec: ProductSpec) -> ProductGraph:
    """Build the product-graph GSO without forming any dense NT×NT matrix.

    Args:
        spatial: Spatial graph with N nodes.
        temporal: Temporal graph with T nodes.
        spec: Product kind (and scalars for the parametric product).

    Returns:
        The product graph on N·T nodes.

    Raises:
        ParameterError: If a factor GSO is not square.
    """
    _check_factors(spatial, temporal)
    if spec.kind is ProductKind.KRONECKER:
        gso = kronecker_product(spatial, temporal)
    elif spec.kind is ProductKind.CARTESIAN:
        gso = cartesian_product(spatial, temporal)
    elif spec.kind is ProductKind.STRONG:
        gso = strong_product(spatial, temporal)
    else:
        gso = parametric_product(spatial, temporal, spec.s)
    logger.debug(
        "built %s product: N=%d T=%d nnz=%d", spec.kind.value, spatial.n, temporal.n, gso.nnz
    )
    return ProductGraph(gso=gso, n_spatial=spatial.n, n_temporal=temporal.n, spec=spec)


def vectorize(x_matrix) -> ProductSignal:
    """Column-vectorize an N×T matrix: entry (i, t) lands at ``t·N + i``."""
    x_matrix = np.asarray(x_matrix)
    if x_matrix.ndim != 2:
        raise ParameterError(f"expected an N×T matrix, got shape {x_matrix.shape}")
    n, t = x_matrix.shape
    return ProductSignal(x_matrix.reshape(-1, order="F"), n_spatial=n, n_temporal=t)


def devectorize(ps: ProductSignal) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    return ps.values.reshape((ps.n_spatial, ps.n_temporal), order="F")


def signal(values, n_spatial: int, n_temporal: int) -> ProductSignal:
    """Wrap a flat vector as a product signal, checking its length."""
    return ProductSignal(np.asarray(values), n_spatial=n_spatial, n_temporal=n_temporal)
