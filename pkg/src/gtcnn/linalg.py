"""Sparse matrix primitives.

Every graph shift operator in gtcnn is a ``scipy.sparse.csr_array`` in
canonical form: float64 values, sorted column indices, no duplicate entries and
no explicitly stored zeros. The helpers here build and compare such matrices.
"""

import numpy as np
import scipy.sparse as sp

from gtcnn.errors import ParameterError

SparseMatrix = sp.csr_array

# Entries with magnitude at or below this value are dropped on construction.
DROP_TOLERANCE = 1e-15
SYMMETRY_TOLERANCE = 1e-12


def clean(m) -> SparseMatrix:
    """Return a canonical CSR copy of ``m`` (sparse or dense)."""
    out = sp.csr_array(m, dtype=np.float64, copy=True)
    out.sum_duplicates()
    out.data[np.abs(out.data) <= DROP_TOLERANCE] = 0.0
    out.eliminate_zeros()
    out.sort_indices()
    return out


def from_triplets(
    n_rows: int,
    n_cols: int,
    rows,
    cols,
    values,
) -> SparseMatrix:
    """Build a CSR matrix from (row, col, value) triplets.

    Duplicate coordinates are summed, then near-zero entries are dropped.

    Raises:
        ParameterError: If an index falls outside the matrix shape.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if not (rows.shape == cols.shape == values.shape):
        raise ParameterError("triplet arrays must have equal length")
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
        raise ParameterError(f"row index out of range for {n_rows} rows")
    if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
        raise ParameterError(f"column index out of range for {n_cols} columns")
    coo = sp.coo_array((values, (rows, cols)), shape=(n_rows, n_cols))
    return clean(coo)


def to_triplets(m: SparseMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the stored entries of ``m`` as row-major sorted triplets."""
    coo = sp.coo_array(m)
    order = np.lexsort((coo.col, coo.row))
    return (
        coo.row[order].astype(np.int64),
        coo.col[order].astype(np.int64),
        coo.data[order].astype(np.float64),
    )


def identity(n: int) -> SparseMatrix:
    """Sparse n×n identity."""
    return clean(sp.identity(n, format="csr"))


def max_abs_difference(a, b) -> float:
    """Largest absolute entry of ``a - b`` for sparse or dense operands."""
    diff = a - b
    if sp.issparse(diff):
        data = sp.csr_array(diff).data
        return float(np.max(np.abs(data))) if data.size else 0.0
    diff = np.asarray(diff)
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def is_square(m) -> bool:
    return m.shape[0] == m.shape[1]


def is_symmetric(m, tol: float = SYMMETRY_TOLERANCE) -> bool:
    """True when ``m`` is square and ``max|m - mᵀ| <= tol``."""
    return is_square(m) and max_abs_difference(m, m.T) <= tol


def to_dense(m) -> np.ndarray:
    """Dense float64 array for sparse or dense input."""
    if sp.issparse(m):
        return np.asarray(m.toarray(), dtype=np.float64)
    return np.asarray(m, dtype=np.float64)
