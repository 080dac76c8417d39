"""Eigendecompositions, the graph-time Fourier transform and filter responses.

Spectral claims are restricted to GSOs that are diagonalizable with a real
spectrum (symmetric spatial graphs, the undirected path or the 2-cycle in
time). The directed cycle is handled by :func:`normal_eig`, which returns a
complex decomposition; the nilpotent directed line graph has no
eigendecomposition and is only ever given a frequency *range*
(see :func:`temporal_frequencies`).
"""

import logging

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as P

from gtcnn.errors import ContractError, DegenerateError, NumericalError, ParameterError
from gtcnn.linalg import SYMMETRY_TOLERANCE, is_symmetric, to_dense
from gtcnn.models import EigenDecomposition, Graph, JointFilterCoeffs, ProductSignal
from gtcnn.products import devectorize

logger = logging.getLogger(__name__)

DEFAULT_GRID = 1024
# Relative slack under which two entries count as a tie for the sign convention.
_TIE_SLACK = 1e-10


def _pivot_rows(v: np.ndarray) -> np.ndarray:
    """Row index of the largest-magnitude entry per column, lowest index on ties."""
    mag = np.abs(v)
    peak = mag.max(axis=0)
    return np.argmax(mag >= (1.0 - _TIE_SLACK) * peak[None, :], axis=0)


def _normalize_signs(v: np.ndarray) -> np.ndarray:
    cols = np.arange(v.shape[1])
    pivots = v[_pivot_rows(v), cols]
    if np.iscomplexobj(v):
        phase = np.where(np.abs(pivots) > 0, pivots / np.abs(pivots), 1.0)
        return v * phase.conj()[None, :]
    signs = np.where(pivots < 0, -1.0, 1.0)
    return v * signs[None, :]


def sym_eig(m, tol: float = SYMMETRY_TOLERANCE) -> EigenDecomposition:
    """Full eigendecomposition of a real symmetric matrix.

    Eigenvalues come out in descending order. In every eigenvector the entry
    of largest magnitude is positive (lowest index wins ties).

    Raises:
        ContractError: If ``m`` is not symmetric within ``tol``.
        NumericalError: If the LAPACK driver fails to converge.
    """
    if not is_symmetric(m, tol):
        raise ContractError("sym_eig requires a symmetric matrix")
    dense = to_dense(m)
    dense = 0.5 * (dense + dense.T)
    try:
        w, v = scipy.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=_normalize_signs(v[:, order]))


def normal_eig(m, tol: float = 1e-10) -> EigenDecomposition:
    """Complex eigendecomposition of a normal matrix (e.g. a directed cycle).

    For a normal matrix the complex Schur form is diagonal, so the Schur
    vectors are a unitary eigenbasis. Eigenvalues are sorted by descending
    real part, then descending imaginary part; each eigenvector is rotated so
    its largest entry is real and positive.

    Raises:
        ContractError: If ``m`` is not normal.
        NumericalError: If the Schur form is not diagonal.
    """
    a = to_dense(m).astype(np.complex128)
    scale = max(1.0, float(np.max(np.abs(a))) ** 2) if a.size else 1.0
    if np.max(np.abs(a @ a.conj().T - a.conj().T @ a), initial=0.0) > tol * scale:
        raise ContractError("normal_eig requires a normal matrix (A Aᴴ = Aᴴ A)")
    t, z = scipy.linalg.schur(a, output="complex")
    w = np.diag(t)
    if np.max(np.abs(t - np.diag(w)), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(w))):
        raise NumericalError("Schur form of a normal matrix is not diagonal")
    order = np.lexsort((-w.imag, -w.real))
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=_normalize_signs(z[:, order]))


def _check_dims(x: ProductSignal, spatial_eig: EigenDecomposition, temporal_eig: EigenDecomposition) -> None:
    if x.n_spatial != spatial_eig.n or x.n_temporal != temporal_eig.n:
        raise ParameterError(
            f"signal is {x.n_spatial}×{x.n_temporal} but decompositions are "
            f"{spatial_eig.n}×{temporal_eig.n}"
        )


def gtft(
    x: ProductSignal, spatial_eig: EigenDecomposition, temporal_eig: EigenDecomposition
) -> np.ndarray:
    """Graph-time Fourier transform ``(V_T ⊗ V)ᴴ x``.

    Uses ``vec(Vᴴ X conj(V_T))`` so the Kronecker matrix is never formed.
    Coefficient (t, i) is at flat index ``t·N + i``.
    """
    _check_dims(x, spatial_eig, temporal_eig)
    v, vt = spatial_eig.eigenvectors, temporal_eig.eigenvectors
    coeffs = v.conj().T @ devectorize(x) @ vt.conj()
    return coeffs.reshape(-1, order="F")


def inverse_gtft(
    x_hat, spatial_eig: EigenDecomposition, temporal_eig: EigenDecomposition
) -> ProductSignal:
    """Inverse of :func:`gtft`: ``(V_T ⊗ V) x̂``."""
    n, t = spatial_eig.n, temporal_eig.n
    x_hat = np.asarray(x_hat)
    if x_hat.size != n * t:
        raise ParameterError(f"spectrum length {x_hat.size} != N·T = {n * t}")
    v, vt = spatial_eig.eigenvectors, temporal_eig.eigenvectors
    values = (v @ x_hat.reshape((n, t), order="F") @ vt.T).reshape(-1, order="F")
    if not (spatial_eig.is_complex or temporal_eig.is_complex or np.iscomplexobj(x_hat)):
        values = values.real
    return ProductSignal(values, n_spatial=n, n_temporal=t)


def frequency_response(h: JointFilterCoeffs, lambda_T, lambda_):
    """``h(λ_T, λ) = Σ_k Σ_l h_kl λ_T^l λ^k``; broadcasts over array inputs."""
    return P.polyval2d(lambda_, lambda_T, h.h)


def response_diagonal(
    h: JointFilterCoeffs, spatial_eig: EigenDecomposition, temporal_eig: EigenDecomposition
) -> np.ndarray:
    """Diagonal of ``h(Λ_T, Λ)`` in flat (t, i) order."""
    grid = P.polygrid2d(spatial_eig.eigenvalues, temporal_eig.eigenvalues, h.h)
    return grid.reshape(-1, order="F")


def response_grid(h: JointFilterCoeffs, lambdas, lambda_Ts) -> np.ndarray:
    """Response on a tensor grid, shaped ``(len(lambda_Ts), len(lambdas))``."""
    return P.polygrid2d(np.asarray(lambdas), np.asarray(lambda_Ts), h.h).T


def spectral_range(graph: Graph) -> tuple[float, float]:
    """``(λ_min, λ_max)`` of a symmetric graph."""
    w = sym_eig(graph.gso).eigenvalues
    return float(w[-1]), float(w[0])


def temporal_frequencies(temporal: Graph) -> np.ndarray:
    """Temporal frequencies at which responses are evaluated.

    Symmetric temporal graphs give their eigenvalues. Any other temporal GSO
    (the directed line graph is nilpotent and not diagonalizable) is covered
    by ``2T+1`` equispaced points on ``[-‖S_T‖₂, ‖S_T‖₂]``.
    """
    if is_symmetric(temporal.gso):
        return sym_eig(temporal.gso).eigenvalues
    radius = float(np.linalg.norm(to_dense(temporal.gso), 2))
    return np.linspace(-radius, radius, 2 * temporal.n + 1)


def _checked_grid(lambda_range, lambda_T_set, grid: int) -> tuple[np.ndarray, np.ndarray]:
    if grid < 2:
        raise ParameterError(f"grid must have at least 2 points, got {grid}")
    lambda_Ts = np.asarray(lambda_T_set, dtype=np.float64).ravel()
    if lambda_Ts.size == 0:
        raise ParameterError("the set of temporal frequencies is empty")
    lo, hi = (float(v) for v in lambda_range)
    if lo > hi:
        raise ParameterError(f"empty spectral interval [{lo}, {hi}]")
    return np.linspace(lo, hi, grid), lambda_Ts


def lipschitz_constant(
    h: JointFilterCoeffs,
    lambda_range: tuple[float, float],
    lambda_T_set,
    grid: int = DEFAULT_GRID,
    refine: bool = True,
) -> float:
    """Estimate the integral-Lipschitz constant ``sup |λ ∂h(λ_T, λ)/∂λ|``.

    The analytic partial derivative is evaluated on ``grid`` equispaced
    points of ``lambda_range`` for every ``λ_T`` in ``lambda_T_set``. The grid
    maximum alone is a lower bound on the supremum. With ``refine`` the
    stationary points of ``λ ∂h/∂λ`` inside the interval are evaluated as
    well, which makes the estimate the exact supremum over the interval.

    Raises:
        ParameterError: If ``grid < 2`` or ``lambda_T_set`` is empty.
    """
    lambdas, lambda_Ts = _checked_grid(lambda_range, lambda_T_set, grid)
    # a[k, j] = Σ_l h_kl λ_T[j]^l, so h(λ_T[j], λ) = Σ_k a[k, j] λ^k.
    a = P.polyval(lambda_Ts, h.h.T)
    # λ ∂h/∂λ has coefficients k·a_k on λ^k.
    g = np.arange(a.shape[0])[:, None] * a
    best = float(np.max(np.abs(P.polyval(lambdas, g))))
    if refine:
        lo, hi = lambdas[0], lambdas[-1]
        for j in range(g.shape[1]):
            slope = P.polytrim(P.polyder(g[:, j]))
            if slope.size < 2:
                continue
            roots = P.polyroots(slope)
            real = roots[np.abs(roots.imag) <= 1e-9 * max(1.0, np.max(np.abs(roots)))].real
            inside = real[(real >= lo) & (real <= hi)]
            if inside.size:
                best = max(best, float(np.max(np.abs(P.polyval(inside, g[:, j])))))
    return best


def normalize_response(
    h: JointFilterCoeffs,
    lambda_range: tuple[float, float],
    lambda_T_set,
    grid: int = DEFAULT_GRID,
) -> JointFilterCoeffs:
    """Scale ``h`` so its largest grid response magnitude is one.

    Raises:
        DegenerateError: If the filter response vanishes on the whole grid.
    """
    lambdas, lambda_Ts = _checked_grid(lambda_range, lambda_T_set, grid)
    peak = float(np.max(np.abs(P.polygrid2d(lambdas, lambda_Ts, h.h))))
    if not peak > 0.0:
        raise DegenerateError("cannot normalize a filter whose response is identically zero")
    return JointFilterCoeffs(h.h / peak)
