"""Relative perturbations of the spatial graph and the GTCNN stability bound.

A perturbed graph is ``Ŝ = S + ES + SE`` for a symmetric error matrix E with
operator norm ε. For filters with normalized responses and integral
Lipschitz constant C, an L-layer GTCNN with F features per layer satisfies,
to first order in ε::

    ‖Φ(x; S) − Φ(x; Ŝ)‖ ≤ L·F^{L−1}·2C(1 + δT√N)·ε·‖x‖

where δ measures the misalignment of the eigenvectors of S and E.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from gtcnn.errors import ContractError, DegenerateError, ParameterError
from gtcnn.filters import dense_joint_filter, joint_bank_forward
from gtcnn.linalg import clean, is_symmetric, to_dense
from gtcnn.models import ErrorMatrix, Graph, JointFilterCoeffs, PerturbationReport
from gtcnn.nn.model import Activation, GTCNNModel, embed, network_inputs
from gtcnn.spectral import (
    DEFAULT_GRID,
    lipschitz_constant,
    normalize_response,
    response_grid,
    spectral_range,
    sym_eig,
    temporal_frequencies,
)

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 200
# Largest product graph for which dense operator norms are computed.
DENSE_LIMIT = 64


def error_matrix(matrix) -> ErrorMatrix:
    """Wrap a symmetric matrix, computing its operator and Frobenius norms."""
    matrix = 0.5 * (to_dense(matrix) + to_dense(matrix).T)
    eig = sym_eig(matrix)
    op = float(np.max(np.abs(eig.eigenvalues))) if eig.n else 0.0
    return ErrorMatrix(matrix=matrix, operator_norm=op, frobenius_norm=float(np.linalg.norm(matrix)))


def _random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    draws = rng.standard_normal((n, n))
    upper = np.triu(draws)
    return upper + np.triu(draws, k=1).T


def _require_spatial(spatial: Graph) -> float:
    if not (spatial.symmetric or is_symmetric(spatial.gso)):
        raise ContractError("relative perturbations need a symmetric spatial graph")
    norm = float(np.linalg.norm(spatial.gso.data))
    if norm == 0.0:
        raise DegenerateError("the spatial graph has no edges")
    return norm


def error_snr_db(spatial: Graph, e: ErrorMatrix) -> float:
    """``10·log₁₀(‖S‖²_F / (2‖E‖²_F))``; infinite for E = 0."""
    s_norm = float(np.linalg.norm(spatial.gso.data))
    if e.frobenius_norm == 0.0:
        return float("inf")
    return 10.0 * np.log10(s_norm**2 / (2.0 * e.frobenius_norm**2))


def sample_error_at_snr(
    spatial: Graph, snr_db: float, seed: int | np.random.Generator | None = None
) -> ErrorMatrix:
    """Random symmetric Gaussian error scaled to a given SNR.

    The noise energy counts twice because E enters ``Ŝ`` through both ES and SE.

    Raises:
        ContractError: If the spatial graph is not symmetric.
        DegenerateError: If the spatial graph is all zero.
    """
    s_norm = _require_spatial(spatial)
    rng = np.random.default_rng(seed)
    e = _random_symmetric(spatial.n, rng)
    target = s_norm / np.sqrt(2.0 * 10.0 ** (snr_db / 10.0))
    return error_matrix(e * (target / np.linalg.norm(e)))


def scale_error(e: ErrorMatrix, epsilon: float) -> ErrorMatrix:
    """The same direction ``E/‖E‖`` rescaled to operator norm ``epsilon``."""
    if epsilon < 0:
        raise ParameterError(f"epsilon must be non-negative, got {epsilon}")
    if e.operator_norm == 0.0:
        raise DegenerateError("cannot rescale a zero error matrix")
    return error_matrix(e.matrix * (epsilon / e.operator_norm))


def sample_error_at_epsilon(
    spatial: Graph, epsilon: float, seed: int | np.random.Generator | None = None
) -> ErrorMatrix:
    """Random symmetric Gaussian error with operator norm ``epsilon``."""
    _require_spatial(spatial)
    rng = np.random.default_rng(seed)
    return scale_error(error_matrix(_random_symmetric(spatial.n, rng)), epsilon)


def relative_perturb(spatial: Graph, e: ErrorMatrix) -> Graph:
    """``Ŝ = S + ES + SE``, symmetrized and cleaned.

    Raises:
        ParameterError: If the sizes differ.
    """
    if e.n != spatial.n:
        raise ParameterError(f"error matrix is {e.n}×{e.n}, graph has {spatial.n} nodes")
    s = spatial.dense()
    perturbed = s + e.matrix @ s + s @ e.matrix
    perturbed = 0.5 * (perturbed + perturbed.T)
    return Graph(clean(perturbed), kind=spatial.kind, symmetric=spatial.symmetric)


def eigenvector_misalignment(u, v, squared: bool = True) -> float:
    """``(‖U−V‖₂² + 1)² − 1``, or ``(‖U−V‖₂ + 1)² − 1`` with ``squared=False``."""
    d = float(np.linalg.norm(np.asarray(u) - np.asarray(v), 2))
    base = d * d if squared else d
    return (base + 1.0) ** 2 - 1.0


def misalignment_delta(spatial: Graph, e: ErrorMatrix, squared: bool = True) -> float:
    """δ between the eigenvectors of S and of E.

    Both are decomposed with descending eigenvalues and the largest-entry
    positive sign convention, which fixes the pairing of U and V.
    """
    v = sym_eig(spatial.gso).eigenvectors
    u = sym_eig(e.matrix).eigenvectors
    return eigenvector_misalignment(u, v, squared)


def stability_bound(
    C_est: float,
    delta: float,
    eps: float,
    L: int,
    F: int,
    N: int,
    T: int,
    x_norm: float,
) -> float:
    """``L·F^{L−1}·2C(1 + δT√N)·ε·‖x‖``."""
    if min(C_est, delta, eps, L, F, N, T, x_norm) < 0:
        raise ParameterError("stability bound arguments must be non-negative")
    return L * F ** (L - 1) * (2.0 * C_est * (1.0 + delta * T * np.sqrt(N))) * eps * x_norm


def _unit_probes(size: int, trials: int, seed) -> np.ndarray:
    if trials < 1:
        raise ParameterError(f"need at least one probe, got {trials}")
    probes = np.random.default_rng(seed).standard_normal((size, trials))
    return probes / np.linalg.norm(probes, axis=0, keepdims=True)


def empirical_filter_distance(
    spatial: Graph,
    perturbed: Graph,
    temporal: Graph,
    h: JointFilterCoeffs,
    trials: int = DEFAULT_TRIALS,
    seed: int | np.random.Generator | None = None,
) -> float:
    """Largest ``‖H(S_T, Ŝ)x − H(S_T, S)x‖`` over random unit probes.

    This is a lower bound on the operator distance between the two filters.
    """
    n, t = spatial.n, temporal.n
    probes = _unit_probes(n * t, trials, seed)[:, :, None]
    taps = h.h[:, :, None, None]
    nominal = joint_bank_forward(spatial.gso, temporal.gso, taps, probes, n, t)
    shifted = joint_bank_forward(perturbed.gso, temporal.gso, taps, probes, n, t)
    return float(np.max(np.linalg.norm((shifted - nominal)[:, :, 0], axis=0)))


def exact_filter_distance(
    spatial: Graph, perturbed: Graph, temporal: Graph, h: JointFilterCoeffs
) -> float:
    """Operator norm ``‖H(S_T, Ŝ) − H(S_T, S)‖₂`` from dense matrices."""
    if spatial.n * temporal.n > DENSE_LIMIT:
        raise ParameterError(f"dense operator norm limited to N·T <= {DENSE_LIMIT}")
    diff = dense_joint_filter(perturbed, temporal, h) - dense_joint_filter(spatial, temporal, h)
    return float(np.linalg.norm(diff, 2))


def empirical_gtcnn_distance(
    model: GTCNNModel, spatial: Graph, perturbed: Graph, temporal: Graph, probes
) -> float:
    """Largest feature distance ``‖Φ(x; S) − Φ(x; Ŝ)‖`` over the probe inputs.

    Args:
        probes: Inputs of shape ``(P, NT, F_0)``.

    Raises:
        ContractError: If the model does not use ReLU.
    """
    if model.config.activation is not Activation.RELU:
        raise ContractError("the stability bound assumes ReLU activations")
    run_temporal, x = network_inputs(model, spatial, temporal, probes)
    nominal = embed(model, spatial, run_temporal, x)
    shifted = embed(model, perturbed, run_temporal, x)
    diffs = (shifted - nominal).reshape(shifted.shape[0], -1)
    return float(np.max(np.linalg.norm(diffs, axis=1)))


def relative_nmse(reference, other) -> float:
    """``Σ‖a − b‖² / Σ‖a‖²``.

    Raises:
        DegenerateError: If the reference is all zero.
    """
    reference = np.asarray(reference, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    energy = float(np.sum(reference**2))
    if energy == 0.0:
        raise DegenerateError("relative NMSE of an all-zero reference")
    return float(np.sum((other - reference) ** 2)) / energy


def linear_fit_r2(x, y) -> float:
    """Coefficient of determination of a least-squares line through ``(x, y)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0.0:
        raise DegenerateError("a linear fit needs at least two distinct x values")
    return float(stats.linregress(x, np.asarray(y, dtype=np.float64)).rvalue ** 2)


def spectral_support(spatial: Graph, temporal: Graph) -> tuple[tuple[float, float], np.ndarray]:
    """Spatial frequency interval and temporal frequencies used for responses."""
    return spectral_range(spatial), temporal_frequencies(temporal)


def model_lipschitz(
    model: GTCNNModel, spatial: Graph, temporal: Graph, grid: int = DEFAULT_GRID
) -> float:
    """Largest integral Lipschitz constant over every scalar filter of the model."""
    lambda_range, lambda_Ts = spectral_support(spatial, temporal)
    best = 0.0
    for bank in model.banks():
        for f in range(bank.f_out):
            for g in range(bank.f_in):
                c = lipschitz_constant(bank.scalar(f, g), lambda_range, lambda_Ts, grid)
                best = max(best, c)
    return best


def normalized_model(
    model: GTCNNModel, spatial: Graph, temporal: Graph, grid: int = DEFAULT_GRID
) -> tuple[GTCNNModel, np.ndarray]:
    """Rescale each layer so its largest scalar-filter response is one.

    ReLU is positively homogeneous, so the features of the rescaled model are
    those of ``model`` divided by the product of the returned peaks.

    Raises:
        DegenerateError: If every filter of some layer is zero on the grid.
    """
    lambda_range, lambda_Ts = spectral_support(spatial, temporal)
    lambdas = np.linspace(lambda_range[0], lambda_range[1], grid)
    peaks = []
    for layer, bank in enumerate(model.banks()):
        peak = 0.0
        for f in range(bank.f_out):
            for g in range(bank.f_in):
                values = response_grid(bank.scalar(f, g), lambdas, lambda_Ts)
                peak = max(peak, float(np.max(np.abs(values))))
        if peak == 0.0:
            raise DegenerateError(f"every filter of layer {layer} is zero")
        peaks.append(peak)
    peaks = np.asarray(peaks)
    return model.scaled_layers(1.0 / peaks), peaks


@dataclass(frozen=True, eq=False)
class StabilityProbe:
    """A model normalized for the bound, with its nominal features on fixed probes.

    Everything that does not depend on the error matrix is computed once by
    :meth:`prepare`, so a sweep only pays for the perturbed forward passes.
    """

    model: GTCNNModel
    temporal: Graph
    run_temporal: Graph
    inputs: np.ndarray
    nominal: np.ndarray
    c_est: float
    input_norm: float
    peaks: np.ndarray

    @classmethod
    def prepare(
        cls,
        model: GTCNNModel,
        spatial: Graph,
        temporal: Graph,
        probes,
        grid: int = DEFAULT_GRID,
    ) -> "StabilityProbe":
        """Normalize ``model`` layer by layer (see :func:`normalized_model`).

        Raises:
            ContractError: If the model does not use ReLU.
        """
        if model.config.activation is not Activation.RELU:
            raise ContractError("the stability bound assumes ReLU activations")
        probes = np.asarray(probes, dtype=np.float64)
        run_temporal, x = network_inputs(model, spatial, temporal, probes)
        normalized, peaks = normalized_model(model, spatial, run_temporal, grid)
        return cls(
            model=normalized,
            temporal=temporal,
            run_temporal=run_temporal,
            inputs=x,
            nominal=embed(normalized, spatial, run_temporal, x),
            c_est=model_lipschitz(normalized, spatial, run_temporal, grid),
            input_norm=float(np.max(np.linalg.norm(probes.reshape(probes.shape[0], -1), axis=1))),
            peaks=peaks,
        )

    def distance(self, perturbed: Graph) -> float:
        shifted = embed(self.model, perturbed, self.run_temporal, self.inputs)
        diffs = (shifted - self.nominal).reshape(shifted.shape[0], -1)
        return float(np.max(np.linalg.norm(diffs, axis=1)))

    def report(self, spatial: Graph, e: ErrorMatrix, squared: bool = True) -> PerturbationReport:
        """Bound and measured feature distance for the perturbation ``E``."""
        config = self.model.config
        n_layers, width = config.n_layers, max(config.features)
        delta = misalignment_delta(spatial, e, squared)
        bound = stability_bound(
            self.c_est,
            delta,
            e.operator_norm,
            n_layers,
            width,
            spatial.n,
            self.run_temporal.n,
            self.input_norm,
        )
        return PerturbationReport(
            epsilon=e.operator_norm,
            snr_db=error_snr_db(spatial, e),
            delta=delta,
            C_est=self.c_est,
            L=n_layers,
            F=width,
            N=spatial.n,
            T=self.run_temporal.n,
            bound=bound,
            empirical_distance=self.distance(relative_perturb(spatial, e)),
            input_norm=self.input_norm,
        )


def measure_stability(
    model: GTCNNModel,
    spatial: Graph,
    temporal: Graph,
    e: ErrorMatrix,
    probes,
    grid: int = DEFAULT_GRID,
    squared: bool = True,
) -> PerturbationReport:
    """Bound and measured feature distance of one perturbation trial.

    Both the distance and C are measured on the layer-normalized model, whose
    filters satisfy the normalized-response assumption of the bound.
    """
    return StabilityProbe.prepare(model, spatial, temporal, probes, grid).report(spatial, e, squared)


@dataclass(frozen=True)
class FilterBoundCheck:
    """Outcome of checking one filter against the bound."""

    report: PerturbationReport
    excess: float

    @property
    def violated(self) -> bool:
        return self.excess > 0.0


def verify_filter_bound(
    spatial: Graph,
    temporal: Graph,
    h: JointFilterCoeffs,
    e: ErrorMatrix,
    trials: int = DEFAULT_TRIALS,
    seed: int | np.random.Generator | None = None,
    grid: int = DEFAULT_GRID,
    squared: bool = True,
) -> FilterBoundCheck:
    """Normalize ``h``, perturb S by E and compare the filter distance to the bound.

    A violation is logged with its excess; it signals either an
    underestimated C or second-order terms in ε.
    """
    lambda_range, lambda_Ts = spectral_support(spatial, temporal)
    h = normalize_response(h, lambda_range, lambda_Ts, grid)
    c_est = lipschitz_constant(h, lambda_range, lambda_Ts, grid)
    delta = misalignment_delta(spatial, e, squared)
    perturbed = relative_perturb(spatial, e)
    distance = empirical_filter_distance(spatial, perturbed, temporal, h, trials, seed)
    bound = stability_bound(c_est, delta, e.operator_norm, 1, 1, spatial.n, temporal.n, 1.0)
    report = PerturbationReport(
        epsilon=e.operator_norm,
        snr_db=error_snr_db(spatial, e),
        delta=delta,
        C_est=c_est,
        L=1,
        F=1,
        N=spatial.n,
        T=temporal.n,
        bound=bound,
        empirical_distance=distance,
        input_norm=1.0,
    )
    excess = max(0.0, distance - bound)
    if excess > 0.0:
        logger.warning(
            "filter distance %.6g exceeds the bound %.6g by %.3g (ε=%.3g)",
            distance,
            bound,
            excess,
            e.operator_norm,
        )
    return FilterBoundCheck(report=report, excess=excess)
