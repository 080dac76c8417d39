"""Graph-time convolutional filters.

Signals on the product graph are arrays whose first axis has length N·T in
node-fastest order; any trailing axes (features, batch) are carried along.
The joint filter ``Σ_kl h_kl (S_T^l ⊗ S^k)`` is never formed. It is applied
by a table of spatial shifts ``u_k = (I_T ⊗ S)^k x`` followed by a Horner
sweep over the temporal shift ``S_T ⊗ I_N``, which costs exactly K̄ spatial
and K̃ temporal shift passes.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.signal import convolve2d

from gtcnn.errors import ParameterError
from gtcnn.models import (
    FilterBank,
    Graph,
    JointFilterCoeffs,
    MonoFilterCoeffs,
    ProductGraph,
    ProductKind,
    ProductSignal,
    ProductSpec,
)

logger = logging.getLogger(__name__)

# Largest monolithic order expanded into a joint grid.
MAX_EXPANSION_ORDER = 6


@dataclass
class ShiftCounter:
    """Counts shift passes. One pass shifts every feature column at once."""

    spatial: int = 0
    temporal: int = 0
    matvecs: int = 0

    def reset(self) -> None:
        self.spatial = self.temporal = self.matvecs = 0


def spatial_shift(gso, z: np.ndarray, n: int, t: int) -> np.ndarray:
    """``(I_T ⊗ S) z``: apply ``S`` to every time slice of ``z``."""
    blocks = z.reshape((t, n, -1)).transpose(1, 0, 2).reshape(n, -1)
    moved = np.asarray(gso @ blocks)
    return moved.reshape(n, t, -1).transpose(1, 0, 2).reshape(z.shape)


def temporal_shift(gso, z: np.ndarray, t: int) -> np.ndarray:
    """``(S_T ⊗ I_N) z``: apply ``S_T`` to every node's time series."""
    return np.asarray(gso @ z.reshape(t, -1)).reshape(z.shape)


def spatial_powers(
    gso, x: np.ndarray, k_bar: int, n: int, t: int, counter: ShiftCounter | None = None
) -> list[np.ndarray]:
    """``[x, (I⊗S)x, …, (I⊗S)^K̄ x]``."""
    powers = [x]
    for _ in range(k_bar):
        powers.append(spatial_shift(gso, powers[-1], n, t))
        if counter is not None:
            counter.spatial += 1
    return powers


def joint_bank_forward(
    spatial_gso,
    temporal_gso,
    taps: np.ndarray,
    x: np.ndarray,
    n: int,
    t: int,
    counter: ShiftCounter | None = None,
    powers: list[np.ndarray] | None = None,
) -> np.ndarray:
    """``Σ_kl (S_T^l ⊗ S^k) x @ taps[k, l]`` for ``x`` of shape ``(NT, …, F_in)``.

    ``powers`` may carry precomputed spatial shifts of ``x``.
    """
    k_bar, k_tilde = taps.shape[0] - 1, taps.shape[1] - 1
    if powers is None:
        powers = spatial_powers(spatial_gso, x, k_bar, n, t, counter)
    y = None
    for l in range(k_tilde, -1, -1):
        z = powers[0] @ taps[0, l]
        for k in range(1, k_bar + 1):
            z = z + powers[k] @ taps[k, l]
        if y is None:
            y = z
        else:
            y = temporal_shift(temporal_gso, y, t) + z
            if counter is not None:
                counter.temporal += 1
    return y


def joint_bank_backward(
    spatial_gso,
    temporal_gso,
    taps: np.ndarray,
    powers: list[np.ndarray],
    grad_out: np.ndarray,
    n: int,
    t: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`joint_bank_forward` with respect to ``taps`` and ``x``.

    Args:
        powers: The spatial shifts of the forward input.
        grad_out: Upstream gradient, same shape as the forward output.

    Returns:
        ``(d_taps, d_x)``.
    """
    k_bar, k_tilde = taps.shape[0] - 1, taps.shape[1] - 1
    spatial_t = sp.csr_array(spatial_gso.T)
    temporal_t = sp.csr_array(temporal_gso.T)
    lead = tuple(range(grad_out.ndim - 1))

    backshifts = [grad_out]
    for _ in range(k_tilde):
        backshifts.append(temporal_shift(temporal_t, backshifts[-1], t))

    d_taps = np.empty_like(taps)
    for k in range(k_bar + 1):
        for l in range(k_tilde + 1):
            d_taps[k, l] = np.tensordot(powers[k], backshifts[l], axes=(lead, lead))

    d_x = None
    for k in range(k_bar, -1, -1):
        w = backshifts[0] @ taps[k, 0].T
        for l in range(1, k_tilde + 1):
            w = w + backshifts[l] @ taps[k, l].T
        d_x = w if d_x is None else spatial_shift(spatial_t, d_x, n, t) + w
    return d_taps, d_x


def _check_signal(x: ProductSignal, n: int, t: int) -> None:
    if x.n_spatial != n or x.n_temporal != t:
        raise ParameterError(
            f"signal lives on {x.n_spatial}×{x.n_temporal} but the graphs are {n}×{t}"
        )


def apply_mono_filter(
    pg: ProductGraph,
    h: MonoFilterCoeffs,
    x: ProductSignal,
    counter: ShiftCounter | None = None,
) -> ProductSignal:
    """``Σ_k h_k S◇^k x`` by Horner's rule with exactly K sparse mat-vecs.

    Raises:
        ParameterError: If ``x`` does not live on ``pg``.
    """
    _check_signal(x, pg.n_spatial, pg.n_temporal)
    coeffs = h.h
    y = coeffs[-1] * x.values
    for hk in coeffs[-2::-1]:
        y = pg.gso @ y + hk * x.values
        if counter is not None:
            counter.matvecs += 1
    return ProductSignal(y, n_spatial=pg.n_spatial, n_temporal=pg.n_temporal)


def apply_joint_filter(
    spatial: Graph,
    temporal: Graph,
    h: JointFilterCoeffs,
    x: ProductSignal,
    counter: ShiftCounter | None = None,
) -> ProductSignal:
    """``Σ_kl h_kl (S_T^l ⊗ S^k) x`` without forming any NT×NT matrix.

    Raises:
        ParameterError: If ``x`` does not match the graph sizes.
    """
    n, t = spatial.n, temporal.n
    _check_signal(x, n, t)
    taps = h.h[:, :, None, None]
    y = joint_bank_forward(spatial.gso, temporal.gso, taps, x.values[:, None], n, t, counter)
    return ProductSignal(y[:, 0], n_spatial=n, n_temporal=t)


def apply_filter_bank(
    spatial: Graph,
    temporal: Graph,
    bank: FilterBank,
    x_in: np.ndarray,
    counter: ShiftCounter | None = None,
) -> np.ndarray:
    """Pre-activation output of a filter-bank layer.

    Args:
        spatial: Spatial graph with N nodes.
        temporal: Temporal graph with T nodes.
        bank: Taps of shape ``(K̄+1, K̃+1, F_in, F_out)``.
        x_in: Features of shape ``(NT, F_in)``, or ``(NT, B, F_in)`` for a batch.
        counter: Optional shift-pass counter.

    Returns:
        Array of shape ``(NT, F_out)`` (or ``(NT, B, F_out)``).

    Raises:
        ParameterError: If the shapes are inconsistent.
    """
    n, t = spatial.n, temporal.n
    x_in = np.asarray(x_in, dtype=np.float64)
    if x_in.ndim not in (2, 3) or x_in.shape[0] != n * t or x_in.shape[-1] != bank.f_in:
        raise ParameterError(
            f"expected input of shape ({n * t}, [B,] {bank.f_in}), got {x_in.shape}"
        )
    return joint_bank_forward(spatial.gso, temporal.gso, bank.taps, x_in, n, t, counter)


def dense_joint_filter(spatial: Graph, temporal: Graph, h: JointFilterCoeffs) -> np.ndarray:
    """Dense NT×NT matrix of the joint filter. Only for small graphs."""
    s, st = spatial.dense(), temporal.dense()
    out = np.zeros((spatial.n * temporal.n,) * 2)
    s_k = np.eye(spatial.n)
    for k in range(h.k_bar + 1):
        st_l = np.eye(temporal.n)
        for l in range(h.k_tilde + 1):
            if h.h[k, l] != 0.0:
                out += h.h[k, l] * np.kron(st_l, s_k)
            st_l = st_l @ st
        s_k = s_k @ s
    return out


def dense_mono_filter(pg: ProductGraph, h: MonoFilterCoeffs) -> np.ndarray:
    """Dense matrix ``Σ_k h_k S◇^k``. Only for small graphs."""
    s = pg.gso.toarray()
    out = np.zeros_like(s)
    power = np.eye(s.shape[0])
    for hk in h.h:
        out += hk * power
        power = power @ s
    return out


def parametric_power_table(s, order: int) -> np.ndarray:
    """Coefficients of ``(Σ_ij s_ij S_T^i ⊗ S^j)^m`` for ``m = 0..order``.

    ``table[m, k, l]`` is the weight of ``S_T^l ⊗ S^k`` in the m-th power.
    """
    p = np.asarray(s, dtype=np.float64).T
    table = np.zeros((order + 1, order + 1, order + 1))
    table[0, 0, 0] = 1.0
    for m in range(1, order + 1):
        table[m] = convolve2d(table[m - 1], p)[: order + 1, : order + 1]
    return table


def expand_mono_bank(s, mono_taps: np.ndarray) -> np.ndarray:
    """Joint taps ``(K+1, K+1, F_in, F_out)`` of a monolithic bank ``(K+1, F_in, F_out)``."""
    table = parametric_power_table(s, mono_taps.shape[0] - 1)
    return np.tensordot(table, mono_taps, axes=([0], [0]))


def expand_mono_bank_grad(
    s, mono_taps: np.ndarray, d_joint: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Pull a gradient on the joint taps back to the monolithic taps and to ``s``.

    Uses ``∂P_m[k, l]/∂s_ij = m · P_{m-1}[k-j, l-i]``.
    """
    order = mono_taps.shape[0] - 1
    table = parametric_power_table(s, order)
    d_mono = np.tensordot(table, d_joint, axes=([1, 2], [0, 1]))
    # weights[k, l, m] = Σ_fg mono[m, g, f] · d_joint[k, l, g, f]
    weights = np.tensordot(d_joint, mono_taps, axes=([2, 3], [1, 2]))
    d_s = np.zeros((2, 2))
    for m in range(1, order + 1):
        prev = table[m - 1]
        for i in range(2):
            for j in range(2):
                d_s[i, j] += m * np.sum(prev[: order + 1 - j, : order + 1 - i] * weights[j:, i:, m])
    return d_mono, d_s


def expand_parametric(spec: ProductSpec, h: MonoFilterCoeffs) -> JointFilterCoeffs:
    """Rewrite a monolithic filter on a parametric product as a joint filter.

    Raises:
        ParameterError: If ``spec`` is not parametric or the order exceeds
            :data:`MAX_EXPANSION_ORDER`.
    """
    if spec.kind is not ProductKind.PARAMETRIC:
        raise ParameterError(f"expand_parametric needs a parametric product, got {spec.kind.value}")
    if h.order > MAX_EXPANSION_ORDER:
        raise ParameterError(f"filter order {h.order} exceeds {MAX_EXPANSION_ORDER}")
    grid = expand_mono_bank(spec.s, h.h[:, None, None])
    return JointFilterCoeffs(grid[:, :, 0, 0])
