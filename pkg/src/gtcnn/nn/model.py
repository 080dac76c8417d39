"""GTCNN model: filter-bank layers, ReLU and a readout, with manual gradients.

Activations are laid out as ``(NT, B, F)`` arrays: product-graph node first,
then the batch, then features. Public entry points accept inputs of shape
``(NT, F_0)`` for one sample or ``(B, NT, F_0)`` for a batch.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from gtcnn.errors import ContractError, NumericalError, ParameterError
from gtcnn.filters import (
    MAX_EXPANSION_ORDER,
    expand_mono_bank,
    expand_mono_bank_grad,
    joint_bank_backward,
    joint_bank_forward,
    spatial_powers,
)
from gtcnn.graphs import line_graph
from gtcnn.models import FilterBank, Graph, ProductKind, ProductSpec

logger = logging.getLogger(__name__)


class Architecture(Enum):
    """Network family."""

    GTCNN = "gtcnn"
    GCNN = "gcnn"


class ProductMode(Enum):
    """How a layer's graph-time filters are parameterized.

    JOINT learns the full grid ``h_kl``. PRODUCT learns a polynomial of order K
    in a product-graph GSO, which is learnable when the product is parametric.
    """

    JOINT = "joint"
    PRODUCT = "product"


class Activation(Enum):
    RELU = "relu"
    NONE = "none"


class Readout(Enum):
    """CLASSIFICATION: temporal mean, per-node linear map, node mean.
    COMMUNITY: temporal mean, per-node linear map to one logit, mean of the
    node logits within each community.
    REGRESSION: per-node linear map of the last time slice."""

    CLASSIFICATION = "classification"
    COMMUNITY = "community"
    REGRESSION = "regression"


def _enum(kind, value, what: str):
    try:
        return kind(value) if not isinstance(value, kind) else value
    except ValueError as exc:
        choices = ", ".join(m.value for m in kind)
        raise ParameterError(f"unknown {what} {value!r} (expected one of: {choices})") from exc


@dataclass(frozen=True, eq=False)
class GTCNNConfig:
    """Shape and behaviour of a GTCNN.

    ``orders[ℓ]`` is ``(K̄, K̃)`` for layer ℓ. In PRODUCT mode only ``K̄`` is
    used, as the order K of the polynomial in the product GSO.

    ``communities`` assigns every spatial node to one of the ``outputs``
    classes; only the COMMUNITY readout uses it.
    """

    features: tuple[int, ...] = (1, 8, 8)
    orders: tuple[tuple[int, int], ...] = ((2, 2), (2, 2))
    outputs: int = 2
    architecture: Architecture = Architecture.GTCNN
    product_mode: ProductMode = ProductMode.JOINT
    product: ProductSpec = field(default_factory=ProductSpec.cartesian)
    activation: Activation = Activation.RELU
    relu_last: bool = True
    readout: Readout = Readout.CLASSIFICATION
    l1_weight: float = 0.0
    communities: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        features = tuple(int(f) for f in self.features)
        orders = tuple((int(k), int(l)) for k, l in self.orders)
        communities = tuple(int(c) for c in self.communities)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "communities", communities)
        for name, kind in (
            ("architecture", Architecture),
            ("product_mode", ProductMode),
            ("activation", Activation),
            ("readout", Readout),
        ):
            object.__setattr__(self, name, _enum(kind, getattr(self, name), name))
        if len(features) < 2 or any(f < 1 for f in features):
            raise ParameterError("need at least one layer and positive feature counts")
        if len(orders) != len(features) - 1:
            raise ParameterError(f"{len(features) - 1} layers but {len(orders)} order pairs")
        if any(k < 0 or l < 0 for k, l in orders):
            raise ParameterError("filter orders must be non-negative")
        if self.outputs < 1:
            raise ParameterError("readout needs at least one output")
        if self.l1_weight < 0:
            raise ParameterError("l1 weight must be non-negative")
        if self.readout is Readout.COMMUNITY:
            if set(communities) != set(range(self.outputs)):
                raise ParameterError(f"community readout needs every class 0..{self.outputs - 1} to own a node")
        elif communities:
            raise ParameterError("communities are only used by the community readout")
        if self.architecture is Architecture.GCNN:
            if self.product_mode is not ProductMode.JOINT:
                raise ParameterError("the GCNN baseline has no product graph")
            if any(l != 0 for _, l in orders):
                raise ParameterError("the GCNN baseline has no temporal filter taps")
        if self.product_mode is ProductMode.PRODUCT and any(
            k > MAX_EXPANSION_ORDER for k, _ in orders
        ):
            raise ParameterError(f"product-mode order above {MAX_EXPANSION_ORDER}")

    @property
    def n_layers(self) -> int:
        return len(self.orders)

    @property
    def classifies(self) -> bool:
        return self.readout is not Readout.REGRESSION

    @property
    def learns_product(self) -> bool:
        return self.product_mode is ProductMode.PRODUCT and self.product.kind is ProductKind.PARAMETRIC

    def to_dict(self) -> dict[str, Any]:
        return {
            "architecture": self.architecture.value,
            "features": list(self.features),
            "orders": [list(o) for o in self.orders],
            "outputs": self.outputs,
            "product_mode": self.product_mode.value,
            "product": self.product.to_dict(),
            "activation": self.activation.value,
            "relu_last": self.relu_last,
            "readout": self.readout.value,
            "l1_weight": self.l1_weight,
            "communities": list(self.communities),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GTCNNConfig":
        defaults = cls()
        product = data.get("product")
        return cls(
            features=tuple(data.get("features", defaults.features)),
            orders=tuple(tuple(o) for o in data.get("orders", defaults.orders)),
            outputs=int(data.get("outputs", defaults.outputs)),
            architecture=data.get("architecture", defaults.architecture),
            product_mode=data.get("product_mode", defaults.product_mode),
            product=ProductSpec.from_dict(product) if product is not None else defaults.product,
            activation=data.get("activation", defaults.activation),
            relu_last=bool(data.get("relu_last", defaults.relu_last)),
            readout=data.get("readout", defaults.readout),
            l1_weight=float(data.get("l1_weight", defaults.l1_weight)),
            communities=tuple(data.get("communities", ())),
        )


def _taps_key(layer: int) -> str:
    return f"layer{layer}.taps"


def _mono_key(layer: int) -> str:
    return f"layer{layer}.mono"


PRODUCT_KEY = "product.s"
WEIGHT_KEY = "readout.weight"
BIAS_KEY = "readout.bias"


@dataclass(eq=False)
class GTCNNModel:
    """Parameters of a GTCNN.

    ``revision`` increases on every parameter update; caches from an older
    revision are rejected by :func:`backward`.
    """

    config: GTCNNConfig
    params: dict[str, np.ndarray]
    revision: int = 0

    def __post_init__(self) -> None:
        expected = parameter_shapes(self.config)
        if set(expected) != set(self.params):
            raise ParameterError(
                f"parameters {sorted(self.params)} do not match the config {sorted(expected)}"
            )
        for name, shape in expected.items():
            value = np.asarray(self.params[name], dtype=np.float64)
            if value.shape != shape:
                raise ParameterError(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise ParameterError(f"{name} has non-finite entries")
            self.params[name] = value

    def touch(self) -> None:
        self.revision += 1

    def update(self, name: str, value) -> None:
        """Replace one parameter and invalidate outstanding caches."""
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.params[name].shape:
            raise ParameterError(f"{name} has shape {self.params[name].shape}, got {value.shape}")
        self.params[name] = value
        self.touch()

    def copy(self) -> "GTCNNModel":
        return GTCNNModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def product_scalars(self) -> np.ndarray | None:
        """The 2×2 product scalars used by PRODUCT-mode layers, else None."""
        if self.config.product_mode is not ProductMode.PRODUCT:
            return None
        if self.config.learns_product:
            return self.params[PRODUCT_KEY]
        return self.config.product.scalars()

    def layer_taps(self, layer: int) -> np.ndarray:
        """Joint taps ``(K̄+1, K̃+1, F_in, F_out)`` of a layer."""
        if self.config.product_mode is ProductMode.PRODUCT:
            return expand_mono_bank(self.product_scalars(), self.params[_mono_key(layer)])
        return self.params[_taps_key(layer)]

    def banks(self) -> list[FilterBank]:
        return [FilterBank(self.layer_taps(layer)) for layer in range(self.config.n_layers)]

    def scaled_layers(self, factors) -> "GTCNNModel":
        """Copy with every filter of layer ℓ multiplied by ``factors[ℓ]``."""
        scaled = self.copy()
        key = _mono_key if self.config.product_mode is ProductMode.PRODUCT else _taps_key
        for layer, factor in enumerate(factors):
            scaled.params[key(layer)] = scaled.params[key(layer)] * float(factor)
        return scaled


def parameter_shapes(config: GTCNNConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for layer, (k_bar, k_tilde) in enumerate(config.orders):
        f_in, f_out = config.features[layer], config.features[layer + 1]
        if config.product_mode is ProductMode.PRODUCT:
            shapes[_mono_key(layer)] = (k_bar + 1, f_in, f_out)
        else:
            shapes[_taps_key(layer)] = (k_bar + 1, k_tilde + 1, f_in, f_out)
    if config.learns_product:
        shapes[PRODUCT_KEY] = (2, 2)
    logits = 1 if config.readout is Readout.COMMUNITY else config.outputs
    shapes[WEIGHT_KEY] = (config.features[-1], logits)
    shapes[BIAS_KEY] = (logits,)
    return shapes


def init_model(config: GTCNNConfig, seed: int | np.random.Generator | None = None) -> GTCNNModel:
    """Random initialization.

    Filter taps are uniform on ``±1/√(F_in·taps)`` where ``taps`` is the number
    of coefficients per scalar filter. Learnable product scalars start at the
    configured pattern plus uniform ``±0.01`` noise.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(config).items():
        if name == PRODUCT_KEY:
            params[name] = config.product.s + rng.uniform(-0.01, 0.01, size=shape)
        elif name == BIAS_KEY:
            params[name] = np.zeros(shape)
        elif name == WEIGHT_KEY:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            f_in = shape[-2]
            bound = 1.0 / np.sqrt(f_in * int(np.prod(shape[:-2])))
            params[name] = rng.uniform(-bound, bound, size=shape)
    return GTCNNModel(config, params)


def zero_model(config: GTCNNConfig) -> GTCNNModel:
    """All-zero parameters (product scalars keep the configured pattern)."""
    params = {name: np.zeros(shape) for name, shape in parameter_shapes(config).items()}
    if config.learns_product:
        params[PRODUCT_KEY] = config.product.s.copy()
    return GTCNNModel(config, params)


@dataclass
class LayerCache:
    taps: np.ndarray
    powers: list[np.ndarray]
    pre: np.ndarray
    activated: bool


@dataclass
class ForwardCache:
    """Everything :func:`backward` needs from a forward pass."""

    revision: int
    spatial: Graph
    temporal: Graph
    layers: list[LayerCache]
    features: np.ndarray
    single: bool


def _as_batch(model: GTCNNModel, n_nodes: int, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    f0 = model.config.features[0]
    if x.ndim != 3 or x.shape[1] != n_nodes or x.shape[2] != f0:
        raise ParameterError(f"expected input of shape ([B,] {n_nodes}, {f0}), got {x.shape}")
    return x.transpose(1, 0, 2), single


def _layer_activated(config: GTCNNConfig, layer: int) -> bool:
    if config.activation is Activation.NONE:
        return False
    return config.relu_last or layer < config.n_layers - 1


def _run_layers(
    model: GTCNNModel, spatial: Graph, temporal: Graph, x: np.ndarray
) -> tuple[np.ndarray, list[LayerCache]]:
    n, t = spatial.n, temporal.n
    h = x
    caches = []
    for layer in range(model.config.n_layers):
        taps = model.layer_taps(layer)
        powers = spatial_powers(spatial.gso, h, taps.shape[0] - 1, n, t)
        pre = joint_bank_forward(spatial.gso, temporal.gso, taps, h, n, t, powers=powers)
        if not np.all(np.isfinite(pre)):
            raise NumericalError("non-finite activation", layer=layer)
        activated = _layer_activated(model.config, layer)
        caches.append(LayerCache(taps=taps, powers=powers, pre=pre, activated=activated))
        h = np.maximum(pre, 0.0) if activated else pre
    return h, caches


def _membership(config: GTCNNConfig, n: int) -> np.ndarray:
    """``(N, C)`` averaging weights: ``1/|c|`` where node ``i`` is in community ``c``."""
    if len(config.communities) != n:
        raise ParameterError(f"community readout knows {len(config.communities)} nodes, graph has {n}")
    onehot = np.eye(config.outputs)[list(config.communities)]
    return onehot / onehot.sum(axis=0)


def _readout(model: GTCNNModel, features: np.ndarray, n: int, t: int) -> np.ndarray:
    w, b = model.params[WEIGHT_KEY], model.params[BIAS_KEY]
    per_time = features.reshape(t, n, features.shape[1], features.shape[2])
    if model.config.readout is Readout.CLASSIFICATION:
        node_logits = per_time.mean(axis=0) @ w + b
        return node_logits.mean(axis=0)
    if model.config.readout is Readout.COMMUNITY:
        node_logits = (per_time.mean(axis=0) @ w + b)[..., 0]
        return node_logits.T @ _membership(model.config, n)
    return (per_time[-1] @ w + b).transpose(1, 0, 2)


def forward(
    model: GTCNNModel, spatial: Graph, temporal: Graph, x
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network.

    Args:
        model: Parameters.
        spatial: Spatial graph with N nodes.
        temporal: Temporal graph with T nodes.
        x: Input of shape ``(NT, F_0)`` or ``(B, NT, F_0)``.

    Returns:
        Class scores ``(B, C)`` for the classification readouts or predictions
        ``(B, N, C)`` for regression (the batch axis is dropped for a single
        input), and the cache for :func:`backward`.

    Raises:
        ParameterError: If the input shape does not match the model.
        NumericalError: If an activation is non-finite; carries the layer index.
    """
    n, t = spatial.n, temporal.n
    xb, single = _as_batch(model, n * t, x)
    features, caches = _run_layers(model, spatial, temporal, xb)
    out = _readout(model, features, n, t)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite readout", layer=model.config.n_layers)
    cache = ForwardCache(
        revision=model.revision,
        spatial=spatial,
        temporal=temporal,
        layers=caches,
        features=features,
        single=single,
    )
    return (out[0] if single else out), cache


def embed(model: GTCNNModel, spatial: Graph, temporal: Graph, x) -> np.ndarray:
    """Final-layer features before the readout, shaped ``(NT, F_L)`` or ``(B, NT, F_L)``."""
    xb, single = _as_batch(model, spatial.n * temporal.n, x)
    features, _ = _run_layers(model, spatial, temporal, xb)
    features = features.transpose(1, 0, 2)
    return features[0] if single else features


def backward(model: GTCNNModel, cache: ForwardCache, grad_out) -> dict[str, np.ndarray]:
    """Gradients of ``<grad_out, forward(...)>`` for every parameter.

    The ReLU subgradient at zero is zero. Product scalars receive gradient
    through the expansion of the monolithic filters into joint taps.

    Raises:
        ContractError: If the parameters changed since the forward pass.
    """
    if cache.revision != model.revision:
        raise ContractError(
            f"forward cache is from revision {cache.revision}, model is at {model.revision}"
        )
    config = model.config
    n, t = cache.spatial.n, cache.temporal.n
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if cache.single:
        grad_out = grad_out[None]
    w = model.params[WEIGHT_KEY]
    features = cache.features
    batch, f_last = features.shape[1], features.shape[2]
    per_time = features.reshape(t, n, batch, f_last)
    grads: dict[str, np.ndarray] = {}

    if config.readout is Readout.CLASSIFICATION:
        pooled = per_time.mean(axis=0)
        d_nodes = np.broadcast_to(grad_out[None] / n, (n,) + grad_out.shape)
        grads[WEIGHT_KEY] = np.tensordot(pooled, d_nodes, axes=([0, 1], [0, 1]))
        grads[BIAS_KEY] = d_nodes.sum(axis=(0, 1))
        d_pooled = d_nodes @ w.T
        d_features = np.broadcast_to(d_pooled[None] / t, per_time.shape)
    elif config.readout is Readout.COMMUNITY:
        pooled = per_time.mean(axis=0)
        d_nodes = (_membership(config, n) @ grad_out.T)[..., None]
        grads[WEIGHT_KEY] = np.tensordot(pooled, d_nodes, axes=([0, 1], [0, 1]))
        grads[BIAS_KEY] = d_nodes.sum(axis=(0, 1))
        d_features = np.broadcast_to((d_nodes @ w.T)[None] / t, per_time.shape)
    else:
        d_pred = grad_out.transpose(1, 0, 2)
        grads[WEIGHT_KEY] = np.tensordot(per_time[-1], d_pred, axes=([0, 1], [0, 1]))
        grads[BIAS_KEY] = d_pred.sum(axis=(0, 1))
        d_features = np.zeros(per_time.shape)
        d_features[-1] = d_pred @ w.T
    d_h = np.ascontiguousarray(d_features).reshape(features.shape)

    scalars = model.product_scalars()
    d_s = np.zeros((2, 2))
    for layer in range(config.n_layers - 1, -1, -1):
        lc = cache.layers[layer]
        d_pre = d_h * (lc.pre > 0.0) if lc.activated else d_h
        d_taps, d_h = joint_bank_backward(
            cache.spatial.gso, cache.temporal.gso, lc.taps, lc.powers, d_pre, n, t
        )
        if config.product_mode is ProductMode.PRODUCT:
            d_mono, d_s_layer = expand_mono_bank_grad(scalars, model.params[_mono_key(layer)], d_taps)
            grads[_mono_key(layer)] = d_mono
            d_s += d_s_layer
        else:
            grads[_taps_key(layer)] = d_taps
    if config.learns_product:
        grads[PRODUCT_KEY] = d_s
    return grads


def gcnn_inputs(x, n: int, t: int) -> np.ndarray:
    """Fold time into features: ``(B, NT, F_0)`` to ``(B, N, T·F_0)``.

    Feature ``τ·F_0 + f`` of node ``i`` is input feature ``f`` at time ``τ``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    batch, _, f0 = x.shape
    folded = x.reshape(batch, t, n, f0).transpose(0, 2, 1, 3).reshape(batch, n, t * f0)
    return folded[0] if single else folded


def gcnn_baseline_forward(model: GTCNNModel, spatial: Graph, x) -> tuple[np.ndarray, ForwardCache]:
    """Graph convolution ``Σ_k S^k X H_k`` with time steps as node features.

    ``x`` is ``(N, F)`` or ``(B, N, F)``; build it with :func:`gcnn_inputs`.
    """
    if model.config.architecture is not Architecture.GCNN:
        raise ParameterError("gcnn_baseline_forward needs a GCNN model")
    return forward(model, spatial, line_graph(1), x)


def network_inputs(model: GTCNNModel, spatial: Graph, temporal: Graph, x) -> tuple[Graph, np.ndarray]:
    """Temporal graph and inputs the architecture actually runs on.

    GTCNNs use the data as is; the GCNN baseline folds time into features
    and runs on the trivial one-node temporal graph.
    """
    if model.config.architecture is Architecture.GCNN:
        return line_graph(1), gcnn_inputs(x, spatial.n, temporal.n)
    return temporal, np.asarray(x, dtype=np.float64)


def predict(model: GTCNNModel, spatial: Graph, temporal: Graph, x) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass on product-graph inputs for either architecture."""
    run_temporal, run_x = network_inputs(model, spatial, temporal, x)
    return forward(model, spatial, run_temporal, run_x)
