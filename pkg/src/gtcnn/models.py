"""Data models for gtcnn."""

from dataclasses import dataclass, fields
from enum import Enum
from typing import Any

import numpy as np

from gtcnn.errors import ContractError, ParameterError
from gtcnn.linalg import SparseMatrix, clean, is_square, is_symmetric, to_dense


class GraphKind(Enum):
    """Role of a graph in a product."""

    SPATIAL = "spatial"
    TEMPORAL = "temporal"


@dataclass(frozen=True, eq=False)
class Graph:
    """A graph represented by its shift operator."""

    gso: SparseMatrix
    kind: GraphKind = GraphKind.SPATIAL
    symmetric: bool = False

    def __post_init__(self) -> None:
        if not is_square(self.gso):
            raise ParameterError(f"GSO must be square, got shape {self.gso.shape}")
        object.__setattr__(self, "gso", clean(self.gso))
        if self.symmetric and not is_symmetric(self.gso):
            raise ContractError("graph flagged symmetric but its GSO is not")

    @property
    def n(self) -> int:
        return self.gso.shape[0]

    @property
    def nnz(self) -> int:
        return self.gso.nnz

    def dense(self) -> np.ndarray:
        return to_dense(self.gso)


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on ``{0..n-1}``.

    ``mapping[i]`` is the old index of the node that lands at position ``i``,
    so permuting a signal is ``x[mapping]`` (that is ``Pᵀx``) and permuting a
    graph is ``S[mapping][:, mapping]`` (``PᵀSP``).
    """

    mapping: np.ndarray

    def __post_init__(self) -> None:
        mapping = np.asarray(self.mapping, dtype=np.int64)
        if mapping.ndim != 1 or not np.array_equal(np.sort(mapping), np.arange(mapping.size)):
            raise ParameterError("permutation mapping is not a bijection")
        object.__setattr__(self, "mapping", mapping)

    @property
    def n(self) -> int:
        return self.mapping.size

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, seed: int | np.random.Generator | None = None) -> "Permutation":
        return cls(np.random.default_rng(seed).permutation(n))

    @classmethod
    def swap(cls, n: int, i: int, j: int) -> "Permutation":
        mapping = np.arange(n)
        mapping[[i, j]] = mapping[[j, i]]
        return cls(mapping)

    def inverse(self) -> "Permutation":
        return Permutation(np.argsort(self.mapping))

    def matrix(self) -> np.ndarray:
        """Dense permutation matrix P with ``P[mapping[i], i] = 1``."""
        p = np.zeros((self.n, self.n))
        p[self.mapping, np.arange(self.n)] = 1.0
        return p


class ProductKind(Enum):
    """Type of product graph."""

    KRONECKER = "kronecker"
    CARTESIAN = "cartesian"
    STRONG = "strong"
    PARAMETRIC = "parametric"


# s[i][j] weighs S_T^i ⊗ S^j (i temporal power, j spatial power).
PRODUCT_PATTERNS: dict[ProductKind, tuple[tuple[float, float], tuple[float, float]]] = {
    ProductKind.KRONECKER: ((0.0, 0.0), (0.0, 1.0)),
    ProductKind.CARTESIAN: ((0.0, 1.0), (1.0, 0.0)),
    ProductKind.STRONG: ((0.0, 1.0), (1.0, 1.0)),
}


@dataclass(frozen=True, eq=False)
class ProductSpec:
    """Which product couples the spatial and the temporal graph."""

    kind: ProductKind
    s: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind is ProductKind.PARAMETRIC:
            if self.s is None:
                raise ParameterError("parametric product needs the 2×2 scalars s")
            s = np.asarray(self.s, dtype=np.float64)
            if s.shape != (2, 2) or not np.all(np.isfinite(s)):
                raise ParameterError("parametric scalars must be a finite 2×2 grid")
            object.__setattr__(self, "s", s)
        elif self.s is not None:
            raise ParameterError(f"{self.kind.value} product takes no scalars")

    @classmethod
    def kronecker(cls) -> "ProductSpec":
        return cls(ProductKind.KRONECKER)

    @classmethod
    def cartesian(cls) -> "ProductSpec":
        return cls(ProductKind.CARTESIAN)

    @classmethod
    def strong(cls) -> "ProductSpec":
        return cls(ProductKind.STRONG)

    @classmethod
    def parametric(cls, s) -> "ProductSpec":
        return cls(ProductKind.PARAMETRIC, np.asarray(s, dtype=np.float64))

    def scalars(self) -> np.ndarray:
        """The 2×2 grid s_ij for any kind (fixed kinds give their pattern)."""
        if self.kind is ProductKind.PARAMETRIC:
            return self.s.copy()
        return np.array(PRODUCT_PATTERNS[self.kind], dtype=np.float64)

    def as_parametric(self) -> "ProductSpec":
        return ProductSpec.parametric(self.scalars())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProductSpec":
        """Create a ProductSpec from its JSON form ``{"kind": ..., "s": [[..],[..]]}``."""
        try:
            kind = ProductKind(str(data["kind"]).lower())
        except (KeyError, ValueError) as exc:
            raise ParameterError(f"unknown product kind in {data!r}") from exc
        s = data.get("s")
        if kind is ProductKind.PARAMETRIC:
            return cls.parametric(s)
        if s is not None and not np.allclose(np.asarray(s, dtype=float), PRODUCT_PATTERNS[kind]):
            raise ParameterError(f"scalars {s} do not match the {kind.value} pattern")
        return cls(kind)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": self.kind.value}
        if self.kind is ProductKind.PARAMETRIC:
            data["s"] = self.s.tolist()
        return data


@dataclass(frozen=True, eq=False)
class ProductGraph:
    """Product of a temporal and a spatial graph on N·T nodes."""

    gso: SparseMatrix
    n_spatial: int
    n_temporal: int
    spec: ProductSpec

    def __post_init__(self) -> None:
        size = self.n_spatial * self.n_temporal
        if self.gso.shape != (size, size):
            raise ParameterError(f"product GSO must be {size}×{size}, got {self.gso.shape}")

    @property
    def n(self) -> int:
        return self.n_spatial * self.n_temporal

    @property
    def nnz(self) -> int:
        return self.gso.nnz


@dataclass(frozen=True, eq=False)
class ProductSignal:
    """A graph-time signal ``vec(X)`` with node index fastest, time slowest."""

    values: np.ndarray
    n_spatial: int
    n_temporal: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 1 or values.size != self.n_spatial * self.n_temporal:
            raise ParameterError(
                f"signal length {values.size} != N·T = {self.n_spatial * self.n_temporal}"
            )
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Eigenpairs of a diagonalizable GSO.

    Eigenvalues are sorted descending (by real part for complex spectra) and
    column ``i`` of ``eigenvectors`` belongs to ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.eigenvalues) or np.iscomplexobj(self.eigenvectors)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True, eq=False)
class MonoFilterCoeffs:
    """Coefficients h_0..h_K of a filter polynomial in the product GSO."""

    h: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.float64)
        if h.ndim != 1 or h.size == 0 or not np.all(np.isfinite(h)):
            raise ParameterError("mono filter coefficients must be a finite non-empty vector")
        object.__setattr__(self, "h", h)

    @property
    def order(self) -> int:
        return self.h.size - 1


@dataclass(frozen=True, eq=False)
class JointFilterCoeffs:
    """Coefficient grid h_kl of ``Σ h_kl (S_T^l ⊗ S^k)``.

    Row ``k`` is the spatial power, column ``l`` the temporal power.
    """

    h: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.float64)
        if h.ndim != 2 or h.size == 0 or not np.all(np.isfinite(h)):
            raise ParameterError("joint filter coefficients must be a finite 2-D grid")
        object.__setattr__(self, "h", h)

    @property
    def k_bar(self) -> int:
        return self.h.shape[0] - 1

    @property
    def k_tilde(self) -> int:
        return self.h.shape[1] - 1

    def scaled(self, alpha: float) -> "JointFilterCoeffs":
        return JointFilterCoeffs(alpha * self.h)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "JointFilterCoeffs":
        """Create coefficients from ``{"k_bar": int, "k_tilde": int, "h": [[...]]}``."""
        h = np.asarray(data["h"], dtype=np.float64)
        if h.shape != (int(data["k_bar"]) + 1, int(data["k_tilde"]) + 1):
            raise ParameterError(
                f"h has shape {h.shape}, expected ({data['k_bar']}+1, {data['k_tilde']}+1)"
            )
        return cls(h)

    def to_dict(self) -> dict[str, Any]:
        return {"k_bar": self.k_bar, "k_tilde": self.k_tilde, "h": self.h.tolist()}


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Taps ``H_kl`` of a multi-feature graph-time filter bank.

    ``taps`` has shape ``(K̄+1, K̃+1, F_in, F_out)`` so that the bank output is
    ``Σ_kl Shift_kl(X) @ taps[k, l]`` for an ``NT × F_in`` input ``X``.
    """

    taps: np.ndarray

    def __post_init__(self) -> None:
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 4:
            raise ParameterError(f"filter bank taps must be 4-D, got shape {taps.shape}")
        object.__setattr__(self, "taps", taps)

    @property
    def k_bar(self) -> int:
        return self.taps.shape[0] - 1

    @property
    def k_tilde(self) -> int:
        return self.taps.shape[1] - 1

    @property
    def f_in(self) -> int:
        return self.taps.shape[2]

    @property
    def f_out(self) -> int:
        return self.taps.shape[3]

    def scalar(self, f: int, g: int) -> JointFilterCoeffs:
        """The scalar filter mapping input feature ``g`` to output feature ``f``."""
        return JointFilterCoeffs(self.taps[:, :, g, f])


@dataclass(frozen=True, eq=False)
class ErrorMatrix:
    """Symmetric error matrix E of a relative perturbation."""

    matrix: np.ndarray
    operator_norm: float
    frobenius_norm: float

    def __post_init__(self) -> None:
        if not is_symmetric(self.matrix):
            raise ContractError("error matrix must be symmetric")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PerturbationReport:
    """Stability bound and measured distance for one perturbation trial."""

    epsilon: float
    snr_db: float
    delta: float
    C_est: float
    L: int
    F: int
    N: int
    T: int
    bound: float
    empirical_distance: float
    input_norm: float

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def recomputed_bound(self) -> float:
        return (
            self.L
            * self.F ** (self.L - 1)
            * 2.0
            * self.C_est
            * (1.0 + self.delta * self.T * np.sqrt(self.N))
            * self.epsilon
            * self.input_norm
        )

    def to_row(self) -> list[Any]:
        return [getattr(self, name) for name in self.field_names()]
