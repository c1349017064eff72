"""Panel containers, result types and shared validation.

Panels are stored dense and time-major: row ``t`` of a vector panel is
``x_t`` and slab ``t`` of a matrix panel is ``X_t``. All logarithms are
natural; strength estimates are log-ratios so the base cancels anyway.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegenerateDimError, DimensionTooSmallError, NonFiniteError, ZeroColumnError

MODES = ("vector", "matrix-mode-1", "matrix-mode-2")


def _frozen(array, ndim, name):
    arr = np.array(array, dtype=float, copy=True, order="C")
    if arr.ndim != ndim:
        raise DimensionTooSmallError(f"{name} must be a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VectorPanel:
    """Observed vector time series, a ``T x d`` array."""

    data: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 2, "vector panel data"))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class MatrixPanel:
    """Observed matrix time series, a ``T x d1 x d2`` array.

    ``row_labels`` / ``col_labels`` are optional names for the two modes
    (for example pick-up and drop-off zones); they are carried through to
    exported loading tables.
    """

    data: np.ndarray
    row_labels: Optional[tuple] = None
    col_labels: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 3, "matrix panel data"))
        for name in ("row_labels", "col_labels"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(str(s) for s in value))

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def d1(self) -> int:
        return self.data.shape[1]

    @property
    def d2(self) -> int:
        return self.data.shape[2]

    def transposed(self) -> "MatrixPanel":
        """Panel with every slab transposed (modes swapped)."""
        return MatrixPanel(
            np.ascontiguousarray(self.data.transpose(0, 2, 1)),
            row_labels=self.col_labels,
            col_labels=self.row_labels,
        )


Panel = Union[VectorPanel, MatrixPanel]


@dataclass(frozen=True, eq=False)
class LoadingEstimate:
    """Orthonormal basis ``Q``, strength diagonal ``d_hat`` and ``A_hat = Q diag(d_hat)^(1/2)``."""

    Q: np.ndarray
    d_hat: np.ndarray
    A_hat: np.ndarray
    labels: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class StrengthReport:
    """Per-factor strength estimates for one loading matrix.

    ``alpha_hat[j] = log(d_hat[j]) / log(dimension)``. ``g_hat`` is the
    trace normalizer that divided this mode's diagonal (matrix models only).
    """

    alpha_hat: np.ndarray
    d_hat: np.ndarray
    mode: str
    dimension: int
    g_hat: Optional[float] = None
    warnings: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "alpha_hat", _frozen(self.alpha_hat, 1, "alpha_hat"))
        object.__setattr__(self, "d_hat", _frozen(self.d_hat, 1, "d_hat"))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def r(self) -> int:
        return self.alpha_hat.shape[0]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """What a simulated panel was built from.

    ``loadings`` holds ``(A,)`` for vector panels and ``(A1, A2)`` for
    matrix panels; ``realized_alpha`` is aligned with it. ``factors`` is
    ``T x r`` (vector) or ``T x r1 x r2`` (matrix).
    """

    loadings: tuple
    factors: np.ndarray
    realized_alpha: tuple
    target_alpha: tuple
    noise: Optional[np.ndarray] = None

    @property
    def A(self) -> np.ndarray:
        return self.loadings[0]

    @property
    def A1(self) -> np.ndarray:
        return self.loadings[0]

    @property
    def A2(self) -> np.ndarray:
        return self.loadings[1]


def validate_panel(panel: Panel) -> Panel:
    """Return ``panel`` unchanged if it is finite and has at least two time points."""
    data = panel.data
    if data.shape[0] < 2:
        raise DimensionTooSmallError(f"need T >= 2 time points, got T={data.shape[0]}")
    if any(n < 1 for n in data.shape[1:]):
        raise DimensionTooSmallError(f"cross-sectional dimensions must be >= 1, got {data.shape[1:]}")
    bad = ~np.isfinite(data)
    if bad.any():
        raise NonFiniteError(np.argwhere(bad)[0])
    return panel


def realized_strengths(A) -> np.ndarray:
    """Realized strength ``log(||a_j||^2) / log(d)`` of each column of ``A``."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    d = A.shape[0]
    if d < 2:
        raise DegenerateDimError("realized strength needs d >= 2 (log d = 0 otherwise)")
    sq = np.einsum("ij,ij->j", A, A)
    zero = np.flatnonzero(sq == 0)
    if zero.size:
        raise ZeroColumnError(zero[0])
    return np.log(sq) / np.log(d)
