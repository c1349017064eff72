"""Loading-space estimators: second-moment matrices, PCA and iterative projection.

Second-moment matrices are non-centered, ``(1/T) sum x_t x_t^T``; the
simulated panels are zero-mean and real data can be demeaned upstream.

Mode-2 quantities are always computed by running the mode-1 routine on the
slab-transposed array, so transposing a panel swaps the two modes bit for
bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .core import MatrixPanel, VectorPanel
from .errors import DimMismatchError, FactorStrengthError, NoConvergenceWarning, RankDeficientWarning


@dataclass(frozen=True, eq=False)
class CovMatrix:
    S: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=float, copy=True)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimMismatchError(f"covariance must be square, got shape {S.shape}")
        scale = max(np.abs(S).max(initial=0.0), 1.0)
        if np.abs(S - S.T).max(initial=0.0) > 1e-10 * scale:
            raise FactorStrengthError("covariance matrix is not symmetric")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)

    @property
    def dim(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class ProjectionConfig:
    max_iters: int = 30
    tol: float = 1e-6
    init: str = "mode_pca"

    def __post_init__(self):
        if self.max_iters < 1:
            raise FactorStrengthError("max_iters must be >= 1")
        if not self.tol > 0:
            raise FactorStrengthError("tol must be positive")
        if self.init != "mode_pca":
            raise FactorStrengthError(f"unsupported init {self.init!r}")


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    Q1: np.ndarray
    Q2: np.ndarray
    iterations: int
    delta: float
    converged: bool


def _sym(S):
    return 0.5 * (S + S.T)


def sample_cov_vector(panel: VectorPanel) -> CovMatrix:
    X = panel.data
    return CovMatrix(_sym(X.T @ X) / X.shape[0])


def _row_gram(data):
    # sum_t Y_t Y_t^T for a T x p x q stack, as one p x (T q) product
    p = data.shape[1]
    M = np.ascontiguousarray(data.transpose(1, 0, 2)).reshape(p, -1)
    return _sym(M @ M.T)


def _swap(data):
    return np.ascontiguousarray(data.transpose(0, 2, 1))


def mode_cov(panel: MatrixPanel, mode: int) -> CovMatrix:
    """``(1/T) sum X_t X_t^T`` for mode 1, ``(1/T) sum X_t^T X_t`` for mode 2."""
    if mode == 1:
        data = panel.data
    elif mode == 2:
        data = _swap(panel.data)
    else:
        raise FactorStrengthError(f"mode must be 1 or 2, got {mode!r}")
    return CovMatrix(_row_gram(data) / panel.T)


def _fix_signs(V):
    # largest-magnitude entry of each column positive; argmax takes the lowest index on ties
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def top_eigenpairs(S: np.ndarray, r: int):
    """Leading ``r`` eigenvalues (descending) and sign-normalized eigenvectors."""
    dim = S.shape[0]
    if not 1 <= r <= dim:
        raise DimMismatchError(f"need 1 <= r <= {dim}, got r={r}")
    w, V = eigh(S, subset_by_index=[dim - r, dim - 1])
    w = w[::-1]
    V = _fix_signs(V[:, ::-1])
    return w, V


def pca_loadings(cov: CovMatrix, r: int) -> np.ndarray:
    """Top-``r`` eigenvectors of ``cov`` as a ``dim x r`` orthonormal matrix.

    Emits :class:`RankDeficientWarning` when the ``r``-th eigenvalue is
    negligible relative to the first.
    """
    S = cov.S if isinstance(cov, CovMatrix) else CovMatrix(cov).S
    w, V = top_eigenpairs(S, r)
    if w[-1] <= 1e-12 * w[0]:
        warnings.warn(
            RankDeficientWarning(f"eigenvalue {r} ({w[-1]:.3g}) is negligible next to the first ({w[0]:.3g})"),
            stacklevel=2,
        )
    return V


def _projector_distance(Q, P):
    return np.linalg.norm(Q @ Q.T - P @ P.T)


def _project_update(data, Q_other, r, d_other):
    # top-r eigenvectors of (1 / (T d_other)) sum (Y_t Q_other)(Y_t Q_other)^T
    Y = data @ Q_other
    G = _row_gram(Y) / (data.shape[0] * d_other)
    return top_eigenpairs(G, r)[1]


def iterative_projection(panel: MatrixPanel, r1: int, r2: int, cfg: ProjectionConfig | None = None,
                         return_info: bool = False):
    """Alternating projection estimates of the two mode loading spaces.

    Starts from mode-wise PCA. Each sweep refreshes both bases from the other
    mode's previous estimate (a simultaneous update, which keeps the
    procedure symmetric under slab transposition). Stops when the larger of
    the two projector changes drops below ``cfg.tol``.

    Returns ``(Q1, Q2)``, or a :class:`ProjectionResult` when
    ``return_info`` is set. Emits :class:`NoConvergenceWarning` when
    ``max_iters`` is exhausted; the last iterate is still returned.
    """
    cfg = cfg or ProjectionConfig()
    if not (1 <= r1 <= panel.d1 and 1 <= r2 <= panel.d2):
        raise DimMismatchError(f"need r1 <= d1 and r2 <= d2, got ({r1}, {r2}) for ({panel.d1}, {panel.d2})")
    X = panel.data
    Xt = _swap(X)
    Q1 = pca_loadings(mode_cov(panel, 1), r1)
    Q2 = pca_loadings(mode_cov(panel, 2), r2)
    delta = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        Q1_new = _project_update(X, Q2, r1, panel.d2)
        Q2_new = _project_update(Xt, Q1, r2, panel.d1)
        delta = max(_projector_distance(Q1_new, Q1), _projector_distance(Q2_new, Q2))
        Q1, Q2 = Q1_new, Q2_new
        if delta < cfg.tol:
            break
    converged = bool(delta < cfg.tol)
    if not converged:
        warnings.warn(
            NoConvergenceWarning(f"iterative projection stopped after {it} sweeps, subspace change {delta:.3g}", delta),
            stacklevel=2,
        )
    if return_info:
        return ProjectionResult(Q1, Q2, it, float(delta), converged)
    return Q1, Q2


def subspace_distance(Q_hat, A) -> float:
    """Frobenius distance between projectors onto ``span(Q_hat)`` and ``span(A)``."""
    Q, _ = np.linalg.qr(np.asarray(A, dtype=float))
    return float(_projector_distance(np.asarray(Q_hat, dtype=float), Q))


def max_principal_angle(Q_hat, A) -> float:
    """Largest principal angle (radians) between ``span(Q_hat)`` and ``span(A)``."""
    Q, _ = np.linalg.qr(np.asarray(A, dtype=float))
    Q_hat = np.asarray(Q_hat, dtype=float)
    # sine form; arccos of the cosines loses everything below ~1e-8
    resid = Q_hat - Q @ (Q.T @ Q_hat)
    s = np.linalg.norm(resid, 2)
    return float(np.arcsin(min(s, 1.0)))
