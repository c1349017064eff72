"""Factor-strength estimates from projected second-moment matrices.

Vector model: ``S = Q^T Sigma_x Q`` has diagonal close to ``D = A^T A``,
so ``alpha_j = log(s_jj) / log(d)``.

Matrix model: ``S_1 ~ tr(D_2) D_1`` and ``S_2 ~ tr(D_1) D_2``. The two
traces are only identified through their product; they are split with the
identifiability rule ``tr(D_1)/(r1 d1) = tr(D_2)/(r2 d2)``, estimating the
product by the average of ``tr(S_1)`` and ``tr(S_2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import LoadingEstimate, MatrixPanel, StrengthReport, VectorPanel, validate_panel
from .errors import (
    DimMismatchError,
    FactorStrengthError,
    NonPositiveDiagonalError,
    NonPositiveError,
    NonPositiveTraceError,
)
from .estimators import CovMatrix, ProjectionConfig, iterative_projection, mode_cov, pca_loadings, sample_cov_vector

ALPHA_WARN_HIGH = 1.5


@dataclass(frozen=True, eq=False)
class SMatrix:
    S: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=float, copy=True)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimMismatchError(f"S must be square, got shape {S.shape}")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)

    @property
    def r(self) -> int:
        return self.S.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.S))

    def offdiag_mass(self) -> float:
        """``||S - diag(S)||_F / ||S||_F`` (0 for an all-zero S)."""
        total = np.linalg.norm(self.S)
        if total == 0:
            return 0.0
        return float(np.linalg.norm(self.S - np.diag(np.diag(self.S))) / total)


@dataclass(frozen=True)
class TraceSplit:
    g1_hat: float
    g2_hat: float
    trS1: float
    trS2: float


def project_s(Q, cov) -> SMatrix:
    """``Q^T cov Q``, symmetrized."""
    Q = np.asarray(Q, dtype=float)
    S = cov.S if isinstance(cov, CovMatrix) else np.asarray(cov, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != S.shape[0]:
        raise DimMismatchError(f"Q has shape {Q.shape} but covariance is {S.shape}")
    P = Q.T @ S @ Q
    return SMatrix(0.5 * (P + P.T))


def _log_ratio(d_hat, dim, mode):
    bad = np.flatnonzero(~(d_hat > 0))
    if bad.size:
        j = bad[0]
        raise NonPositiveDiagonalError(j + 1, d_hat[j], mode)
    return np.log(d_hat) / math.log(dim)


def _range_warnings(alpha):
    notes = []
    for j, a in enumerate(alpha, start=1):
        if a > ALPHA_WARN_HIGH:
            notes.append(f"factor {j}: alpha_hat={a:.3f} exceeds {ALPHA_WARN_HIGH}")
        elif a < 0:
            notes.append(f"factor {j}: alpha_hat={a:.3f} is negative")
    return notes


def vector_strengths(S: SMatrix, d: int) -> StrengthReport:
    """Strengths read off the diagonal of ``S``; off-diagonal mass becomes a diagnostic."""
    if d < 2:
        raise FactorStrengthError("need d >= 2 for a strength estimate")
    d_hat = np.diag(S.S).copy()
    alpha = _log_ratio(d_hat, d, "vector")
    return StrengthReport(
        alpha_hat=alpha,
        d_hat=d_hat,
        mode="vector",
        dimension=d,
        warnings=_range_warnings(alpha),
        diagnostics={"offdiag_mass": S.offdiag_mass()},
    )


def matrix_traces(S1: SMatrix, S2: SMatrix, r1: int, d1: int, r2: int, d2: int) -> TraceSplit:
    tr1, tr2 = S1.trace, S2.trace
    if not (tr1 > 0 and tr2 > 0):
        raise NonPositiveTraceError(f"traces of S1 and S2 must be positive, got {tr1!r} and {tr2!r}")
    avg = (tr1 + tr2) / 2.0
    size1, size2 = r1 * d1, r2 * d2
    g1 = math.sqrt(avg * size1 / size2)
    g2 = math.sqrt(avg * size2 / size1)
    return TraceSplit(g1_hat=g1, g2_hat=g2, trS1=tr1, trS2=tr2)


def matrix_strengths(S1: SMatrix, S2: SMatrix, r1: int, d1: int, r2: int, d2: int):
    """Per-mode reports; mode 1 is normalized by ``g2_hat``, mode 2 by ``g1_hat``."""
    if S1.r != r1 or S2.r != r2:
        raise DimMismatchError(f"S shapes {S1.S.shape}, {S2.S.shape} do not match r=({r1}, {r2})")
    split = matrix_traces(S1, S2, r1, d1, r2, d2)
    reports = []
    for mode, S, dim, g_own, g_other in (
        ("matrix-mode-1", S1, d1, split.g1_hat, split.g2_hat),
        ("matrix-mode-2", S2, d2, split.g2_hat, split.g1_hat),
    ):
        d_hat = np.diag(S.S) / g_other
        alpha = _log_ratio(d_hat, dim, mode)
        reports.append(
            StrengthReport(
                alpha_hat=alpha,
                d_hat=d_hat,
                mode=mode,
                dimension=dim,
                g_hat=g_own,
                warnings=_range_warnings(alpha),
                diagnostics={"offdiag_mass": S.offdiag_mass(), "trace_S": S.trace},
            )
        )
    return reports[0], reports[1]


def assemble_loading(Q, d_hat, labels=None) -> LoadingEstimate:
    """``A_hat = Q diag(sqrt(d_hat))``."""
    Q = np.asarray(Q, dtype=float)
    d_hat = np.asarray(d_hat, dtype=float)
    if d_hat.shape != (Q.shape[1],):
        raise DimMismatchError(f"d_hat has shape {d_hat.shape}, Q has {Q.shape[1]} columns")
    if not np.all(d_hat > 0):
        raise NonPositiveError("d_hat entries must be positive")
    return LoadingEstimate(Q=Q, d_hat=d_hat, A_hat=Q * np.sqrt(d_hat), labels=labels)


@dataclass(frozen=True, eq=False)
class VectorFit:
    report: StrengthReport
    loading: LoadingEstimate
    S: SMatrix
    estimator: str


@dataclass(frozen=True, eq=False)
class MatrixFit:
    reports: tuple
    loadings: tuple
    S: tuple
    traces: TraceSplit
    estimator: str
    info: dict = field(default_factory=dict)


def _demeaned(data):
    return data - data.mean(axis=0, keepdims=True)


def estimate_vector(panel: VectorPanel, r: int, estimator: str = "pca", Q: Optional[np.ndarray] = None,
                    demean: bool = False) -> VectorFit:
    """Full vector pipeline: covariance, loading basis, ``S``, strengths.

    Pass ``Q`` to supply a loading basis instead of estimating one
    (``estimator`` is then recorded as ``"supplied"``).
    """
    validate_panel(panel)
    if demean:
        panel = VectorPanel(_demeaned(panel.data), labels=panel.labels)
    cov = sample_cov_vector(panel)
    if Q is not None:
        estimator = "supplied"
        Q = np.asarray(Q, dtype=float)
    elif estimator == "pca":
        Q = pca_loadings(cov, r)
    else:
        raise FactorStrengthError(f"unknown vector estimator {estimator!r}")
    S = project_s(Q, cov)
    report = vector_strengths(S, panel.d)
    loading = assemble_loading(Q, report.d_hat, labels=panel.labels)
    return VectorFit(report=report, loading=loading, S=S, estimator=estimator)


def estimate_matrix(panel: MatrixPanel, r1: int, r2: int, estimator: str = "iterative_projection",
                    cfg: Optional[ProjectionConfig] = None, Q1=None, Q2=None,
                    demean: bool = False) -> MatrixFit:
    """Full matrix pipeline with the trace-splitting normalization.

    ``estimator`` is ``"iterative_projection"`` (default) or ``"pca"``
    (mode-wise PCA only). Supplying both ``Q1`` and ``Q2`` skips estimation.
    """
    validate_panel(panel)
    if demean:
        panel = MatrixPanel(_demeaned(panel.data), row_labels=panel.row_labels, col_labels=panel.col_labels)
    cov1, cov2 = mode_cov(panel, 1), mode_cov(panel, 2)
    info = {}
    if Q1 is not None and Q2 is not None:
        estimator = "supplied"
    elif estimator == "pca":
        Q1, Q2 = pca_loadings(cov1, r1), pca_loadings(cov2, r2)
    elif estimator == "iterative_projection":
        res = iterative_projection(panel, r1, r2, cfg, return_info=True)
        Q1, Q2 = res.Q1, res.Q2
        info = {"iterations": res.iterations, "subspace_delta": res.delta, "converged": res.converged}
    else:
        raise FactorStrengthError(f"unknown matrix estimator {estimator!r}")
    S1, S2 = project_s(Q1, cov1), project_s(Q2, cov2)
    rep1, rep2 = matrix_strengths(S1, S2, r1, panel.d1, r2, panel.d2)
    loadings = (
        assemble_loading(Q1, rep1.d_hat, labels=panel.row_labels),
        assemble_loading(Q2, rep2.d_hat, labels=panel.col_labels),
    )
    traces = matrix_traces(S1, S2, r1, panel.d1, r2, panel.d2)
    return MatrixFit(reports=(rep1, rep2), loadings=loadings, S=(S1, S2), traces=traces,
                     estimator=estimator, info=info)
