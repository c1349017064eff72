"""Synthetic vector and matrix factor-model panels with known loadings.

Loadings are ``A = B R`` with ``B`` i.i.d. uniform on ``(-sqrt 3, sqrt 3)``
(unit variance) and ``R = diag(d^-zeta_j)``, so ``||a_j||^2 ~ d^(1 - 2 zeta_j)``
and the target strength is ``alpha_j = 1 - 2 zeta_j``. Factors are
independent unit-variance AR(1) series. Noise is scaled so the average
per-entry variance is ``1 / delta^2``.

Every generator draws from one PCG64 ``numpy.random.Generator`` seeded
from the DGP object's ``seed`` field, so that object fully determines the
panel.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import cholesky, toeplitz

from .core import GroundTruth, MatrixPanel, VectorPanel, realized_strengths
from .errors import FactorStrengthError, UnstableARError

SQRT3 = np.sqrt(3.0)

#: weakness exponents for the two simulation settings
SETTINGS = {"I": (0.0, 0.2), "II": (0.1, 0.2)}


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "correlated"
    cross_rho: float = 0.2
    serial_phi: float = 0.2
    delta: float = 2.0

    def __post_init__(self):
        if self.kind not in ("iid_gaussian", "correlated"):
            raise FactorStrengthError(f"unknown noise kind {self.kind!r}")
        if not self.delta > 0:
            raise FactorStrengthError("delta must be positive")
        if not 0 <= self.cross_rho < 1:
            raise FactorStrengthError("cross_rho must lie in [0, 1)")
        if not 0 <= self.serial_phi < 1:
            raise UnstableARError("serial_phi must lie in [0, 1)")


def _check_zeta(zeta, d, name):
    zeta = tuple(float(z) for z in zeta)
    if not zeta:
        raise FactorStrengthError(f"{name} must hold at least one exponent")
    if any(z < 0 or z > 0.5 for z in zeta):
        raise FactorStrengthError(f"{name} entries must lie in [0, 0.5]")
    if any(a > b for a, b in zip(zeta, zeta[1:])):
        raise FactorStrengthError(f"{name} must be nondecreasing")
    if len(zeta) >= d:
        raise FactorStrengthError(f"need r < d, got r={len(zeta)} and d={d}")
    return zeta


@dataclass(frozen=True)
class VectorDGPSpec:
    d: int
    T: int
    zeta: tuple
    ar_coef: float = 0.8
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "zeta", _check_zeta(self.zeta, self.d, "zeta"))
        if self.T < 2:
            raise FactorStrengthError("T must be at least 2")
        if abs(self.ar_coef) >= 1:
            raise UnstableARError(f"AR coefficient {self.ar_coef} is not stationary")

    @property
    def r(self) -> int:
        return len(self.zeta)

    @property
    def target_alpha(self) -> tuple:
        return tuple(1.0 - 2.0 * z for z in self.zeta)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model"] = "vector"
        return out


@dataclass(frozen=True)
class MatrixDGPSpec:
    d1: int
    d2: int
    T: int
    zeta1: tuple
    zeta2: tuple
    ar_coef: float = 0.8
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "zeta1", _check_zeta(self.zeta1, self.d1, "zeta1"))
        object.__setattr__(self, "zeta2", _check_zeta(self.zeta2, self.d2, "zeta2"))
        if self.T < 2:
            raise FactorStrengthError("T must be at least 2")
        if abs(self.ar_coef) >= 1:
            raise UnstableARError(f"AR coefficient {self.ar_coef} is not stationary")

    @property
    def r1(self) -> int:
        return len(self.zeta1)

    @property
    def r2(self) -> int:
        return len(self.zeta2)

    @property
    def target_alpha(self) -> tuple:
        return (
            tuple(1.0 - 2.0 * z for z in self.zeta1),
            tuple(1.0 - 2.0 * z for z in self.zeta2),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model"] = "matrix"
        return out


def vector_setting(setting: str, d: int, T: int, seed: int = 0, **kwargs) -> VectorDGPSpec:
    """Spec for simulation setting ``"I"`` or ``"II"`` with r = 2."""
    return VectorDGPSpec(d=d, T=T, zeta=SETTINGS[setting], seed=seed, **kwargs)


def matrix_setting(setting: str, d1: int, d2: int, T: int, seed: int = 0, **kwargs) -> MatrixDGPSpec:
    zeta = SETTINGS[setting]
    return MatrixDGPSpec(d1=d1, d2=d2, T=T, zeta1=zeta, zeta2=zeta, seed=seed, **kwargs)


def with_seed(spec, seed: int):
    return replace(spec, seed=int(seed))


def gen_loading(d: int, r: int, zeta, rng: np.random.Generator):
    """Draw ``A = B diag(d^-zeta)``; returns ``(A, realized_alpha)``."""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (r,):
        raise FactorStrengthError(f"expected {r} exponents, got {zeta.shape}")
    B = rng.uniform(-SQRT3, SQRT3, size=(d, r))
    A = B * float(d) ** (-zeta)
    return A, realized_strengths(A)


def gen_factor_series(T: int, n_series: int, ar_coef: float, rng: np.random.Generator) -> np.ndarray:
    """``n_series`` independent stationary AR(1) series with unit marginal variance.

    ``f_t = phi f_{t-1} + sqrt(1 - phi^2) z_t`` with ``f_0 = z_0``, so the
    series starts in its stationary law and needs no burn-in.
    """
    if abs(ar_coef) >= 1:
        raise UnstableARError(f"AR coefficient {ar_coef} is not stationary")
    z = rng.standard_normal((T, n_series))
    if ar_coef == 0:
        return z
    scale = np.sqrt(1.0 - ar_coef * ar_coef)
    f = np.empty_like(z)
    f[0] = z[0]
    for t in range(1, T):
        f[t] = ar_coef * f[t - 1] + scale * z[t]
    return f


@lru_cache(maxsize=64)
def _toeplitz_factor(dim: int, rho: float) -> np.ndarray:
    # lower Cholesky factor L of (rho^|i-j|), so L u has that correlation
    L = cholesky(toeplitz(rho ** np.arange(dim)), lower=True)
    L.setflags(write=False)
    return L


def gen_noise_vector(T: int, d: int, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """``T x d`` noise with average per-series variance ``1 / delta^2``.

    The correlated kind runs an AR(``serial_phi``) recursion on every series
    and then mixes the cross-section with the Toeplitz correlation
    ``cross_rho^|i-j|``. Both have unit diagonal, so the final rescale is
    exactly ``1 / delta``.
    """
    if noise.kind == "iid_gaussian":
        return rng.standard_normal((T, d)) / noise.delta
    u = gen_factor_series(T, d, noise.serial_phi, rng)
    if noise.cross_rho > 0:
        u = u @ _toeplitz_factor(d, noise.cross_rho).T
    return u / noise.delta


def gen_noise_matrix(T: int, d1: int, d2: int, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """``T x d1 x d2`` noise, ``E_t = L_r U_t L_c^T`` with ``U_t`` elementwise AR."""
    if noise.kind == "iid_gaussian":
        return rng.standard_normal((T, d1, d2)) / noise.delta
    U = gen_factor_series(T, d1 * d2, noise.serial_phi, rng).reshape(T, d1, d2)
    if noise.cross_rho > 0:
        U = _toeplitz_factor(d1, noise.cross_rho) @ U @ _toeplitz_factor(d2, noise.cross_rho).T
    return U / noise.delta


def simulate_vector(spec: VectorDGPSpec):
    """Draw ``x_t = A f_t + eps_t``; returns ``(VectorPanel, GroundTruth)``."""
    rng = np.random.default_rng(spec.seed)
    A, alpha = gen_loading(spec.d, spec.r, spec.zeta, rng)
    F = gen_factor_series(spec.T, spec.r, spec.ar_coef, rng)
    E = gen_noise_vector(spec.T, spec.d, spec.noise, rng)
    X = F @ A.T + E
    truth = GroundTruth(
        loadings=(A,),
        factors=F,
        realized_alpha=(alpha,),
        target_alpha=(spec.target_alpha,),
        noise=E,
    )
    return VectorPanel(X), truth


def simulate_matrix(spec: MatrixDGPSpec):
    """Draw ``X_t = A1 F_t A2^T + E_t``; returns ``(MatrixPanel, GroundTruth)``."""
    rng = np.random.default_rng(spec.seed)
    A1, alpha1 = gen_loading(spec.d1, spec.r1, spec.zeta1, rng)
    A2, alpha2 = gen_loading(spec.d2, spec.r2, spec.zeta2, rng)
    F = gen_factor_series(spec.T, spec.r1 * spec.r2, spec.ar_coef, rng).reshape(spec.T, spec.r1, spec.r2)
    E = gen_noise_matrix(spec.T, spec.d1, spec.d2, spec.noise, rng)
    X = A1 @ F @ A2.T + E
    truth = GroundTruth(
        loadings=(A1, A2),
        factors=F,
        realized_alpha=(alpha1, alpha2),
        target_alpha=spec.target_alpha,
        noise=E,
    )
    return MatrixPanel(X), truth


def simulate(spec):
    if isinstance(spec, VectorDGPSpec):
        return simulate_vector(spec)
    return simulate_matrix(spec)
