"""Full-data regression quantities that every sketched estimator is judged against."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonFinite, RankDeficient

# Relative size of the smallest |R_ii| that still counts as full rank.
RANK_TOL = 1e-10


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError("design matrix must be two-dimensional")
    return X


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("input contains NaN or infinite entries")


def _qr_full_rank(X: np.ndarray):
    """Economy QR with a scale-invariant rank check on the R diagonal."""
    Q, R = np.linalg.qr(X)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= RANK_TOL * d.max():
        raise RankDeficient(
            f"matrix is numerically rank deficient (min/max |R_ii| = "
            f"{0.0 if d.size == 0 else d.min() / d.max():.3e})"
        )
    return Q, R


@dataclass(frozen=True)
class DataSet:
    """Full design matrix X (n x p, full column rank) and response y (n)."""

    X: np.ndarray
    y: np.ndarray
    n: int = field(init=False)
    p: int = field(init=False)

    def __post_init__(self):
        X = _as_matrix(self.X)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        _check_finite(X, y)
        n, p = X.shape
        if n <= p:
            raise DomainError(f"need n > p, got n={n}, p={p}")
        if y.shape[0] != n:
            raise DomainError(f"y has length {y.shape[0]}, expected {n}")
        _qr_full_rank(X)  # RankDeficient if X is not full column rank
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class FullFit:
    """Least-squares solution on the full data with its sum-of-squares split.

    ``gram_factor`` is the triangular R from the economy QR of X, so that
    R^T R = X^T X; inference code reuses it instead of refactoring.
    """

    beta_F: np.ndarray
    SSR_F: float
    SSM_F: float
    gram_factor: np.ndarray


@dataclass(frozen=True)
class ModelTruth:
    """Generative parameters: y ~ N(X beta_0, sigma2 I).

    sigma2 = 0 is tolerated so the noiseless response path stays exact;
    every density and pivot that divides by sigma2 rejects it.
    """

    beta_0: np.ndarray
    sigma2: float

    def __post_init__(self):
        b = np.asarray(self.beta_0, dtype=float).reshape(-1)
        _check_finite(b)
        if self.sigma2 < 0:
            raise DomainError("sigma2 must be nonnegative")
        object.__setattr__(self, "beta_0", b)
        object.__setattr__(self, "sigma2", float(self.sigma2))


def fit_full(data: DataSet) -> FullFit:
    """Full-data least squares via QR; never forms an explicit inverse.

    The residual sum of squares is taken as the squared norm of the
    projection residual y - Q Q^T y, which avoids the cancellation of the
    y'y - SSM identity.
    """
    Q, R = _qr_full_rank(data.X)
    qty = Q.T @ data.y
    beta = np.linalg.solve(R, qty)
    resid = data.y - Q @ qty
    ssr = float(resid @ resid)
    ssm = float(qty @ qty)
    return FullFit(beta_F=beta, SSR_F=ssr, SSM_F=ssm, gram_factor=R)


def simulate_response(X, truth: ModelTruth, seed) -> np.ndarray:
    """Draw y = X beta_0 + sigma z with z standard normal, reproducibly."""
    X = _as_matrix(X)
    _check_finite(X)
    if X.shape[1] != truth.beta_0.shape[0]:
        raise DomainError(
            f"X has {X.shape[1]} columns but beta_0 has {truth.beta_0.shape[0]} entries"
        )
    rng = np.random.default_rng(seed)
    mean = X @ truth.beta_0
    if truth.sigma2 == 0.0:  # ModelTruth forbids this, but keep the limit exact
        return mean
    return mean + np.sqrt(truth.sigma2) * rng.standard_normal(X.shape[0])
