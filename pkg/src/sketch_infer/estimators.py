"""Sketched estimators and their sum-of-squares quantities.

Complete sketching regresses S y on S X and uses only the sketched data.
Partial sketching combines the sketched Gram matrix with the single-pass
full-data summaries X^T y and y^T y; the estimator carries the inverse-Wishart
mean correction gamma = (k - p - 1)/k that makes it unbiased.  The whitened
("star") estimator additionally uses W* = S S^T.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DomainError,
    GammaNonpositive,
    MissingWStar,
    NonFinite,
    RankDeficient,
)
from .sketch_ops import SketchedData

RANK_TOL = 1e-10


class FitKind(str, enum.Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"
    EFFICIENT_STAR = "efficient_star"


@dataclass(frozen=True)
class SketchFit:
    """Coefficients from a sketched regression.

    ``gram_s_factor`` is the triangular R with R^T R = Xs^T Xs (for the
    whitened estimator: R^T R = Xs^T W*^{-1} Xs).  ``SSR_s`` is the sketched
    residual sum of squares; it is populated for the partial fit as well
    because the repeated-sampling partial test uses it as a variance proxy.
    """

    beta: np.ndarray
    kind: FitKind
    gram_s_factor: np.ndarray
    SSR_s: float | None = None
    SSM_p: float | None = None
    gamma: float | None = None


@dataclass(frozen=True)
class PartialInputs:
    """Single-pass full-data summaries available to the partial sketch."""

    Xty: np.ndarray
    yty: float

    def __post_init__(self):
        x = np.asarray(self.Xty, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)) or not np.isfinite(self.yty):
            raise NonFinite("partial inputs contain NaN or infinite entries")
        if self.yty < 0:
            raise DomainError("y^T y must be nonnegative")
        object.__setattr__(self, "Xty", x)
        object.__setattr__(self, "yty", float(self.yty))


def _qr_sketched(Xs: np.ndarray):
    Q, R = np.linalg.qr(Xs)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= RANK_TOL * d.max():
        raise RankDeficient("sketched design is numerically rank deficient")
    return Q, R


def _solve_gram(R: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """(R^T R)^{-1} rhs via two triangular solves."""
    return solve_triangular(R, solve_triangular(R, rhs, trans="T", lower=False), lower=False)


def fit_complete(sk: SketchedData) -> SketchFit:
    """Least squares on the sketched data alone.

    SSR_s is the squared norm of the projection residual y_s - Q Q^T y_s,
    never the difference of two large near-equal quantities.
    """
    k, p = sk.spec.k, sk.p
    if k <= p:
        raise DomainError(f"complete sketching needs k > p (got k={k}, p={p})")
    Q, R = _qr_sketched(sk.Xs)
    qty = Q.T @ sk.ys
    beta = solve_triangular(R, qty, lower=False)
    resid = sk.ys - Q @ qty
    return SketchFit(
        beta=beta,
        kind=FitKind.COMPLETE,
        gram_s_factor=R,
        SSR_s=float(resid @ resid),
    )


def fit_partial(sk: SketchedData, partial: PartialInputs) -> SketchFit:
    """Adjusted partial-sketch estimator gamma (Xs^T Xs)^{-1} X^T y.

    Records SSM_p = y^T X beta_p.  SSR_s (from the complete solve on the
    same sketch) is carried along so callers can form the error-variance
    proxy without re-sketching.
    """
    k, p = sk.spec.k, sk.p
    if partial.Xty.shape[0] != p:
        raise DomainError(f"X^T y has length {partial.Xty.shape[0]}, expected {p}")
    if k <= p + 1:
        raise GammaNonpositive(f"gamma = (k-p-1)/k requires k > p+1 (got k={k}, p={p})")
    gamma = (k - p - 1) / k
    Q, R = _qr_sketched(sk.Xs)
    beta = gamma * _solve_gram(R, partial.Xty)
    ssm_p = float(partial.Xty @ beta)
    qty = Q.T @ sk.ys
    resid = sk.ys - Q @ qty
    return SketchFit(
        beta=beta,
        kind=FitKind.PARTIAL,
        gram_s_factor=R,
        SSR_s=float(resid @ resid),
        SSM_p=ssm_p,
        gamma=gamma,
    )


def _whiten(sk: SketchedData):
    if sk.W_star is None:
        raise MissingWStar("operation requires the W* = S S^T byproduct; re-sketch with want_w_star=True")
    try:
        L = np.linalg.cholesky(sk.W_star)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("W* is not positive definite") from exc
    Xt = solve_triangular(L, sk.Xs, lower=True)
    yt = solve_triangular(L, sk.ys, lower=True)
    return Xt, yt


def fit_efficient_star(sk: SketchedData) -> SketchFit:
    """Whitened estimator (Xs^T W*^{-1} Xs)^{-1} Xs^T W*^{-1} y_s.

    Solved as ordinary least squares on the Cholesky-whitened system, so no
    inverse of W* is ever formed.
    """
    Xt, yt = _whiten(sk)
    Q, R = _qr_sketched(Xt)
    qty = Q.T @ yt
    beta = solve_triangular(R, qty, lower=False)
    return SketchFit(beta=beta, kind=FitKind.EFFICIENT_STAR, gram_s_factor=R)


def ssr_star(sk: SketchedData, yty: float) -> float:
    """Whitened residual sum of squares y^T y - ||proj of whitened y_s||^2.

    Equals SSR_F exactly when S is square and invertible.  Its chi-square
    sampling law holds when the response mean lies in the hypothesized null
    (e.g. testing the true coefficient vector after centering, or pure-noise
    data); otherwise part of the signal leaks into the statistic because the
    projection only spans the sketched row space.
    """
    Xt, yt = _whiten(sk)
    Q, _ = _qr_sketched(Xt)
    proj = Q.T @ yt
    val = float(yty - proj @ proj)
    if val < 0.0:
        if val < -1e-8 * max(yty, 1.0):
            warnings.warn(
                f"ssr_star evaluated {val:.3e} < 0; clamping to 0", RuntimeWarning, stacklevel=2
            )
        val = 0.0
    return val


def sigma2_hat_complete(SSR_s: float, n: int, k: int, p: int) -> float:
    """Unbiased error-variance estimator SSR_s * k / ((n-p)(k-p))."""
    if n <= p or k <= p:
        raise DomainError(f"need n > p and k > p (got n={n}, k={k}, p={p})")
    if SSR_s < 0:
        raise DomainError("SSR_s must be nonnegative")
    return SSR_s * k / ((n - p) * (k - p))


def partial_residual_ss_expectation(
    yty: float, SSM_F: float, k: int, p: int, *, second_moment_correction: bool = False
) -> float:
    """Closed-form expectation of the partial-residual sum of squares.

    Evaluates  y'y + SSM_F * { ((k-p-1)(p+1) + c) / ((k-p)(k-p-3)) - 1 }
    with c = 1 by default.  ``second_moment_correction=True`` uses c = 2,
    the constant implied by the inverse-Wishart second-moment identity
    E[B^{-2}] = (k-1) I / ((k-p)(k-p-1)(k-p-3)) for B ~ W_p(k, I); Monte
    Carlo calibration favors the corrected constant (see the adjudication
    tests).
    """
    if k <= p + 3:
        raise DomainError(f"expectation requires k > p + 3 (got k={k}, p={p})")
    c = 2.0 if second_moment_correction else 1.0
    bracket = ((k - p - 1) * (p + 1) + c) / ((k - p) * (k - p - 3)) - 1.0
    return yty + SSM_F * bracket
