"""Pivotal quantities, hypothesis tests and confidence intervals for sketched fits.

Two inferential regimes are supported.  Under repeated sketching the data are
fixed and the randomness is the projection; the natural target is the
full-data estimate beta_F.  Under repeated sampling both the response and the
projection are redrawn; the target is the model parameter beta_0.  Several
pivots share one formula across regimes and differ only in which null law
interpretation applies; the report carries both labels so nothing is implicit.

Testing a coordinate of beta_F equal to zero asks whether the *sample*
estimate is zero, which is not a traditional inferential hypothesis; it is
still useful for flagging coefficients distinguishable from zero, and both
targets are implemented and labeled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .densities import h_law_sample, ssr_s_law_params
from .errors import (
    AssumptionViolated,
    DegenerateSSR,
    DomainError,
    MissingWStar,
    NegativeDenominator,
)
from .estimators import FitKind, SketchFit, _whiten, sigma2_hat_complete
from .sketch_ops import SketchedData
from .special_fn import Law, chi2, dist_cdf, dist_quantile, f_law, student_t

__all__ = [
    "Target",
    "Regime",
    "Method",
    "TestResult",
    "ConfidenceInterval",
    "complete_joint_f_test",
    "complete_marginal_t_test",
    "marginal_t_statistic",
    "partial_t_statistic",
    "complete_marginal_ci",
    "wstar_exact_tests",
    "complete_sampling_approx_test",
    "mc_calibrated_sampling_test",
    "partial_univariate_chi2_test",
    "partial_marginal_t_test",
    "partial_linear_combination_test",
]


class Target(str, enum.Enum):
    BETA_F = "beta_F"
    BETA_0 = "beta_0"


class Regime(str, enum.Enum):
    REPEATED_SKETCH = "repeated_sketch"
    REPEATED_SAMPLE = "repeated_sample"


class Method(str, enum.Enum):
    COMPLETE_T = "complete_t"
    COMPLETE_F = "complete_f"
    COMPLETE_CHI2 = "complete_chi2"
    WSTAR_EXACT = "wstar_exact"
    PARTIAL_T = "partial_t"
    PARTIAL_CHI2_UNIVARIATE = "partial_chi2_univariate"
    MC_CALIBRATED = "mc_calibrated"


@dataclass(frozen=True)
class TestResult:
    statistic: float
    pivot_law: Law
    p_value: float
    target: Target
    regime: Regime
    method: Method

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class ConfidenceInterval:
    coefficient_index: int
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise DomainError("interval bounds are reversed")
        if not 0.0 < self.level < 1.0:
            raise DomainError("level must be in (0, 1)")

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def _two_sided_t(stat: float, df: float) -> float:
    c = dist_cdf(student_t(df), stat)
    return float(min(1.0, 2.0 * min(c, 1.0 - c)))


def _gram_inv_quad(R: np.ndarray, v: np.ndarray) -> float:
    """v' (R'R)^{-1} v via one triangular solve."""
    w = solve_triangular(R, v, trans="T", lower=False)
    return float(w @ w)


def _require_kind(fit: SketchFit, kind: FitKind, op: str) -> None:
    if fit.kind is not kind:
        raise DomainError(f"{op} requires a {kind.value} fit, got {fit.kind.value}")


def _require_ssr(fit: SketchFit) -> float:
    if fit.SSR_s is None or fit.SSR_s <= 0.0:
        raise DegenerateSSR("pivot needs SSR_s > 0")
    return fit.SSR_s


# ---------------------------------------------------------------------------
# complete sketch, repeated sketching
# ---------------------------------------------------------------------------

def complete_joint_f_test(fit: SketchFit, sk: SketchedData, beta_hyp) -> TestResult:
    """Joint F pivot: (b_s - h)'(Xs'Xs)(b_s - h)/p / (SSR_s/(k-p)) ~ F_{p, k-p}."""
    _require_kind(fit, FitKind.COMPLETE, "joint F test")
    ssr = _require_ssr(fit)
    k, p = sk.spec.k, sk.p
    d = fit.beta - np.asarray(beta_hyp, dtype=float).reshape(-1)
    quad = float(np.sum((fit.gram_s_factor @ d) ** 2))
    stat = (quad / p) / (ssr / (k - p))
    law = f_law(p, k - p)
    return TestResult(
        statistic=stat,
        pivot_law=law,
        p_value=float(1.0 - dist_cdf(law, stat)),
        target=Target.BETA_F,
        regime=Regime.REPEATED_SKETCH,
        method=Method.COMPLETE_F,
    )


def marginal_t_statistic(fit: SketchFit, sk: SketchedData, j: int, hyp_j: float):
    """Statistic and standard error of the complete-sketch marginal t pivot.

    Cheap building block (no reference-law evaluation) used by the test
    functions and by the simulation harness's replicate loop.
    """
    ssr = _require_ssr(fit)
    k, p = sk.spec.k, sk.p
    if not 0 <= j < p:
        raise IndexError(f"coefficient index {j} outside [0, {p})")
    e = np.zeros(p)
    e[j] = 1.0
    se = math.sqrt(ssr / (k - p) * _gram_inv_quad(fit.gram_s_factor, e))
    return (fit.beta[j] - hyp_j) / se, se


def complete_marginal_t_test(
    fit: SketchFit, sk: SketchedData, j: int, beta_hyp_j: float,
    target: Target = Target.BETA_F,
) -> TestResult:
    """Marginal pivot (b_sj - h) / sqrt(SSR_s/(k-p) [(Xs'Xs)^{-1}]_jj) ~ t_{k-p}.

    Exact for target beta_F under repeated sketching; the same statistic is
    the large-n approximate pivot for beta_0 under repeated samples.
    """
    _require_kind(fit, FitKind.COMPLETE, "marginal t test")
    stat, _ = marginal_t_statistic(fit, sk, j, beta_hyp_j)
    df = sk.spec.k - sk.p
    regime = Regime.REPEATED_SKETCH if target is Target.BETA_F else Regime.REPEATED_SAMPLE
    return TestResult(
        statistic=stat,
        pivot_law=student_t(df),
        p_value=_two_sided_t(stat, df),
        target=target,
        regime=regime,
        method=Method.COMPLETE_T,
    )


def complete_marginal_ci(fit: SketchFit, sk: SketchedData, j: int, level: float) -> ConfidenceInterval:
    """Invert the marginal t pivot: b_sj +- t_{k-p,(1+level)/2} * se_j."""
    _require_kind(fit, FitKind.COMPLETE, "marginal CI")
    if not 0.0 < level < 1.0:
        raise DomainError("level must be in (0, 1)")
    _, se = marginal_t_statistic(fit, sk, j, 0.0)
    tq = dist_quantile(student_t(sk.spec.k - sk.p), (1.0 + level) / 2.0)
    return ConfidenceInterval(
        coefficient_index=j,
        lower=float(fit.beta[j] - tq * se),
        upper=float(fit.beta[j] + tq * se),
        level=level,
    )


# ---------------------------------------------------------------------------
# exact W*-based inference on beta_0 (repeated samples)
# ---------------------------------------------------------------------------

def wstar_exact_tests(
    fit: SketchFit, sk: SketchedData, yty: float, beta_hyp, sigma2: float | None = None,
):
    """Exact pivots for beta_0 built from the whitened fit and W*.

    ``yty`` must be the total sum of squares of the null-centered response,
    ||y - X beta_hyp||^2 (plain y'y when testing the zero vector): centering
    is what keeps the residual statistic free of the unknown signal, since
    the sketch row space spans only a k-dimensional slice of it.  Returns
    ``(f_test, chi2_test)`` where the F form is sigma^2-free and the chi2
    form is present only when sigma2 is supplied.
    """
    _require_kind(fit, FitKind.EFFICIENT_STAR, "W* exact tests")
    if sk.W_star is None:
        raise MissingWStar("wstar_exact_tests needs SketchedData with W_star")
    n, k, p = sk.n, sk.spec.k, sk.p
    hyp = np.asarray(beta_hyp, dtype=float).reshape(-1)
    R = fit.gram_s_factor
    d = fit.beta - hyp
    num = float(np.sum((R @ d) ** 2))

    Xt, yt = _whiten(sk)
    et = yt - Xt @ hyp
    w = solve_triangular(R, Xt.T @ et, trans="T", lower=False)
    ssr_star = float(yty - w @ w)
    if ssr_star <= 0.0:
        raise DegenerateSSR(f"centered SSR* evaluated {ssr_star:.3e} <= 0")

    f_stat = (num / p) / (ssr_star / (n - p))
    flaw = f_law(p, n - p)
    f_res = TestResult(
        statistic=f_stat,
        pivot_law=flaw,
        p_value=float(1.0 - dist_cdf(flaw, f_stat)),
        target=Target.BETA_0,
        regime=Regime.REPEATED_SAMPLE,
        method=Method.WSTAR_EXACT,
    )
    chi_res = None
    if sigma2 is not None:
        if sigma2 <= 0:
            raise DomainError("sigma2 must be positive")
        claw = chi2(p)
        c_stat = num / sigma2
        chi_res = TestResult(
            statistic=c_stat,
            pivot_law=claw,
            p_value=float(1.0 - dist_cdf(claw, c_stat)),
            target=Target.BETA_0,
            regime=Regime.REPEATED_SAMPLE,
            method=Method.WSTAR_EXACT,
        )
    return f_res, chi_res


def complete_sampling_approx_test(
    fit: SketchFit, sk: SketchedData, j: int, beta_hyp_j: float,
) -> TestResult:
    """Approximate marginal test for beta_0 without W*.

    Identical computation to the repeated-sketching marginal t (the W* ~
    (n/k) I approximation makes the same statistic approximately t_{k-p}
    under repeated samples); labeled with the sampling regime.
    """
    return complete_marginal_t_test(fit, sk, j, beta_hyp_j, target=Target.BETA_0)


def mc_calibrated_sampling_test(
    fit: SketchFit, gram, n: int, k: int, p: int, beta_hyp,
    mc_size: int = 10_000, seed=0,
) -> TestResult:
    """Joint test of beta_0 calibrated by simulating its pivot law.

    The observed statistic (b_s - h)'(X'X)(b_s - h)/p over the unbiased
    variance estimate SSR_s k/((n-p)(k-p)) is referred to draws of
    V/(U R) * (n-p)(k-p)/p with V ~ chi2_p, R ~ Beta((k-p+1)/2, (n-p)/2) and
    U the k SSR_s/sigma^2 law, independent.  The p-value is the add-one
    smoothed upper-tail fraction (1 + #{draws >= observed})/(mc_size + 1).
    """
    _require_kind(fit, FitKind.COMPLETE, "MC-calibrated test")
    ssr = _require_ssr(fit)
    if mc_size < 1:
        raise DomainError("mc_size must be >= 1")
    if n <= p or k <= p:
        raise DomainError(f"need n > p and k > p (got n={n}, k={k}, p={p})")
    gram = np.asarray(gram, dtype=float)
    d = fit.beta - np.asarray(beta_hyp, dtype=float).reshape(-1)
    obs = (float(d @ gram @ d) / p) / sigma2_hat_complete(ssr, n, k, p)
    rng = np.random.default_rng(seed)
    v = rng.chisquare(p, mc_size)
    r = rng.beta((k - p + 1) / 2.0, (n - p) / 2.0, mc_size)
    u = h_law_sample(ssr_s_law_params(n, k, p), rng.integers(2**63), mc_size)
    ref = v / (u * r) * (n - p) * (k - p) / p
    p_val = (1.0 + float(np.count_nonzero(ref >= obs))) / (mc_size + 1.0)
    return TestResult(
        statistic=obs,
        pivot_law=Law("mc_reference", (float(mc_size),)),
        p_value=p_val,
        target=Target.BETA_0,
        regime=Regime.REPEATED_SAMPLE,
        method=Method.MC_CALIBRATED,
    )


# ---------------------------------------------------------------------------
# partial sketch
# ---------------------------------------------------------------------------

def partial_univariate_chi2_test(fit: SketchFit, beta_F_hyp: float, k: int) -> TestResult:
    """Univariate (p = 1) partial pivot (k-2) beta_F / beta_p ~ chi2_k.

    Two-sided p-value by the equal-tail construction, since the reference
    law is asymmetric.
    """
    _require_kind(fit, FitKind.PARTIAL, "univariate chi2 test")
    if fit.beta.size != 1:
        raise DomainError("univariate pivot requires p = 1")
    bp = float(fit.beta[0])
    if bp == 0.0:
        raise ZeroDivisionError("partial estimate is exactly zero")
    stat = (k - 2.0) * beta_F_hyp / bp
    law = chi2(k)
    c = dist_cdf(law, stat) if stat > 0 else 0.0
    return TestResult(
        statistic=stat,
        pivot_law=law,
        p_value=float(min(1.0, 2.0 * min(c, 1.0 - c))),
        target=Target.BETA_F,
        regime=Regime.REPEATED_SKETCH,
        method=Method.PARTIAL_CHI2_UNIVARIATE,
    )


def partial_t_statistic(
    fit: SketchFit, sk: SketchedData, m_vec, extra_variance: float = 0.0,
) -> float:
    """Statistic of the partial-sketch zero-null t pivot for m'beta.

    m'b_p sqrt{(k-p+1) / (SSM_p gamma m'(Xs'Xs)^{-1}m - (m'b_p)^2 + extra)};
    ``extra_variance`` is the sampling regime's error-variance proxy (zero
    for the sketching regime).

    The bare bracket is a Cauchy-Schwarz gap in the (Xs'Xs)^{-1} metric, so
    a non-positive value can only arise from degeneracy or roundoff; it is
    reported as NegativeDenominator rather than clamped, because clamping
    would silently distort the test's calibration.
    """
    _require_kind(fit, FitKind.PARTIAL, "partial t statistic")
    if fit.SSM_p is None or fit.gamma is None:
        raise DomainError("partial fit is missing SSM_p/gamma")
    k, p = sk.spec.k, sk.p
    m_vec = np.asarray(m_vec, dtype=float).reshape(-1)
    if m_vec.size != p:
        raise DomainError(f"m has length {m_vec.size}, expected {p}")
    R = fit.gram_s_factor
    xty = (R.T @ (R @ fit.beta)) / fit.gamma
    _check_contrast(m_vec, xty)
    mb = float(m_vec @ fit.beta)
    bracket = fit.SSM_p * fit.gamma * _gram_inv_quad(R, m_vec) - mb * mb + extra_variance
    if bracket <= 0.0:
        raise NegativeDenominator(
            f"pivot denominator evaluated {bracket:.3e} <= 0 for this sketch realization"
        )
    return mb * math.sqrt((k - p + 1) / bracket)


def partial_linear_combination_test(
    fit: SketchFit, sk: SketchedData, m_vec,
    regime: Regime = Regime.REPEATED_SKETCH,
    sigma2_proxy: float | None = None,
) -> TestResult:
    """Zero-null test of m'beta via the partial-sketch t pivot (t_{k-p+1}).

    Exact for m'beta_F = 0 under repeated sketching.  For the sampling
    regime an error-variance term is added to the denominator; it defaults
    to the unbiased estimate SSR_s k/((n-p)(k-p)).
    """
    k, p = sk.spec.k, sk.p
    m_arr = np.asarray(m_vec, dtype=float).reshape(-1)
    if regime is Regime.REPEATED_SAMPLE and p >= 2:
        # beta_p stands in for the unobservable beta_0 direction
        _check_contrast(m_arr, fit.beta)
    extra = 0.0
    if regime is Regime.REPEATED_SAMPLE:
        if sigma2_proxy is None:
            sigma2_proxy = sigma2_hat_complete(_require_ssr(fit), sk.n, k, p)
        extra = sigma2_proxy
    stat = partial_t_statistic(fit, sk, m_arr, extra_variance=extra)
    df = k - p + 1
    return TestResult(
        statistic=stat,
        pivot_law=student_t(df),
        p_value=_two_sided_t(stat, df),
        target=Target.BETA_F if regime is Regime.REPEATED_SKETCH else Target.BETA_0,
        regime=regime,
        method=Method.PARTIAL_T,
    )


def _check_contrast(m_vec: np.ndarray, ref: np.ndarray) -> None:
    nm = float(np.linalg.norm(m_vec))
    nr = float(np.linalg.norm(ref))
    if nm == 0.0:
        raise DomainError("contrast vector m must be nonzero")
    if nr == 0.0:
        return
    if abs(float(m_vec @ ref)) / (nm * nr) >= 1.0 - 1e-12:
        raise AssumptionViolated(
            "m is (numerically) parallel to the degenerate direction; for "
            "m = X^T y the combination m'beta_p equals SSM_p, which follows an "
            "inverse-gamma law, and the t-form pivot does not apply"
        )


def partial_marginal_t_test(
    fit: SketchFit, sk: SketchedData, j: int,
    regime: Regime = Regime.REPEATED_SKETCH,
    sigma2_proxy: float | None = None,
) -> TestResult:
    """Zero-null test of coordinate j of the partial estimator (unit contrast)."""
    if not 0 <= j < sk.p:
        raise IndexError(f"coefficient index {j} outside [0, {sk.p})")
    e = np.zeros(sk.p)
    e[j] = 1.0
    return partial_linear_combination_test(fit, sk, e, regime, sigma2_proxy)
