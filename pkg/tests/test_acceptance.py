"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all;
under plain ``pytest -v`` the per-test outcome carries the same information).
The reference design (n = 10^4, p = 11, k = 21, coefficients -5..5, unit
error variance, m = 10^4 replicates) is executed once per sketch kind and
regime in session fixtures and shared across criteria.
"""

import math
import time

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

import sketch_infer as si
from sketch_infer.inference import Regime
from sketch_infer.sim_study import paper_config, run_repeated_sampling, run_repeated_sketching
from sketch_infer.sketch_ops import SketchKind, derive_seed

from conftest import ks_distance

KINDS = (SketchKind.GAUSSIAN, SketchKind.HADAMARD, SketchKind.CLARKSON_WOODRUFF)


def _report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num:02d} {status}: {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="session")
def sketching_runs():
    out = {}
    for kind in KINDS:
        cfg = paper_config(Regime.REPEATED_SKETCH, sketch_kinds=(kind,))
        t0 = time.perf_counter()
        out[kind] = (run_repeated_sketching(cfg), time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def sampling_runs():
    out = {}
    for kind in KINDS:
        cfg = paper_config(Regime.REPEATED_SAMPLE, sketch_kinds=(kind,))
        out[kind] = run_repeated_sampling(cfg)
    return out


@pytest.fixture(scope="session")
def wstar_instance():
    """10^4 repeated samples of the small exact-inference design (n=500, p=3, k=15)."""
    n, p, k = 500, 3, 15
    rng = np.random.default_rng(91)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    beta0 = np.array([1.0, -2.0, 0.5])
    sigma2 = 1.0
    reps = 10_000
    f_stats = np.empty(reps)
    c_stats = np.empty(reps)
    b_complete = np.empty((reps, p))
    b_star = np.empty((reps, p))
    for r in range(reps):
        y = X @ beta0 + rng.standard_normal(n)
        data = si.DataSet(X=X, y=y)
        sk = si.apply_gaussian(
            data, si.SketchSpec(kind=SketchKind.GAUSSIAN, k=k, seed=derive_seed(17, r)),
            want_w_star=True)
        star = si.fit_efficient_star(sk)
        e = y - X @ beta0
        f_res, c_res = si.wstar_exact_tests(star, sk, float(e @ e), beta0, sigma2=sigma2)
        f_stats[r] = f_res.statistic
        c_stats[r] = c_res.statistic
        b_complete[r] = si.fit_complete(sk).beta
        b_star[r] = star.beta
    return dict(n=n, p=p, k=k, f_stats=f_stats, c_stats=c_stats,
                b_complete=b_complete, b_star=b_star)


class TestCriterion01CompleteSketchLaw:
    def test_gaussian(self, sketching_runs):
        rep, secs = sketching_runs[SketchKind.GAUSSIAN]
        ks = rep.table("beta_s[0]", SketchKind.GAUSSIAN).ks_statistic
        _report(1, ks < 0.02 and secs < 120.0,
                f"gaussian beta_s1 KS={ks:.4f} (<0.02), runtime {secs:.0f}s (<120s)")

    def test_hadamard_and_cw(self, sketching_runs):
        ks_h = sketching_runs[SketchKind.HADAMARD][0].table("beta_s[0]", "hadamard").ks_statistic
        ks_c = sketching_runs[SketchKind.CLARKSON_WOODRUFF][0].table(
            "beta_s[0]", "clarkson_woodruff").ks_statistic
        _report(1, ks_h < 0.03 and ks_c < 0.03,
                f"hadamard KS={ks_h:.4f}, clarkson_woodruff KS={ks_c:.4f} (<0.03)")

    def test_gaussian_reference_invariant(self, sketching_runs):
        # the exact-law sketch anchors the approximate ones
        g = sketching_runs[SketchKind.GAUSSIAN][0].table("beta_s[0]", "gaussian").ks_statistic
        for kind in (SketchKind.HADAMARD, SketchKind.CLARKSON_WOODRUFF):
            other = sketching_runs[kind][0].table("beta_s[0]", kind.value).ks_statistic
            assert g <= other + 0.02


class TestCriterion02PartialSketchLaw:
    def test_gaussian(self, sketching_runs):
        ks = sketching_runs[SketchKind.GAUSSIAN][0].table("beta_p[0]", "gaussian").ks_statistic
        _report(2, ks < 0.03, f"gaussian beta_p1 KS vs representation draws = {ks:.4f} (<0.03)")


class TestCriterion03SketchingPivots:
    def test_null_pivots_beta6(self, sketching_runs):
        tol = {SketchKind.GAUSSIAN: 0.02, SketchKind.HADAMARD: 0.03,
               SketchKind.CLARKSON_WOODRUFF: 0.03}
        msgs = []
        ok = True
        for kind in KINDS:
            rep = sketching_runs[kind][0]
            kc = rep.table("pivot_complete_null[5]", kind.value).ks_statistic
            kp = rep.table("pivot_partial_zero[5]", kind.value).ks_statistic
            ok = ok and kc < tol[kind] and kp < tol[kind]
            msgs.append(f"{kind.value}: complete {kc:.4f} partial {kp:.4f} (<{tol[kind]})")
        _report(3, ok, "null pivots for beta_F6 -- " + "; ".join(msgs))

    def test_power_ordering_beta1(self, sketching_runs):
        rep = sketching_runs[SketchKind.GAUSSIAN][0]
        rc = rep.table("pivot_complete_null[0]", "gaussian").rejection_rate
        rp = rep.table("pivot_partial_zero[0]", "gaussian").rejection_rate
        _report(3, rc > rp,
                f"zero-null power at beta_F1: complete {rc:.3f} > partial {rp:.3f}")


class TestCriterion04SamplingPivots:
    def test_null_pivots_beta6(self, sampling_runs):
        msgs = []
        ok = True
        for kind in KINDS:
            rep = sampling_runs[kind]
            kc = rep.table("pivot_complete_null[5]", kind.value).ks_statistic
            kp = rep.table("pivot_partial_zero[5]", kind.value).ks_statistic
            ok = ok and kc < 0.03 and kp < 0.03
            msgs.append(f"{kind.value}: complete {kc:.4f} partial {kp:.4f}")
        _report(4, ok, "repeated-sampling null pivots for beta_6 (<0.03) -- " + "; ".join(msgs))


class TestCriterion05Coverage:
    def test_ci_coverage_beta_f1(self, sketching_runs):
        cov = sketching_runs[SketchKind.GAUSSIAN][0].table("beta_s[0]", "gaussian").coverage
        _report(5, 0.943 <= cov <= 0.957, f"95% CI coverage of beta_F1 = {cov:.4f} in [0.943, 0.957]")


class TestCriterion06Unbiasedness:
    def test_error_variance_estimator(self, sampling_runs):
        rep = sampling_runs[SketchKind.GAUSSIAN]
        s2 = rep.table("sigma2_hat", "gaussian").samples
        ssr = rep.table("ssr_s", "gaussian").samples
        n, k, p = 10_000, 21, 11
        se_s2 = s2.std() / math.sqrt(s2.size)
        target_ssr = (k - p) * (n - p) / k  # = 4756.67 for the reference design
        se_ssr = ssr.std() / math.sqrt(ssr.size)
        ok = abs(s2.mean() - 1.0) < 3 * se_s2 and abs(ssr.mean() - target_ssr) < 3 * se_ssr
        _report(6, ok,
                f"mean sigma2_hat = {s2.mean():.4f} (3SE {3 * se_s2:.4f}); "
                f"mean SSR_s = {ssr.mean():.1f} vs {target_ssr:.1f} (3SE {3 * se_ssr:.1f})")


class TestCriterion07Normalizations:
    def test_densities_integrate_to_one(self):
        results = []

        val, _ = integrate.quad(lambda u: si.ssr_s_law_pdf(u, 200, 15, 3), 0, np.inf, limit=500)
        results.append(("ssr law", abs(val - 1.0), 1e-5))

        params = si.HLawParams(alpha=5.0, lam=9.5)
        val, _ = integrate.quad(lambda u: si.h_law_pdf(u, params), 0, np.inf, limit=500)
        results.append(("H law", abs(val - 1.0), 1e-5))

        val, _ = integrate.quad(lambda r: si.ratio_law_pdf(r, 1.5, si.HLawParams(alpha=4.0, lam=6.0)),
                                0, np.inf, limit=500)
        results.append(("ratio law", abs(val - 1.0), 1e-5))

        rng = np.random.default_rng(42)
        X = rng.standard_normal((200, 1))
        gram = X.T @ X
        truth = si.ModelTruth(beta_0=np.array([0.7]), sigma2=1.3)
        val, _ = integrate.quad(
            lambda b: si.complete_sampling_pdf(np.array([b]), truth, gram, 200, 12, 1),
            -np.inf, np.inf, limit=400)
        results.append(("complete sampling density", abs(val - 1.0), 1e-5))

        X2 = rng.standard_normal((300, 1)) * 0.8
        truth2 = si.ModelTruth(beta_0=np.array([0.6]), sigma2=1.0)
        val, _ = integrate.quad(
            lambda b: si.partial_approx_pdf(np.array([b]), truth2, X2.T @ X2, 12, 1),
            -np.inf, np.inf, limit=400)
        results.append(("partial approx density", abs(val - 1.0), 1e-4))

        mom, _ = integrate.quad(lambda u: u * si.h_law_pdf(u, params), 0, np.inf,
                                limit=500, epsabs=1e-12, epsrel=1e-12)
        target = 4.0 * params.alpha * params.lam
        results.append(("H first moment", abs(mom - target) / target, 1e-8))

        ok = all(err < tol for _, err, tol in results)
        detail = "; ".join(f"{name} err {err:.2e} (<{tol:g})" for name, err, tol in results)
        _report(7, ok, detail)


class TestCriterion08SpecialFunctions:
    def test_identities_and_oracles(self):
        checks = []
        z = 1.5
        checks.append(("M(1,2,1.5)", abs(si.kummer_m(1, 2, z) - (math.exp(z) - 1) / z)
                       / ((math.exp(z) - 1) / z), 1e-10))
        with mpmath.workdps(60):
            ref = float(mpmath.hyp1f1(mpmath.mpf("3.5"), mpmath.mpf("7.25"), -12))
        checks.append(("M(3.5,7.25,-12)", abs(si.kummer_m(3.5, 7.25, -12.0) - ref) / abs(ref), 1e-9))

        exact = math.exp(2.0) * float(__import__("scipy.special", fromlist=["exp1"]).exp1(2.0))
        checks.append(("U(1,1,2)", abs(si.kummer_u(1, 1, 2.0) - exact) / exact, 1e-8))
        with mpmath.workdps(40):
            refu = float(mpmath.hyperu(3.0, -1.5, 0.7))
        checks.append(("U(3,-1.5,0.7)", abs(si.kummer_u(3.0, -1.5, 0.7) - refu) / refu, 1e-7))

        xk = 3.0
        refk = math.sqrt(math.pi / (2 * xk)) * math.exp(-xk)
        checks.append(("K_{1/2}(3)", abs(si.bessel_k(0.5, xk) - refk) / refk, 1e-10))
        refq, _ = integrate.quad(lambda t: math.exp(-0.9 * math.cosh(t)) * math.cosh(4.75 * t),
                                 0, 50, limit=200)
        checks.append(("K_{4.75}(0.9)", abs(si.bessel_k(4.75, 0.9) - refq) / refq, 1e-8))

        worst_rt = 0.0
        for law in (si.special_fn.chi2(5), si.special_fn.student_t(10),
                    si.special_fn.beta_law(2, 3)):
            for x in np.linspace(0.3, 3.0, 7):
                q = si.dist_cdf(law, x)
                if 1e-12 < q < 1 - 1e-12:
                    worst_rt = max(worst_rt, abs(si.dist_quantile(law, q) - x))
        checks.append(("cdf/quantile round trip", worst_rt, 1e-8))

        ok = all(err < tol for _, err, tol in checks)
        _report(8, ok, "; ".join(f"{n} err {e:.2e} (<{t:g})" for n, e, t in checks))


class TestCriterion09UnivariatePartialPivot:
    def test_chi2_12(self):
        n, k = 500, 12
        rng = np.random.default_rng(93)
        x = rng.standard_normal(n) + 1.0
        y = 2.0 * x + rng.standard_normal(n)
        data = si.DataSet(X=x[:, None], y=y)
        bF = si.fit_full(data).beta_F[0]
        pin = si.PartialInputs(Xty=data.X.T @ y, yty=float(y @ y))
        draws = np.empty(10_000)
        for r in range(draws.size):
            sk = si.apply_gaussian(data, si.SketchSpec(kind=SketchKind.GAUSSIAN, k=k,
                                                       seed=derive_seed(29, r)))
            fit = si.fit_partial(sk, pin)
            draws[r] = si.partial_univariate_chi2_test(fit, bF, k).statistic
        ks = ks_distance(draws, lambda v: stats.chi2.cdf(v, k))
        _report(9, ks < 0.02, f"(k-2) beta_F / beta_p KS vs chi2_12 = {ks:.4f} (<0.02)")


class TestCriterion10WStarExact:
    def test_f_pivot(self, wstar_instance):
        w = wstar_instance
        ks = ks_distance(w["f_stats"], lambda x: stats.f.cdf(x, w["p"], w["n"] - w["p"]))
        _report(10, ks < 0.02, f"F_(3,497) pivot KS = {ks:.4f} (<0.02)")

    def test_chi2_pivot(self, wstar_instance):
        w = wstar_instance
        ks = ks_distance(w["c_stats"], lambda x: stats.chi2.cdf(x, w["p"]))
        _report(10, ks < 0.02, f"chi2_3 pivot (sigma2 known) KS = {ks:.4f} (<0.02)")


class TestCriterion11EfficiencyDominance:
    def test_trace_ordering(self, wstar_instance):
        w = wstar_instance
        bc, bw = w["b_complete"], w["b_star"]
        diff = np.trace(np.cov(bc.T)) - np.trace(np.cov(bw.T))
        nb = 20
        batches = [
            np.trace(np.cov(bc[i::nb].T)) - np.trace(np.cov(bw[i::nb].T)) for i in range(nb)
        ]
        se = np.std(batches) / math.sqrt(nb)
        _report(11, diff > -se,
                f"trace cov(beta_s) - trace cov(beta_s*) = {diff:.4f} "
                f"(needs > -1 MC SE = {-se:.4f})")


class TestCriterion12Adjudications:
    def test_partial_residual_expectation_constant(self):
        # which closed-form constant matches the Wishart-level Monte Carlo?
        rng = np.random.default_rng(70)
        n, p, k = 200, 3, 30
        X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.standard_normal(n)
        gram, a = X.T @ X, X.T @ y
        yty = float(y @ y)
        ssm_f = float(a @ np.linalg.solve(gram, a))
        gamma = (k - p - 1) / k
        reps = 400_000
        G = stats.wishart(df=k, scale=gram / k).rvs(size=reps,
                                                    random_state=np.random.default_rng(71))
        vals = np.empty(reps)
        for i in range(reps):
            bp = gamma * np.linalg.solve(G[i], a)
            vals[i] = yty - 2 * float(a @ bp) + float(bp @ gram @ bp)
        mc, se = vals.mean(), vals.std() / math.sqrt(reps)
        default = si.partial_residual_ss_expectation(yty, ssm_f, k, p)
        corrected = si.partial_residual_ss_expectation(yty, ssm_f, k, p,
                                                       second_moment_correction=True)
        z_def = (default - mc) / se
        z_cor = (corrected - mc) / se
        resolution = (
            "second-moment-corrected constant ((k-p-1)(p+1)+2) agrees with MC"
            if abs(z_cor) < abs(z_def) else "default constant agrees with MC"
        )
        _report(12, abs(z_cor) < 4.0,
                f"partial residual SS: MC {mc:.2f}+-{se:.3f}; default z={z_def:+.2f}, "
                f"corrected z={z_cor:+.2f} -> {resolution}")

    def test_sketching_rep_scaling(self):
        # the gamma-law convention for the 1/R factor, settled by unbiasedness
        # and the end-to-end distribution of the actual estimator
        data_rng = np.random.default_rng(73)
        n, p, k = 300, 3, 15
        X = np.column_stack([np.ones(n), data_rng.standard_normal((n, p - 1))])
        y = X @ np.array([1.0, -2.0, 0.5]) + data_rng.standard_normal(n)
        data = si.DataSet(X=X, y=y)
        full = si.fit_full(data)
        gram_inv = np.linalg.inv(X.T @ X)
        m_vec = np.array([0.0, 1.0, 0.0])
        rep = si.sample_partial_sketching_rep(m_vec, full, gram_inv, k, p, 100_000, seed=74)
        pin = si.PartialInputs(Xty=X.T @ y, yty=float(y @ y))
        direct = np.empty(10_000)
        for r in range(direct.size):
            sk = si.apply_gaussian(data, si.SketchSpec(kind=SketchKind.GAUSSIAN, k=k,
                                                       seed=derive_seed(75, r)))
            direct[r] = si.fit_partial(sk, pin).beta[1]
        target = float(m_vec @ full.beta_F)
        se = rep.std() / math.sqrt(rep.size)
        ref = np.sort(rep)
        ks = ks_distance(direct, lambda x: np.searchsorted(ref, x, side="right") / ref.size)
        ok = abs(rep.mean() - target) < 3 * se and ks < 0.02
        _report(12, ok,
                f"sketching representation with R = chi2_(k-p+1)/(k-p-1): mean "
                f"{rep.mean():.4f} vs m'beta_F {target:.4f} (3SE {3 * se:.4f}), "
                f"end-to-end KS {ks:.4f} -> divisor k-p-1 (= gamma k) is the "
                f"unbiased reading of the two-parameter gamma notation")

    def test_sampling_rep_prefactor(self):
        # (k-p-1)/R matches simulation; the printed-looking (k-p+1)/R factor
        # inflates the mean by (k-p+1)/(k-p-1) and is rejected
        rng = np.random.default_rng(76)
        n, p, k = 500, 3, 15
        X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        truth = si.ModelTruth(beta_0=np.array([1.0, -2.0, 0.5]), sigma2=1.0)
        gram = X.T @ X
        m_vec = np.array([0.0, 1.0, 0.0])
        rep = si.sample_partial_sampling_rep(m_vec, truth, gram, k, p, 200_000, seed=77)
        gamma = (k - p - 1) / k
        direct = np.empty(10_000)
        for r in range(direct.size):
            yy = X @ truth.beta_0 + rng.standard_normal(n)
            S = rng.standard_normal((k, n)) / math.sqrt(k)
            Xs = S @ X
            direct[r] = gamma * float(np.linalg.solve(Xs.T @ Xs, X.T @ yy)[1])
        target = float(m_vec @ truth.beta_0)
        inflated = target * (k - p + 1) / (k - p - 1)
        se = rep.std() / math.sqrt(rep.size)
        ref = np.sort(rep)
        ks = ks_distance(direct, lambda x: np.searchsorted(ref, x, side="right") / ref.size)
        ok = abs(rep.mean() - target) < 3 * se and abs(rep.mean() - inflated) > 10 * se and ks < 0.02
        _report(12, ok,
                f"sampling representation: mean {rep.mean():.4f} matches m'beta_0 "
                f"{target:.4f} and rejects the (k-p+1)/(k-p-1)-inflated value "
                f"{inflated:.4f} (SE {se:.4f}); end-to-end KS {ks:.4f} -> "
                f"prefactor (k-p-1)/R restores unbiasedness")
