import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.stats import norm
from sklearn.base import clone

from oracles import probit_loglik_longhand, re_loglik_adaptive
from nontakeup.design import GAP, GAP_SQ, DesignInfo
from nontakeup.estimator import (
    EstimationResult,
    LongRunEffect,
    MarginalEffects,
    PooledProbit,
    RandomEffectsProbit,
    long_run_effect,
    loglik_pooled,
    loglik_re,
    marginal_effects,
    model_suite,
    rho,
    stars,
)
from nontakeup.exceptions import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    InputValidationError,
    SingularDesignError,
)


def panel_data(seed, n_groups=100, waves=4, k=3, sigma=1.0, beta=None, unbalanced=False):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, waves + 1, n_groups) if unbalanced else np.full(n_groups, waves)
    groups = np.repeat(np.arange(n_groups), sizes)
    n = len(groups)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    beta = np.linspace(-0.5, 0.8, k) if beta is None else np.asarray(beta, dtype=float)
    latent = X @ beta + sigma * rng.normal(size=n_groups)[groups] + rng.normal(size=n)
    return X, (latent > 0).astype(float), groups.astype(str)


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(len(x)):
        step = h * max(1.0, abs(x[j]))
        up, down = x.copy(), x.copy()
        up[j] += step
        down[j] -= step
        g[j] = (f(up) - f(down)) / (2 * step)
    return g


# ---------------------------------------------------------------- rho and stars


def test_rho_closed_form():
    assert rho(0.0) == 0.0
    assert rho(1.0) == 0.5
    assert rho(math.sqrt(3.0)) == 0.75


@given(st.floats(0, 1e6))
def test_rho_in_unit_interval(sigma):
    assert 0.0 <= rho(sigma) < 1.0 or sigma > 1e7


def test_stars_thresholds():
    assert stars(0.005) == "***"
    assert stars(0.03) == "**"
    assert stars(0.07) == "*"
    assert stars(0.2) == ""
    assert stars(float("nan")) == ""


# ---------------------------------------------------------------- pooled likelihood


def test_pooled_single_observation_at_zero():
    ll, _ = loglik_pooled(np.ones((1, 1)), np.array([1.0]), np.array([0.0]))
    assert ll == pytest.approx(math.log(0.5), abs=1e-15)


def test_pooled_tends_to_zero_from_below():
    values = [loglik_pooled(np.ones((1, 1)), np.array([1.0]), np.array([z]))[0] for z in (2, 5, 10, 40)]
    assert all(v <= 0 for v in values)
    assert values == sorted(values)
    assert values[-1] > -1e-300


def test_pooled_matches_longhand():
    X, y, _ = panel_data(1, n_groups=30, waves=2)
    beta = np.array([0.1, -0.4, 0.7])
    w = np.random.default_rng(2).uniform(0.5, 2.0, len(y))
    ll, _ = loglik_pooled(X, y, beta, w)
    assert ll == pytest.approx(probit_loglik_longhand(X, y, beta, w), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_pooled_gradient_matches_finite_differences(seed):
    X, y, _ = panel_data(seed, n_groups=40, waves=2)
    beta = np.random.default_rng(seed).normal(scale=0.7, size=3)
    _, grad = loglik_pooled(X, y, beta)
    fd = fd_gradient(lambda b: loglik_pooled(X, y, b, check_rank=False)[0], beta)
    assert np.max(np.abs(grad - fd)) / max(1.0, np.max(np.abs(fd))) < 1e-6


def test_pooled_rejects_rank_deficiency_naming_column():
    X, y, _ = panel_data(3, n_groups=20, waves=2)
    X = np.column_stack([X, 2 * X[:, 1]])
    with pytest.raises(SingularDesignError) as info:
        loglik_pooled(pd.DataFrame(X, columns=["const", "a", "b", "a2"]), y, np.zeros(4))
    assert info.value.columns == ["a2"]


def test_pooled_non_finite_is_domain_error():
    with pytest.raises(DomainError):
        loglik_pooled(np.ones((1, 1)), np.array([1.0]), np.array([np.nan]))


# ---------------------------------------------------------------- random-effects likelihood


def test_re_single_observation_symmetry():
    for sigma in (0.0, 0.5, 1.0, 3.0):
        ll, _ = loglik_re(np.ones((1, 1)), np.array([1.0]), ["h"], np.array([0.0]), sigma)
        assert ll == pytest.approx(math.log(0.5), abs=1e-10)


@pytest.mark.parametrize("quadrature", ["two-sided", "adaptive", "gh"])
def test_re_sigma_zero_equals_pooled(quadrature):
    X, y, g = panel_data(4, n_groups=60, unbalanced=True)
    beta = np.array([0.2, 0.5, -0.3])
    w = np.random.default_rng(5).uniform(0.5, 2.0, len(y))
    w = pd.Series(w).groupby(g).transform("mean").to_numpy()
    ll_re, _ = loglik_re(X, y, g, beta, 0.0, w, quadrature=quadrature)
    ll_p, _ = loglik_pooled(X, y, beta, w)
    assert abs(ll_re - ll_p) <= 1e-12 * max(1.0, abs(ll_p))


@pytest.mark.parametrize("quadrature,tol", [("two-sided", 1e-8), ("adaptive", 1e-6)])
def test_re_matches_adaptive_integration(quadrature, tol):
    X, y, g = panel_data(6, n_groups=5, waves=4)
    for beta, sigma in [(np.array([0.3, -0.6, 0.9]), 0.7), (np.array([-1.0, 1.5, 0.2]), 2.5)]:
        ll, _ = loglik_re(X, y, g, beta, sigma, quadrature=quadrature)
        assert ll == pytest.approx(re_loglik_adaptive(X, y, g, beta, sigma), abs=tol)


def test_re_gh_matches_oracle_at_moderate_sigma():
    X, y, g = panel_data(7, n_groups=5, waves=3)
    beta = np.array([0.1, 0.4, -0.2])
    ll, _ = loglik_re(X, y, g, beta, 0.5, quadrature="gh")
    assert ll == pytest.approx(re_loglik_adaptive(X, y, g, beta, 0.5), abs=1e-8)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10_000), st.floats(0.0, 3.0), st.floats(0.1, 3.0))
def test_re_node_count_convergence(seed, sigma, scale):
    X, y, g = panel_data(seed, n_groups=40, waves=5, unbalanced=True)
    beta = np.random.default_rng(seed).normal(scale=scale, size=3)
    beta *= min(1.0, 10.0 / np.max(np.abs(X @ beta)))
    a, _ = loglik_re(X, y, g, beta, sigma, nodes=30)
    b, _ = loglik_re(X, y, g, beta, sigma, nodes=50)
    assert abs(a - b) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_re_gradient_matches_finite_differences(seed):
    X, y, g = panel_data(seed, n_groups=30, waves=4)
    rng = np.random.default_rng(seed)
    beta = rng.normal(scale=0.7, size=3)
    sigma = float(rng.uniform(0.05, 2.5))
    w = rng.uniform(0.5, 2.0, len(y))
    _, grad = loglik_re(X, y, g, beta, sigma, w)
    x0 = np.r_[beta, sigma]
    fd = fd_gradient(lambda p: loglik_re(X, y, g, p[:3], p[3], w, check_rank=False)[0], x0)
    assert np.max(np.abs(grad - fd)) / max(1.0, np.max(np.abs(fd))) < 1e-6


def test_re_argument_checks():
    X, y, g = panel_data(8, n_groups=5)
    with pytest.raises(ConfigurationError):
        loglik_re(X, y, g, np.zeros(3), 1.0, nodes=1)
    with pytest.raises(DomainError):
        loglik_re(X, y, g, np.zeros(3), -0.1)
    with pytest.raises(InputValidationError):
        loglik_re(X, y, g, np.zeros(2), 1.0)


# ---------------------------------------------------------------- fitting


@pytest.fixture(scope="module")
def re_fit():
    X, y, g = panel_data(11, n_groups=400, waves=4, sigma=1.0)
    est = RandomEffectsProbit().fit(pd.DataFrame(X, columns=["const", "x1", "x2"]), y, groups=g)
    return est, X, y, g


def test_re_fit_reports_consistent_result(re_fit):
    est, X, y, g = re_fit
    res = est.result_
    assert res.converged
    assert res.grad_norm < 1e-4
    assert res.hessian_pd
    ll, _ = loglik_re(X, y, g, res.coef, res.sigma)
    assert res.loglik == ll
    assert res.rho == pytest.approx(rho(res.sigma))
    assert 0 <= res.rho < 1
    assert res.nodes == 32
    assert np.all(res.se > 0)


def test_re_fit_is_a_local_maximum(re_fit):
    est, X, y, g = re_fit
    res = est.result_
    ll0 = res.loglik
    rng = np.random.default_rng(0)
    for _ in range(5):
        d = rng.normal(size=4) * 1e-3
        ll, _ = loglik_re(X, y, g, res.coef + d[:3], res.sigma * math.exp(d[3]))
        assert ll <= ll0 + 1e-9


def test_re_coef_table_and_roundtrip(re_fit):
    res = re_fit[0].result_
    table = res.coef_table()
    assert list(table.index[-2:]) == ["sigma", "rho"]
    assert {"estimate", "se", "p", "stars"} <= set(table.columns)
    back = EstimationResult.from_dict(res.to_dict())
    assert np.array_equal(back.coef, res.coef)
    assert back.sigma == res.sigma
    assert np.array_equal(back.cov, res.cov)


def test_sklearn_api(re_fit):
    est, X, y, g = re_fit
    proba = est.predict_proba(X)
    assert proba.shape == (len(y), 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(np.unique(est.predict(X))) <= {0.0, 1.0}
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert not hasattr(twin, "result_")


def test_reparameterisation_leaves_maximum_unchanged():
    X, y, g = panel_data(12, n_groups=200, waves=3)
    a = RandomEffectsProbit().fit(X, y, groups=g).result_
    shifted = X.copy()
    shifted[:, 1] += 3.7
    b = RandomEffectsProbit().fit(shifted, y, groups=g).result_
    assert abs(a.loglik - b.loglik) < 1e-8
    assert b.coef[0] == pytest.approx(a.coef[0] - 3.7 * a.coef[1], abs=1e-5)
    p = PooledProbit().fit(X, y).result_
    q = PooledProbit().fit(shifted, y).result_
    assert abs(p.loglik - q.loglik) < 1e-8


@pytest.mark.parametrize("kind", ["pooled", "re"])
def test_constant_weights_reproduce_unweighted(kind):
    X, y, g = panel_data(13, n_groups=150, waves=3)
    make = PooledProbit if kind == "pooled" else RandomEffectsProbit
    plain = make().fit(X, y, groups=g).result_
    c = 2.5
    weighted = make().fit(X, y, groups=g, sample_weight=np.full(len(y), c)).result_
    np.testing.assert_allclose(weighted.coef, plain.coef, rtol=0, atol=1e-8)
    assert weighted.sigma == pytest.approx(plain.sigma, abs=1e-8)
    assert weighted.loglik == pytest.approx(c * plain.loglik, rel=1e-12)


def test_separation_raises_with_trajectory():
    x = np.linspace(-1, 1, 40)
    X = np.column_stack([np.ones_like(x), x])
    y = (x > 0).astype(float)
    for est in (PooledProbit(), RandomEffectsProbit()):
        with pytest.raises(ConvergenceError) as info:
            est.fit(X, y, groups=np.arange(40) // 2)
        assert info.value.trajectory


def test_sigma_zero_truth_gives_small_rho():
    X, y, g = panel_data(14, n_groups=1000, waves=5, sigma=0.0)
    res = RandomEffectsProbit().fit(X, y, groups=g).result_
    assert res.rho < 0.05


def test_cluster_covariance():
    X, y, g = panel_data(15, n_groups=300, waves=4, sigma=1.0)
    oim = PooledProbit().fit(X, y, groups=g).result_
    clu = PooledProbit(cov_type="cluster").fit(X, y, groups=g).result_
    np.testing.assert_array_equal(oim.coef, clu.coef)
    # within-household correlation inflates the intercept's variance
    assert clu.se[0] > oim.se[0]
    with pytest.raises(ConfigurationError):
        PooledProbit(cov_type="cluster").fit(X, y)


def test_re_needs_groups_and_nodes():
    X, y, g = panel_data(16, n_groups=10)
    with pytest.raises(InputValidationError):
        RandomEffectsProbit().fit(X, y)
    with pytest.raises(ConfigurationError):
        RandomEffectsProbit(n_nodes=1).fit(X, y, groups=g)
    with pytest.raises(ConfigurationError):
        RandomEffectsProbit(quadrature="simpson").fit(X, y, groups=g)


def test_model_suite_empty_frame():
    with pytest.raises(InputValidationError):
        model_suite(pd.DataFrame())


# ---------------------------------------------------------------- marginal effects


def fixed_result(coef, names, kind="pooled", sigma=0.0, design=None, cov=None):
    k = len(coef)
    params = np.r_[coef, math.log(sigma)] if kind == "re" else np.asarray(coef, dtype=float)
    return EstimationResult(
        model="test", kind=kind, feature_names=list(names), coef=np.asarray(coef, dtype=float),
        se=np.zeros(k), sigma=sigma, sigma_se=0.0, rho=rho(sigma), rho_se=0.0, loglik=0.0,
        n_obs=0, n_groups=0, iterations=0, grad_norm=0.0, converged=True, hessian_pd=True,
        nodes=None, quadrature=None, weighted=False, cov_type="oim", params=params,
        cov=np.eye(len(params)) * 0.01 if cov is None else cov, design=design,
    )


def test_marginal_effect_at_zero_is_phi0():
    res = fixed_result([0.0, 1.0], ["const", "x"])
    me = marginal_effects(res, np.column_stack([np.ones(10), np.zeros(10)]))
    assert me["x"] == pytest.approx(norm.pdf(0.0), abs=1e-15)
    assert me["x"] == pytest.approx(0.3989422804, abs=1e-10)


def test_zero_coefficients_give_zero_effects():
    names = ["const", GAP, GAP_SQ, "female", "age_group[25-34]", "age_group[35-44]"]
    info = DesignInfo(
        model="M0", columns=names, polynomial={GAP: (GAP, GAP_SQ)},
        blocks={"female": ["female"], "age_group": ["age_group[25-34]", "age_group[35-44]"]},
    )
    rng = np.random.default_rng(0)
    gap = rng.uniform(size=50)
    age = rng.integers(0, 3, 50)
    X = np.column_stack([np.ones(50), gap, gap**2, rng.integers(0, 2, 50), age == 1, age == 2]).astype(float)
    for kind, sigma in (("pooled", 0.0), ("re", 1.3)):
        me = marginal_effects(fixed_result(np.zeros(6), names, kind, sigma, info), X)
        assert me.names == [GAP, "female", "age_group[25-34]", "age_group[35-44]"]
        assert me.kinds == ["polynomial", "discrete", "discrete", "discrete"]
        np.testing.assert_array_equal(me.effects, 0.0)


def test_effect_kinds_by_hand():
    names = ["const", GAP, GAP_SQ, "blk[b]", "blk[c]"]
    info = DesignInfo(model="M0", columns=names, polynomial={GAP: (GAP, GAP_SQ)}, blocks={"blk": ["blk[b]", "blk[c]"]})
    beta = np.array([-0.2, 1.1, -0.5, 0.4, -0.3])
    sigma = 0.8
    X = np.array([[1, 0.2, 0.04, 1, 0], [1, 0.9, 0.81, 0, 1], [1, 0.5, 0.25, 0, 0]], dtype=float)
    me = marginal_effects(fixed_result(beta, names, "re", sigma, info), X)
    s = 1 / math.sqrt(1 + sigma**2)
    z = X @ beta
    gap_effect = np.mean(norm.pdf(s * z) * s * (beta[1] + 2 * beta[2] * X[:, 1]))
    assert me[GAP] == pytest.approx(gap_effect, rel=1e-13)
    base = z - X[:, 3] * beta[3] - X[:, 4] * beta[4]
    blk_b = np.mean(norm.cdf(s * (base + beta[3])) - norm.cdf(s * base))
    assert me["blk[b]"] == pytest.approx(blk_b, rel=1e-13)
    with pytest.raises(KeyError):
        me["missing"]


def test_confidence_intervals_nested(re_fit):
    est, X, y, g = re_fit
    me = marginal_effects(est.result_, X)
    t = me.table()
    assert np.all(t.ci99_low <= t.ci95_low) and np.all(t.ci95_low <= t.ci90_low)
    assert np.all(t.ci90_high <= t.ci95_high) and np.all(t.ci95_high <= t.ci99_high)
    assert np.all(t.ci90_low <= t.effect) and np.all(t.effect <= t.ci90_high)


def test_delta_method_matches_parametric_bootstrap():
    rng = np.random.default_rng(21)
    n = 2000
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), x])
    y = (X @ np.array([-0.2, 0.8]) + rng.normal(size=n) > 0).astype(float)
    res = PooledProbit().fit(X, y).result_
    me = marginal_effects(res, X)
    delta_width = me.table()["ci95_high"]["x1"] - me.table()["ci95_low"]["x1"]
    p = norm.cdf(X @ res.coef)
    boot = []
    for _ in range(400):
        y_star = (rng.uniform(size=n) < p).astype(float)
        r = PooledProbit().fit(X, y_star).result_
        boot.append(marginal_effects(r, X)["x1"])
    lo, hi = np.quantile(boot, [0.025, 0.975])
    assert abs(delta_width / (hi - lo) - 1) < 0.15


# ---------------------------------------------------------------- long-run effects


def test_long_run_sum_of_effects():
    assert float(long_run_effect([0.36, -0.09, 0.01], "receipt_share")) == pytest.approx(0.28, abs=1e-15)
    assert float(long_run_effect([0.0, 0.0, 0.0], "income")) == 0.0


def test_long_run_income_coefficients():
    names = ["const", "income_lag1", "income_lag2", "income_lag3"]
    res = fixed_result([0.1, -0.05, -0.03, -0.016], names)
    lr = long_run_effect(res, "income")
    assert lr.estimate == pytest.approx(-0.096, abs=1e-15)
    assert lr.se == pytest.approx(math.sqrt(3 * 0.01))


def test_long_run_from_marginal_effects_has_delta_se():
    names = ["const", "receipt_share_lag1", "receipt_share_lag2", "receipt_share_lag3"]
    res = fixed_result([0.0, 0.4, -0.1, 0.05], names)
    X = np.column_stack([np.ones(20), np.random.default_rng(1).uniform(size=(20, 3))])
    me = marginal_effects(res, X)
    lr = long_run_effect(me, "receipt_share")
    assert isinstance(lr, LongRunEffect)
    assert lr.estimate == pytest.approx(sum(me[n] for n in names[1:]))
    assert lr.se > 0
    with pytest.raises(KeyError):
        long_run_effect(me, "income")
    with pytest.raises(KeyError):
        long_run_effect(res, "shock_volatility")


def test_marginal_effects_type():
    res = fixed_result([0.0, 1.0], ["const", "x"])
    assert isinstance(marginal_effects(res, np.ones((3, 2))), MarginalEffects)
