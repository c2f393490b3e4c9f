import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma
from scipy.stats import norm

from nontakeup import _quadrature as qd
from nontakeup.exceptions import ConfigurationError


@pytest.mark.parametrize("n", [4, 8, 16])
def test_half_range_rule_integrates_polynomials(n):
    y, w = qd.half_range_hermite(n)
    assert np.all(y > 0) and np.all(w > 0)
    assert w.sum() == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)
    for k in range(2 * n):
        exact = 0.5 * gamma((k + 1) / 2)
        assert np.sum(w * y**k) == pytest.approx(exact, rel=1e-10)


def test_half_range_rule_mass_is_exact_at_default_size():
    _, w = qd.half_range_hermite(16)
    assert math.fsum(w) == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-16)


@given(st.floats(-40, 40))
def test_mills_ratio(u):
    direct = norm.pdf(u) / norm.cdf(u) if u > -30 else None
    value = qd.mills(np.array([u]))[0]
    if direct is not None:
        assert value == pytest.approx(direct, rel=1e-9)
    assert value >= max(0.0, -u)


def _one_group(a, s):
    a = np.asarray(a, dtype=float)
    s = np.asarray(s, dtype=float)
    return a, s, np.array([0]), np.zeros(len(a), dtype=int)


@pytest.mark.parametrize("method", qd.METHODS)
def test_nodes_integrate_single_household(method):
    a, s, starts, gid = _one_group([0.3, -0.8, 1.2], [0.9, -0.9, 0.9])
    v, logw = qd.nodes(method, 32, a, s, starts, gid)
    assert v.shape == logw.shape == (1, 32)
    approx = np.sum(np.exp(logw[0]) * np.prod(norm.cdf(a[:, None] + s[:, None] * v[0][None, :]), axis=0))

    def f(x):
        return np.prod(norm.cdf(a + s * x)) * norm.pdf(x)

    exact, _ = quad(f, -np.inf, np.inf, epsabs=0, epsrel=1e-13)
    assert approx == pytest.approx(exact, rel=1e-9)


def test_two_sided_nodes_bracket_the_mode():
    a, s, starts, gid = _one_group([2.0] * 5, [2.5] * 5)
    mu, curv = qd.find_mode(a, s, starts, gid)
    v, _ = qd.nodes("two-sided", 32, a, s, starts, gid)
    assert np.sum(v[0] < mu[0]) == 16 and np.sum(v[0] > mu[0]) == 16
    assert curv[0] > 0


def test_node_arguments_checked():
    a, s, starts, gid = _one_group([0.0], [1.0])
    with pytest.raises(ConfigurationError):
        qd.nodes("simpson", 32, a, s, starts, gid)
    with pytest.raises(ConfigurationError):
        qd.nodes("gh", 1, a, s, starts, gid)
    with pytest.raises(ConfigurationError):
        qd.half_range_hermite(0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(0.0, 3.0), st.integers(1, 8))
def test_mode_is_stationary(z, sigma, t):
    a, s, starts, gid = _one_group([z] * t, [sigma] * t)
    mu, _ = qd.find_mode(a, s, starts, gid)
    d, _ = qd._h_grad(a, s, np.full(t, mu[0]), starts)
    assert abs(d[0] - mu[0]) < 1e-8 * max(1.0, abs(mu[0]))
