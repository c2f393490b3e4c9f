"""Pooled and random-effects probit take-up models.

The pooled model sets ``Pr(takeup_it = 1) = Phi(x_it' beta)``.  The
random-effects model adds a household intercept ``sigma * v_i`` with
``v_i ~ N(0, 1)`` integrated out of each household's likelihood by
quadrature (see :mod:`nontakeup._quadrature`).  Both are fitted by BFGS on
analytic gradients followed by Newton polishing; standard errors come from
the inverse observed information.

Survey weights enter as a pseudo-likelihood.  In the random-effects model a
household's weight is the mean of its observation weights.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.special import log_ndtr, logsumexp, ndtr
from scipy.stats import norm
from sklearn.base import BaseEstimator, ClassifierMixin

from . import _quadrature
from ._optimize import minimize
from .design import LONG_TERM_GROUPS, MODELS, DesignInfo, design_matrix
from .exceptions import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    InputValidationError,
    SingularDesignError,
)

__all__ = [
    "EstimationResult",
    "MarginalEffects",
    "LongRunEffect",
    "PooledProbit",
    "RandomEffectsProbit",
    "check_full_rank",
    "fit",
    "loglik_pooled",
    "loglik_re",
    "long_run_effect",
    "marginal_effects",
    "model_suite",
    "rho",
    "stars",
]

DEFAULT_NODES = 32
DEFAULT_QUADRATURE = "two-sided"
CI_LEVELS = (0.90, 0.95, 0.99)
# a fitted probability this close to the observed outcome for every
# observation means the data are perfectly separated
_SEPARATION_LL = -1e-7


def rho(sigma: float) -> float:
    """Share of latent variance due to the household effect."""
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    s2 = sigma * sigma
    return s2 / (s2 + 1.0)


def stars(p: float) -> str:
    if not np.isfinite(p):
        return ""
    return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""


# ---------------------------------------------------------------- data prep


def _dot(X: np.ndarray, b: np.ndarray) -> np.ndarray:
    # elementwise sums avoid BLAS so results do not depend on thread count
    return (X * b).sum(axis=1)


def _tdot(X: np.ndarray, r: np.ndarray) -> np.ndarray:
    return (X * r[:, None]).sum(axis=0)


def _column_names(X, names=None) -> list[str]:
    if names is not None:
        return [str(n) for n in names]
    if isinstance(X, pd.DataFrame):
        return [str(c) for c in X.columns]
    return [f"x{j}" for j in range(np.shape(X)[1])]


def _arrays(X, y, weights=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputValidationError("design matrix must be two-dimensional")
    y = np.asarray(y, dtype=float).ravel()
    if len(y) == 0:
        raise InputValidationError("no observations")
    if len(y) != len(X):
        raise InputValidationError("outcome and design have different lengths")
    if not np.all((y == 0) | (y == 1)):
        raise InputValidationError("outcome must be binary (0/1)")
    if not np.all(np.isfinite(X)):
        raise DomainError("design matrix contains non-finite values")
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float).ravel()
    if len(w) != len(y):
        raise InputValidationError("weights and outcome have different lengths")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DomainError("weights must be finite and non-negative")
    if not w.sum() > 0:
        raise InputValidationError("weights sum to zero")
    return X, y, w


def check_full_rank(X, names: Optional[Sequence[str]] = None, tol: float = 1e-10) -> None:
    """Raise :class:`SingularDesignError` naming every column that is a
    linear combination of the columns before it."""
    names = _column_names(X, names)
    X = np.asarray(X, dtype=float)
    scale = np.linalg.norm(X, axis=0)
    dependent = []
    kept: list[int] = []
    for j in range(X.shape[1]):
        col = X[:, j]
        if scale[j] == 0:
            dependent.append(names[j])
            continue
        if kept:
            basis = X[:, kept] / scale[kept]
            coef, *_ = np.linalg.lstsq(basis, col / scale[j], rcond=None)
            resid = np.linalg.norm(col / scale[j] - basis @ coef)
            if resid < tol * math.sqrt(X.shape[0]):
                dependent.append(names[j])
                continue
        kept.append(j)
    if dependent:
        raise SingularDesignError(dependent)


@dataclass
class _Grouped:
    X: np.ndarray
    q: np.ndarray
    starts: np.ndarray
    gid: np.ndarray
    wg: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.starts)


def _group(X, y, groups, w) -> _Grouped:
    groups = np.asarray(groups)
    if len(groups) != len(y):
        raise InputValidationError("groups and outcome have different lengths")
    keys, gid = np.unique(groups, return_inverse=True)
    order = np.argsort(gid, kind="stable")
    gid = gid[order]
    starts = np.flatnonzero(np.r_[True, gid[1:] != gid[:-1]])
    wg = np.add.reduceat(w[order], starts) / np.diff(np.r_[starts, len(gid)])
    return _Grouped(X[order], 2.0 * y[order] - 1.0, starts, gid, wg)


# ---------------------------------------------------------------- likelihoods


def _pooled(X, q, w, beta):
    u = q * _dot(X, beta)
    ll = math.fsum(w * log_ndtr(u))
    grad = _tdot(X, w * q * _quadrature.mills(u))
    return ll, grad


def _pooled_hessian(X, q, w, beta):
    u = q * _dot(X, beta)
    lam = _quadrature.mills(u)
    return -(X * (w * lam * (u + lam))[:, None]).T @ X


def loglik_pooled(X, y, beta, weights=None, check_rank: bool = True) -> tuple[float, np.ndarray]:
    """Pooled probit log-likelihood and its gradient in ``beta``."""
    names = _column_names(X)
    X, y, w = _arrays(X, y, weights)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise InputValidationError(f"beta must have {X.shape[1]} entries")
    if check_rank:
        check_full_rank(X, names)
    ll, grad = _pooled(X, 2 * y - 1, w, beta)
    if not np.isfinite(ll) or not np.all(np.isfinite(grad)):
        raise DomainError("log-likelihood is not finite at these parameters")
    return ll, grad


def _re(g: _Grouped, beta, sigma, n_nodes, method):
    a = g.q * _dot(g.X, beta)
    s = g.q * sigma
    v, logw = _quadrature.nodes(method, n_nodes, a, s, g.starts, g.gid)
    u = a[:, None] + s[:, None] * v[g.gid]
    # split off the sigma = 0 terms so the reduction to pooled is exact
    base = log_ndtr(a)
    A = np.add.reduceat(log_ndtr(u) - base[:, None], g.starts, axis=0) + logw
    lse = logsumexp(A, axis=1)
    ll = math.fsum(np.r_[g.wg[g.gid] * base, g.wg * lse])
    post = np.exp(A - lse[:, None])
    lam = _quadrature.mills(u)
    p_obs = post[g.gid]
    r = g.wg[g.gid] * g.q
    d_beta = _tdot(g.X, r * np.sum(p_obs * lam, axis=1))
    d_sigma = float(np.sum(r * np.sum(p_obs * lam * v[g.gid], axis=1)))
    return ll, np.r_[d_beta, d_sigma]


def loglik_re(
    X,
    y,
    groups,
    beta,
    sigma: float,
    weights=None,
    nodes: int = DEFAULT_NODES,
    quadrature: str = DEFAULT_QUADRATURE,
    check_rank: bool = True,
) -> tuple[float, np.ndarray]:
    """Random-effects probit log-likelihood and its gradient in
    ``(beta, sigma)``.

    The gradient differentiates the quadrature sum with its nodes held
    fixed, which is the quadrature approximation of the exact gradient.
    """
    names = _column_names(X)
    X, y, w = _arrays(X, y, weights)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise InputValidationError(f"beta must have {X.shape[1]} entries")
    if not sigma >= 0:
        raise DomainError("sigma must be >= 0")
    if nodes < 2:
        raise ConfigurationError(f"quadrature needs at least 2 nodes, got {nodes}")
    if check_rank:
        check_full_rank(X, names)
    ll, grad = _re(_group(X, y, groups, w), beta, float(sigma), nodes, quadrature)
    if not np.isfinite(ll) or not np.all(np.isfinite(grad)):
        raise DomainError("log-likelihood is not finite at these parameters")
    return ll, grad


# ---------------------------------------------------------------- results


@dataclass
class EstimationResult:
    """A fitted take-up model.

    ``params`` is the unconstrained parameter vector used by the optimiser
    (``beta`` followed by ``log sigma`` for the random-effects model) and
    ``cov`` its covariance matrix.
    """

    model: str
    kind: str
    feature_names: list[str]
    coef: np.ndarray
    se: np.ndarray
    sigma: float
    sigma_se: float
    rho: float
    rho_se: float
    loglik: float
    n_obs: int
    n_groups: int
    iterations: int
    grad_norm: float
    converged: bool
    hessian_pd: bool
    nodes: Optional[int]
    quadrature: Optional[str]
    weighted: bool
    cov_type: str
    params: np.ndarray
    cov: np.ndarray
    design: Optional[DesignInfo] = None
    warnings: list[str] = field(default_factory=list)
    trajectory: list = field(default_factory=list, repr=False)
    marginal_effects: Optional["MarginalEffects"] = field(default=None, repr=False)

    def coef_table(self) -> pd.DataFrame:
        """Estimate, SE, z, p and significance stars per coefficient."""
        z = self.coef / self.se
        p = 2 * norm.sf(np.abs(z))
        table = pd.DataFrame(
            {"estimate": self.coef, "se": self.se, "z": z, "p": p},
            index=pd.Index(self.feature_names, name="term"),
        )
        if self.kind == "re":
            table.loc["sigma"] = [self.sigma, self.sigma_se, np.nan, np.nan]
            table.loc["rho"] = [self.rho, self.rho_se, np.nan, np.nan]
        table["stars"] = [stars(v) for v in table["p"]]
        return table

    def coefficient(self, name: str) -> float:
        try:
            return float(self.coef[self.feature_names.index(name)])
        except ValueError:
            raise KeyError(f"{name!r} is not in model {self.model}") from None

    def linear_predictor(self, X) -> np.ndarray:
        return _dot(np.asarray(X, dtype=float), self.coef)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "coef": self.coef.tolist(),
            "se": self.se.tolist(),
            "sigma": self.sigma,
            "sigma_se": self.sigma_se,
            "rho": self.rho,
            "rho_se": self.rho_se,
            "loglik": self.loglik,
            "n_obs": self.n_obs,
            "n_groups": self.n_groups,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "hessian_pd": self.hessian_pd,
            "nodes": self.nodes,
            "quadrature": self.quadrature,
            "weighted": self.weighted,
            "cov_type": self.cov_type,
            "params": self.params.tolist(),
            "cov": self.cov.tolist(),
            "design": None if self.design is None else self.design.to_dict(),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EstimationResult":
        design = data.get("design")
        return cls(
            model=data["model"],
            kind=data["kind"],
            feature_names=list(data["feature_names"]),
            coef=np.asarray(data["coef"], dtype=float),
            se=np.asarray(data["se"], dtype=float),
            sigma=data["sigma"],
            sigma_se=data["sigma_se"],
            rho=data["rho"],
            rho_se=data["rho_se"],
            loglik=data["loglik"],
            n_obs=data["n_obs"],
            n_groups=data["n_groups"],
            iterations=data["iterations"],
            grad_norm=data["grad_norm"],
            converged=data["converged"],
            hessian_pd=data["hessian_pd"],
            nodes=data["nodes"],
            quadrature=data["quadrature"],
            weighted=data["weighted"],
            cov_type=data["cov_type"],
            params=np.asarray(data["params"], dtype=float),
            cov=np.asarray(data["cov"], dtype=float),
            design=None if design is None else DesignInfo.from_dict(design),
            warnings=list(data.get("warnings", [])),
        )


def _invert_information(info: np.ndarray) -> tuple[np.ndarray, bool]:
    """Covariance from an observed information matrix and a PD flag."""
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(info), False
    inv_l = np.linalg.inv(chol)
    return inv_l.T @ inv_l, True


def _normalised_weights(w: np.ndarray) -> np.ndarray:
    # mean-one weights make constant weights reproduce unweighted estimates
    return w / w.mean()


def _fit_pooled(X, y, w, tol_grad, tol_rel, max_iter, cov_type, groups, beta0=None):
    q = 2 * y - 1
    wn = _normalised_weights(w)
    n = len(y)

    def fun_grad(b):
        ll, g = _pooled(X, q, wn, b)
        return -ll / n, -g / n

    x0 = np.zeros(X.shape[1]) if beta0 is None else beta0
    opt = minimize(
        fun_grad, x0, tol_grad, tol_rel, max_iter,
        hessian=lambda b: -_pooled_hessian(X, q, wn, b) / n,
    )
    beta = opt.x
    ll_raw, grad_raw = _pooled(X, q, w, beta)
    if ll_raw / w.sum() > _SEPARATION_LL:
        raise ConvergenceError("outcomes are perfectly separated; the likelihood has no maximum", opt.trajectory)
    info = -_pooled_hessian(X, q, w, beta)
    cov, pd_ok = _invert_information(info)
    if cov_type == "cluster":
        if groups is None:
            raise ConfigurationError("cluster-robust covariance needs household groups")
        u = q * _dot(X, beta)
        scores = X * (w * q * _quadrature.mills(u))[:, None]
        keys, gid = np.unique(np.asarray(groups), return_inverse=True)
        by_group = np.zeros((len(keys), X.shape[1]))
        np.add.at(by_group, gid, scores)
        G = len(keys)
        meat = by_group.T @ by_group * (G / (G - 1) if G > 1 else 1.0)
        cov = cov @ meat @ cov
    elif cov_type != "oim":
        raise ConfigurationError(f"unknown covariance type {cov_type!r}; use 'oim' or 'cluster'")
    return opt, beta, ll_raw, grad_raw, cov, pd_ok


def _fit_re(X, y, groups, w, n_nodes, method, tol_grad, tol_rel, max_iter, start):
    g_raw = _group(X, y, groups, w)
    g = _Grouped(g_raw.X, g_raw.q, g_raw.starts, g_raw.gid, _normalised_weights(g_raw.wg))
    n = g.n_groups
    k = X.shape[1]

    def fun_grad(theta):
        sigma = math.exp(theta[k])
        ll, grad = _re(g, theta[:k], sigma, n_nodes, method)
        return -ll / n, -np.r_[grad[:k], grad[k] * sigma] / n

    opt = minimize(fun_grad, start, tol_grad, tol_rel, max_iter)
    theta = opt.x
    sigma = math.exp(theta[k])
    ll_raw, grad_raw = _re(g_raw, theta[:k], sigma, n_nodes, method)
    if ll_raw / g_raw.wg.sum() > _SEPARATION_LL:
        raise ConvergenceError("outcomes are perfectly separated; the likelihood has no maximum", opt.trajectory)

    # the polish Hessian is of the mean-one weighted objective over n groups
    info = opt.hessian * (n * g_raw.wg.mean())
    cov, pd_ok = _invert_information(info)
    return opt, theta, sigma, ll_raw, np.r_[grad_raw[:k], grad_raw[k] * sigma], cov, pd_ok


def _finish(kind, model, names, params, cov, pd_ok, opt, ll, grad, n_obs, n_groups, weighted, cov_type, nodes, method, design):
    k = len(names)
    se_all = np.sqrt(np.clip(np.diag(cov), 0, None))
    notes = []
    if not pd_ok:
        notes.append("observed information is not positive definite at the optimum; standard errors unreliable")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=3)
    if kind == "re":
        sigma = math.exp(params[k])
        r = rho(sigma)
        sigma_se = sigma * se_all[k]
        rho_se = 2 * r * (1 - r) * se_all[k]
    else:
        sigma, r, sigma_se, rho_se = 0.0, 0.0, float("nan"), float("nan")
    return EstimationResult(
        model=model,
        kind=kind,
        feature_names=list(names),
        coef=params[:k].copy(),
        se=se_all[:k],
        sigma=sigma,
        sigma_se=float(sigma_se),
        rho=r,
        rho_se=float(rho_se),
        loglik=ll,
        n_obs=n_obs,
        n_groups=n_groups,
        iterations=opt.iterations,
        grad_norm=float(np.max(np.abs(grad), initial=0.0)),
        converged=opt.converged,
        hessian_pd=pd_ok,
        nodes=nodes,
        quadrature=method,
        weighted=weighted,
        cov_type=cov_type,
        params=params.copy(),
        cov=cov,
        design=design,
        warnings=notes,
        trajectory=opt.trajectory,
    )


# ---------------------------------------------------------------- estimators


class _ProbitBase(ClassifierMixin, BaseEstimator):
    def _prepare(self, X, y, sample_weight, feature_names):
        names = _column_names(X, feature_names)
        X, y, w = _arrays(X, y, sample_weight)
        if len(names) != X.shape[1]:
            raise InputValidationError("feature_names must match the number of columns")
        if self.check_rank:
            check_full_rank(X, names)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.feature_names_ = names
        return names, X, y, w

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise InputValidationError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return self.result_.linear_predictor(X) / math.sqrt(1.0 + self.result_.sigma**2)

    def predict_proba(self, X) -> np.ndarray:
        """Take-up probabilities with the household effect integrated out."""
        p = ndtr(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)


class PooledProbit(_ProbitBase):
    """Pooled probit by maximum likelihood.

    Parameters
    ----------
    cov_type : {"oim", "cluster"}
        Inverse observed information, or a household-clustered sandwich
        (needs ``groups`` at fit time).
    tol_grad, tol_rel, max_iter
        Convergence controls of the optimiser.
    check_rank : bool
        Reject rank-deficient designs before fitting.
    """

    def __init__(self, cov_type="oim", tol_grad=1e-8, tol_rel=1e-12, max_iter=500, check_rank=True):
        self.cov_type = cov_type
        self.tol_grad = tol_grad
        self.tol_rel = tol_rel
        self.max_iter = max_iter
        self.check_rank = check_rank

    def fit(self, X, y, groups=None, sample_weight=None, feature_names=None, model="pooled", design=None):
        names, X, y, w = self._prepare(X, y, sample_weight, feature_names)
        opt, beta, ll, grad, cov, pd_ok = _fit_pooled(
            X, y, w, self.tol_grad, self.tol_rel, self.max_iter, self.cov_type, groups
        )
        n_groups = len(np.unique(groups)) if groups is not None else len(y)
        self.result_ = _finish(
            "pooled", model, names, beta, cov, pd_ok, opt, ll, grad, len(y), n_groups,
            sample_weight is not None, self.cov_type, None, None, design,
        )
        self.coef_ = self.result_.coef
        return self


class RandomEffectsProbit(_ProbitBase):
    """Random-effects probit with a normal household intercept.

    Parameters
    ----------
    n_nodes : int
        Quadrature nodes per household.
    quadrature : {"two-sided", "adaptive", "gh"}
        Node layout; see :mod:`nontakeup._quadrature`.
    tol_grad, tol_rel, max_iter, check_rank
        As for :class:`PooledProbit`.
    """

    def __init__(
        self,
        n_nodes=DEFAULT_NODES,
        quadrature=DEFAULT_QUADRATURE,
        tol_grad=1e-8,
        tol_rel=1e-12,
        max_iter=500,
        check_rank=True,
    ):
        self.n_nodes = n_nodes
        self.quadrature = quadrature
        self.tol_grad = tol_grad
        self.tol_rel = tol_rel
        self.max_iter = max_iter
        self.check_rank = check_rank

    def fit(self, X, y, groups=None, sample_weight=None, feature_names=None, model="re", design=None):
        if groups is None:
            raise InputValidationError("random-effects probit needs household groups")
        if self.n_nodes < 2:
            raise ConfigurationError(f"quadrature needs at least 2 nodes, got {self.n_nodes}")
        if self.quadrature not in _quadrature.METHODS:
            raise ConfigurationError(f"unknown quadrature method {self.quadrature!r}")
        names, X, y, w = self._prepare(X, y, sample_weight, feature_names)
        # pooled estimates scale by 1/sqrt(1 + sigma^2); start from sigma = 1
        _, beta_p, *_ = _fit_pooled(X, y, w, 1e-6, 1e-10, self.max_iter, "oim", None)
        start = np.r_[beta_p * math.sqrt(2.0), 0.0]
        opt, theta, sigma, ll, grad, cov, pd_ok = _fit_re(
            X, y, groups, w, self.n_nodes, self.quadrature, self.tol_grad, self.tol_rel, self.max_iter, start
        )
        self.result_ = _finish(
            "re", model, names, theta, cov, pd_ok, opt, ll, grad, len(y), len(np.unique(groups)),
            sample_weight is not None, "oim", self.n_nodes, self.quadrature, design,
        )
        self.coef_ = self.result_.coef
        self.sigma_ = sigma
        return self


def fit(
    frame: pd.DataFrame,
    model: str = "M0",
    kind: str = "re",
    weighted: bool = False,
    nodes: int = DEFAULT_NODES,
    quadrature: str = DEFAULT_QUADRATURE,
    wave_dummies: bool = True,
    cov_type: str = "oim",
    **options,
) -> EstimationResult:
    """Fit one nested specification on an estimation frame.

    Parameters
    ----------
    frame : DataFrame
        Output of :func:`nontakeup.design.estimation_frame`.
    model : {"M0", "M1", "M2", "M3"}
    kind : {"re", "pooled"}
    weighted : bool
        Use the ``weight`` column as survey weights.
    """
    design = design_matrix(frame, model, wave_dummies=wave_dummies)
    weights = design.weights if weighted else None
    if kind == "re":
        est = RandomEffectsProbit(n_nodes=nodes, quadrature=quadrature, **options)
    elif kind == "pooled":
        est = PooledProbit(cov_type=cov_type, **options)
    else:
        raise ConfigurationError(f"unknown model kind {kind!r}; use 're' or 'pooled'")
    est.fit(design.X, design.y, groups=design.groups, sample_weight=weights, model=model, design=design.info)
    result = est.result_
    result.marginal_effects = marginal_effects(result, design.X, weights)
    return result


def model_suite(
    frame: pd.DataFrame,
    models: Sequence[str] = MODELS,
    **options,
) -> dict[str, Union[EstimationResult, Exception]]:
    """Fit every nested specification.

    A failing model is reported as its exception in the returned mapping
    and does not stop the others.
    """
    if frame is None or len(frame) == 0:
        raise InputValidationError("estimation frame is empty")
    out: dict[str, Union[EstimationResult, Exception]] = {}
    for model in models:
        try:
            out[model] = fit(frame, model, **options)
        except (ConvergenceError, SingularDesignError, DomainError, InputValidationError) as exc:
            out[model] = exc
    return out


# ---------------------------------------------------------------- marginal effects


@dataclass
class MarginalEffects:
    """Average marginal effects with delta-method standard errors.

    ``jacobian`` holds the derivatives of each effect with respect to the
    result's ``params`` and ``cov`` their covariance, so that sums of effects
    get correct standard errors.
    """

    names: list[str]
    effects: np.ndarray
    se: np.ndarray
    jacobian: np.ndarray
    param_cov: np.ndarray
    kinds: list[str]

    def table(self) -> pd.DataFrame:
        table = pd.DataFrame(
            {"kind": self.kinds, "effect": self.effects, "se": self.se},
            index=pd.Index(self.names, name="term"),
        )
        for level in CI_LEVELS:
            half = norm.ppf(0.5 + level / 2) * self.se
            tag = int(round(level * 100))
            table[f"ci{tag}_low"] = self.effects - half
            table[f"ci{tag}_high"] = self.effects + half
        return table

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.effects[self.names.index(name)])
        except ValueError:
            raise KeyError(f"no marginal effect for {name!r}") from None


def _effect_layout(result: EstimationResult) -> list[tuple[str, str, object]]:
    """(name, kind, spec) per reported effect."""
    names = result.feature_names
    info = result.design
    if info is None:
        return [(c, "derivative", names.index(c)) for c in names if c != "const"]
    layout = []
    in_block = {c: b for b, cols in info.blocks.items() for c in cols}
    squares = {sq: lin for lin, sq in info.polynomial.values()}
    for c in names:
        if c == "const" or c in squares:
            continue
        lin_sq = info.polynomial.get(c)
        if lin_sq is not None:
            layout.append((c, "polynomial", (names.index(lin_sq[0]), names.index(lin_sq[1]))))
        elif c in in_block:
            cols = [names.index(b) for b in info.blocks[in_block[c]]]
            layout.append((c, "discrete", (names.index(c), cols)))
        else:
            layout.append((c, "derivative", names.index(c)))
    return layout


def _effects(params, X, w, k, is_re, layout) -> np.ndarray:
    beta = params[:k]
    scale = 1.0 / math.sqrt(1.0 + math.exp(2 * params[k])) if is_re else 1.0
    z = _dot(X, beta)
    dens = norm.pdf(scale * z) * scale
    out = np.empty(len(layout))
    for i, (_, kind, spec) in enumerate(layout):
        if kind == "derivative":
            out[i] = np.sum(w * dens) * beta[spec]
        elif kind == "polynomial":
            lin, sq = spec
            out[i] = np.sum(w * dens * (beta[lin] + 2 * beta[sq] * X[:, lin]))
        else:
            j, cols = spec
            base = z - _dot(X[:, cols], beta[cols])
            out[i] = np.sum(w * (ndtr(scale * (base + beta[j])) - ndtr(scale * base)))
    return out


def marginal_effects(result: EstimationResult, X, weights=None, step: float = 1e-6) -> MarginalEffects:
    """Average marginal effects of every covariate.

    Continuous covariates get the average derivative of the take-up
    probability (household effect integrated out), the income gap combines
    its linear and squared terms, and indicator blocks get the average
    discrete change from the reference category.  Standard errors use the
    delta method with a central-difference Jacobian.
    """
    X = np.asarray(X, dtype=float)
    k = len(result.feature_names)
    if X.shape[1] != k:
        raise InputValidationError(f"expected {k} columns, got {X.shape[1]}")
    w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    is_re = result.kind == "re"
    params = np.asarray(result.params, dtype=float)
    if is_re and len(params) == k:
        params = np.r_[params, math.log(result.sigma) if result.sigma > 0 else -np.inf]
    layout = _effect_layout(result)
    effects = _effects(params, X, w, k, is_re, layout)
    jac = np.zeros((len(layout), len(params)))
    for j in range(len(params)):
        if not np.isfinite(params[j]):
            continue
        h = step * max(1.0, abs(params[j]))
        up, down = params.copy(), params.copy()
        up[j] += h
        down[j] -= h
        jac[:, j] = (_effects(up, X, w, k, is_re, layout) - _effects(down, X, w, k, is_re, layout)) / (2 * h)
    cov = np.asarray(result.cov, dtype=float)
    if cov.shape != (len(params), len(params)):
        cov = np.zeros((len(params), len(params)))
    se = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", jac, cov, jac), 0, None))
    return MarginalEffects(
        names=[name for name, _, _ in layout],
        effects=effects,
        se=se,
        jacobian=jac,
        param_cov=cov,
        kinds=[kind for _, kind, _ in layout],
    )


@dataclass(frozen=True)
class LongRunEffect:
    estimate: float
    se: float

    def __float__(self) -> float:
        return self.estimate


def _group_members(group) -> list[str]:
    if isinstance(group, str):
        if group in LONG_TERM_GROUPS:
            return list(LONG_TERM_GROUPS[group])
        return [group]
    return list(group)


def long_run_effect(source, group) -> LongRunEffect:
    """Sum of a group of effects with its delta-method standard error.

    Parameters
    ----------
    source : MarginalEffects, EstimationResult or sequence of float
        Sums average marginal effects, coefficients, or plain numbers.
    group : str or sequence of str
        A long-term covariate group name (``"receipt_share"``, ``"income"``,
        ``"shock_volatility"``) or explicit member names.  Ignored for plain
        numbers.
    """
    if isinstance(source, MarginalEffects):
        names = _group_members(group)
        missing = [n for n in names if n not in source.names]
        if missing:
            raise KeyError(f"effects not available for {missing}")
        idx = [source.names.index(n) for n in names]
        grad = source.jacobian[idx].sum(axis=0)
        est = math.fsum(source.effects[idx])
        var = float(grad @ source.param_cov @ grad)
        return LongRunEffect(est, math.sqrt(max(var, 0.0)))
    if isinstance(source, EstimationResult):
        names = _group_members(group)
        missing = [n for n in names if n not in source.feature_names]
        if missing:
            raise KeyError(f"{missing} not in model {source.model}")
        idx = [source.feature_names.index(n) for n in names]
        grad = np.zeros(len(source.params))
        grad[idx] = 1.0
        var = float(grad @ source.cov @ grad)
        return LongRunEffect(math.fsum(source.coef[idx]), math.sqrt(max(var, 0.0)))
    values = [float(v) for v in source]
    return LongRunEffect(math.fsum(values), float("nan"))
