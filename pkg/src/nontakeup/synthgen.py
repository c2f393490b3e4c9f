"""Synthetic household panels with known take-up behaviour.

Households get fixed characteristics and a quarterly labour-market history
(Markov employment, AR(1) log wages).  Benefit receipt outside interview
quarters follows a background process driven by joblessness.  At each
interview wave the rules engine decides eligibility and the income gap, and
eligible households take up the benefit when

    x_it' beta + sigma_nu * nu_i + upsilon_it > 0,

with ``nu_i`` and ``upsilon_it`` standard normal.  Take-up creates a
one-month receipt spell in the interview quarter, so it shows up in later
waves' receipt histories.  Reported receipt is the administrative flag
passed through under- and over-reporting.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .design import (
    CATEGORICAL_BLOCKS,
    BINARY_INDICATORS,
    GAP,
    GAP_SQ,
    LONG_TERM_GROUPS,
    HOUSEHOLD_TYPES,
    design_matrix,
    estimation_frame,
)
from .exceptions import ConfigurationError, InputValidationError, NonTakeUpError, SingularDesignError
from .household import EDUCATION, MIGRATION, MUNICIPALITY, HouseholdSnapshot, Member, quarter_index
from .policy import load_config, policy_from_config
from .rules import EntitlementResult, simulate_population
from .spells import SpellRecord, build_covariates
from .spells import quarter_bounds

__all__ = [
    "SyntheticDGP",
    "SyntheticData",
    "MonteCarloSummary",
    "known_terms",
    "generate",
    "regenerate_takeup",
    "replicate",
]

_LONG_TERM = [c for cols in LONG_TERM_GROUPS.values() for c in cols]


def known_terms() -> list[str]:
    """Design columns a DGP may put coefficients on."""
    terms = ["const", GAP, GAP_SQ]
    for block, cats in CATEGORICAL_BLOCKS.items():
        terms += [f"{block}[{c}]" for c in cats[1:]]
    return terms + list(BINARY_INDICATORS) + _LONG_TERM


@dataclass
class SyntheticDGP:
    """Data-generating process for a synthetic panel.

    ``beta`` maps design-column names (see :func:`known_terms`) to true
    coefficients; unlisted columns have coefficient zero.
    """

    beta: dict = field(
        default_factory=lambda: {"const": -0.3, GAP: 1.2, GAP_SQ: -0.4, "genpop": -0.5, "east": 0.3}
    )
    sigma_nu: float = 1.0
    n_households: int = 2000
    waves: int = 5
    start_year: int = 2012
    attrition: float = 0.0
    # extra dropout probability for eligible non-takers (selective attrition)
    outcome_attrition: float = 0.0
    wage_persistence: float = 0.8
    wage_innovation_sd: float = 0.25
    wage_level: dict = field(
        default_factory=lambda: {
            "single": 7.0,
            "couple_no_children": 7.0,
            "single_parent": 6.8,
            "couple_children": 7.1,
        }
    )
    job_keep: float = 0.9
    job_find: float = 0.15
    receipt_when_jobless: float = 0.7
    receipt_when_working: float = 0.1
    underreport: float = 0.1
    overreport: float = 0.02
    ineligible_receipt: float = 0.02
    wealthy_share: float = 0.05
    contamination: float = 0.0
    seed: int = 0
    config: Optional[str] = None
    covariates: Optional[bool] = None

    def validate(self) -> "SyntheticDGP":
        if self.n_households < 1:
            raise InputValidationError("n_households must be >= 1")
        if self.waves < 1:
            raise InputValidationError("waves must be >= 1")
        if not self.sigma_nu >= 0:
            raise InputValidationError("sigma_nu must be >= 0")
        rates = (
            "attrition", "outcome_attrition", "job_keep", "job_find", "receipt_when_jobless",
            "receipt_when_working", "underreport", "overreport", "ineligible_receipt",
            "wealthy_share", "contamination",
        )
        for name in rates:
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InputValidationError(f"{name} must lie in [0, 1], got {value}")
        if not -1 < self.wage_persistence < 1:
            raise InputValidationError("wage_persistence must lie in (-1, 1)")
        if self.wage_innovation_sd < 0:
            raise InputValidationError("wage_innovation_sd must be >= 0")
        unknown = sorted(set(self.beta) - set(known_terms()))
        if unknown:
            raise InputValidationError(f"unknown DGP terms {unknown}")
        missing = sorted(set(HOUSEHOLD_TYPES) - set(self.wage_level))
        if missing:
            raise InputValidationError(f"wage_level lacks household types {missing}")
        return self

    @property
    def needs_covariates(self) -> bool:
        if self.covariates is not None:
            return bool(self.covariates)
        return any(self.beta.get(c, 0.0) != 0.0 for c in _LONG_TERM)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SyntheticDGP":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigurationError(f"unknown synthetic settings {unknown}")
        return cls(**dict(data)).validate()


@dataclass
class SyntheticData:
    panel: list[HouseholdSnapshot]
    entitlements: list[EntitlementResult]
    spells: list[SpellRecord]
    truth: pd.DataFrame
    covariates: Optional[pd.DataFrame]
    cpi: dict[int, float]

    def estimation_frame(self, eligible_only: bool = True) -> pd.DataFrame:
        frame = estimation_frame(self.panel, self.entitlements, self.covariates)
        if eligible_only:
            keep = np.array([e.eligible_ubii for e in self.entitlements], dtype=bool)
            frame = frame[keep].reset_index(drop=True)
        return frame


def _policy(dgp: SyntheticDGP):
    policy = policy_from_config(load_config(dgp.config))
    first, last = dgp.start_year - 3, dgp.start_year + dgp.waves - 1
    missing = [y for y in range(first, last + 1) if y not in policy]
    if missing:
        raise InputValidationError(
            f"infeasible configuration: no policy parameters for years {missing} "
            f"(waves need three years of history)"
        )
    return policy


def _draw_households(rng: np.random.Generator, dgp: SyntheticDGP) -> dict:
    H = dgp.n_households
    htype = rng.choice(len(HOUSEHOLD_TYPES), size=H, p=[0.45, 0.15, 0.2, 0.2])
    n_children = np.where(htype >= 2, rng.integers(1, 4, size=H), 0)
    return {
        "type": htype,
        "head_age": rng.integers(18, 60, size=H),
        "partner_age_gap": rng.integers(-5, 6, size=H),
        "n_children": n_children,
        "child_ages": rng.integers(0, 16, size=(H, 3)),
        "education": rng.choice(len(EDUCATION), size=H, p=[0.15, 0.45, 0.25, 0.15]),
        "migration": rng.choice(len(MIGRATION), size=H, p=[0.7, 0.2, 0.1]),
        "municipality": rng.choice(len(MUNICIPALITY), size=H, p=[0.4, 0.2, 0.25, 0.15]),
        "east": rng.random(H) < 0.25,
        "female": rng.random(H) < np.where(htype == 2, 0.85, 0.4),
        "genpop": rng.random(H) < 0.5,
        "owner": rng.random(H) < 0.1,
        "disabled": rng.random(H) < 0.1,
        "early_retirement": rng.random(H) < 0.05,
        "wealthy": rng.random(H) < dgp.wealthy_share,
        "quarter": rng.integers(1, 5, size=H),
        "rent_per_sqm": rng.uniform(6.5, 11.0, size=H),
        "sqm_noise": rng.uniform(-5.0, 5.0, size=H),
        "weight": np.round(rng.lognormal(0.0, 0.5, size=H), 4),
        "other_benefit": rng.random(H) < 0.15,
    }


def _draw_labour(rng: np.random.Generator, dgp: SyntheticDGP, hh: dict, n_quarters: int) -> np.ndarray:
    """Monthly gross wages in cents, shape (households, 2 adults, quarters)."""
    H = dgp.n_households
    stationary = dgp.job_find / (dgp.job_find + 1 - dgp.job_keep) if dgp.job_find + 1 - dgp.job_keep > 0 else 1.0
    u = rng.random((H, 2, n_quarters))
    eta = rng.standard_normal((H, 2, n_quarters)) * dgp.wage_innovation_sd
    employed = np.empty((H, 2, n_quarters), dtype=bool)
    x = np.empty((H, 2, n_quarters))
    employed[:, :, 0] = u[:, :, 0] < stationary
    x[:, :, 0] = eta[:, :, 0] / math.sqrt(1 - dgp.wage_persistence**2)
    for q in range(1, n_quarters):
        keep = np.where(employed[:, :, q - 1], dgp.job_keep, dgp.job_find)
        employed[:, :, q] = u[:, :, q] < keep
        x[:, :, q] = dgp.wage_persistence * x[:, :, q - 1] + eta[:, :, q]
    level = np.array([dgp.wage_level[t] for t in HOUSEHOLD_TYPES])[hh["type"]]
    level = level[:, None, None] + np.array([0.0, -0.2])[None, :, None]
    cents = np.rint(np.exp(level + x) * 100).astype(np.int64)
    has_partner = np.isin(hh["type"], (1, 3))
    employed[:, 1, :] &= has_partner[:, None]
    return np.where(employed, cents, 0)


def _members(hid: str, i: int, hh: dict, w: int, wages_cents: np.ndarray) -> tuple[Member, ...]:
    head_age = int(hh["head_age"][i]) + w
    head_wage = float(wages_cents[0]) / 100
    members = [Member(head_age, "head", gross_earnings=head_wage, employed=head_wage > 0,
                      disabled=bool(hh["disabled"][i]),
                      early_retirement_self_assessed=bool(hh["early_retirement"][i]),
                      person_id=f"{hid}-1")]
    if hh["type"][i] in (1, 3):
        wage = float(wages_cents[1]) / 100
        members.append(Member(max(18, head_age + int(hh["partner_age_gap"][i])), "partner",
                              gross_earnings=wage, employed=wage > 0, person_id=f"{hid}-2"))
    for k in range(int(hh["n_children"][i])):
        members.append(Member(int(hh["child_ages"][i, k]) + w, "child", person_id=f"{hid}-c{k + 1}"))
    return tuple(members)


def _spells_for_quarter(kind, hid, person, q, wage=None, months=None):
    first, last = quarter_bounds(q)
    start = dt.date.fromordinal(first)
    if months is not None:
        end_month = start.month + months
        end = dt.date(start.year + (end_month - 1) // 12, (end_month - 1) % 12 + 1, 1) - dt.timedelta(days=1)
    else:
        end = dt.date.fromordinal(last)
    return SpellRecord(person, hid, kind, start, end, wage)


def generate(dgp: SyntheticDGP, seed=None, with_spells: bool = True) -> SyntheticData:
    """Simulate a panel under ``dgp``.

    Parameters
    ----------
    seed : int or numpy SeedSequence, optional
        Overrides ``dgp.seed``.
    with_spells : bool
        Build spell records.  Needed for long-term covariates; switched on
        automatically when the DGP uses them.
    """
    dgp.validate()
    policy = _policy(dgp)
    cpi = {y: float(p.cpi_index) for y, p in policy.items()}
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(dgp.seed if seed is None else seed)
    r_house, r_labour, r_receipt, r_nu, r_eps, r_report, r_attr, r_noise = (
        np.random.default_rng(s) for s in ss.spawn(8)
    )
    H, W = dgp.n_households, dgp.waves
    hh = _draw_households(r_house, dgp)
    q0 = quarter_index(dgp.start_year - 3, 1)
    n_quarters = quarter_index(dgp.start_year + W - 1, 4) - q0 + 1
    wages = _draw_labour(r_labour, dgp, hh, n_quarters)
    jobless = (wages.sum(axis=1) == 0)
    bg_receipt = r_receipt.random((H, n_quarters)) < np.where(jobless, dgp.receipt_when_jobless, dgp.receipt_when_working)
    beta_error = r_receipt.random((H, W)) < dgp.ineligible_receipt
    nu = r_nu.standard_normal(H)
    upsilon = r_eps.standard_normal((H, W))
    under = r_report.random((H, W)) < dgp.underreport
    over = r_report.random((H, W)) < dgp.overreport
    leave = r_attr.random((H, W))
    noise = r_noise.standard_normal((H, W)) * 0.1
    contam = r_noise.random((H, W, 4)) < dgp.contamination

    interview_q = np.array([[quarter_index(dgp.start_year + w, int(hh["quarter"][i])) for w in range(W)] for i in range(H)])
    for i in range(H):
        bg_receipt[i, interview_q[i] - q0] = False
    with_spells = with_spells or dgp.needs_covariates
    hids = [f"H{i + 1:05d}" for i in range(H)]

    spells: list[SpellRecord] = []
    if with_spells:
        for i, hid in enumerate(hids):
            for a in range(2):
                for q in np.flatnonzero(wages[i, a]):
                    spells.append(_spells_for_quarter("employment", hid, f"{hid}-{a + 1}", q0 + int(q), wages[i, a, q] / 100))
            for q in np.flatnonzero(bg_receipt[i]):
                spells.append(_spells_for_quarter("ubii_receipt", hid, f"{hid}-1", q0 + int(q)))

    active = np.ones(H, dtype=bool)
    panel: list[HouseholdSnapshot] = []
    ents: list[EntitlementResult] = []
    truth_rows: list[dict] = []
    cov_frames: list[pd.DataFrame] = []
    terms = list(dgp.beta)
    for w in range(W):
        year = dgp.start_year + w
        idx = np.flatnonzero(active)
        snaps = []
        for i in idx:
            hid = hids[i]
            tq = int(interview_q[i, w])
            members = _members(hid, i, hh, w, wages[i, :, tq - q0])
            size = len(members)
            sqm = round(35.0 + 15.0 * (size - 1) + float(hh["sqm_noise"][i]), 1)
            rent = round(sqm * (1.5 if hh["owner"][i] else float(hh["rent_per_sqm"][i])), 2)
            snaps.append(
                HouseholdSnapshot(
                    household_id=hid,
                    wave_year=year,
                    interview_quarter=tq,
                    members=members,
                    rent_incl_heating=rent,
                    dwelling_sqm=sqm,
                    home_owner=bool(hh["owner"][i]),
                    wealth_class_midpoint=75000.0 if hh["wealthy"][i] else 0.0,
                    region="east" if hh["east"][i] else "west",
                    municipality_size_class=MUNICIPALITY[hh["municipality"][i]],
                    migration_background_head=MIGRATION[hh["migration"][i]],
                    education_head=EDUCATION[hh["education"][i]],
                    sex_head="female" if hh["female"][i] else "male",
                    sample_origin="GenPop" if hh["genpop"][i] else "Admin",
                    reported_hb=bool(hh["other_benefit"][i]),
                    survey_weight=float(hh["weight"][i]),
                    interview_complete=not contam[i, w, 0],
                    n_communities=2 if contam[i, w, 1] else 1,
                    core_family=not contam[i, w, 2],
                    admin_linked=not contam[i, 0, 3],
                )
            )
        wave_ents = simulate_population(snaps, policy)
        cov = None
        if dgp.needs_covariates:
            cov = build_covariates(snaps, spells, cpi, [e.need_total for e in wave_ents])
        frame = estimation_frame(snaps, wave_ents, cov)
        X = design_matrix(frame, "M3" if cov is not None else "M0", wave_dummies=False).X
        xcols = np.column_stack([X[t].to_numpy() if t in X.columns else np.zeros(len(X)) for t in terms]) if terms else np.zeros((len(X), 0))
        coefs = np.array([dgp.beta[t] for t in terms])
        xb = xcols @ coefs if terms else np.zeros(len(X))
        eligible = np.array([e.eligible_ubii for e in wave_ents])
        latent = xb + dgp.sigma_nu * nu[idx] + upsilon[idx, w]
        takeup = eligible & (latent > 0)
        admin = np.where(eligible, takeup, beta_error[idx, w])
        reported = np.where(admin, ~under[idx, w], over[idx, w])
        for j, i in enumerate(idx):
            e = wave_ents[j]
            disp = round(e.disposable_income * math.exp(noise[i, w]), 2)
            snaps[j] = dataclasses.replace(
                snaps[j],
                admin_ubii_at_interview=bool(admin[j]),
                reported_ubii=bool(reported[j]),
                reported_disposable_income=disp,
            )
            if admin[j] and with_spells:
                spells.append(_spells_for_quarter("ubii_receipt", hids[i], f"{hids[i]}-1", int(interview_q[i, w]), months=1))
            row = {
                "household_id": hids[i],
                "wave_year": year,
                "eligible": bool(eligible[j]),
                GAP: e.relative_income_gap,
                "nu": float(nu[i]),
                "upsilon": float(upsilon[i, w]),
                "xb": float(xb[j]),
                "latent": float(latent[j]),
                "takeup_true": bool(takeup[j]),
                "admin_receipt": bool(admin[j]),
                "reported_receipt": bool(reported[j]),
            }
            row.update({f"x:{t}": float(xcols[j, k]) for k, t in enumerate(terms)})
            truth_rows.append(row)
        if cov is not None:
            cov_frames.append(cov)
        panel.extend(snaps)
        ents.extend(wave_ents)
        drop = leave[idx, w] < dgp.attrition + np.where(eligible & ~takeup, dgp.outcome_attrition, 0.0)
        active[idx[drop]] = False

    covariates = None
    if cov_frames:
        covariates = pd.concat(cov_frames, ignore_index=True)
        # receipt flags follow from the final spell set
        covariates["admin_ubii_at_interview"] = [hh_.admin_ubii_at_interview for hh_ in panel]
        rep = np.array([hh_.reported_ubii for hh_ in panel])
        adm = covariates["admin_ubii_at_interview"].to_numpy(dtype=bool)
        covariates["takeup_corrected"] = adm
        covariates["correction"] = np.where(adm == rep, "none", np.where(adm, "underreport", "overreport"))
    return SyntheticData(panel, ents, spells, pd.DataFrame(truth_rows), covariates, cpi)


def regenerate_takeup(truth: pd.DataFrame, dgp: SyntheticDGP) -> np.ndarray:
    """True take-up rebuilt from stored covariates, ``nu`` and ``upsilon``."""
    xb = np.zeros(len(truth))
    for t, b in dgp.beta.items():
        xb = xb + b * truth[f"x:{t}"].to_numpy()
    latent = xb + dgp.sigma_nu * truth["nu"].to_numpy() + truth["upsilon"].to_numpy()
    return truth["eligible"].to_numpy(dtype=bool) & (latent > 0)


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class MonteCarloSummary:
    """Replication results per fitted specification.

    ``estimates[model]`` and ``ses[model]`` are (replications x parameters)
    arrays over ``params[model]`` (coefficients, then ``sigma`` for the
    random-effects model); ``effects[model]`` holds average marginal
    effects per replication.
    """

    truth: dict[str, float]
    params: dict[str, list[str]] = field(default_factory=dict)
    estimates: dict[str, np.ndarray] = field(default_factory=dict)
    ses: dict[str, np.ndarray] = field(default_factory=dict)
    covered: dict[str, np.ndarray] = field(default_factory=dict)
    rho: dict[str, np.ndarray] = field(default_factory=dict)
    effects: dict[str, pd.DataFrame] = field(default_factory=dict)
    failures: list[tuple[int, str, str]] = field(default_factory=list)
    replications: int = 0

    def table(self, model: Optional[str] = None) -> pd.DataFrame:
        model = model or next(iter(self.params))
        names = self.params[model]
        est = self.estimates[model]
        true = np.array([self.truth.get(n, 0.0) for n in names])
        bias = est.mean(axis=0) - true
        return pd.DataFrame(
            {
                "true": true,
                "mean": est.mean(axis=0),
                "bias": bias,
                "rmse": np.sqrt(((est - true) ** 2).mean(axis=0)),
                "mean_se": self.ses[model].mean(axis=0),
                "sd": est.std(axis=0, ddof=1) if len(est) > 1 else np.full(len(names), np.nan),
                "coverage95": self.covered[model].mean(axis=0),
            },
            index=pd.Index(names, name="param"),
        )


def _model_terms(model, dgp: SyntheticDGP):
    if isinstance(model, (list, tuple)):
        return list(model)
    if model == "truth":
        return list(dgp.beta)
    return None


def _one_replication(dgp: SyntheticDGP, r: int, models: Mapping, fit_options: Mapping):
    from .estimator import PooledProbit, RandomEffectsProbit, marginal_effects

    data = generate(dgp, seed=np.random.SeedSequence([dgp.seed, r]), with_spells=False)
    frame = data.estimation_frame()
    out = {}
    kind = fit_options.get("kind", "re")
    opts = {k: v for k, v in fit_options.items() if k not in ("kind", "weighted")}
    for name, spec in models.items():
        terms = _model_terms(spec, dgp)
        base = "M3" if terms and any(t in _LONG_TERM for t in terms) else ("M0" if terms else spec)
        design = design_matrix(frame, base, wave_dummies=terms is None)
        if terms is not None:
            absent = [t for t in terms if t not in design.X.columns]
            if absent:
                raise SingularDesignError(absent)
        X = design.X if terms is None else design.X[list(terms)]
        info = design.info
        if terms is not None:
            info = dataclasses.replace(
                info,
                columns=list(X.columns),
                blocks={b: [c for c in cols if c in X.columns] for b, cols in info.blocks.items() if any(c in X.columns for c in cols)},
                polynomial={k: v for k, v in info.polynomial.items() if v[0] in X.columns and v[1] in X.columns},
            )
        weights = design.weights if fit_options.get("weighted") else None
        est = RandomEffectsProbit(**opts) if kind == "re" else PooledProbit(**opts)
        est.fit(X, design.y, groups=design.groups, sample_weight=weights, model=name, design=info)
        res = est.result_
        me = marginal_effects(res, X, weights)
        out[name] = (res, me)
    return out


def replicate(
    dgp: SyntheticDGP,
    R: int,
    models: Union[str, Sequence[str], Mapping] = "truth",
    n_jobs: int = 1,
    **fit_options,
) -> MonteCarloSummary:
    """Generate and fit ``R`` times with seeds derived from ``(dgp.seed, r)``.

    Parameters
    ----------
    models : "truth", "M0".."M3", list of those, or mapping name -> terms
        ``"truth"`` fits exactly the DGP's terms; ``"M0"``..``"M3"`` fit the
        full nested specifications.
    n_jobs : int
        Parallel replications (joblib); results do not depend on it.
    fit_options
        ``kind`` ("re" or "pooled"), ``weighted`` and estimator arguments
        such as ``n_nodes``.

    Failed replications are listed in ``failures`` with their index.
    """
    if R < 1:
        raise InputValidationError("R must be >= 1")
    dgp.validate()
    if isinstance(models, str):
        models = {models: models}
    elif not isinstance(models, Mapping):
        models = {m: m for m in models}

    def run(r):
        try:
            return r, _one_replication(dgp, r, models, fit_options), None
        except (NonTakeUpError, np.linalg.LinAlgError) as exc:
            return r, None, f"{type(exc).__name__}: {exc}"

    if n_jobs == 1:
        results = [run(r) for r in range(R)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(run)(r) for r in range(R))
    summary = MonteCarloSummary(truth={**dgp.beta, "sigma": dgp.sigma_nu}, replications=R)
    z = 1.959963984540054
    for name in models:
        est_rows, se_rows, cov_rows, rho_rows, eff_rows = [], [], [], [], []
        for r, out, err in results:
            if err is not None:
                if name == next(iter(models)):
                    summary.failures.append((r, name, err))
                continue
            res, me = out[name]
            names = list(res.feature_names)
            est = list(res.coef)
            se = list(res.se)
            lo = list(res.coef - z * res.se)
            hi = list(res.coef + z * res.se)
            if res.kind == "re":
                names.append("sigma")
                theta, se_t = res.params[-1], math.sqrt(max(res.cov[-1, -1], 0.0))
                est.append(res.sigma)
                se.append(res.sigma_se)
                lo.append(math.exp(theta - z * se_t))
                hi.append(math.exp(theta + z * se_t))
            true = np.array([summary.truth.get(n, 0.0) for n in names])
            summary.params[name] = names
            est_rows.append(est)
            se_rows.append(se)
            cov_rows.append((np.array(lo) <= true) & (true <= np.array(hi)))
            rho_rows.append(res.rho)
            eff_rows.append(pd.Series(me.effects, index=me.names, name=r))
        if est_rows:
            summary.estimates[name] = np.array(est_rows)
            summary.ses[name] = np.array(se_rows)
            summary.covered[name] = np.array(cov_rows)
            summary.rho[name] = np.array(rho_rows)
            summary.effects[name] = pd.DataFrame(eff_rows)
    return summary
