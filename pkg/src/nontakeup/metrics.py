"""Non-take-up diagnostics.

Rates are ratios of weighted sums.  Sums are accumulated exactly with
:class:`fractions.Fraction` (every float is a dyadic rational) and rounded
once, so a rate is the correctly rounded value of the exact ratio and the
corrected-minus-uncorrected identity holds exactly in ``exact`` mode.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from .design import AGE_GROUPS, HOUSEHOLD_TYPES, estimation_frame
from .exceptions import InputValidationError, UndefinedRateError
from .household import EDUCATION, MIGRATION, MUNICIPALITY, HouseholdSnapshot
from .estimator import stars

__all__ = [
    "SUBGROUPS",
    "ntr",
    "ber",
    "net_underreporting",
    "metrics_frame",
    "rate_table",
    "subgroup_table",
    "takeup_types",
    "gap_curve",
    "covariate_means",
    "sim_quality",
    "density_export",
]

Number = Union[float, Fraction]

# grouping variables of the subgroup table: column -> (label, ordered categories)
SUBGROUPS: dict[str, tuple[str, tuple]] = {
    "female": ("Sex of head", (False, True)),
    "east": ("Region of residence", (False, True)),
    "home_owner": ("Home ownership", (False, True)),
    "child_le3": ("Child aged 3 or younger", (False, True)),
    "disabled": ("Disabled head and/or partner", (False, True)),
    "early_retirement": ("Early retirement status", (False, True)),
    "other_benefit": ("Other benefit reported", (False, True)),
    "genpop": ("GenPop subsample", (False, True)),
    "migration": ("Migration background of head", MIGRATION),
    "age_group": ("Age of head", AGE_GROUPS),
    "education": ("Education of head", EDUCATION),
    "household_type": ("Household type", HOUSEHOLD_TYPES),
    "municipality": ("Municipality size", MUNICIPALITY),
}


def _bools(x, n: Optional[int] = None, name: str = "flags") -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype != bool:
        if not np.all(np.isin(arr, (0, 1))):
            raise InputValidationError(f"{name} must be boolean")
        arr = arr.astype(bool)
    if n is not None and len(arr) != n:
        raise InputValidationError(f"{name} must have {n} entries")
    return arr


def _weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if len(w) != n:
        raise InputValidationError(f"weights must have {n} entries")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputValidationError("weights must be finite and non-negative")
    return w


def _mass(mask: np.ndarray, w: np.ndarray) -> Fraction:
    return sum((Fraction(v) for v in w[mask]), Fraction(0))


def _ratio(num: Fraction, den: Fraction, what: str, exact: bool) -> Number:
    if den == 0:
        raise UndefinedRateError(f"no {what} mass")
    r = num / den
    return r if exact else float(r)


def ntr(eligible, receipt, weights=None, exact: bool = False) -> Number:
    """Weighted share of eligible units without receipt."""
    e = _bools(eligible, name="eligible")
    r = _bools(receipt, len(e), "receipt")
    w = _weights(weights, len(e))
    return _ratio(_mass(e & ~r, w), _mass(e, w), "eligible", exact)


def ber(eligible, receipt, weights=None, exact: bool = False) -> Number:
    """Weighted share of recipients simulated as ineligible."""
    e = _bools(eligible, name="eligible")
    r = _bools(receipt, len(e), "receipt")
    w = _weights(weights, len(e))
    return _ratio(_mass(~e & r, w), _mass(r, w), "receipt", exact)


def net_underreporting(eligible, reported, corrected, weights=None, exact: bool = False) -> Number:
    """(underreported - overreported) mass among eligible units over the
    eligible mass; the corrected NTR is the uncorrected NTR minus this."""
    e = _bools(eligible, name="eligible")
    rep = _bools(reported, len(e), "reported")
    cor = _bools(corrected, len(e), "corrected")
    w = _weights(weights, len(e))
    num = _mass(e & cor & ~rep, w) - _mass(e & ~cor & rep, w)
    return _ratio(num, _mass(e, w), "eligible", exact)


# ---------------------------------------------------------------- frames


def metrics_frame(
    panel: Sequence[HouseholdSnapshot],
    entitlements,
    covariates: Optional[pd.DataFrame] = None,
    cpi: Optional[Mapping[int, float]] = None,
) -> pd.DataFrame:
    """All household-waves with eligibility, both receipt flags, grouping
    variables and incomes for the simulation-quality summaries.

    ``receipt_corrected`` is the administrative receipt flag (from
    ``covariates`` when given), ``receipt_reported`` the survey answer.
    Incomes are deflated by ``cpi`` (if given) and equivalised.
    """
    panel = list(panel)
    entitlements = list(entitlements)
    frame = estimation_frame(panel, entitlements, covariates)
    frame = frame.rename(columns={"takeup": "receipt_corrected", "takeup_reported": "receipt_reported"})
    frame["eligible"] = [bool(getattr(e, "eligible_ubii")) for e in entitlements]
    deflator = np.array([cpi[hh.wave_year] if cpi else 1.0 for hh in panel], dtype=float)
    equiv = np.array([hh.equivalence_weight() for hh in panel], dtype=float)
    frame["equivalence_weight"] = equiv
    frame["simulated_income"] = [float(e.disposable_income) for e in entitlements] / deflator / equiv
    reported = np.array(
        [np.nan if hh.reported_disposable_income is None else hh.reported_disposable_income for hh in panel],
        dtype=float,
    )
    frame["reported_income"] = reported / deflator / equiv
    frame["entitlement_real"] = frame["entitlement"].to_numpy() / deflator / equiv
    return frame


def _rate_row(part: pd.DataFrame, weighted: bool) -> dict:
    w = part["weight"].to_numpy(dtype=float) if weighted else None
    e = part["eligible"].to_numpy(dtype=bool)
    rep = part["receipt_reported"].to_numpy(dtype=bool)
    cor = part["receipt_corrected"].to_numpy(dtype=bool)
    out = {}
    for tag, flags in (("uncorrected", rep), ("corrected", cor)):
        try:
            out[f"ntr_{tag}"] = float(ntr(e, flags, w, exact=True) * 100)
        except UndefinedRateError:
            out[f"ntr_{tag}"] = np.nan
        try:
            out[f"ber_{tag}"] = float(ber(e, flags, w, exact=True) * 100)
        except UndefinedRateError:
            out[f"ber_{tag}"] = np.nan
    try:
        diff = ntr(e, cor, w, exact=True) - ntr(e, rep, w, exact=True)
        out["diff_pp"] = float(diff * 100)
    except UndefinedRateError:
        out["diff_pp"] = np.nan
    out["n_eligible"] = int(e.sum())
    return out


RATE_COLUMNS = ["ntr_uncorrected", "ntr_corrected", "diff_pp", "ber_uncorrected", "ber_corrected", "n_eligible"]


def rate_table(frame: pd.DataFrame, by: Optional[str] = "wave_year", weighted: bool = True) -> pd.DataFrame:
    """NTR and BER in percent, uncorrected and corrected, per value of
    ``by`` plus a total row.  Empty cells are NaN."""
    needed = ["eligible", "receipt_reported", "receipt_corrected", "weight"] + ([by] if by else [])
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise InputValidationError(f"frame lacks columns {missing}")
    rows, index = [], []
    if by:
        for key, part in frame.groupby(by, sort=True):
            rows.append(_rate_row(part, weighted))
            index.append(str(key))
    rows.append(_rate_row(frame, weighted))
    index.append("Total")
    table = pd.DataFrame(rows, index=pd.Index(index, name=by or "cell"), columns=RATE_COLUMNS)
    table.attrs["weighted"] = weighted
    return table


def subgroup_table(frame: pd.DataFrame, weighted: bool = True, groups: Mapping = SUBGROUPS) -> pd.DataFrame:
    """Rates by category of each grouping variable (eligible units)."""
    rows = []
    for col, (label, cats) in groups.items():
        if col not in frame.columns:
            continue
        for cat in cats:
            part = frame[frame[col] == cat]
            row = _rate_row(part, weighted)
            rows.append({"variable": label, "column": col, "category": str(cat), **row})
    return pd.DataFrame(rows, columns=["variable", "column", "category", *RATE_COLUMNS])


# ---------------------------------------------------------------- typology


TYPES = ("never", "sometimes", "always")


def takeup_types(
    household_id, takeup, eligible=None, weights=None
) -> pd.DataFrame:
    """Classify households by take-up across their eligible waves.

    Households without an eligible wave are ignored.  A household's weight
    is the mean of its eligible-wave weights.
    """
    hid = np.asarray(household_id).astype(str)
    t = _bools(takeup, len(hid), "takeup")
    e = np.ones(len(hid), dtype=bool) if eligible is None else _bools(eligible, len(hid), "eligible")
    w = _weights(weights, len(hid))
    df = pd.DataFrame({"hid": hid[e], "t": t[e], "w": w[e]})
    counts = {k: 0 for k in TYPES}
    masses = {k: Fraction(0) for k in TYPES}
    for _, g in df.groupby("hid", sort=True):
        k = int(g["t"].sum())
        kind = "never" if k == 0 else "always" if k == len(g) else "sometimes"
        counts[kind] += 1
        masses[kind] += sum((Fraction(v) for v in g["w"]), Fraction(0)) / len(g)
    n = sum(counts.values())
    total = sum(masses.values(), Fraction(0))
    rows = []
    for kind in TYPES:
        rows.append(
            {
                "type": kind,
                "households": counts[kind],
                "share": counts[kind] / n if n else np.nan,
                "weighted_share": float(masses[kind] / total) if total else np.nan,
            }
        )
    return pd.DataFrame(rows).set_index("type")


# ---------------------------------------------------------------- gap curve


def gap_curve(gap, takeup, weights=None, bins: Union[int, Sequence[float]] = 11) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Take-up rate by income-gap category and a quadratic fit.

    Categories are right-closed intervals of equal width over ``[0, 1]``
    (the first also holds 0); pass explicit edges to change them.  The fit
    is least squares of the category rates on the category midpoints,
    weighted by category mass.

    Returns
    -------
    curve : DataFrame
        ``lower, upper, midpoint, rate, mass_share, n`` per category; empty
        categories have NaN rate.
    fit : DataFrame
        Coefficients ``const, gap, gap_sq`` with standard errors (NaN when
        fewer than four categories are occupied).
    """
    g = np.asarray(gap, dtype=float)
    if np.any((g < 0) | (g > 1)):
        raise InputValidationError("gap must lie in [0, 1]")
    t = _bools(takeup, len(g), "takeup")
    w = _weights(weights, len(g))
    edges = np.linspace(0.0, 1.0, bins + 1) if isinstance(bins, int) else np.asarray(bins, dtype=float)
    k = len(edges) - 1
    cat = np.clip(np.searchsorted(edges, g, side="left") - 1, 0, k - 1)
    total = math.fsum(w)
    rows = []
    for j in range(k):
        m = cat == j
        mass = math.fsum(w[m])
        rows.append(
            {
                "category": j + 1,
                "lower": edges[j],
                "upper": edges[j + 1],
                "midpoint": 0.5 * (edges[j] + edges[j + 1]),
                "rate": math.fsum(w[m & t]) / mass if mass > 0 else np.nan,
                "mass_share": mass / total if total > 0 else np.nan,
                "n": int(m.sum()),
            }
        )
    curve = pd.DataFrame(rows).set_index("category")
    occ = curve[curve["rate"].notna() & (curve["mass_share"] > 0)]
    names = ["const", "gap", "gap_sq"]
    coef = np.full(3, np.nan)
    se = np.full(3, np.nan)
    if len(occ) >= 3:
        x = occ["midpoint"].to_numpy()
        Z = np.column_stack([np.ones_like(x), x, x * x])
        sw = np.sqrt(occ["mass_share"].to_numpy())
        coef, *_ = np.linalg.lstsq(Z * sw[:, None], occ["rate"].to_numpy() * sw, rcond=None)
        if len(occ) > 3:
            resid = (occ["rate"].to_numpy() - Z @ coef) * sw
            s2 = float(resid @ resid) / (len(occ) - 3)
            zw = Z * sw[:, None]
            se = np.sqrt(np.diag(s2 * np.linalg.inv(zw.T @ zw)))
    fit = pd.DataFrame({"estimate": coef, "se": se}, index=pd.Index(names, name="term"))
    return curve, fit


# ---------------------------------------------------------------- covariate means


def _wstats(x: np.ndarray, w: np.ndarray):
    sw = w.sum()
    if sw <= 0:
        return np.nan, np.nan, 0.0
    mean = float(np.sum(w * x) / sw)
    n_eff = sw * sw / float(np.sum(w * w))
    if n_eff <= 1:
        return mean, np.nan, n_eff
    var = float(np.sum(w * (x - mean) ** 2) / sw) * n_eff / (n_eff - 1)
    return mean, var, n_eff


def covariate_means(
    frame: pd.DataFrame,
    columns: Sequence[str],
    takeup: str = "takeup",
    weight: Optional[str] = "weight",
) -> pd.DataFrame:
    """Weighted means for all, take-up (TU) and non-take-up (NTU) units with
    a Welch test of TU minus NTU.

    The test uses effective sample sizes ``(sum w)^2 / sum w^2``; it is
    unavailable (NaN p-value, no stars) when either group has at most one
    effective observation.
    """
    t = frame[takeup].to_numpy(dtype=bool)
    w = frame[weight].to_numpy(dtype=float) if weight else np.ones(len(frame))
    rows = []
    for col in columns:
        x = frame[col].to_numpy(dtype=float)
        m_all, _, _ = _wstats(x, w)
        m1, v1, n1 = _wstats(x[t], w[t])
        m0, v0, n0 = _wstats(x[~t], w[~t])
        diff = m1 - m0
        p = np.nan
        if np.isfinite(v1) and np.isfinite(v0):
            a, b = v1 / n1, v0 / n0
            se = math.sqrt(a + b)
            if se == 0:
                p = 1.0 if diff == 0 else 0.0
            else:
                df = (a + b) ** 2 / (a * a / (n1 - 1) + b * b / (n0 - 1))
                p = float(2 * stats.t.sf(abs(diff) / se, df))
        rows.append(
            {"covariate": col, "all": m_all, "tu": m1, "ntu": m0, "diff": diff, "p": p, "stars": stars(p)}
        )
    return pd.DataFrame(rows).set_index("covariate")


# ---------------------------------------------------------------- simulation quality


def _weighted_median(x: np.ndarray, w: np.ndarray) -> float:
    """Weighted median; averages the two middle values on an exact tie,
    so unit weights give the ordinary median."""
    order = np.argsort(x, kind="stable")
    xs, cw = x[order], np.cumsum(w[order])
    half = 0.5 * cw[-1]
    i = int(np.searchsorted(cw, half, side="left"))
    if cw[i] == half and i + 1 < len(xs):
        return float(0.5 * (xs[i] + xs[i + 1]))
    return float(xs[i])


def sim_quality(frame: pd.DataFrame, weighted: bool = False) -> pd.DataFrame:
    """Median, mean and SD of reported and simulated (deflated, equivalised)
    disposable income by simulated eligibility and corrected receipt.

    Expects the columns of :func:`metrics_frame`.
    """
    rows = []
    cells = [(e, r) for e in (True, False) for r in (True, False)]
    for e, r in cells + [(None, None)]:
        if e is None:
            part = frame
            label = ("all", "all")
        else:
            part = frame[(frame["eligible"] == e) & (frame["receipt_corrected"] == r)]
            label = ("eligible" if e else "ineligible", "receipt" if r else "no receipt")
        row = {"eligibility": label[0], "receipt": label[1], "n": len(part)}
        for src in ("reported", "simulated"):
            x = part[f"{src}_income"].to_numpy(dtype=float)
            w = part["weight"].to_numpy(dtype=float) if weighted else np.ones(len(part))
            ok = np.isfinite(x)
            x, w = x[ok], w[ok]
            if len(x) == 0:
                row.update({f"{src}_median": np.nan, f"{src}_mean": np.nan, f"{src}_sd": np.nan})
                continue
            median = _weighted_median(x, w)
            mean = float(np.sum(w * x) / np.sum(w))
            sd = float(np.sqrt(np.sum(w * (x - mean) ** 2) / np.sum(w)))
            row.update({f"{src}_median": median, f"{src}_mean": mean, f"{src}_sd": sd})
        rows.append(row)
    return pd.DataFrame(rows)


def density_export(values, weights=None, n_grid: int = 512, grid=None) -> pd.DataFrame:
    """Gaussian kernel density on a grid (Silverman's rule of thumb).

    The default grid runs four bandwidths beyond the data on each side, so
    the exported density integrates to one up to discretisation error.
    """
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if len(x) < 2 or np.ptp(x) == 0:
        raise InputValidationError("density needs at least two distinct values")
    w = None if weights is None else np.asarray(weights, dtype=float)
    kde = stats.gaussian_kde(x, bw_method="silverman", weights=w)
    h = float(np.sqrt(kde.covariance[0, 0]))
    if grid is None:
        grid = np.linspace(x.min() - 4 * h, x.max() + 4 * h, n_grid)
    grid = np.asarray(grid, dtype=float)
    return pd.DataFrame({"grid": grid, "density": kde(grid)})
