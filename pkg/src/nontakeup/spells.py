"""Daily administrative spells and the quarter-aligned covariates built on them.

Quarters are addressed by the absolute index ``year * 4 + (q - 1)``.  For an
interview in quarter ``t`` the lag-``L`` year is the four quarters
``t - 4L .. t - 4(L - 1) - 1``, so the three lag years tile the twelve quarters
strictly before the interview.

Wages are held in integer cents and quarter aggregates are formed as exact
integer cent-days before the single final division, which makes the interval
arithmetic agree exactly with a day-by-day enumeration.
"""

from __future__ import annotations

import datetime as dt
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import ConfigurationError, DomainError, InputValidationError
from .household import HouseholdSnapshot

__all__ = [
    "SPELL_KINDS",
    "SpellRecord",
    "LongTermCovariates",
    "COVARIATE_COLUMNS",
    "quarter_bounds",
    "group_spells",
    "receipt_share",
    "receipt_in_quarter",
    "quarterly_income",
    "quarterly_series",
    "income_shock",
    "income_volatility",
    "correct_receipt",
    "covariates_for",
    "build_covariates",
]

SPELL_KINDS = ("ubii_receipt", "employment")


@dataclass(frozen=True)
class SpellRecord:
    person_id: str
    household_id: str
    kind: str
    start_date: dt.date
    end_date: dt.date
    monthly_gross_wage: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SPELL_KINDS:
            raise InputValidationError(f"unknown spell kind {self.kind!r}")
        if self.start_date > self.end_date:
            raise InputValidationError(
                f"spell of {self.person_id} starts after it ends ({self.start_date} > {self.end_date})"
            )
        if self.kind == "ubii_receipt" and self.monthly_gross_wage not in (None, 0):
            raise InputValidationError("benefit spells carry no wage")
        if self.kind == "employment" and (
            self.monthly_gross_wage is None or not self.monthly_gross_wage >= 0
        ):
            raise InputValidationError(f"employment spell of {self.person_id} needs a wage >= 0")

    @property
    def wage_cents(self) -> int:
        return int(round((self.monthly_gross_wage or 0.0) * 100))


@dataclass(frozen=True)
class LongTermCovariates:
    receipt_share_lag1: float
    receipt_share_lag2: float
    receipt_share_lag3: float
    income_lag1: float
    income_lag2: float
    income_lag3: float
    income_shock: float
    income_volatility: float

    def as_dict(self) -> dict:
        return asdict(self)


COVARIATE_COLUMNS = tuple(LongTermCovariates.__dataclass_fields__)


def quarter_bounds(index: int) -> tuple[int, int]:
    """Proleptic ordinals of the first and last day of a quarter."""
    year, q = divmod(index, 4)
    first = dt.date(year, 3 * q + 1, 1)
    nxt = dt.date(year + 1, 1, 1) if q == 3 else dt.date(year, 3 * q + 4, 1)
    return first.toordinal(), nxt.toordinal() - 1


def group_spells(spells: Iterable[SpellRecord]) -> dict[str, list[SpellRecord]]:
    """Index spells by household, keeping input order within a household."""
    out: dict[str, list[SpellRecord]] = defaultdict(list)
    for s in spells:
        out[s.household_id].append(s)
    return dict(out)


def _household(spells, household_id) -> Sequence[SpellRecord]:
    if isinstance(spells, Mapping):
        return spells.get(household_id, ())
    return [s for s in spells if s.household_id == household_id]


def _covered_days(spells: Sequence[SpellRecord], first: int, last: int) -> int:
    """Days in ``[first, last]`` covered by at least one benefit spell."""
    pieces = sorted(
        (max(s.start_date.toordinal(), first), min(s.end_date.toordinal(), last))
        for s in spells
        if s.kind == "ubii_receipt"
    )
    total, cur_lo, cur_hi = 0, None, None
    for lo, hi in pieces:
        if lo > hi:
            continue
        if cur_hi is None or lo > cur_hi + 1:
            if cur_hi is not None:
                total += cur_hi - cur_lo + 1
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo + 1
    return total


def _lag_window(interview_quarter: int, lag_year: int) -> tuple[int, int]:
    if lag_year not in (1, 2, 3):
        raise InputValidationError(f"lag_year must be 1, 2 or 3, got {lag_year}")
    first = quarter_bounds(interview_quarter - 4 * lag_year)[0]
    last = quarter_bounds(interview_quarter - 4 * (lag_year - 1) - 1)[1]
    return first, last


def receipt_share(spells, household_id: str, interview_quarter: int, lag_year: int) -> float:
    """Share of days in lag year ``lag_year`` on which any household member
    received the benefit.

    ``spells`` is either an iterable of :class:`SpellRecord` or the output of
    :func:`group_spells`.
    """
    first, last = _lag_window(interview_quarter, lag_year)
    covered = _covered_days(_household(spells, household_id), first, last)
    return covered / (last - first + 1)


def receipt_in_quarter(spells, household_id: str, quarter: int) -> bool:
    """Whether any benefit spell of the household touches the quarter."""
    first, last = quarter_bounds(quarter)
    return _covered_days(_household(spells, household_id), first, last) > 0


def _wage_cent_days(spells: Sequence[SpellRecord], first: int, last: int) -> int:
    total = 0
    for s in spells:
        if s.kind != "employment":
            continue
        lo = max(s.start_date.toordinal(), first)
        hi = min(s.end_date.toordinal(), last)
        if lo <= hi:
            total += s.wage_cents * (hi - lo + 1)
    return total


def _cpi(cpi: Mapping[int, float], year: int) -> float:
    try:
        value = float(cpi[year])
    except KeyError:
        raise ConfigurationError(f"no deflator for year {year}") from None
    if not value > 0:
        raise ConfigurationError(f"deflator for {year} must be positive")
    return value


def quarterly_income(
    spells,
    household_id: str,
    quarter: int,
    cpi: Optional[Mapping[int, float]] = None,
    equivalence_weight: float = 1.0,
) -> float:
    """Earned income of the household in one quarter, as a monthly rate.

    Each employment spell contributes its monthly wage times the share of
    the quarter's days it covers.  The sum is deflated by ``cpi[year]``
    (2020 = 1) and divided by the household equivalence weight.  Passing
    ``cpi=None`` returns nominal income.
    """
    first, last = quarter_bounds(quarter)
    cent_days = _wage_cent_days(_household(spells, household_id), first, last)
    nominal = cent_days / (last - first + 1) / 100
    deflator = 1.0 if cpi is None else _cpi(cpi, quarter // 4)
    return nominal / deflator / equivalence_weight


def quarterly_series(
    spells,
    household_id: str,
    interview_quarter: int,
    cpi: Optional[Mapping[int, float]] = None,
    equivalence_weight: float = 1.0,
    n_quarters: int = 12,
) -> pd.Series:
    """Quarterly incomes for the ``n_quarters`` quarters before the interview,
    indexed by absolute quarter, oldest first."""
    quarters = range(interview_quarter - n_quarters, interview_quarter)
    own = _household(spells, household_id)
    values = [quarterly_income(own, household_id, q, cpi, equivalence_weight) for q in quarters]
    return pd.Series(values, index=pd.Index(list(quarters), name="quarter"), dtype=float)


def _window(series, quarters) -> np.ndarray:
    """Values for the given quarters; absent quarters count as zero."""
    if isinstance(series, pd.Series):
        series = series.to_dict()
    return np.array([float(series.get(q, 0.0)) for q in quarters])


def income_shock(series, interview_quarter: int, current_need: float) -> float:
    """Year-over-year change in earned income relative to the current need.

    ``series`` maps absolute quarter to a monthly-rate income.  Each year's
    total is three times the sum of its four quarterly rates, so the result
    compares annual totals with twelve months of need.
    """
    if not current_need > 0:
        raise DomainError(f"current need must be positive, got {current_need}")
    t = interview_quarter
    recent = _window(series, range(t - 4, t))
    prior = _window(series, range(t - 8, t - 4))
    return 3.0 * (math.fsum(recent) - math.fsum(prior)) / (12.0 * current_need)


def income_volatility(series, interview_quarter: int) -> float:
    """Population standard deviation of the twelve quarterly values before
    the interview."""
    values = _window(series, range(interview_quarter - 12, interview_quarter))
    mean = math.fsum(values) / len(values)
    return math.sqrt(math.fsum((values - mean) ** 2) / len(values))


def correct_receipt(reported: bool, admin: bool) -> tuple[bool, str]:
    """Replace a reported receipt flag by the administrative one and name the
    kind of misreport it corrects."""
    reported, admin = bool(reported), bool(admin)
    if reported == admin:
        return admin, "none"
    return admin, "underreport" if admin else "overreport"


def covariates_for(
    spells,
    hh: HouseholdSnapshot,
    cpi: Mapping[int, float],
    current_need: float,
) -> LongTermCovariates:
    """All long-term covariates of one household-wave.

    Lagged incomes and volatility use real equivalised income; the shock uses
    nominal household income so that it is on the same footing as the
    current (nominal, household-level) need.
    """
    own = _household(spells, hh.household_id)
    t = hh.interview_quarter
    real = quarterly_series(own, hh.household_id, t, cpi, hh.equivalence_weight()).to_numpy()
    nominal = quarterly_series(own, hh.household_id, t, None, 1.0)
    shares = [receipt_share(own, hh.household_id, t, lag) for lag in (1, 2, 3)]
    # real[0:4] is lag year 3, real[8:12] lag year 1
    lags = [math.fsum(real[8 - 4 * k : 12 - 4 * k]) / 4 for k in range(3)]
    return LongTermCovariates(
        receipt_share_lag1=shares[0],
        receipt_share_lag2=shares[1],
        receipt_share_lag3=shares[2],
        income_lag1=lags[0],
        income_lag2=lags[1],
        income_lag3=lags[2],
        income_shock=income_shock(nominal, t, current_need),
        income_volatility=income_volatility(dict(zip(range(t - 12, t), real)), t),
    )


def build_covariates(
    panel: Sequence[HouseholdSnapshot],
    spells: Iterable[SpellRecord],
    cpi: Mapping[int, float],
    needs: Sequence[float],
    n_jobs: int = 1,
) -> pd.DataFrame:
    """Covariates for every household-wave, keyed by (household_id, wave_year).

    Besides the :class:`LongTermCovariates` fields the frame carries the
    administrative receipt flag for the interview quarter and the corrected
    take-up indicator with the kind of correction applied.
    """
    panel = list(panel)
    if len(needs) != len(panel):
        raise InputValidationError("needs must align with the panel")
    grouped = group_spells(spells)

    def row(hh, need):
        admin = receipt_in_quarter(grouped, hh.household_id, hh.interview_quarter)
        corrected, kind = correct_receipt(hh.reported_ubii, admin)
        cov = covariates_for(grouped, hh, cpi, need).as_dict()
        return {
            "household_id": hh.household_id,
            "wave_year": hh.wave_year,
            **cov,
            "admin_ubii_at_interview": admin,
            "takeup_corrected": corrected,
            "correction": kind,
        }

    if n_jobs == 1:
        rows = [row(hh, need) for hh, need in zip(panel, needs)]
    else:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=n_jobs)(delayed(row)(hh, need) for hh, need in zip(panel, needs))
    columns = ["household_id", "wave_year", *COVARIATE_COLUMNS, "admin_ubii_at_interview", "takeup_corrected", "correction"]
    return pd.DataFrame(rows, columns=columns)
