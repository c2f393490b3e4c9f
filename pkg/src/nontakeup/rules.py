"""Means test for the minimum-income benefit and its upstream benefits.

Needs, countable income, the benefit entitlement, housing benefit (HB),
supplementary child benefit (SCB) and the precedence of HB/SCB over the
minimum-income benefit.  All arithmetic is done in :class:`~decimal.Decimal`
and every component is rounded to whole cents exactly once, so monotone
schedules stay monotone after rounding.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from decimal import Decimal
from typing import Iterable, Mapping, Sequence

import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConfigurationError
from .household import HouseholdSnapshot
from .policy import ZERO, PolicyYearParameters, round_cents, to_decimal

__all__ = [
    "EntitlementResult",
    "EntitlementSimulator",
    "ENTITLEMENT_COLUMNS",
    "compute_need",
    "countable_income",
    "compute_housing_benefit",
    "compute_child_supplement",
    "compute_entitlement",
    "precedence",
    "recognized_housing",
    "simulate_population",
    "results_frame",
]


@dataclass(frozen=True)
class EntitlementResult:
    household_id: str
    wave_year: int
    need_total: float
    countable_income: float
    entitlement: float
    relative_income_gap: float
    hb_amount: float
    scb_amount: float
    eligible_ubii: bool
    precedence_blocked: bool
    wealth_pass: bool
    recognized_housing: float
    disposable_income: float


ENTITLEMENT_COLUMNS = tuple(EntitlementResult.__dataclass_fields__)


def _check_year(hh: HouseholdSnapshot, p: PolicyYearParameters) -> None:
    if p.year != hh.wave_year:
        raise ConfigurationError(
            f"policy year {p.year} does not match wave year {hh.wave_year} "
            f"of household {hh.household_id}"
        )


def _recognized_housing(hh: HouseholdSnapshot, p: PolicyYearParameters) -> Decimal:
    rent = to_decimal(hh.rent_incl_heating)
    cap = p.rent_cap_per_sqm * to_decimal(hh.dwelling_sqm)
    # owners report their housing cost in the same field; same cap applies
    return round_cents(min(rent, cap))


def _need(hh: HouseholdSnapshot, p: PolicyYearParameters) -> Decimal:
    hh.validate()
    _check_year(hh, p)
    children = hh.children
    if hh.partner is not None:
        total = 2 * p.standard_rate_partner
    else:
        total = p.standard_rate_single
        if children:
            share = p.single_parent_supplement.share([c.age for c in children])
            total += round_cents(share * p.standard_rate_single)
    for child in children:
        total += p.child_rate(child.age)
    return round_cents(total) + _recognized_housing(hh, p)


def _member_income(member, p: PolicyYearParameters) -> Decimal:
    gross = to_decimal(member.gross_earnings)
    earned = p.net_income_function(gross) - p.earnings_disregard(gross)
    earned = round_cents(max(earned, ZERO))
    return earned + round_cents(to_decimal(member.other_income))


def _income(hh: HouseholdSnapshot, p: PolicyYearParameters) -> Decimal:
    hh.validate()
    _check_year(hh, p)
    return sum((_member_income(m, p) for m in hh.members), ZERO)


def _net_income(hh: HouseholdSnapshot, p: PolicyYearParameters) -> Decimal:
    return sum(
        (
            round_cents(p.net_income_function(to_decimal(m.gross_earnings)))
            + round_cents(to_decimal(m.other_income))
            for m in hh.members
        ),
        ZERO,
    )


def _notional_hb(hh, p, income: Decimal) -> Decimal:
    s = p.hb_schedule
    rent_net = _recognized_housing(hh, p) * (1 - p.heating_share)
    value = s.rent_share * rent_net - s.taper * max(income - s.income_floor, ZERO)
    return round_cents(max(value, ZERO))


def _hb(hh, p, need: Decimal, income: Decimal) -> Decimal:
    notional = _notional_hb(hh, p, income)
    # discretionary coverage rule; the boundary itself qualifies
    if income + notional >= round_cents(p.hb_coverage_factor * need):
        return notional
    return ZERO


def _scb(hh, p, income: Decimal) -> Decimal:
    n = len(hh.children)
    if n == 0:
        return ZERO
    s = p.scb_schedule
    value = n * s.amount_per_child - s.taper * max(income - s.income_floor, ZERO)
    return round_cents(max(value, ZERO))


def _wealth_threshold(hh, p) -> Decimal:
    return len(hh.adults) * p.wealth_threshold_base + len(hh.children) * p.wealth_threshold_per_child


def recognized_housing(hh: HouseholdSnapshot, p: PolicyYearParameters) -> float:
    """Housing cost recognised in the need: rent capped at ``rent_cap_per_sqm``
    times the dwelling size."""
    return float(_recognized_housing(hh, p))


def compute_need(hh: HouseholdSnapshot, p: PolicyYearParameters) -> float:
    """Monthly household need: standard rates, single-parent supplement and
    recognised housing cost.

    Raises
    ------
    CompositionError
        If the roster has no (or more than one) head.
    """
    return float(_need(hh, p))


def countable_income(hh: HouseholdSnapshot, p: PolicyYearParameters) -> float:
    """Income counted against the need.

    Each member contributes net earnings less the earnings disregard (never
    below zero) plus other income.
    """
    return float(_income(hh, p))


def compute_housing_benefit(hh: HouseholdSnapshot, p: PolicyYearParameters) -> float:
    return float(_hb(hh, p, _need(hh, p), _income(hh, p)))


def compute_child_supplement(hh: HouseholdSnapshot, p: PolicyYearParameters) -> float:
    return float(_scb(hh, p, _income(hh, p)))


def precedence(entitlement, hb, scb) -> bool:
    """True when the upstream benefits exceed the minimum-income entitlement.

    A tie keeps the minimum-income benefit.
    """
    entitlement, hb, scb = (to_decimal(v) for v in (entitlement, hb, scb))
    if min(entitlement, hb, scb) < 0:
        raise ValueError("benefit amounts must be >= 0")
    return hb + scb > entitlement


def compute_entitlement(hh: HouseholdSnapshot, p: PolicyYearParameters) -> EntitlementResult:
    need = _need(hh, p)
    income = _income(hh, p)
    entitlement = max(need - income, ZERO)
    hb = _hb(hh, p, need, income)
    scb = _scb(hh, p, income)
    wealth_pass = to_decimal(hh.wealth_class_midpoint) <= _wealth_threshold(hh, p)
    blocked = precedence(entitlement, hb, scb)
    eligible = wealth_pass and not blocked and entitlement > 0
    gap = float(entitlement / need) if need > 0 else 0.0

    disposable = _net_income(hh, p)
    if eligible:
        disposable += entitlement
    elif wealth_pass:
        disposable += hb + scb
    return EntitlementResult(
        household_id=hh.household_id,
        wave_year=hh.wave_year,
        need_total=float(need),
        countable_income=float(income),
        entitlement=float(entitlement),
        relative_income_gap=gap,
        hb_amount=float(hb),
        scb_amount=float(scb),
        eligible_ubii=eligible,
        precedence_blocked=blocked,
        wealth_pass=wealth_pass,
        recognized_housing=float(_recognized_housing(hh, p)),
        disposable_income=float(disposable),
    )


def simulate_population(
    panel: Iterable[HouseholdSnapshot],
    params: Mapping[int, PolicyYearParameters],
) -> list[EntitlementResult]:
    """Run :func:`compute_entitlement` over a panel, preserving order.

    Raises
    ------
    ConfigurationError
        If any wave year has no parameter set; the message lists them all.
    """
    panel = list(panel)
    missing = sorted({hh.wave_year for hh in panel} - set(params))
    if missing:
        raise ConfigurationError(f"no policy parameters for year(s): {missing}")
    return [compute_entitlement(hh, params[hh.wave_year]) for hh in panel]


def results_frame(results: Sequence[EntitlementResult]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in results], columns=list(ENTITLEMENT_COLUMNS))


class EntitlementSimulator(TransformerMixin, BaseEstimator):
    """Transformer wrapping :func:`simulate_population`.

    Parameters
    ----------
    policy : mapping of year to PolicyYearParameters, optional
        Defaults to the packaged policy configuration.
    """

    def __init__(self, policy=None):
        self.policy = policy

    def fit(self, X=None, y=None):
        if self.policy is None:
            from .policy import default_policy

            self.policy_ = default_policy()
        else:
            self.policy_ = dict(self.policy)
        if X is not None:
            missing = sorted({hh.wave_year for hh in X} - set(self.policy_))
            if missing:
                raise ConfigurationError(f"no policy parameters for year(s): {missing}")
        return self

    def transform(self, X) -> pd.DataFrame:
        if not hasattr(self, "policy_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("EntitlementSimulator is not fitted")
        return results_frame(simulate_population(X, self.policy_))
