"""Ordered exclusion cascade from the raw panel to the estimation sample.

Every filter is a pure predicate of a household-wave (plus, for the
changing-head filter, the raw panel the row came from).  The ledger records
how many observations survive each step, per year and in total; the final
surviving set does not depend on the order of the filters.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import pandas as pd

from .exceptions import ConfigurationError, InputValidationError, UndefinedRateError
from .household import HouseholdSnapshot

__all__ = [
    "DEFAULT_FILTERS",
    "FILTER_LABELS",
    "SelectionLedger",
    "apply_cascade",
    "takeup_counts",
    "unweighted_ntr",
]

Key = tuple[str, int]


def _missing_interview(hh, ctx):
    return not hh.interview_complete


def _multiple_communities(hh, ctx):
    return hh.n_communities > 1


def _non_core_family(hh, ctx):
    return not hh.core_family


def _inconsistent_wage(hh, ctx):
    return any(m.employed and m.gross_earnings == 0 for m in hh.members)


def _inconsistent_partner(hh, ctx):
    return hh.partner_referenced and hh.partner is None


def _pensioner(hh, ctx):
    return any(m.pensioner for m in hh.members)


def _student_or_trainee(hh, ctx):
    return any(m.student_or_trainee for m in hh.adults)


def _refugee_sample(hh, ctx):
    return hh.sample_origin == "Refugee"


def _simulated_ineligible(hh, ctx):
    result = ctx.entitlements.get((hh.household_id, hh.wave_year))
    if result is None:
        raise InputValidationError(
            f"no entitlement for household {hh.household_id}/{hh.wave_year}"
        )
    return not bool(_field(result, "eligible_ubii"))


def _changing_head(hh, ctx):
    return hh.household_id in ctx.changing_head


_REGRESSOR_FIELDS = (
    "region",
    "municipality_size_class",
    "migration_background_head",
    "education_head",
    "sex_head",
)


def _missing_regressors(hh, ctx):
    return any(getattr(hh, f) is None for f in _REGRESSOR_FIELDS)


def _no_admin_linkage(hh, ctx):
    if ctx.linked is not None:
        return hh.household_id not in ctx.linked
    return not hh.admin_linked


_PREDICATES: dict[str, Callable] = {
    "missing_interview": _missing_interview,
    "multiple_communities": _multiple_communities,
    "non_core_family": _non_core_family,
    "inconsistent_wage": _inconsistent_wage,
    "inconsistent_partner": _inconsistent_partner,
    "pensioner": _pensioner,
    "student_or_trainee": _student_or_trainee,
    "refugee_sample": _refugee_sample,
    "simulated_ineligible": _simulated_ineligible,
    "changing_head": _changing_head,
    "missing_regressors": _missing_regressors,
    "no_admin_linkage": _no_admin_linkage,
}

DEFAULT_FILTERS = tuple(_PREDICATES)

FILTER_LABELS = {
    "missing_interview": "Missing interviews",
    "multiple_communities": "More than one community of needs",
    "non_core_family": "Non-core-family household",
    "inconsistent_wage": "Inconsistent wage information",
    "inconsistent_partner": "Inconsistent partner information",
    "pensioner": "Pensioner in household",
    "student_or_trainee": "Head or partner student/trainee",
    "refugee_sample": "Refugee sample",
    "simulated_ineligible": "Simulated ineligible",
    "changing_head": "Changing household head",
    "missing_regressors": "Missing regressors",
    "no_admin_linkage": "No administrative linkage",
}


def _field(result, name):
    if isinstance(result, Mapping):
        return result[name]
    return getattr(result, name)


@dataclass
class _Context:
    entitlements: Mapping[Key, object]
    changing_head: set
    linked: Optional[set]


def _changing_heads(panel: Sequence[HouseholdSnapshot]) -> set:
    heads: dict[str, set] = defaultdict(set)
    for hh in panel:
        ids = [m.person_id for m in hh.members if m.role == "head" and m.person_id is not None]
        if len(ids) == 1:
            heads[hh.household_id].add(ids[0])
    return {h for h, ids in heads.items() if len(ids) > 1}


@dataclass
class SelectionLedger:
    """Surviving counts after each filter, per year and in total."""

    years: list[int]
    rows: list[tuple[str, dict[int, int], int]] = field(default_factory=list)
    final_ids: list[Key] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        data = [[counts.get(y, 0) for y in self.years] + [total] for _, counts, total in self.rows]
        index = pd.Index([name for name, _, _ in self.rows], name="step")
        return pd.DataFrame(data, index=index, columns=[str(y) for y in self.years] + ["total"])

    def counts(self, step: str) -> dict[int, int]:
        for name, counts, _ in self.rows:
            if name == step:
                return counts
        raise KeyError(step)


def _count(rows: Iterable[HouseholdSnapshot], years) -> tuple[dict[int, int], int]:
    counts = {y: 0 for y in years}
    n = 0
    for hh in rows:
        counts[hh.wave_year] += 1
        n += 1
    return counts, n


def _resolve_filters(config) -> list[str]:
    if config is None:
        return list(DEFAULT_FILTERS)
    names = config.get("filters", DEFAULT_FILTERS) if isinstance(config, Mapping) else config
    names = list(names)
    unknown = [n for n in names if n not in _PREDICATES]
    if unknown:
        raise ConfigurationError(f"unknown selection filter(s): {unknown}")
    if len(set(names)) != len(names):
        raise ConfigurationError("selection filters listed more than once")
    return names


def _entitlement_map(entitlements) -> dict[Key, object]:
    if entitlements is None:
        return {}
    if isinstance(entitlements, pd.DataFrame):
        return {
            (str(r["household_id"]), int(r["wave_year"])): r
            for r in entitlements.to_dict("records")
        }
    if isinstance(entitlements, Mapping):
        return dict(entitlements)
    return {(r.household_id, r.wave_year): r for r in entitlements}


def apply_cascade(
    panel: Sequence[HouseholdSnapshot],
    entitlements=None,
    linked_households: Optional[Iterable[str]] = None,
    config=None,
) -> tuple[SelectionLedger, list[HouseholdSnapshot]]:
    """Run the exclusion cascade.

    Parameters
    ----------
    panel : sequence of HouseholdSnapshot
        Raw household-waves.
    entitlements : EntitlementResult sequence, frame or mapping, optional
        Keyed by ``(household_id, wave_year)``; needed for every row that
        reaches the eligibility filter.
    linked_households : iterable of str, optional
        Households with administrative linkage.  When omitted the
        ``admin_linked`` field of each snapshot decides.
    config : mapping or sequence, optional
        ``{"filters": [...]}`` or a list of filter names, in order.

    Returns
    -------
    ledger, filtered panel
    """
    names = _resolve_filters(config)
    panel = list(panel)
    years = sorted({hh.wave_year for hh in panel})
    ctx = _Context(
        entitlements=_entitlement_map(entitlements),
        changing_head=_changing_heads(panel),
        linked=None if linked_households is None else set(linked_households),
    )
    ledger = SelectionLedger(years=years)
    ledger.rows.append(("raw_panel", *_count(panel, years)))
    surviving = panel
    for name in names:
        predicate = _PREDICATES[name]
        surviving = [hh for hh in surviving if not predicate(hh, ctx)]
        ledger.rows.append((name, *_count(surviving, years)))
    ledger.final_ids = [(hh.household_id, hh.wave_year) for hh in surviving]
    return ledger, surviving


def takeup_counts(panel: Sequence[HouseholdSnapshot], takeup: Optional[Sequence[bool]] = None) -> pd.DataFrame:
    """Take-up and non-take-up counts by year with totals.

    ``takeup`` defaults to the administrative receipt flag of each row.
    """
    panel = list(panel)
    flags = [hh.admin_ubii_at_interview for hh in panel] if takeup is None else list(takeup)
    if len(flags) != len(panel):
        raise InputValidationError("take-up flags must align with the panel")
    frame = pd.DataFrame({"year": [hh.wave_year for hh in panel], "takeup": [bool(f) for f in flags]})
    years = sorted(frame["year"].unique())
    rows = []
    for label, part in [*((str(y), frame[frame["year"] == y]) for y in years), ("total", frame)]:
        n = len(part)
        taken = int(part["takeup"].sum())
        rows.append(
            {
                "year": label,
                "eligible": n,
                "takeup": taken,
                "non_takeup": n - taken,
                "ntr": (n - taken) / n if n else float("nan"),
            }
        )
    return pd.DataFrame(rows, columns=["year", "eligible", "takeup", "non_takeup", "ntr"])


def unweighted_ntr(eligible: int, non_takeup: int) -> float:
    if eligible <= 0:
        raise UndefinedRateError("no eligible observations")
    return non_takeup / eligible
