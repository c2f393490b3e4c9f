"""Household-wave snapshots and their roster."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .exceptions import CompositionError, InputValidationError

ROLES = ("head", "partner", "child")
REGIONS = ("west", "east")
SAMPLE_ORIGINS = ("Admin", "GenPop", "Refugee")
MIGRATION = ("none", "first_gen", "second_gen")
# ordered as in the reference-category labels of the subgroup tables
EDUCATION = ("no_certificate", "elementary_middle", "secondary", "university_entrance")
MUNICIPALITY = ("lt50k", "ge50k_periphery", "50k_500k_core", "ge500k_core")
SEXES = ("male", "female")
CHILD_AGE_LIMIT = 25


@dataclass(frozen=True)
class Member:
    age: int
    role: str
    gross_earnings: float = 0.0
    other_income: float = 0.0
    student_or_trainee: bool = False
    pensioner: bool = False
    early_retirement_self_assessed: bool = False
    disabled: bool = False
    employable: bool = True
    # declares gainful employment above the marginal-job threshold
    employed: bool = False
    person_id: Optional[str] = None


@dataclass(frozen=True)
class HouseholdSnapshot:
    """One household at one interview wave.

    Categorical fields accept ``None`` for a missing survey answer; such rows
    are removed by the missing-regressor filter before estimation.
    """

    household_id: str
    wave_year: int
    interview_quarter: int
    members: tuple[Member, ...]
    rent_incl_heating: float = 0.0
    dwelling_sqm: float = 0.0
    home_owner: bool = False
    wealth_class_midpoint: float = 0.0
    region: Optional[str] = "west"
    municipality_size_class: Optional[str] = "lt50k"
    migration_background_head: Optional[str] = "none"
    education_head: Optional[str] = "elementary_middle"
    sex_head: Optional[str] = "male"
    sample_origin: str = "GenPop"
    reported_ubii: bool = False
    reported_hb: bool = False
    reported_scb: bool = False
    admin_ubii_at_interview: bool = False
    survey_weight: float = 1.0
    # fields used by the sample-selection cascade
    interview_complete: bool = True
    n_communities: int = 1
    core_family: bool = True
    partner_referenced: bool = False
    admin_linked: bool = True
    reported_disposable_income: Optional[float] = None
    reported_ubii_amount: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def head(self) -> Member:
        heads = [m for m in self.members if m.role == "head"]
        if len(heads) != 1:
            raise CompositionError(
                f"household {self.household_id}/{self.wave_year}: "
                f"expected exactly one head, found {len(heads)}"
            )
        return heads[0]

    @property
    def partner(self) -> Optional[Member]:
        partners = [m for m in self.members if m.role == "partner"]
        return partners[0] if partners else None

    @property
    def children(self) -> tuple[Member, ...]:
        return tuple(m for m in self.members if m.role == "child")

    @property
    def adults(self) -> tuple[Member, ...]:
        return tuple(m for m in self.members if m.role != "child")

    @property
    def wave_quarter(self) -> int:
        """Calendar quarter (1-4) of the interview."""
        return self.interview_quarter % 4 + 1

    def equivalence_weight(self, child_age: int = 14) -> float:
        """Modified OECD scale: 1.0 for the head, 0.5 per further member aged
        ``child_age`` or older, 0.3 per member below it."""
        weight = 1.0
        for m in self.members:
            if m.role == "head":
                continue
            weight += 0.5 if m.age >= child_age else 0.3
        return weight

    def validate(self) -> "HouseholdSnapshot":
        """Check roster and monetary invariants; returns ``self``."""
        tag = f"household {self.household_id}/{self.wave_year}"
        roles = [m.role for m in self.members]
        bad = set(roles) - set(ROLES)
        if bad:
            raise CompositionError(f"{tag}: unknown roles {sorted(bad)}")
        if roles.count("head") != 1:
            raise CompositionError(f"{tag}: expected exactly one head, found {roles.count('head')}")
        if roles.count("partner") > 1:
            raise CompositionError(f"{tag}: more than one partner")
        for m in self.members:
            if m.role == "child" and m.age >= CHILD_AGE_LIMIT:
                raise CompositionError(f"{tag}: child aged {m.age} is not part of the community of needs")
            if m.age < 0:
                raise InputValidationError(f"{tag}: negative age")
            if m.gross_earnings < 0 or m.other_income < 0:
                raise InputValidationError(f"{tag}: negative income")
        money = (self.rent_incl_heating, self.dwelling_sqm, self.wealth_class_midpoint)
        if any(v < 0 for v in money):
            raise InputValidationError(f"{tag}: monetary fields must be >= 0")
        if self.rent_incl_heating > 0 and self.dwelling_sqm <= 0:
            raise InputValidationError(f"{tag}: dwelling_sqm must be > 0 when rent is paid")
        if self.survey_weight < 0:
            raise InputValidationError(f"{tag}: negative survey weight")
        if self.sample_origin not in SAMPLE_ORIGINS:
            raise InputValidationError(f"{tag}: unknown sample origin {self.sample_origin!r}")
        return self


def quarter_index(year: int, quarter: int) -> int:
    """Absolute quarter index; ``quarter`` runs from 1 to 4."""
    if not 1 <= quarter <= 4:
        raise InputValidationError(f"quarter must be 1-4, got {quarter}")
    return year * 4 + quarter - 1


def quarter_label(index: int) -> str:
    return f"{index // 4}Q{index % 4 + 1}"


def parse_quarter(label: str) -> int:
    try:
        year, q = str(label).upper().split("Q")
        return quarter_index(int(year), int(q))
    except ValueError:
        raise InputValidationError(f"cannot parse quarter {label!r}; expected e.g. 2012Q3") from None
