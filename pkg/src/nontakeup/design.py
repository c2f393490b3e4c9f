"""Estimation frame and design matrices for the nested take-up models.

The estimation frame has one row per household-wave with the corrected
take-up indicator, the survey weight, the relative income gap, categorical
household characteristics and the long-term covariates.  ``design_matrix``
turns it into a numeric matrix for one of the nested specifications:

``M0``
    constant, gap and gap squared, indicator blocks, wave dummies.
``M1``
    M0 plus lagged receipt shares for the three years before the interview.
``M2``
    M1 plus lagged real equivalised income (thousands).
``M3``
    M2 plus income shock and income volatility (thousands).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import ConfigurationError, DomainError, InputValidationError
from .household import EDUCATION, MIGRATION, MUNICIPALITY, HouseholdSnapshot

__all__ = [
    "MODELS",
    "AGE_GROUPS",
    "HOUSEHOLD_TYPES",
    "CATEGORICAL_BLOCKS",
    "BINARY_INDICATORS",
    "LONG_TERM_GROUPS",
    "DesignInfo",
    "Design",
    "age_group",
    "household_type",
    "estimation_frame",
    "design_matrix",
    "model_terms",
]

MODELS = ("M0", "M1", "M2", "M3")
AGE_GROUPS = ("15-24", "25-34", "35-44", "45-54", "55+")
HOUSEHOLD_TYPES = ("single", "couple_no_children", "single_parent", "couple_children")

# (frame column, categories); the first category is the omitted reference
CATEGORICAL_BLOCKS: dict[str, tuple[str, ...]] = {
    "age_group": AGE_GROUPS,
    "education": EDUCATION,
    "household_type": HOUSEHOLD_TYPES,
    "migration": MIGRATION,
    "municipality": MUNICIPALITY,
}
BINARY_INDICATORS = (
    "child_le3",
    "female",
    "disabled",
    "early_retirement",
    "home_owner",
    "east",
    "genpop",
    "other_benefit",
)
LONG_TERM_GROUPS: dict[str, tuple[str, ...]] = {
    "receipt_share": ("receipt_share_lag1", "receipt_share_lag2", "receipt_share_lag3"),
    "income": ("income_lag1", "income_lag2", "income_lag3"),
    "shock_volatility": ("income_shock", "income_volatility"),
}
_MODEL_GROUPS = {
    "M0": (),
    "M1": ("receipt_share",),
    "M2": ("receipt_share", "income"),
    "M3": ("receipt_share", "income", "shock_volatility"),
}
# monetary covariates enter in thousands
_THOUSANDS = ("income_lag1", "income_lag2", "income_lag3", "income_volatility")

GAP = "relative_income_gap"
GAP_SQ = "relative_income_gap_sq"

FRAME_COLUMNS = (
    "household_id",
    "wave_year",
    "takeup",
    "takeup_reported",
    "weight",
    GAP,
    "entitlement",
    "need_total",
    "sample_origin",
    *CATEGORICAL_BLOCKS,
    *BINARY_INDICATORS,
)


def age_group(age: int) -> str:
    if age < 25:
        return "15-24"
    if age < 35:
        return "25-34"
    if age < 45:
        return "35-44"
    if age < 55:
        return "45-54"
    return "55+"


def household_type(hh: HouseholdSnapshot) -> str:
    couple = hh.partner is not None
    kids = bool(hh.children)
    if couple:
        return "couple_children" if kids else "couple_no_children"
    return "single_parent" if kids else "single"


def _field(obj, name):
    return obj[name] if isinstance(obj, Mapping) else getattr(obj, name)


def estimation_frame(
    panel: Sequence[HouseholdSnapshot],
    entitlements,
    covariates: Optional[pd.DataFrame] = None,
) -> pd.DataFrame:
    """One row per household-wave, ready for :func:`design_matrix`.

    Parameters
    ----------
    panel : sequence of HouseholdSnapshot
    entitlements : sequence aligned with ``panel``
        :class:`~nontakeup.rules.EntitlementResult` objects or mappings.
    covariates : DataFrame, optional
        Output of :func:`nontakeup.spells.build_covariates`.  When given,
        its ``takeup_corrected`` column is the dependent variable and its
        long-term covariates are joined; otherwise the administrative flag on
        each snapshot is used.
    """
    panel = list(panel)
    entitlements = list(entitlements)
    if len(entitlements) != len(panel):
        raise InputValidationError("entitlements must align with the panel")
    rows = []
    for hh, ent in zip(panel, entitlements):
        head = hh.head
        couple = [m for m in hh.members if m.role in ("head", "partner")]
        rows.append(
            {
                "household_id": hh.household_id,
                "wave_year": hh.wave_year,
                "takeup": bool(hh.admin_ubii_at_interview),
                "takeup_reported": bool(hh.reported_ubii),
                "weight": float(hh.survey_weight),
                GAP: float(_field(ent, GAP)),
                "entitlement": float(_field(ent, "entitlement")),
                "need_total": float(_field(ent, "need_total")),
                "sample_origin": hh.sample_origin,
                "age_group": age_group(head.age),
                "education": hh.education_head,
                "household_type": household_type(hh),
                "migration": hh.migration_background_head,
                "municipality": hh.municipality_size_class,
                "child_le3": any(c.age <= 3 for c in hh.children),
                "female": hh.sex_head == "female",
                "disabled": any(m.disabled for m in couple),
                "early_retirement": any(m.early_retirement_self_assessed for m in couple),
                "home_owner": bool(hh.home_owner),
                "east": hh.region == "east",
                "genpop": hh.sample_origin == "GenPop",
                "other_benefit": bool(hh.reported_hb or hh.reported_scb),
            }
        )
    frame = pd.DataFrame(rows, columns=list(FRAME_COLUMNS))
    if covariates is not None:
        cov = covariates.copy()
        cov["household_id"] = cov["household_id"].astype(str)
        keep = [c for c in cov.columns if c not in ("admin_ubii_at_interview", "correction")]
        frame = frame.merge(cov[keep], on=["household_id", "wave_year"], how="left", validate="one_to_one")
        if frame["takeup_corrected"].isna().any():
            raise InputValidationError("covariates missing for some household-waves")
        frame["takeup"] = frame.pop("takeup_corrected").astype(bool)
    return frame


@dataclass
class DesignInfo:
    """Column roles of a design matrix.

    ``blocks`` maps an indicator block to its (non-reference) columns,
    ``polynomial`` maps a variable to its (linear, squared) columns and
    ``groups`` lists long-term covariate groups present in the model.
    """

    model: str
    columns: list[str]
    blocks: dict[str, list[str]] = field(default_factory=dict)
    polynomial: dict[str, tuple[str, str]] = field(default_factory=dict)
    groups: dict[str, list[str]] = field(default_factory=dict)
    dropped: list[str] = field(default_factory=list)

    @property
    def continuous(self) -> list[str]:
        taken = {"const"} | {c for cols in self.blocks.values() for c in cols}
        taken |= {sq for _, sq in self.polynomial.values()}
        return [c for c in self.columns if c not in taken]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "columns": list(self.columns),
            "blocks": {k: list(v) for k, v in self.blocks.items()},
            "polynomial": {k: list(v) for k, v in self.polynomial.items()},
            "groups": {k: list(v) for k, v in self.groups.items()},
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DesignInfo":
        return cls(
            model=data["model"],
            columns=list(data["columns"]),
            blocks={k: list(v) for k, v in data.get("blocks", {}).items()},
            polynomial={k: tuple(v) for k, v in data.get("polynomial", {}).items()},
            groups={k: list(v) for k, v in data.get("groups", {}).items()},
            dropped=list(data.get("dropped", [])),
        )


@dataclass
class Design:
    X: pd.DataFrame
    y: np.ndarray
    groups: np.ndarray
    weights: np.ndarray
    info: DesignInfo


def model_terms(model: str) -> list[str]:
    """Long-term covariates entering ``model``."""
    if model not in _MODEL_GROUPS:
        raise ConfigurationError(f"unknown model {model!r}; choose from {MODELS}")
    return [c for g in _MODEL_GROUPS[model] for c in LONG_TERM_GROUPS[g]]


def _check_frame(frame: pd.DataFrame, needed: Sequence[str]) -> None:
    if len(frame) == 0:
        raise InputValidationError("estimation frame is empty")
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise InputValidationError(f"estimation frame lacks columns {missing}")
    bad = [c for c in needed if frame[c].isna().any()]
    if bad:
        raise InputValidationError(f"missing values in {bad}")
    gap = frame[GAP].to_numpy(dtype=float)
    if np.any((gap < 0) | (gap > 1)):
        raise DomainError("relative income gap must lie in [0, 1]")
    if np.any(frame["weight"].to_numpy(dtype=float) < 0):
        raise DomainError("weights must be non-negative")


def design_matrix(frame: pd.DataFrame, model: str = "M0", wave_dummies: bool = True) -> Design:
    """Numeric design for one nested specification.

    Indicator columns that are identically zero in ``frame`` are dropped and
    listed in ``info.dropped``.
    """
    terms = model_terms(model)
    needed = ["household_id", "wave_year", "takeup", "weight", GAP, *CATEGORICAL_BLOCKS, *BINARY_INDICATORS, *terms]
    _check_frame(frame, needed)
    n = len(frame)
    cols: dict[str, np.ndarray] = {"const": np.ones(n)}
    gap = frame[GAP].to_numpy(dtype=float)
    cols[GAP] = gap
    cols[GAP_SQ] = gap * gap
    info = DesignInfo(model=model, columns=[], polynomial={GAP: (GAP, GAP_SQ)})
    for block, cats in CATEGORICAL_BLOCKS.items():
        values = frame[block].astype(str).to_numpy()
        unknown = set(values) - set(cats)
        if unknown:
            raise InputValidationError(f"unknown {block} categories {sorted(unknown)}")
        info.blocks[block] = []
        for cat in cats[1:]:
            name = f"{block}[{cat}]"
            cols[name] = (values == cat).astype(float)
            info.blocks[block].append(name)
    for name in BINARY_INDICATORS:
        cols[name] = frame[name].astype(bool).to_numpy(dtype=float)
        info.blocks[name] = [name]
    for group in _MODEL_GROUPS[model]:
        info.groups[group] = list(LONG_TERM_GROUPS[group])
        for name in LONG_TERM_GROUPS[group]:
            x = frame[name].to_numpy(dtype=float)
            cols[name] = x / 1000.0 if name in _THOUSANDS else x
    if wave_dummies:
        years = sorted(frame["wave_year"].astype(int).unique())
        wave = frame["wave_year"].astype(int).to_numpy()
        info.blocks["wave"] = []
        for year in years[1:]:
            name = f"wave[{year}]"
            cols[name] = (wave == year).astype(float)
            info.blocks["wave"].append(name)
    for block, names in list(info.blocks.items()):
        kept = [c for c in names if cols[c].any()]
        info.dropped += [c for c in names if c not in kept]
        for c in names:
            if c not in kept:
                del cols[c]
        if kept:
            info.blocks[block] = kept
        else:
            del info.blocks[block]
    X = pd.DataFrame(cols, index=frame.index)
    info.columns = list(X.columns)
    return Design(
        X=X,
        y=frame["takeup"].astype(bool).to_numpy(dtype=float),
        groups=frame["household_id"].astype(str).to_numpy(),
        weights=frame["weight"].to_numpy(dtype=float),
        info=info,
    )
