"""Delimited-text readers and writers for pipeline artifacts.

Every file is UTF-8 CSV with a header row.  Booleans are written as 0/1,
missing categorical answers as empty fields and the household roster as a
compact JSON list in the ``members`` column.  Column lists live in
``SCHEMAS``; readers reject files whose header lacks a required column.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .exceptions import MissingArtifactError, SchemaError
from .household import HouseholdSnapshot, Member
from .rules import ENTITLEMENT_COLUMNS, EntitlementResult
from .spells import SpellRecord

__all__ = [
    "SCHEMAS",
    "panel_to_frame",
    "frame_to_panel",
    "spells_to_frame",
    "frame_to_spells",
    "entitlements_from_frame",
    "read_csv",
    "write_csv",
]

_MEMBER_FIELDS = [f.name for f in dataclasses.fields(Member)]
_SNAPSHOT_FIELDS = [f.name for f in dataclasses.fields(HouseholdSnapshot) if f.name != "extra"]
_BOOL_SNAPSHOT = [
    f.name for f in dataclasses.fields(HouseholdSnapshot) if f.type in ("bool", bool)
]
_OPTIONAL_FLOAT = ["reported_disposable_income", "reported_ubii_amount"]
_OPTIONAL_CATEGORY = [
    "region",
    "municipality_size_class",
    "migration_background_head",
    "education_head",
    "sex_head",
]

SCHEMAS: dict[str, list[str]] = {
    "panel": _SNAPSHOT_FIELDS,
    "spells": ["person_id", "household_id", "kind", "start_date", "end_date", "monthly_gross_wage"],
    "entitlements": list(ENTITLEMENT_COLUMNS),
}


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


def _member_dict(m: Member) -> dict:
    return {k: _plain(getattr(m, k)) for k in _MEMBER_FIELDS}


def panel_to_frame(panel: Iterable[HouseholdSnapshot]) -> pd.DataFrame:
    rows = []
    for hh in panel:
        row = {k: getattr(hh, k) for k in _SNAPSHOT_FIELDS}
        row["members"] = json.dumps([_member_dict(m) for m in hh.members], sort_keys=True, separators=(",", ":"))
        for k in _BOOL_SNAPSHOT:
            row[k] = int(bool(row[k]))
        rows.append(row)
    return pd.DataFrame(rows, columns=_SNAPSHOT_FIELDS)


def _require(frame: pd.DataFrame, kind: str, source: str = "") -> None:
    missing = [c for c in SCHEMAS[kind] if c not in frame.columns]
    if missing:
        where = f" in {source}" if source else ""
        raise SchemaError(f"{kind} file{where} lacks columns {missing}")


def _optional(value):
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    return value


def frame_to_panel(frame: pd.DataFrame) -> list[HouseholdSnapshot]:
    _require(frame, "panel")
    out = []
    for rec in frame.to_dict("records"):
        try:
            members = tuple(Member(**m) for m in json.loads(rec["members"]))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"household {rec['household_id']}: bad members field ({exc})") from None
        kwargs = {}
        for k in _SNAPSHOT_FIELDS:
            v = rec[k]
            if k == "members":
                v = members
            elif k in _BOOL_SNAPSHOT:
                v = bool(int(v))
            elif k in _OPTIONAL_FLOAT:
                v = _optional(v)
                v = None if v is None else float(v)
            elif k in _OPTIONAL_CATEGORY:
                v = _optional(v)
                v = None if v is None else str(v)
            elif k in ("wave_year", "interview_quarter", "n_communities"):
                v = int(v)
            elif k in ("household_id", "sample_origin"):
                v = str(v)
            else:
                v = float(v)
            kwargs[k] = v
        out.append(HouseholdSnapshot(**kwargs))
    return out


def spells_to_frame(spells: Iterable[SpellRecord]) -> pd.DataFrame:
    rows = [
        {
            "person_id": s.person_id,
            "household_id": s.household_id,
            "kind": s.kind,
            "start_date": s.start_date.isoformat(),
            "end_date": s.end_date.isoformat(),
            "monthly_gross_wage": s.monthly_gross_wage,
        }
        for s in spells
    ]
    return pd.DataFrame(rows, columns=SCHEMAS["spells"])


def frame_to_spells(frame: pd.DataFrame) -> list[SpellRecord]:
    _require(frame, "spells")
    out = []
    for rec in frame.to_dict("records"):
        wage = _optional(rec["monthly_gross_wage"])
        out.append(
            SpellRecord(
                str(rec["person_id"]),
                str(rec["household_id"]),
                str(rec["kind"]),
                dt.date.fromisoformat(str(rec["start_date"])),
                dt.date.fromisoformat(str(rec["end_date"])),
                None if wage is None else float(wage),
            )
        )
    return out


def entitlements_from_frame(frame: pd.DataFrame) -> list[EntitlementResult]:
    _require(frame, "entitlements")
    out = []
    for rec in frame.to_dict("records"):
        kwargs = {}
        for f in dataclasses.fields(EntitlementResult):
            v = rec[f.name]
            if f.name == "household_id":
                v = str(v)
            elif f.name == "wave_year":
                v = int(v)
            elif f.type in ("bool", bool):
                v = bool(int(v))
            else:
                v = float(v)
            kwargs[f.name] = v
        out.append(EntitlementResult(**kwargs))
    return out


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = frame.copy()
    for c in out.columns:
        if out[c].dtype == bool:
            out[c] = out[c].astype(int)
    out.to_csv(path, index=False, lineterminator="\n")
    return path


def read_csv(path, kind: str | None = None, required: Sequence[str] = ()) -> pd.DataFrame:
    """Read an artifact; ``kind`` checks the columns listed in ``SCHEMAS``."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    try:
        frame = pd.read_csv(
            path,
            dtype={"household_id": str, "person_id": str},
            keep_default_na=True,
            float_precision="round_trip",
        )
    except (pd.errors.ParserError, UnicodeDecodeError, pd.errors.EmptyDataError) as exc:
        raise SchemaError(f"cannot parse {path}: {exc}") from None
    if kind is not None:
        _require(frame, kind, str(path))
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path} lacks columns {missing}")
    return frame
