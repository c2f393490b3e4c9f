"""Hand-constructed households for the rules oracle suite (2020 defaults)
and random panels for the metrics checks."""

from __future__ import annotations

import numpy as np

from nontakeup.household import HouseholdSnapshot, Member


def _case(label, adults, children=(), rent=400, sqm=50, wealth=0, owner=False):
    return {
        "label": label,
        "adults": [tuple(a) for a in adults],
        "children": [tuple(c) for c in children],
        "rent": rent,
        "sqm": sqm,
        "wealth": wealth,
        "owner": owner,
    }


RULE_CASES = [
    _case("single_no_income", [(0, 0)]),
    _case("single_rent_cap_binds", [(0, 0)], rent=900),
    _case("owner_zero_cost", [(0, 0)], rent=0, sqm=0, owner=True),
    _case("gross_within_base", [(100, 0)]),
    _case("gross_first_bracket", [(500, 0)]),
    _case("gross_bracket_edge", [(1000, 0)]),
    _case("gross_second_bracket", [(1100, 0)]),
    _case("gross_above_disregard", [(1200, 0)]),
    _case("gross_top_net_segment", [(2500, 0)]),
    _case("other_income_only", [(0, 300)]),
    _case("wealth_rejected", [(0, 0)], wealth=20000),
    _case("wealth_at_threshold", [(0, 0)], wealth=15000),
    _case("precedence_single", [(1400, 0)]),
    _case("precedence_family", [(3000, 0), (0, 0)], [(8, 0, 0), (10, 0, 0)], rent=800, sqm=70),
    _case("hb_boundary_exact", [(0, 576)]),
    _case("hb_boundary_below", [(0, "575.99")]),
    _case("single_parent_toddler", [(600, 0)], [(3, 0, 0)], rent=600, sqm=60),
    _case("single_parent_three_school", [(0, 0)], [(8, 0, 0), (10, 0, 0), (12, 0, 0)], rent=700, sqm=80),
    _case("single_parent_cap", [(0, 0)], [(1, 0, 0), (4, 0, 0), (9, 0, 0), (15, 0, 0), (17, 0, 0)], rent=900, sqm=100),
    _case("single_parent_one_older", [(900, 0)], [(10, 0, 0)], rent=500, sqm=55),
    _case("couple_two_earners", [(1300, 0), ("450.50", 0)], rent=650, sqm=60),
    _case("couple_adult_child_earns", [(800, 0), (0, 0)], [(24, 450, 0)], rent=1200, sqm=75),
    _case("wealth_family_at_threshold", [(0, 0), (0, 0)], [(5, 0, 0)], rent=700, sqm=65, wealth=33100),
    _case("wealth_family_over", [(0, 0), (0, 0)], [(5, 0, 0)], rent=700, sqm=65, wealth="33100.01"),
    _case("large_family_scb_taper", [(2600, 120), (700, 0)], [(2, 0, 0), (6, 0, 0), (14, 0, 184)], rent=1100, sqm=90),
]


def to_snapshot(case, year=2020) -> HouseholdSnapshot:
    members = [
        Member(age=40, role="head" if i == 0 else "partner", gross_earnings=float(g), other_income=float(o))
        for i, (g, o) in enumerate(case["adults"])
    ]
    members += [
        Member(age=a, role="child", gross_earnings=float(g), other_income=float(o))
        for a, g, o in case["children"]
    ]
    return HouseholdSnapshot(
        household_id=case["label"],
        wave_year=year,
        interview_quarter=year * 4 + 1,
        members=tuple(members),
        rent_incl_heating=float(case["rent"]),
        dwelling_sqm=float(case["sqm"]),
        home_owner=case["owner"],
        wealth_class_midpoint=float(case["wealth"]),
    )


def random_rate_panel(rng, n=30, weighted=True):
    """Small household-wave frame with random flags for rate checks.

    Weights are multiples of 1/8 so enumeration with fractions is exact.
    """
    import pandas as pd

    return pd.DataFrame(
        {
            "household_id": [f"h{k}" for k in rng.integers(0, 8, n)],
            "wave_year": rng.integers(2012, 2015, n),
            "eligible": rng.random(n) < 0.7,
            "receipt_reported": rng.random(n) < 0.5,
            "receipt_corrected": rng.random(n) < 0.5,
            "female": rng.random(n) < 0.5,
            "sample_origin": rng.choice(["Admin", "GenPop"], n),
            "weight": rng.integers(1, 40, n) / 8 if weighted else np.ones(n),
        }
    )
