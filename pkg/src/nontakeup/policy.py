"""Policy-year parameters for the minimum-income means test.

All currency magnitudes are held as :class:`decimal.Decimal` so that the
rules engine can work in exact cents.  Parameters are normally read from a
YAML file with a ``policy_defaults`` block and one block per calendar year
under ``policy``; a year block only needs the keys that differ from the
defaults.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from typing import Any, Mapping, Sequence

import yaml

from .exceptions import ConfigurationError

CENT = Decimal("0.01")
ZERO = Decimal(0)


def to_decimal(value) -> Decimal:
    """Convert a number (or numeric string) to Decimal without binary noise."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a currency amount")
    if isinstance(value, int):
        return Decimal(value)
    return Decimal(str(value))


def round_cents(value: Decimal) -> Decimal:
    return value.quantize(CENT, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function on ``[0, inf)`` with value 0 at 0.

    ``knots[k]`` is the lower bound of segment ``k`` and ``slopes[k]`` its
    marginal rate; the last segment is unbounded.
    """

    knots: tuple[Decimal, ...]
    slopes: tuple[Decimal, ...]

    def __post_init__(self):
        if len(self.knots) != len(self.slopes) or not self.knots:
            raise ConfigurationError("piecewise schedule needs one slope per knot")
        if self.knots[0] != 0:
            raise ConfigurationError("piecewise schedule must start at 0")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ConfigurationError("bracket bounds must be strictly increasing")
        if any(s < 0 for s in self.slopes):
            raise ConfigurationError("piecewise schedule must be non-decreasing")

    def __call__(self, x: Decimal) -> Decimal:
        total = ZERO
        uppers = self.knots[1:] + (None,)
        for lo, hi, slope in zip(self.knots, uppers, self.slopes):
            if x <= lo:
                break
            top = x if hi is None or x < hi else hi
            total += slope * (top - lo)
        return total

    @classmethod
    def from_segments(cls, segments: Sequence[Sequence[Any]]) -> "PiecewiseLinear":
        """Build from ``[[lower_bound, slope], ...]`` pairs."""
        knots = tuple(to_decimal(s[0]) for s in segments)
        slopes = tuple(to_decimal(s[1]) for s in segments)
        return cls(knots, slopes)

    @classmethod
    def disregard(cls, base, brackets: Sequence[Sequence[Any]]) -> "PiecewiseLinear":
        """Earnings disregard: the first ``base`` euros in full, then each
        ``[lower, upper, fraction]`` bracket at its retained fraction."""
        base = to_decimal(base)
        knots, slopes = [ZERO], [Decimal(1)]
        prev = base
        for lo, hi, frac in brackets:
            lo, hi = to_decimal(lo), to_decimal(hi)
            if lo != prev:
                if lo < prev:
                    raise ConfigurationError("disregard brackets overlap")
                knots.append(prev)
                slopes.append(ZERO)
            knots.append(lo)
            slopes.append(to_decimal(frac))
            prev = hi
        knots.append(prev)
        slopes.append(ZERO)
        return cls(tuple(knots), tuple(slopes))

    def to_segments(self) -> list[list[str]]:
        return [[str(k), str(s)] for k, s in zip(self.knots, self.slopes)]


@dataclass(frozen=True)
class HousingBenefitSchedule:
    """Share of recognised rent (net of heating), withdrawn linearly in income."""

    rent_share: Decimal = Decimal("0.6")
    taper: Decimal = Decimal("0.2")
    income_floor: Decimal = Decimal("800")


@dataclass(frozen=True)
class ChildSupplementSchedule:
    """Flat amount per child, withdrawn linearly above an income floor."""

    amount_per_child: Decimal = Decimal("250")
    taper: Decimal = Decimal("0.2")
    income_floor: Decimal = Decimal("1800")


@dataclass(frozen=True)
class SingleParentSupplement:
    young_share: Decimal = Decimal("0.36")
    per_child_share: Decimal = Decimal("0.12")
    cap: Decimal = Decimal("0.60")
    young_age: int = 7
    older_age: int = 16

    def share(self, child_ages: Sequence[int]) -> Decimal:
        if not child_ages:
            return ZERO
        n_young = sum(a < self.young_age for a in child_ages)
        n_older = sum(a < self.older_age for a in child_ages)
        flat = self.young_share if (n_young >= 1 or 2 <= n_older <= 3) else ZERO
        return min(max(flat, self.per_child_share * len(child_ages)), self.cap)


@dataclass(frozen=True)
class PolicyYearParameters:
    """All statutory magnitudes for one calendar year."""

    year: int
    standard_rate_single: Decimal
    standard_rate_partner: Decimal
    # (lower age inclusive, upper age exclusive, amount)
    standard_rate_child_by_age: tuple[tuple[int, int, Decimal], ...]
    rent_cap_per_sqm: Decimal = Decimal("15")
    heating_share: Decimal = Decimal("0.19")
    earnings_disregard: PiecewiseLinear = field(
        default_factory=lambda: PiecewiseLinear.disregard(
            100, [[100, 1000, "0.2"], [1000, 1200, "0.1"]]
        )
    )
    net_income_function: PiecewiseLinear = field(
        default_factory=lambda: PiecewiseLinear.from_segments(
            [[0, 1], [520, "0.8"], [2000, "0.64"]]
        )
    )
    wealth_threshold_base: Decimal = Decimal("15000")
    wealth_threshold_per_child: Decimal = Decimal("3100")
    hb_coverage_factor: Decimal = Decimal("0.8")
    hb_schedule: HousingBenefitSchedule = field(default_factory=HousingBenefitSchedule)
    scb_schedule: ChildSupplementSchedule = field(default_factory=ChildSupplementSchedule)
    single_parent_supplement: SingleParentSupplement = field(
        default_factory=SingleParentSupplement
    )
    cpi_index: Decimal = Decimal(1)

    def __post_init__(self):
        amounts = [
            self.standard_rate_single,
            self.standard_rate_partner,
            self.rent_cap_per_sqm,
            self.wealth_threshold_base,
            self.wealth_threshold_per_child,
            self.hb_schedule.rent_share,
            self.hb_schedule.taper,
            self.hb_schedule.income_floor,
            self.scb_schedule.amount_per_child,
            self.scb_schedule.taper,
            self.scb_schedule.income_floor,
        ] + [a for _, _, a in self.standard_rate_child_by_age]
        if any(a < 0 for a in amounts):
            raise ConfigurationError(f"{self.year}: currency amounts must be >= 0")
        if not 0 < self.heating_share < 1:
            raise ConfigurationError(f"{self.year}: heating_share must lie in (0, 1)")
        if not 0 < self.hb_coverage_factor <= 1:
            raise ConfigurationError(f"{self.year}: hb_coverage_factor must lie in (0, 1]")
        if self.cpi_index <= 0:
            raise ConfigurationError(f"{self.year}: cpi_index must be positive")
        brackets = self.standard_rate_child_by_age
        if any(lo >= hi for lo, hi, _ in brackets) or any(
            b[0] < a[1] for a, b in zip(brackets, brackets[1:])
        ):
            raise ConfigurationError(f"{self.year}: child age brackets must increase")

    def child_rate(self, age: int) -> Decimal:
        for lo, hi, amount in self.standard_rate_child_by_age:
            if lo <= age < hi:
                return amount
        raise ConfigurationError(f"{self.year}: no child standard rate for age {age}")

    def to_dict(self) -> dict:
        """Plain representation used for manifests and round-tripping."""
        return {
            "standard_rate_single": str(self.standard_rate_single),
            "standard_rate_partner": str(self.standard_rate_partner),
            "standard_rate_child_by_age": [
                [lo, hi, str(a)] for lo, hi, a in self.standard_rate_child_by_age
            ],
            "rent_cap_per_sqm": str(self.rent_cap_per_sqm),
            "heating_share": str(self.heating_share),
            "earnings_disregard": self.earnings_disregard.to_segments(),
            "net_income_function": self.net_income_function.to_segments(),
            "wealth_threshold_base": str(self.wealth_threshold_base),
            "wealth_threshold_per_child": str(self.wealth_threshold_per_child),
            "hb_coverage_factor": str(self.hb_coverage_factor),
            "hb_schedule": {k: str(v) for k, v in vars(self.hb_schedule).items()},
            "scb_schedule": {k: str(v) for k, v in vars(self.scb_schedule).items()},
            "single_parent_supplement": {
                k: v if isinstance(v, int) else str(v)
                for k, v in vars(self.single_parent_supplement).items()
            },
            "cpi_index": str(self.cpi_index),
        }


def _schedule(cls, block: Mapping[str, Any] | None):
    if not block:
        return cls()
    names = set(cls.__dataclass_fields__)
    unknown = set(block) - names
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**{k: to_decimal(v) for k, v in block.items()})


def _piecewise(block) -> PiecewiseLinear:
    if isinstance(block, Mapping):
        return PiecewiseLinear.disregard(block.get("base", 0), block.get("brackets", []))
    return PiecewiseLinear.from_segments(block)


_KNOWN_KEYS = {
    "standard_rate_single",
    "standard_rate_partner",
    "standard_rate_child_by_age",
    "rent_cap_per_sqm",
    "heating_share",
    "earnings_disregard",
    "net_income_function",
    "wealth_threshold_base",
    "wealth_threshold_per_child",
    "hb_coverage_factor",
    "hb_schedule",
    "scb_schedule",
    "single_parent_supplement",
    "cpi_index",
}


def parameters_from_mapping(year: int, block: Mapping[str, Any]) -> PolicyYearParameters:
    unknown = set(block) - _KNOWN_KEYS
    if unknown:
        raise ConfigurationError(f"policy year {year}: unknown keys {sorted(unknown)}")
    try:
        kwargs: dict[str, Any] = {
            "year": int(year),
            "standard_rate_single": to_decimal(block["standard_rate_single"]),
            "standard_rate_partner": to_decimal(block["standard_rate_partner"]),
            "standard_rate_child_by_age": tuple(
                (int(lo), int(hi), to_decimal(a))
                for lo, hi, a in block["standard_rate_child_by_age"]
            ),
        }
    except KeyError as exc:
        raise ConfigurationError(f"policy year {year}: missing key {exc}") from None
    for key in (
        "rent_cap_per_sqm",
        "heating_share",
        "wealth_threshold_base",
        "wealth_threshold_per_child",
        "hb_coverage_factor",
        "cpi_index",
    ):
        if key in block:
            kwargs[key] = to_decimal(block[key])
    if "earnings_disregard" in block:
        kwargs["earnings_disregard"] = _piecewise(block["earnings_disregard"])
    if "net_income_function" in block:
        kwargs["net_income_function"] = _piecewise(block["net_income_function"])
    kwargs["hb_schedule"] = _schedule(HousingBenefitSchedule, block.get("hb_schedule"))
    kwargs["scb_schedule"] = _schedule(ChildSupplementSchedule, block.get("scb_schedule"))
    sps = block.get("single_parent_supplement")
    if sps:
        unknown = set(sps) - set(SingleParentSupplement.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown single_parent_supplement keys: {sorted(unknown)}")
        kwargs["single_parent_supplement"] = SingleParentSupplement(
            **{k: int(v) if k.endswith("_age") else to_decimal(v) for k, v in sps.items()}
        )
    return PolicyYearParameters(**kwargs)


def _merge(base: Mapping, override: Mapping) -> dict:
    out = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def policy_from_config(config: Mapping[str, Any]) -> dict[int, PolicyYearParameters]:
    """Build the ``year -> parameters`` map from a parsed configuration."""
    defaults = config.get("policy_defaults", {}) or {}
    years = config.get("policy")
    if not years:
        raise ConfigurationError("configuration has no 'policy' block")
    return {
        int(year): parameters_from_mapping(int(year), _merge(defaults, block or {}))
        for year, block in sorted(years.items(), key=lambda kv: int(kv[0]))
    }


def load_config(path=None) -> dict[str, Any]:
    """Read a YAML configuration; ``None`` loads the packaged default."""
    if path is None:
        text = resources.files("nontakeup.data").joinpath("default_config.yaml").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        config = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse configuration: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigurationError("configuration must be a mapping")
    return config


def default_policy() -> dict[int, PolicyYearParameters]:
    return policy_from_config(load_config())
