import numpy as np
import pytest

from nontakeup.design import (
    BINARY_INDICATORS,
    CATEGORICAL_BLOCKS,
    GAP,
    GAP_SQ,
    LONG_TERM_GROUPS,
    DesignInfo,
    age_group,
    design_matrix,
    model_terms,
)
from nontakeup.exceptions import ConfigurationError, DomainError, InputValidationError
from nontakeup.synthgen import SyntheticDGP, generate


@pytest.fixture(scope="module")
def frame():
    data = generate(SyntheticDGP(n_households=150, waves=3, seed=3, covariates=True))
    return data.estimation_frame()


def test_age_groups():
    assert [age_group(a) for a in (18, 24, 25, 44, 54, 55, 70)] == [
        "15-24", "15-24", "25-34", "35-44", "45-54", "55+", "55+",
    ]


def test_models_are_nested():
    assert model_terms("M0") == []
    assert model_terms("M1") == list(LONG_TERM_GROUPS["receipt_share"])
    assert model_terms("M2")[:3] == model_terms("M1")
    assert len(model_terms("M3")) == 8
    with pytest.raises(ConfigurationError):
        model_terms("M4")


def test_blocks_are_one_hot_without_reference(frame):
    d = design_matrix(frame, "M0")
    for block, cats in CATEGORICAL_BLOCKS.items():
        cols = d.info.blocks.get(block, [])
        assert f"{block}[{cats[0]}]" not in d.X.columns
        assert np.all(d.X[cols].sum(axis=1) <= 1)
        is_ref = (frame[block] == cats[0]).to_numpy()
        np.testing.assert_array_equal(d.X[cols].sum(axis=1).to_numpy() == 0, is_ref)


def test_design_columns(frame):
    d = design_matrix(frame, "M3")
    assert d.X.columns[:3].tolist() == ["const", GAP, GAP_SQ]
    np.testing.assert_array_equal(d.X[GAP_SQ], d.X[GAP] ** 2)
    for name in BINARY_INDICATORS:
        assert name in d.X.columns or name in d.info.dropped
    np.testing.assert_allclose(d.X["income_lag1"], frame["income_lag1"] / 1000)
    np.testing.assert_array_equal(d.X["receipt_share_lag2"], frame["receipt_share_lag2"])
    assert set(d.info.groups) == set(LONG_TERM_GROUPS)
    years = sorted(frame.wave_year.unique())
    assert [c for c in d.X.columns if c.startswith("wave[")] == [f"wave[{y}]" for y in years[1:]]
    assert not d.X.isna().any().any()
    assert len(d.y) == len(d.groups) == len(d.weights) == len(frame)


def test_all_zero_indicator_dropped(frame):
    d = design_matrix(frame.assign(disabled=False), "M0")
    assert "disabled" not in d.X.columns
    assert "disabled" in d.info.dropped


def test_design_info_roundtrip(frame):
    info = design_matrix(frame, "M2").info
    back = DesignInfo.from_dict(info.to_dict())
    assert back == info
    assert GAP in back.continuous and GAP_SQ not in back.continuous


def test_frame_validation(frame):
    with pytest.raises(InputValidationError):
        design_matrix(frame.iloc[:0], "M0")
    with pytest.raises(InputValidationError):
        design_matrix(frame.drop(columns=["female"]), "M0")
    bad = frame.copy()
    bad.loc[bad.index[0], "education"] = None
    with pytest.raises(InputValidationError):
        design_matrix(bad, "M0")
    bad = frame.copy()
    bad.loc[bad.index[0], GAP] = 1.5
    with pytest.raises(DomainError):
        design_matrix(bad, "M0")
    bad = frame.copy()
    bad.loc[bad.index[0], "weight"] = -1.0
    with pytest.raises(DomainError):
        design_matrix(bad, "M0")
    with pytest.raises(InputValidationError):
        design_matrix(frame.drop(columns=["income_shock"]), "M3")
