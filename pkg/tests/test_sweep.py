import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morreylab.grid import Domain, SampledFunction, default_family
from morreylab.morrey import MorreyParams
from morreylab.sweep import (CSV_FIELDS, RegionCell, RegionMap, Resolution, SweepConfig,
                             ZeroNormError, classify_cell, classify_growth, classify_region,
                             growth_exponent, log_growth_test, operator_ratio, predicted_bounded,
                             read_csv, resolve_beta, sweep_cells, witness_suite)
from morreylab.weights import Power

SMALL = ((64, 2), (128, 4), (256, 8))


# ---------------------------------------------------------------- tokens


@pytest.mark.parametrize("tok,want", [
    ("lo", -0.5), ("hi", 1.5), ("mid", 0.5), ("lo-0.3", -0.8), ("hi+0.3", 1.8),
    ("hi - 0.1", 1.4), (0.25, 0.25), ("1e-1", 0.1),
])
def test_resolve_beta(tok, want):
    assert resolve_beta(tok, 2.0, 0.5, 1) == pytest.approx(want)


def test_resolve_beta_rejects_garbage():
    with pytest.raises(ValueError):
        resolve_beta("middle", 2.0, 0.5, 1)


@pytest.mark.parametrize("op,beta,want", [
    ("M", -0.5, True), ("M", -0.51, False), ("M", 1.49, True), ("M", 1.5, False),
    ("H", -0.5, False), ("H", -0.49, True), ("H", 1.5, False),
])
def test_predicted_ranges(op, beta, want):
    assert predicted_bounded(op, 2.0, 0.5, beta) is want


# ------------------------------------------------------------ witnesses


def test_witness_ids_per_operator():
    d = Domain(1, 3.875, 64, "origin_log", log_levels=2)
    m = [w.id for w in witness_suite("M", 2.0, 0.5, 0.5, d)]
    h = [w.id for w in witness_suite("H", 2.0, 0.5, 0.5, d)]
    assert m == ["a_sigma", "b_ball_at_1", "c_inv_power", "f_bump", "f_oscillating"]
    assert {"a_sigma_adjacent", "d_unit_interval", "e_adjacent_left", "e_interval_1_2"} <= set(h)


def test_extremal_witness_only_past_right_endpoint():
    d = Domain(1, 3.875, 64, "origin_log", log_levels=2)
    # gamma = (beta + n - lam)/p >= n  <=>  beta >= lam + n(p-1)
    assert "c_extremal" not in [w.id for w in witness_suite("M", 2.0, 0.5, 1.4, d)]
    assert "c_extremal" in [w.id for w in witness_suite("M", 2.0, 0.5, 1.5, d)]


def test_witnesses_are_finite_samples():
    d = Domain(1, 3.875, 64, "origin_log", log_levels=2)
    for w in witness_suite("H", 1.0, 0.25, -1.05, d):
        assert np.all(np.isfinite(w.f.values))


# ---------------------------------------------------------------- growth


@settings(max_examples=30)
@given(g=st.floats(-1, 2), c=st.floats(0.1, 10))
def test_growth_exponent_recovers_power_law(g, c):
    levels = [(h, c * h**-g) for h in (1e-2, 5e-3, 2.5e-3)]
    assert growth_exponent(levels) == pytest.approx(g, abs=1e-9)


def test_growth_exponent_needs_three_levels_and_flags_inf():
    with pytest.raises(ValueError):
        growth_exponent([(1.0, 1.0), (0.5, 1.0)])
    assert growth_exponent([(1.0, 1.0), (0.5, math.inf), (0.25, 2.0)]) == math.inf


def test_log_growth_detected():
    levels = [(h, 1 + 0.4 * math.log(1 / h)) for h in (2**-8, 2**-9, 2**-10)]
    slope, r2, passed = log_growth_test(levels)
    assert slope == pytest.approx(0.4) and r2 == pytest.approx(1.0) and passed


@pytest.mark.parametrize("levels,want", [
    ([(2**-k, 3.0) for k in (8, 9, 10)], "bounded"),
    ([(2**-k, 2.0 ** (0.5 * k)) for k in (8, 9, 10)], "unbounded"),
    ([(2**-k, 1 + 0.4 * k * math.log(2)) for k in (8, 9, 10)], "unbounded"),
    ([(2**-k, 2.0 ** (0.1 * k) * (1 + 0.05 * (-1) ** k)) for k in (8, 9, 10)], "inconclusive"),
])
def test_classify_growth(levels, want):
    assert classify_growth(levels) == want


# ------------------------------------------------------------------ ratio


def test_operator_ratio_rejects_zero_function():
    d = Domain(1, 2.0, 16)
    with pytest.raises(ZeroNormError):
        operator_ratio("M", SampledFunction.constant(d, 0.0), MorreyParams(2, 0.5, Power(0.0)),
                       default_family(d))


def test_operator_ratio_bounded_below_by_one_for_m():
    # Mf >= |f| pointwise, so the strong ratio is at least one
    d = Domain(1, 2.0, 32)
    f = SampledFunction.from_callable(d, lambda x: np.exp(-x**2))
    r = operator_ratio("M", f, MorreyParams(2, 0.5, Power(0.3)), default_family(d))
    assert r >= 1.0


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(operator="T")
    with pytest.raises(ValueError):
        SweepConfig(operator="H", dim=2)
    with pytest.raises(ValueError):
        SweepConfig(resolutions=((64, 2), (128, 4)))
    with pytest.raises(ValueError):
        SweepConfig(resolutions=((128, 2), (64, 4), (256, 8)))
    with pytest.raises(ValueError):
        SweepConfig(norm="mixed")


def test_config_norm_kind_and_digest():
    cfg = SweepConfig()
    assert cfg.norm_kind(1.0) == "weak" and cfg.norm_kind(2.0) == "strong"
    assert SweepConfig(norm="strong").norm_kind(1.0) == "strong"
    assert cfg.digest() == SweepConfig().digest()
    assert cfg.digest() != SweepConfig(p_grid=(1.0,)).digest()
    assert cfg.resolutions[0] == Resolution(256, 4)


def test_sweep_cells_skip_left_endpoint_at_p1():
    cfg = SweepConfig(p_grid=(1.0, 2.0), lambda_grid=(0.5,), beta_grid=("lo", "mid"))
    cells = sweep_cells(cfg)
    assert (1.0, 0.5, -0.5) not in cells
    assert (2.0, 0.5, -0.5) in cells and (1.0, 0.5, 0.0) in cells
    cfg = SweepConfig(p_grid=(1.0,), beta_grid=("lo",), endpoint_at_p1=True)
    assert sweep_cells(cfg) == [(1.0, 0.5, -0.5)]


# ------------------------------------------------------------- classify


@pytest.mark.parametrize("tok,want", [("lo-0.3", "unbounded"), ("mid", "bounded"),
                                      ("hi+0.3", "unbounded")])
def test_classify_cell_m_small_grid(tok, want):
    cfg = SweepConfig(resolutions=SMALL)
    beta = resolve_beta(tok, 2.0, 0.5, 1)
    cell = classify_cell(cfg, 2.0, 0.5, beta)
    assert cell.classification == want
    assert cell.witness_id in cell.witnesses


def test_classify_cell_reports_evidence():
    cfg = SweepConfig(resolutions=SMALL)
    cell = classify_cell(cfg, 2.0, 0.5, -0.8)
    w = cell.witnesses[cell.witness_id]
    assert len(w["levels"]) == 3
    assert cell.growth_exponent == w["growth"]
    assert cell.argmax_radius > 0 and cell.seconds >= 0


# ------------------------------------------------------------------ output


def _cell(p=2.0, lam=0.5, beta=0.1, cls="bounded", ratio=1.23456789012, g=0.001, r=0.5):
    return RegionCell(p, lam, beta, cls, ratio, g, "a_sigma", (0.0,), r)


def test_csv_header_and_format():
    text = RegionMap([_cell(), _cell(ratio=math.inf, g=math.inf)], "x").to_csv()
    lines = text.split("\n")
    assert lines[0] == ",".join(CSV_FIELDS)
    assert lines[1] == "2,0.5,0.1,bounded,1.23456789,0.001,a_sigma,0,0.5"
    assert lines[2].split(",")[4:6] == ["inf", "inf"]
    assert text.endswith("\n") and "\r" not in text


@settings(max_examples=40)
@given(beta=st.floats(-3, 3), ratio=st.floats(1e-6, 1e6), g=st.floats(-1, 5),
       r=st.floats(1e-9, 10), cls=st.sampled_from(["bounded", "unbounded", "inconclusive"]))
def test_csv_round_trip(beta, ratio, g, r, cls):
    cell = _cell(beta=beta, cls=cls, ratio=ratio, g=g, r=r)
    (row,) = read_csv(RegionMap([cell], "x").to_csv())
    assert row["beta"] == pytest.approx(beta, rel=1e-8, abs=1e-12)
    assert row["max_ratio"] == pytest.approx(ratio, rel=1e-8)
    assert row["growth_exponent"] == pytest.approx(g, rel=1e-8, abs=1e-12)
    assert row["argmax_radius"] == pytest.approx(r, rel=1e-8)
    assert row["classification"] == cls and row["argmax_center"] == (0.0,)


def test_json_uses_same_fields():
    import json

    rows = json.loads(RegionMap([_cell()], "x").to_json())
    assert list(rows[0]) == CSV_FIELDS


def test_region_is_deterministic_and_threads_agree():
    cfg = SweepConfig(p_grid=(2.0,), beta_grid=("lo-0.3", "mid"), resolutions=SMALL)
    a = classify_region(cfg, threads=1)
    b = classify_region(cfg, threads=2)
    assert a.to_csv() == b.to_csv()
    assert a.lookup(2.0, 0.5, 0.5).classification == "bounded"
    with pytest.raises(KeyError):
        a.lookup(2.0, 0.5, 0.7)
