import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from truncmean.distributions import IsotropicGaussian
from truncmean.errors import ConfigError
from truncmean.harness import (
    C_GRID,
    CellRates,
    ExperimentConfig,
    Rate,
    calibrate,
    classify,
    coverage,
    family_at,
    find_min_n,
    hypothesis_pair,
    loglog_slope,
    make_test,
    recovery_errors,
    run,
    simulate_cell,
    wilson_interval,
)
from truncmean.median import conservative_gaussian_profile
from truncmean.truncation import halfspace_adversary

GAUSS = {"family": "IsotropicGaussian", "mean": [0.0]}


def wilson_closed_form(k, n, z=1.959963984540054):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


def power_cfg(**over):
    base = {"schema_version": 1, "scenario": "power-curve", "distribution": GAUSS,
            "adversary": {"kind": "halfspace"}, "grid": {"alpha": [0.8], "epsilon": [0.0, 0.05], "d": [2]},
            "trials": 100, "master_seed": 3, "calibration_C": 2.0, "options": {"tests": ["const"]}}
    base.update(over)
    return base


@pytest.mark.parametrize("k,n", [(0, 100), (1, 100), (37, 100), (100, 100), (667, 2000), (5, 7)])
def test_wilson_matches_closed_form(k, n):
    lo, hi = wilson_interval(k, n)
    elo, ehi = wilson_closed_form(k, n)
    assert lo == pytest.approx(max(elo, 0.0), abs=1e-12)
    assert hi == pytest.approx(min(ehi, 1.0), abs=1e-12)


def test_rate_fields():
    r = Rate(30, 100)
    assert r.value == 0.3
    lo, hi = r.interval
    assert lo < 0.3 < hi
    assert r.half_width == pytest.approx((hi - lo) / 2)


def test_cell_rates_decisions():
    good = CellRates(Rate(10, 2000), Rate(1990, 2000), 0.0, 1.0)
    assert good.succeeds()
    assert good.success_rate() == pytest.approx(0.995)
    assert not good.indistinguishable()
    edge = CellRates(Rate(650, 2000), Rate(1990, 2000), 0.0, 1.0)
    # point estimate 0.325 is below 1/3, but the upper Wilson endpoint is not
    assert not edge.succeeds()
    same = CellRates(Rate(40, 2000), Rate(45, 2000), 0.0, 0.0)
    assert same.indistinguishable()


def test_calibrate_picks_smallest():
    assert calibrate(lambda c: c >= 1.0) == 1.0
    assert calibrate(lambda c: False) is None
    assert calibrate(lambda c: True) == C_GRID[0]


@settings(max_examples=100)
@given(threshold=st.integers(2, 50_000), start=st.integers(2, 50_000))
def test_find_min_n_brackets_threshold(threshold, start):
    res = find_min_n(lambda n: n >= threshold, start, 10**6)
    assert res.n_star is not None and not res.flagged
    assert res.n_star >= threshold
    assert res.n_star <= max(threshold * 1.1, threshold + 1)
    if res.bracket_low is not None:
        assert res.bracket_low < threshold


def test_find_min_n_flags_when_unreachable():
    res = find_min_n(lambda n: False, 10, 1000)
    assert res.flagged and res.n_star is None
    assert max(res.probes) == 1000


def test_family_at_resizes_and_centres():
    spec = family_at({"family": "IsotropicGaussian", "mean": [3.0], "sigma": 2.0}, 4)
    assert spec.dimension == 4
    np.testing.assert_array_equal(spec.true_mean(), np.zeros(4))
    spec = family_at({"family": "DiagonalGaussian", "mean": [0.0], "stds": [2.0]}, 3)
    assert spec.cov_opnorm() == 4.0
    pareto = family_at({"family": "Pareto", "mean": [0.0], "tail": 3.0}, 1)
    assert pareto.true_mean()[0] == pytest.approx(0.0, abs=1e-12)


def test_hypothesis_pair_means():
    tmpl = IsotropicGaussian((0.0, 0.0))
    h0, h1 = hypothesis_pair(tmpl, {"kind": "halfspace"}, 0.5, 0.0, 2)
    np.testing.assert_allclose(h1.exact_truncated_mean, [0.5, 0.0])
    np.testing.assert_allclose(h0.exact_truncated_mean, [0.0, 0.0])
    h0, h1 = hypothesis_pair(tmpl, {"kind": "halfspace"}, 0.5, 0.1, 2)
    assert h1.exact_truncated_mean[0] < 0.5
    assert h0.exact_truncated_mean[0] < 0.0
    h0, h1 = hypothesis_pair(None, {"kind": "impossibility", "p": 2.0}, 0.2, 0.04, 3)
    assert h1.base.true_mean()[0] == pytest.approx(0.2)
    np.testing.assert_array_equal(h0.base.true_mean(), np.zeros(3))


@pytest.mark.parametrize("bad", [
    {"trials": 0},
    {"trials": 99},
    {"grid": {"alpha": [0.8], "epsilon": [0.7], "d": [2]}},
    {"grid": {"alpha": [-1.0], "epsilon": [0.0], "d": [2]}},
    {"grid": {"alpha": [0.8], "epsilon": [0.0]}},
    {"delta": 0.5},
    {"colour": "red"},
    {"schema_version": 2},
    {"adversary": {"kind": "teleport"}},
    {"options": {"tests": ["wald"]}},
    {"options": {"profile": {"kind": "density-floor", "c": 0.9, "r": 1.0}}},
    {"distribution": {"family": "DiscreteAtomic", "atoms": [[0.0], [1.0]], "weights": [0.5, 0.5]}},
    {"distribution": None},
    {"master_seed": -1},
])
def test_config_rejections(bad):
    obj = power_cfg(**bad)
    if obj.get("distribution") is None:
        obj.pop("distribution")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(obj)


def test_impossibility_config_rules():
    obj = {"schema_version": 1, "scenario": "impossibility-demo", "adversary": {"kind": "impossibility", "p": 2},
           "grid": {"epsilon": [0.0], "n": [10]}, "trials": 100}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(obj)
    obj["grid"]["epsilon"] = [0.04]
    ExperimentConfig.from_dict(obj)
    obj["adversary"] = {"kind": "halfspace"}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(obj)


def test_config_round_trip_and_hash(tmp_path):
    cfg = ExperimentConfig.from_dict(power_cfg())
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = ExperimentConfig.load(path)
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()
    assert cfg.with_seed(4).config_hash() != cfg.config_hash()
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_simulate_cell_thread_independent():
    tmpl = IsotropicGaussian((0.0, 0.0, 0.0))
    h0, h1 = hypothesis_pair(tmpl, {"kind": "halfspace"}, 0.5, 0.05, 3)
    test = make_test("const", 0.5, 0.1)
    a = simulate_cell(h0, h1, 40, test, 150, 9, (0, 1), threads=1)
    b = simulate_cell(h0, h1, 40, test, 150, 9, (0, 1), threads=4)
    assert a == b


def test_power_curve_run_deterministic_csv():
    cfg = ExperimentConfig.from_dict(power_cfg())
    a = run(cfg, threads=1)
    b = run(cfg, threads=3)
    assert a.to_csv() == b.to_csv()
    assert len(a.rows) == 2
    assert all(r["feasible"] for r in a.rows)
    assert a.manifest["config_hash"] == cfg.config_hash()


def test_power_curve_marks_infeasible(tmp_path):
    cfg = ExperimentConfig.from_dict(power_cfg(grid={"alpha": [0.05], "epsilon": [0.05], "d": [2]}))
    rep = run(cfg)
    assert rep.all_infeasible
    assert rep.rows[0]["n"] is None and rep.rows[0]["h0_reject_rate"] is None
    paths = rep.write(tmp_path)
    assert [p.name for p in paths] == ["power-curve.csv", "power-curve.manifest.json"]
    line = paths[0].read_text().splitlines()[1]
    assert ",false," in line


def test_bias_frontier_run():
    cfg = ExperimentConfig.from_dict({"schema_version": 1, "scenario": "bias-frontier",
                                      "grid": {"epsilon": [1e-3, 1e-2, 1e-1, 0.3]}})
    rep = run(cfg)
    assert all(r["within_envelope"] for r in rep.rows)
    t3 = [r for r in rep.rows if r["family"] == "StudentT(df=3)"]
    assert 0.6 <= t3[0]["loglog_slope"] <= 0.75
    assert rep.to_json().startswith("{")


def test_loglog_slope_exact_power():
    eps = np.array([1e-3, 1e-2, 1e-1])
    assert loglog_slope(eps, 3 * eps**0.5) == pytest.approx(0.5)


def test_impossibility_demo_run():
    cfg = ExperimentConfig.from_dict({"schema_version": 1, "scenario": "impossibility-demo",
                                      "adversary": {"kind": "impossibility", "p": 2},
                                      "grid": {"epsilon": [0.04], "n": [50]}, "trials": 100})
    rep = run(cfg)
    row = rep.rows[0]
    assert row["alpha"] == pytest.approx(0.2)
    assert row["h0_reject_rate"] == row["h1_reject_rate"] == 0.0
    assert row["indistinguishable"] is True


def test_classify():
    assert classify(True, True) == "testable"
    assert classify(False, True) == "learning-hard"
    assert classify(False, False) == "infeasible"


def test_phase_diagram_small():
    cfg = ExperimentConfig.from_dict({
        "schema_version": 1, "scenario": "phase-diagram", "distribution": GAUSS,
        "grid": {"alpha": [1.0], "epsilon": [0.0], "d": [2]}, "trials": 100, "master_seed": 1,
        "calibration_C": 8.0, "options": {"regularity_C": 4.0, "net_size": 16},
    })
    rep = run(cfg)
    row = rep.rows[0]
    assert row["regime"] == "testable"
    assert row["regularity_succeeds"]
    assert row["regularity_regime_ok"]


def test_scaling_small():
    cfg = ExperimentConfig.from_dict({
        "schema_version": 1, "scenario": "scaling", "distribution": GAUSS,
        "grid": {"alpha": [1.0], "d": [4]}, "trials": 100, "master_seed": 2,
        "options": {"tests": ["const"]},
    })
    rep = run(cfg)
    assert [r["d"] for r in rep.rows] == [1, 4]
    assert rep.rows[1]["ratio_vs_quarter_d"] == pytest.approx(rep.rows[1]["n_star"] / rep.rows[0]["n_star"])
    assert all(r["success_at_n_star"] >= 2 / 3 for r in rep.rows)


def test_recovery_coverage():
    inst = halfspace_adversary(IsotropicGaussian((0.0, 0.0)), 0.02, [1.0, 0.0])
    errs = recovery_errors(inst, 500, 50, 4, (9,))
    assert errs.shape == (50,)
    prof = conservative_gaussian_profile()
    cov = coverage(errs, prof, 0.02, 2, 0.1, 500, 1.0)
    assert cov.rate == 1.0
    assert cov.bound > errs.max()
