"""End-to-end acceptance checks, one test per criterion.

Each test records a single pass/fail line (see conftest) before asserting.
Configs live in ``acceptance_configs/`` so every run can be repeated with
``truncmean simulate <scenario> --config <file>``.
"""

import dataclasses
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from truncmean import cli
from truncmean.distributions import IsotropicGaussian
from truncmean.harness import ExperimentConfig, calibrate, coverage, recovery_errors, run
from truncmean.median import conservative_gaussian_profile
from truncmean.oracle import oracle_grid, verify_grid
from truncmean.truncation import center_hollowing_adversary, halfspace_adversary

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).parent / "acceptance_configs"


def load(name: str) -> ExperimentConfig:
    return ExperimentConfig.load(CONFIGS / name)


@pytest.fixture(scope="module")
def const_report():
    started = time.perf_counter()
    rep = run(load("power_const.json"))
    return rep, time.perf_counter() - started


def test_criterion_1_exact_unbiasedness(criteria):
    started = time.perf_counter()
    rows = verify_grid(ns=(2, 3, 4))
    elapsed = time.perf_counter() - started
    worst = max(abs(r.exact_mean - r.norm_sq) for r in rows)
    laws = len(oracle_grid())
    ok = laws >= 6 and worst <= 1e-12 and all(r.mean_ok for r in rows) and elapsed < 10
    criteria.record(1, ok, f"{laws} laws x n in {{2,3,4}}, max |E[F] - ||mu||^2| = {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_exact_variance_bound(criteria):
    started = time.perf_counter()
    rows = verify_grid(ns=(2, 3, 4))
    elapsed = time.perf_counter() - started
    rad = next(r for r in rows if r.law == "rademacher" and r.n == 2)
    slack_real = rad.exact_var == 1.0 and rad.var_bound == 2.0
    ok = all(r.var_ok for r in rows) and slack_real and elapsed < 10
    criteria.record(2, ok, f"{sum(r.var_ok for r in rows)}/{len(rows)} cells within bound, rademacher n=2: "
                           f"Var={rad.exact_var} vs bound {rad.var_bound}, {elapsed:.2f}s")
    assert ok


def test_criterion_3_impossibility(criteria):
    started = time.perf_counter()
    rep = run(load("impossibility.json"))
    elapsed = time.perf_counter() - started
    gaps = []
    for r in rep.rows:
        gaps.append((r["n"], abs(r["h1_reject_rate"] - r["h0_reject_rate"]), r["h0_half_width"] + r["h1_half_width"]))
    ok = (sorted(n for n, _, _ in gaps) == [100, 1000, 10000] and all(g < hw for _, g, hw in gaps)
          and all(r["alpha"] == pytest.approx(0.2) and r["trials"] == 2000 for r in rep.rows) and elapsed < 120)
    detail = ", ".join(f"n={n}: |diff|={g:.4f} < {hw:.4f}" for n, g, hw in gaps)
    criteria.record(3, ok, f"{detail}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_constant_error_test(criteria, const_report):
    rep, elapsed = const_report
    cal = rep.manifest["calibration"]
    worst0 = max(r["h0_ci_high"] for r in rep.rows)
    worst1 = 1.0 - min(r["h1_ci_low"] for r in rep.rows)
    ok = (len(rep.rows) == 9 and all(r["succeeds"] for r in rep.rows) and all(r["trials"] == 2000 for r in rep.rows)
          and elapsed < 600)
    criteria.record(4, ok, f"calibrated C={cal['C']} at {cal['reference']}, 9 cells: worst Wilson upper "
                           f"H0 error {worst0:.4f}, H1 error {worst1:.4f} (need <= 1/3), {elapsed:.1f}s")
    assert ok


def test_criterion_5_amplification(criteria, const_report):
    calibrated = const_report[0].manifest["calibration"]["C"]
    cfg = dataclasses.replace(load("power_amplified.json"), calibration_C=calibrated)
    started = time.perf_counter()
    rep = run(cfg)
    elapsed = time.perf_counter() - started
    fails = []
    for r in rep.rows:
        e0, e1 = r["h0_reject_rate"], 1.0 - r["h1_reject_rate"]
        if not (e0 <= 0.05 + r["h0_half_width"] and e1 <= 0.05 + r["h1_half_width"]):
            fails.append(r["cell"])
    worst = max(max(r["h0_reject_rate"], 1.0 - r["h1_reject_rate"]) for r in rep.rows)
    ok = len(rep.rows) == 9 and not fails and elapsed < 900
    criteria.record(5, ok, f"C={calibrated}, delta=0.05, worst error rate {worst:.4f}, failing cells {fails}, "
                           f"{elapsed:.1f}s")
    assert ok


def test_criterion_6_bias_frontier(criteria):
    started = time.perf_counter()
    rep = run(load("bias_frontier.json"))
    elapsed = time.perf_counter() - started
    violations = sum(not r["within_envelope"] for r in rep.rows)
    slope = {r["family"]: r["loglog_slope"] for r in rep.rows}
    g, t3 = slope["Gaussian"], slope["StudentT(df=3)"]
    parts = {"envelope": violations == 0, "gaussian": 0.9 <= g <= 1.05, "student_t3": 0.6 <= t3 <= 0.75}
    ok = all(parts.values()) and elapsed < 600
    criteria.record(6, ok, f"{violations} envelope violations over {len(rep.rows)} cells; Gaussian slope {g:.4f} "
                           f"(need [0.9, 1.05]); Student-t(3) slope {t3:.4f} (need [0.6, 0.75]); "
                           f"failed parts {[k for k, v in parts.items() if not v]}, {elapsed:.2f}s")
    assert ok


def test_criterion_7_recovery_bound(criteria):
    n, trials, delta, seed = 2000, 500, 0.1, 17
    profile = conservative_gaussian_profile()
    adversaries = {"halfspace": lambda s, e: halfspace_adversary(s, e, np.eye(s.dimension)[0]),
                   "center-hollowing": lambda s, e: center_hollowing_adversary(s, e, np.eye(s.dimension)[0])}
    started = time.perf_counter()

    def instance(kind, d, eps):
        base = IsotropicGaussian(tuple([0.5] + [0.0] * (d - 1)))
        return adversaries[kind](base, eps)

    # calibrate on its own streams at (halfspace, d=5, eps=0.02)
    ref_errors = recovery_errors(instance("halfspace", 5, 0.02), n, trials, seed, (99,))
    C = calibrate(lambda c: coverage(ref_errors, profile, 0.02, 5, delta, n, c).rate >= 1 - delta)
    rates = []
    for k, (kind, d, eps) in enumerate([(a, d, e) for a in adversaries for d in (2, 5, 10) for e in (0.0, 0.02, 0.05)]):
        errs = recovery_errors(instance(kind, d, eps), n, trials, seed, (k,))
        rates.append((kind, d, eps, coverage(errs, profile, eps, d, delta, n, C).rate))
    elapsed = time.perf_counter() - started
    worst = min(rates, key=lambda r: r[3])
    ok = C is not None and len(rates) == 18 and all(r[3] >= 0.9 for r in rates) and elapsed < 600
    criteria.record(7, ok, f"calibrated C={C}, 18 cells x {trials} trials, lowest coverage {worst[3]:.3f} at "
                           f"{worst[:3]}, {elapsed:.1f}s")
    assert ok


def _ratios(report, dims):
    out = {}
    for r in report.rows:
        if r["d"] in dims and r["d"] // 4 in dims:
            out[r["d"]] = r["ratio_vs_quarter_d"]
    return out


def test_criterion_8_scaling_separation(criteria):
    started = time.perf_counter()
    u_cfg, r_cfg = load("scaling_ustat.json"), load("scaling_regularity.json")
    u_ratios = _ratios(run(u_cfg), set(u_cfg.grid["d"]))
    r_ratios = _ratios(run(r_cfg), set(r_cfg.grid["d"]))
    phase = run(load("learning_hard.json"))
    cell = next(r for r in phase.rows if r["epsilon"] > 0)
    c = phase.manifest["config"]["options"]["profile"]["c"]
    elapsed = time.perf_counter() - started
    parts = {
        "ustat": len(u_ratios) == 2 and all(x is not None and 1.5 <= x <= 2.7 for x in u_ratios.values()),
        "regularity": len(r_ratios) == 2 and all(x is not None and 3.0 <= x <= 5.5 for x in r_ratios.values()),
        "cell_window": cell["gamma"] > cell["alpha"] > 8 * cell["epsilon"] / c,
        "ustat_infeasible": cell["feasible"] is False,
        "regularity_succeeds": cell["regularity_succeeds"] is True,
    }
    ok = all(parts.values()) and elapsed < 1800
    fmt = lambda d: ", ".join(f"{k}: {v:.2f}" for k, v in sorted(d.items()))  # noqa: E731
    criteria.record(8, ok, f"U-stat n*(4d)/n*(d) {{{fmt(u_ratios)}}}; regularity {{{fmt(r_ratios)}}}; "
                           f"cell alpha={cell['alpha']} eps={cell['epsilon']} gamma={cell['gamma']:.4f} "
                           f"feasible={cell['feasible']} regularity_succeeds={cell['regularity_succeeds']} "
                           f"regime={cell['regime']}; failed parts {[k for k, v in parts.items() if not v]}, "
                           f"{elapsed:.1f}s")
    assert ok


def test_criterion_9_determinism(criteria, tmp_path):
    checks = {}
    for scenario, name in (("impossibility-demo", "impossibility.json"), ("power-curve", "power_const.json")):
        blobs = []
        for threads in (1, 4):
            out = tmp_path / f"{scenario}-{threads}"
            code = cli.main(["simulate", scenario, "--config", str(CONFIGS / name), "--threads", str(threads),
                             "--out-dir", str(out)])
            assert code == 0
            blobs.append((out / f"{scenario}.csv").read_bytes())
            manifest = json.loads((out / f"{scenario}.manifest.json").read_text())
            assert manifest["threads"] == threads
        checks[scenario] = blobs[0] == blobs[1] and len(blobs[0]) > 0
    ok = all(checks.values())
    criteria.record(9, ok, "byte-identical CSV for threads 1 vs 4: " + ", ".join(f"{k}={v}" for k, v in checks.items()))
    assert ok


def test_acceptance_configs_are_valid():
    for path in sorted(CONFIGS.glob("*.json")):
        cfg = ExperimentConfig.load(path)
        assert not math.isnan(cfg.trials)
