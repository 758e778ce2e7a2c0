"""Monte Carlo experiment runner behind ``truncmean simulate``.

A run is fully determined by its JSON config and master seed: every trial
draws from its own counter-based stream keyed by (purpose, cell, hypothesis,
trial), so results do not depend on how many worker threads share the work.
Reported rates carry Wilson 95% intervals and regime calls use the interval
endpoints.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import jsonschema
import numpy as np
from scipy import stats

from . import __version__
from .distributions import (
    DistributionSpec,
    IsotropicGaussian,
    Pareto,
    StudentT,
    directional_moment_exact,
    spec_from_dict,
)
from .errors import ConfigError, SpecError
from .median import (
    RegularityProfile,
    conservative_gaussian_profile,
    direction_net,
    estimate_center,
    recovery_bound,
    regularity_regime_ok,
    regularity_test,
    required_n_regularity,
)
from .moments import (
    envelope_floor,
    is_feasible,
    required_n_amplified,
    required_n_const,
)
from .rng import stream
from .truncation import (
    AdversaryInstance,
    center_hollowing_adversary,
    full_space,
    halfspace_adversary,
    impossibility_adversary,
    truncated_sampler,
)
from .ustat import amplified_test, const_error_test

SCHEMA_VERSION = 1
SCENARIOS = ("power-curve", "phase-diagram", "scaling", "bias-frontier", "impossibility-demo")
RATE_SCENARIOS = ("power-curve", "phase-diagram", "scaling", "impossibility-demo")
ADVERSARIES = ("none", "halfspace", "center-hollowing", "impossibility")
TESTS = ("const", "amplified", "regularity")
C_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
BISECTION_FACTOR = 1.1
MIN_TRIALS = 100
TARGET_SUCCESS = 2.0 / 3.0

# stream purposes and hypothesis labels (stream ids must be integers)
_CELL, _CALIBRATION, _SCALING, _NET = 0, 1, 2, 3
H0, H1 = 0, 1
_TEST_CODE = {name: i for i, name in enumerate(TESTS)}

_NUMS = {"type": "array", "minItems": 1, "items": {"type": "number"}}
_INTS = {"type": "array", "minItems": 1, "items": {"type": "integer"}}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scenario"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"enum": list(SCENARIOS)},
        "distribution": {"type": "object"},
        "adversary": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": list(ADVERSARIES)}, "p": {"type": "number", "minimum": 2}},
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {"alpha": _NUMS, "epsilon": _NUMS, "d": _INTS, "n": _INTS},
            "additionalProperties": False,
        },
        "trials": {"type": "integer", "minimum": 0},
        "delta": {"type": "number"},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "calibration_C": {"type": ["number", "null"]},
        "options": {
            "type": "object",
            "properties": {
                "tests": {"type": "array", "items": {"enum": list(TESTS)}, "minItems": 1},
                "reference": {"type": "object"},
                "alpha_from_gamma": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "regularity_C": {"type": ["number", "null"]},
                "profile": {"type": "object"},
                "net_size": {"type": "integer", "minimum": 2},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "families": {"type": "array", "minItems": 1},
                "n_start": {"type": "integer", "minimum": 2},
                "n_max": {"type": "integer", "minimum": 2},
                "slope_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class Rate:
    """A rejection count with its Wilson 95% interval."""

    count: int
    trials: int

    @property
    def value(self) -> float:
        return self.count / self.trials

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.count, self.trials)

    @property
    def half_width(self) -> float:
        lo, hi = self.interval
        return (hi - lo) / 2.0


@dataclass(frozen=True)
class CellRates:
    h0: Rate
    h1: Rate
    h0_mean_statistic: float
    h1_mean_statistic: float

    def succeeds(self) -> bool:
        """Both error rates at most 1/3 with 95% Wilson confidence."""
        return self.h0.interval[1] <= 1.0 / 3.0 and self.h1.interval[0] >= 2.0 / 3.0

    def success_rate(self) -> float:
        """Point estimate of the worse of the two success probabilities."""
        return min(1.0 - self.h0.value, self.h1.value)

    def indistinguishable(self) -> bool:
        return abs(self.h1.value - self.h0.value) < self.h0.half_width + self.h1.half_width


def _map(fn: Callable[[int], object], count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count), chunksize=max(1, count // (8 * threads))))


def simulate_cell(h0: AdversaryInstance, h1: AdversaryInstance, n: int, test: Callable, trials: int,
                  master_seed: int, stream_id: tuple[int, ...], threads: int = 1) -> CellRates:
    """Rejection rates of ``test`` on n truncated draws under each hypothesis.

    Trial t under hypothesis h uses the stream ``(master_seed, *stream_id, h, t)``.
    """

    def one(job: int):
        h, t = divmod(job, trials)
        inst = h1 if h == H1 else h0
        x = truncated_sampler(inst, n, stream(master_seed, *stream_id, h, t))
        v = test(x)
        return v.rejects, v.statistic

    out = _map(one, 2 * trials, threads)
    r0, r1 = out[:trials], out[trials:]
    return CellRates(
        Rate(sum(r for r, _ in r0), trials), Rate(sum(r for r, _ in r1), trials),
        math.fsum(s for _, s in r0) / trials, math.fsum(s for _, s in r1) / trials,
    )


def calibrate(success_at: Callable[[float], bool], grid=C_GRID) -> float | None:
    """Smallest constant on the grid for which ``success_at`` holds, or None."""
    for c in grid:
        if success_at(c):
            return c
    return None


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def family_at(distribution: dict, d: int) -> DistributionSpec:
    """The configured family in dimension ``d``, centered at the origin."""
    obj = {k: v for k, v in distribution.items() if k != "dimension"}
    fam = obj.get("family")
    if "mean" in obj:
        obj["mean"] = [0.0] * d
        if fam == "DiagonalGaussian" and len(obj.get("stds", [])) == 1:
            obj["stds"] = obj["stds"] * d
    elif fam == "PiecewiseUniform":
        obj["dimension"] = d
    spec = spec_from_dict(obj)
    if spec.dimension != d:
        raise SpecError(f"{fam} cannot be resized to dimension {d}")
    mu = spec.true_mean()
    return spec.shifted(-mu) if np.any(mu != 0) else spec


def _profile_from(opts: dict) -> RegularityProfile:
    prof = opts.get("profile") or {"kind": "conservative-gaussian"}
    if prof.get("kind", "conservative-gaussian") == "conservative-gaussian":
        return conservative_gaussian_profile(prof.get("sigma", 1.0), prof.get("r", 1.0))
    return RegularityProfile(prof["c"], prof["r"], "config")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    distribution: dict | None = None
    adversary: dict = field(default_factory=lambda: {"kind": "halfspace"})
    grid: dict = field(default_factory=dict)
    trials: int = 500
    delta: float = 0.1
    master_seed: int = 0
    calibration_C: float | None = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(obj, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config: {exc.message}") from exc
        cfg = cls(
            scenario=obj["scenario"],
            distribution=obj.get("distribution"),
            adversary=obj.get("adversary", {"kind": "halfspace"}),
            grid=obj.get("grid", {}),
            trials=obj.get("trials", 500),
            delta=obj.get("delta", 0.1),
            master_seed=obj.get("master_seed", 0),
            calibration_C=obj.get("calibration_C"),
            options=obj.get("options", {}),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "scenario": self.scenario, "adversary": self.adversary,
               "grid": self.grid, "trials": self.trials, "delta": self.delta, "master_seed": self.master_seed,
               "calibration_C": self.calibration_C, "options": self.options}
        if self.distribution is not None:
            out["distribution"] = self.distribution
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        cfg = ExperimentConfig(**{**self.__dict__, "master_seed": int(seed)})
        cfg.validate()
        return cfg

    @property
    def tests(self) -> tuple[str, ...]:
        default = {"power-curve": ("const", "amplified"), "scaling": ("const", "regularity"),
                   "phase-diagram": ("const", "regularity")}.get(self.scenario, ("const",))
        return tuple(self.options.get("tests", default))

    def validate(self) -> None:
        """Check every grid value against the preconditions of the modules it feeds."""
        g = self.grid
        if self.scenario in RATE_SCENARIOS and self.trials < MIN_TRIALS:
            raise ConfigError(f"trials must be at least {MIN_TRIALS} for reported rates (got {self.trials})")
        if not (0 <= self.master_seed < 2**64):
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if not (0.0 < self.delta < 1.0 / 3.0):
            raise ConfigError("delta must lie in (0, 1/3)")
        if self.calibration_C is not None and not self.calibration_C > 0:
            raise ConfigError("calibration_C must be positive")
        if any(not a > 0 for a in g.get("alpha", [])):
            raise ConfigError("alpha values must be positive")
        if any(not 0.0 <= e <= 0.5 for e in g.get("epsilon", [])):
            raise ConfigError("epsilon values must lie in [0, 1/2]")
        if any(d < 1 for d in g.get("d", [])):
            raise ConfigError("dimensions must be positive")
        if any(n < 2 for n in g.get("n", [])):
            raise ConfigError("sample sizes must be at least 2")
        need = {"power-curve": ("epsilon", "d"), "phase-diagram": ("epsilon", "d", "alpha"),
                "scaling": ("alpha", "d"), "bias-frontier": ("epsilon",),
                "impossibility-demo": ("epsilon", "n")}[self.scenario]
        for key in need:
            if not g.get(key):
                raise ConfigError(f"{self.scenario} needs a nonempty grid.{key}")
        if self.scenario == "power-curve" and not g.get("alpha") and "alpha_from_gamma" not in self.options:
            raise ConfigError("power-curve needs grid.alpha or options.alpha_from_gamma")
        kind = self.adversary.get("kind")
        if self.scenario == "impossibility-demo":
            if kind != "impossibility":
                raise ConfigError("impossibility-demo needs the impossibility adversary")
            if any(e == 0 for e in g["epsilon"]):
                raise ConfigError("the impossibility adversary needs epsilon > 0")
        elif self.scenario != "bias-frontier":
            if kind == "impossibility":
                if any(e == 0 for e in g["epsilon"]):
                    raise ConfigError("the impossibility adversary needs epsilon > 0")
            elif self.distribution is None:
                raise ConfigError(f"{self.scenario} needs a distribution")
            else:
                for d in g.get("d", [1]):
                    try:
                        family_at(self.distribution, d)
                    except SpecError as exc:
                        raise ConfigError(str(exc)) from exc
        try:
            _profile_from(self.options)
        except (SpecError, KeyError) as exc:
            raise ConfigError(f"options.profile: {exc}") from exc
        if self.scenario == "bias-frontier":
            for fam in self.options.get("families", []):
                try:
                    spec_from_dict(fam["distribution"])
                except (SpecError, KeyError, TypeError) as exc:
                    raise ConfigError(f"options.families: {exc}") from exc


# ---------------------------------------------------------------------------
# hypotheses and tests
# ---------------------------------------------------------------------------


def _untruncated(spec: DistributionSpec) -> AdversaryInstance:
    return AdversaryInstance(spec, full_space(), spec.true_mean(), 1.0, "none")


def hypothesis_pair(template: DistributionSpec | None, adversary: dict, alpha: float,
                    epsilon: float, d: int) -> tuple[AdversaryInstance, AdversaryInstance]:
    """Truncated H0 (mean 0) and H1 (mean alpha e_0) instances.

    Both adversaries act along e_0: the half-space cut removes the top tail,
    pushing the H1 mean toward the origin and the H0 mean away from it.
    The impossibility adversary ignores ``alpha`` and uses its own two-atom
    alternative against the point mass at the origin.
    """
    kind = adversary.get("kind", "none")
    if kind == "impossibility":
        h1, h0 = impossibility_adversary(epsilon, adversary.get("p", 2.0), d)
        return _untruncated(h0), h1
    e0 = np.eye(d)[0]
    laws = (template, template.shifted(alpha * e0))
    if kind == "none" or epsilon == 0:
        return tuple(_untruncated(s) for s in laws)
    if kind == "halfspace":
        return tuple(halfspace_adversary(s, epsilon, e0) for s in laws)
    if kind == "center-hollowing":
        return tuple(center_hollowing_adversary(s, epsilon, e0) for s in laws)
    raise ConfigError(f"unknown adversary {kind!r}")


def bias_gamma(spec: DistributionSpec, epsilon: float) -> float:
    """Envelope 2 nu_p eps^(1 - 1/p), minimised over the default exponent grid."""
    if epsilon == 0:
        return 0.0
    return envelope_floor(lambda p: directional_moment_exact(spec, p), epsilon).gamma


def make_test(name: str, alpha: float, delta: float, net=None, tolerance: float = 1e-6) -> Callable:
    if name == "const":
        return lambda x: const_error_test(x, alpha)
    if name == "amplified":
        return lambda x: amplified_test(x, alpha, delta)
    if name == "regularity":
        return lambda x: regularity_test(x, alpha, net, tolerance)
    raise ConfigError(f"unknown test {name!r}")


def net_for(cfg: ExperimentConfig, d: int):
    return direction_net(d, cfg.options.get("net_size"), stream(cfg.master_seed, _NET, d))


@dataclass(frozen=True)
class Cell:
    index: int
    alpha: float
    epsilon: float
    d: int
    n: int | None = None


def _base_for(cfg: ExperimentConfig, d: int):
    return None if cfg.adversary.get("kind") == "impossibility" else family_at(cfg.distribution, d)


def _cell_setup(cfg: ExperimentConfig, cell: Cell):
    template = _base_for(cfg, cell.d)
    h0, h1 = hypothesis_pair(template, cfg.adversary, cell.alpha, cell.epsilon, cell.d)
    gamma = bias_gamma(h1.base, cell.epsilon)
    return h0, h1, gamma


def sample_size(test: str, cfg: ExperimentConfig, h1: AdversaryInstance, cell: Cell, gamma: float,
                C: float | None, C_reg: float | None) -> int | None:
    """Explicit grid n if given, else the calibrated formula (None if infeasible or uncalibrated)."""
    if cell.n is not None:
        return cell.n
    if test == "regularity":
        return None if C_reg is None else required_n_regularity(cell.d, cell.alpha, cfg.delta, C_reg)
    if C is None or not is_feasible(cell.alpha, gamma):
        return None
    sigma = h1.base.cov_opnorm()
    if test == "const":
        return required_n_const(sigma, cell.d, cell.alpha, gamma, C)
    return required_n_amplified(sigma, cell.d, cell.alpha, gamma, cfg.delta, C)


def _cells(cfg: ExperimentConfig) -> list[Cell]:
    g = cfg.grid
    ns = g.get("n", [None])
    out = []
    for d, eps in itertools.product(g.get("d", [1]), g["epsilon"]):
        if "alpha_from_gamma" in cfg.options and not g.get("alpha"):
            mult, offset = cfg.options["alpha_from_gamma"]
            template = _base_for(cfg, d)
            alphas = [mult * bias_gamma(template, eps) + offset]
        else:
            alphas = g["alpha"]
        for a, n in itertools.product(alphas, ns):
            out.append(Cell(len(out), float(a), float(eps), int(d), n))
    return out


def _reference_cell(cfg: ExperimentConfig, cells: list[Cell]) -> Cell:
    ref = cfg.options.get("reference")
    if not ref:
        return cells[0]
    for c in cells:
        if all(math.isclose(getattr(c, k), v) for k, v in ref.items() if k in ("alpha", "epsilon", "d")):
            return c
    raise ConfigError(f"reference cell {ref} is not on the grid")


def calibrate_constants(cfg: ExperimentConfig, cells: list[Cell], threads: int = 1) -> dict:
    """Fit C for the moment route and for the regularity route at the reference cell.

    Each constant is the smallest grid value whose sample size gives both
    error rates at most 1/3 with 95% Wilson confidence. Explicit config
    values are used as given.
    """
    ref = _reference_cell(cfg, cells)
    ref = Cell(ref.index, ref.alpha, ref.epsilon, ref.d, None)
    h0, h1, gamma = _cell_setup(cfg, ref)
    out = {"C": cfg.calibration_C, "regularity_C": cfg.options.get("regularity_C")}
    tests = cfg.tests
    if out["C"] is None and any(t in ("const", "amplified") for t in tests) and is_feasible(ref.alpha, gamma):
        def ok(c):
            n = sample_size("const", cfg, h1, ref, gamma, c, None)
            rates = simulate_cell(h0, h1, n, make_test("const", ref.alpha, cfg.delta), cfg.trials,
                                  cfg.master_seed, (_CALIBRATION, _TEST_CODE["const"], ref.index), threads)
            return rates.succeeds()
        out["C"] = calibrate(ok)
    if out["regularity_C"] is None and "regularity" in tests:
        net = net_for(cfg, ref.d)
        tol = cfg.options.get("tolerance", 1e-6)

        def ok_reg(c):
            n = sample_size("regularity", cfg, h1, ref, gamma, None, c)
            rates = simulate_cell(h0, h1, n, make_test("regularity", ref.alpha, cfg.delta, net, tol), cfg.trials,
                                  cfg.master_seed, (_CALIBRATION, _TEST_CODE["regularity"], ref.index), threads)
            return rates.succeeds()
        out["regularity_C"] = calibrate(ok_reg)
    out["reference"] = {"alpha": ref.alpha, "epsilon": ref.epsilon, "d": ref.d}
    return out


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _plain(v):
    """Numpy scalars to their Python equivalents."""
    return v.item() if isinstance(v, np.generic) else v


def _fmt(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentReport:
    scenario: str
    columns: tuple[str, ...]
    rows: list[dict]
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            for key, v in row.items():
                if key.endswith("_rate") and v is not None and not 0.0 <= v <= 1.0:
                    raise ValueError(f"{key}={v} is not a rate")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{c: _plain(row.get(c)) for c in self.columns} for row in self.rows]
        return json.dumps({"scenario": self.scenario, "columns": list(self.columns), "rows": rows},
                          indent=2, allow_nan=True) + "\n"

    @property
    def all_infeasible(self) -> bool:
        flags = [r.get("feasible") for r in self.rows if "feasible" in r]
        return bool(flags) and not any(flags)

    def write(self, out_dir, fmt: str = "csv") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        body = self.to_csv() if fmt == "csv" else self.to_json()
        data_path = out / f"{self.scenario}.{fmt}"
        data_path.write_text(body)
        man_path = out / f"{self.scenario}.manifest.json"
        man_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True, default=str) + "\n")
        return [data_path, man_path]


def _rate_columns(prefix: str) -> tuple[str, ...]:
    return tuple(f"{prefix}_{s}" for s in ("reject_rate", "ci_low", "ci_high", "half_width", "mean_statistic"))


def _rate_fields(prefix: str, rate: Rate | None, mean_stat: float | None) -> dict:
    if rate is None:
        return dict.fromkeys(_rate_columns(prefix))
    lo, hi = rate.interval
    return dict(zip(_rate_columns(prefix), (rate.value, lo, hi, (hi - lo) / 2.0, mean_stat)))


def _both_rates(rates: CellRates | None, tag: str = "") -> dict:
    return {**_rate_fields(f"{tag}h0", rates and rates.h0, rates and rates.h0_mean_statistic),
            **_rate_fields(f"{tag}h1", rates and rates.h1, rates and rates.h1_mean_statistic)}


def _manifest(cfg: ExperimentConfig, started: float, threads: int, **extra) -> dict:
    return {"config": cfg.to_dict(), "config_hash": cfg.config_hash(), "code_version": __version__,
            "master_seed": cfg.master_seed, "threads": threads,
            "wall_time_s": round(time.perf_counter() - started, 3), **extra}


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

POWER_COLUMNS = ("cell", "test", "alpha", "epsilon", "d", "n", "gamma", "feasible", "C", "trials",
                 *_rate_columns("h0"), *_rate_columns("h1"), "succeeds", "master_seed")


def run_power_curve(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """H0/H1 rejection rates of the moment-route tests on every grid cell.

    Cells where alpha <= 2 gamma have no calibrated sample size; they are
    emitted with ``feasible = false`` and empty rates unless the grid fixes n.
    """
    if cfg.scenario != "power-curve":
        raise ConfigError("config scenario is not power-curve")
    started = time.perf_counter()
    cells = _cells(cfg)
    consts = calibrate_constants(cfg, cells, threads)
    rows = []
    for cell in cells:
        h0, h1, gamma = _cell_setup(cfg, cell)
        feasible = is_feasible(cell.alpha, gamma)
        for test in cfg.tests:
            n = sample_size(test, cfg, h1, cell, gamma, consts["C"], consts["regularity_C"])
            rates = None
            if n is not None:
                fn = make_test(test, cell.alpha, cfg.delta, net_for(cfg, cell.d) if test == "regularity" else None,
                               cfg.options.get("tolerance", 1e-6))
                rates = simulate_cell(h0, h1, n, fn, cfg.trials, cfg.master_seed, (_CELL, cell.index), threads)
            rows.append({"cell": cell.index, "test": test, "alpha": cell.alpha, "epsilon": cell.epsilon,
                         "d": cell.d, "n": n, "gamma": gamma,
                         "feasible": feasible if test != "regularity" else True,
                         "C": consts["regularity_C"] if test == "regularity" else consts["C"],
                         "trials": cfg.trials, **_both_rates(rates),
                         "succeeds": None if rates is None else rates.succeeds(), "master_seed": cfg.master_seed})
    return ExperimentReport(cfg.scenario, POWER_COLUMNS, rows,
                            _manifest(cfg, started, threads, calibration=consts))


PHASE_COLUMNS = ("cell", "alpha", "epsilon", "d", "gamma", "feasible", "C", "ustat_n",
                 *_rate_columns("ustat_h0"), *_rate_columns("ustat_h1"), "ustat_succeeds",
                 "regularity_regime_ok", "regularity_C", "regularity_n",
                 *_rate_columns("regularity_h0"), *_rate_columns("regularity_h1"), "regularity_succeeds",
                 "indistinguishable", "regime", "trials", "master_seed")


def classify(ustat_ok: bool, regularity_ok: bool) -> str:
    if ustat_ok:
        return "testable"
    if regularity_ok:
        return "learning-hard"
    return "infeasible"


def run_phase_diagram(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Both routes on an (alpha, epsilon, d) grid, each cell classified by measured errors.

    testable: the U-statistic test succeeds at its calibrated n.
    learning-hard: it does not (typically alpha <= 2 gamma) but the
    regularity test does. infeasible: neither succeeds.
    """
    if cfg.scenario != "phase-diagram":
        raise ConfigError("config scenario is not phase-diagram")
    started = time.perf_counter()
    cells = _cells(cfg)
    consts = calibrate_constants(cfg, cells, threads)
    profile = _profile_from(cfg.options)
    tol = cfg.options.get("tolerance", 1e-6)
    rows = []
    for cell in cells:
        h0, h1, gamma = _cell_setup(cfg, cell)
        feasible = is_feasible(cell.alpha, gamma)
        n_u = sample_size("const", cfg, h1, cell, gamma, consts["C"], None)
        u = None
        if n_u is not None:
            u = simulate_cell(h0, h1, n_u, make_test("const", cell.alpha, cfg.delta), cfg.trials,
                              cfg.master_seed, (_CELL, cell.index), threads)
        n_r = sample_size("regularity", cfg, h1, cell, gamma, None, consts["regularity_C"])
        r = None
        if n_r is not None:
            r = simulate_cell(h0, h1, n_r, make_test("regularity", cell.alpha, cfg.delta, net_for(cfg, cell.d), tol),
                              cfg.trials, cfg.master_seed, (_CELL, cell.index), threads)
        u_ok = bool(u and u.succeeds())
        r_ok = bool(r and r.succeeds())
        indist = None
        if cfg.adversary.get("kind") == "impossibility":
            indist = all(x.indistinguishable() for x in (u, r) if x is not None)
        rows.append({"cell": cell.index, "alpha": cell.alpha, "epsilon": cell.epsilon, "d": cell.d, "gamma": gamma,
                     "feasible": feasible, "C": consts["C"], "ustat_n": n_u, **_both_rates(u, "ustat_"),
                     "ustat_succeeds": u_ok, "regularity_regime_ok": regularity_regime_ok(cell.alpha, cell.epsilon,
                                                                                          profile),
                     "regularity_C": consts["regularity_C"], "regularity_n": n_r, **_both_rates(r, "regularity_"),
                     "regularity_succeeds": r_ok, "indistinguishable": indist, "regime": classify(u_ok, r_ok),
                     "trials": cfg.trials, "master_seed": cfg.master_seed})
    return ExperimentReport(cfg.scenario, PHASE_COLUMNS, rows,
                            _manifest(cfg, started, threads, calibration=consts))


@dataclass(frozen=True)
class BisectionResult:
    n_star: int | None
    bracket_low: int | None
    bracket_high: int | None
    probes: dict
    flagged: bool


def find_min_n(success: Callable[[int], bool], n_start: int, n_max: int,
               factor: float = BISECTION_FACTOR) -> BisectionResult:
    """Smallest n with ``success(n)``, to within a multiplicative ``factor``.

    Doubles or halves from ``n_start`` to bracket the transition, then
    bisects geometrically. Returns a flagged result if no n <= n_max works.
    """
    probes: dict[int, bool] = {}

    def ok(n):
        if n not in probes:
            probes[n] = bool(success(n))
        return probes[n]

    n = max(2, min(int(n_start), n_max))
    if ok(n):
        hi, lo = n, None
        while hi > 2:
            cand = max(2, hi // 2)
            if ok(cand):
                hi = cand
            else:
                lo = cand
                break
        if lo is None:
            return BisectionResult(hi, None, hi, probes, False)
    else:
        lo, hi = n, None
        while lo < n_max:
            cand = min(2 * lo, n_max)
            if ok(cand):
                hi = cand
                break
            lo = cand
        if hi is None:
            return BisectionResult(None, lo, None, probes, True)
    while hi > lo * factor and hi - lo > 1:
        mid = min(max(int(round(math.sqrt(lo * hi))), lo + 1), hi - 1)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return BisectionResult(hi, lo, hi, probes, False)


SCALING_COLUMNS = ("cell", "test", "d", "alpha", "epsilon", "n_star", "bracket_low", "bracket_high",
                   "success_at_n_star", "ratio_vs_quarter_d", "probes", "flagged", "trials", "master_seed")


def _scaling_start(test: str, d: int, alpha: float, delta: float) -> int:
    if test == "regularity":
        return required_n_regularity(d, alpha, delta, 1.0)
    return max(2, math.ceil(math.sqrt(d) / alpha**2))


def run_scaling(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Empirical minimal n reaching 2/3 success per dimension, for each test.

    Success at n is ``min(1 - H0 rate, H1 rate) >= 2/3`` over ``trials``
    trials; streams depend on (d, test, trial) only, so every probe of the
    bisection reuses the same random numbers. d = 1 is always included.
    """
    if cfg.scenario != "scaling":
        raise ConfigError("config scenario is not scaling")
    started = time.perf_counter()
    dims = sorted(set(cfg.grid["d"]) | {1})
    eps_grid = cfg.grid.get("epsilon", [0.0])
    tol = cfg.options.get("tolerance", 1e-6)
    n_max = cfg.options.get("n_max", 10**6)
    rows, found = [], {}
    index = 0
    for alpha, eps in itertools.product(cfg.grid["alpha"], eps_grid):
        for test in cfg.tests:
            for d in dims:
                cell = Cell(index, float(alpha), float(eps), d)
                h0, h1, _ = _cell_setup(cfg, cell)
                fn = make_test(test, cell.alpha, cfg.delta, net_for(cfg, d) if test == "regularity" else None, tol)
                rates_at = {}

                def success(n, cell=cell, fn=fn, h0=h0, h1=h1, rates_at=rates_at, test=test):
                    r = simulate_cell(h0, h1, n, fn, cfg.trials, cfg.master_seed,
                                      (_SCALING, _TEST_CODE[test], cell.index), threads)
                    rates_at[n] = r.success_rate()
                    return rates_at[n] >= TARGET_SUCCESS

                res = find_min_n(success, cfg.options.get("n_start", _scaling_start(test, d, alpha, cfg.delta)), n_max)
                found[(alpha, eps, test, d)] = res.n_star
                quarter = found.get((alpha, eps, test, d // 4)) if d % 4 == 0 else None
                ratio = res.n_star / quarter if res.n_star and quarter else None
                rows.append({"cell": index, "test": test, "d": d, "alpha": cell.alpha, "epsilon": cell.epsilon,
                             "n_star": res.n_star, "bracket_low": res.bracket_low, "bracket_high": res.bracket_high,
                             "success_at_n_star": rates_at.get(res.n_star), "ratio_vs_quarter_d": ratio,
                             "probes": len(res.probes), "flagged": res.flagged, "trials": cfg.trials,
                             "master_seed": cfg.master_seed})
                index += 1
    return ExperimentReport(cfg.scenario, SCALING_COLUMNS, rows, _manifest(cfg, started, threads))


BIAS_COLUMNS = ("cell", "family", "epsilon", "measured_shift", "envelope", "p_used", "nu_used",
                "within_envelope", "loglog_slope", "source")

DEFAULT_FAMILIES = (
    ("Gaussian", IsotropicGaussian((0.0,))),
    ("StudentT(df=3)", StudentT((0.0,), 3.0)),
    ("StudentT(df=4)", StudentT((0.0,), 4.0)),
    ("Pareto(tail=3)", Pareto((0.0,), 3.0)),
)


def loglog_slope(eps, shifts) -> float:
    """Least-squares slope of log(shift) against log(eps)."""
    return float(np.polyfit(np.log(np.asarray(eps, float)), np.log(np.asarray(shifts, float)), 1)[0])


def run_bias_frontier(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Exact half-space mean shift against the moment envelope, per family and epsilon.

    The slope column is the log-log fit over the epsilon values inside
    ``options.slope_range`` (default [1e-3, 1e-1]).
    """
    if cfg.scenario != "bias-frontier":
        raise ConfigError("config scenario is not bias-frontier")
    started = time.perf_counter()
    fams = cfg.options.get("families")
    families = DEFAULT_FAMILIES if not fams else tuple(
        (f.get("label", f["distribution"]["family"]), spec_from_dict(f["distribution"])) for f in fams)
    lo, hi = cfg.options.get("slope_range", (1e-3, 1e-1))
    eps_grid = sorted(e for e in cfg.grid["epsilon"] if e > 0)
    rows = []
    for label, spec in families:
        e0 = np.eye(spec.dimension)[0]
        fam_rows = []
        for eps in eps_grid:
            inst = halfspace_adversary(spec, eps, e0)
            shift = float(np.linalg.norm(inst.exact_truncated_mean - spec.true_mean()))
            env = envelope_floor(lambda p: directional_moment_exact(spec, p), eps)
            fam_rows.append({"family": label, "epsilon": eps, "measured_shift": shift, "envelope": env.gamma,
                             "p_used": env.p_used, "nu_used": env.nu_used,
                             "within_envelope": shift <= env.gamma * (1.0 + 1e-12), "source": "exact"})
        fit = [(r["epsilon"], r["measured_shift"]) for r in fam_rows if lo <= r["epsilon"] <= hi]
        slope = loglog_slope(*zip(*fit)) if len(fit) >= 2 else None
        for r in fam_rows:
            rows.append({"cell": len(rows), **r, "loglog_slope": slope})
    return ExperimentReport(cfg.scenario, BIAS_COLUMNS, rows, _manifest(cfg, started, threads))


IMPOSSIBILITY_COLUMNS = ("cell", "epsilon", "p", "alpha", "d", "n", *_rate_columns("h0"), *_rate_columns("h1"),
                         "indistinguishable", "trials", "master_seed")


def run_impossibility_demo(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Constant-error test against the two-atom alternative whose truncation is the point mass.

    alpha is set to the alternative's mean eps^(1 - 1/p).
    """
    if cfg.scenario != "impossibility-demo":
        raise ConfigError("config scenario is not impossibility-demo")
    started = time.perf_counter()
    p = cfg.adversary.get("p", 2.0)
    rows = []
    for d, eps, n in itertools.product(cfg.grid.get("d", [1]), cfg.grid["epsilon"], cfg.grid["n"]):
        alpha = eps ** (1.0 - 1.0 / p)
        cell = Cell(len(rows), alpha, eps, d, n)
        h0, h1 = hypothesis_pair(None, cfg.adversary, alpha, eps, d)
        rates = simulate_cell(h0, h1, n, make_test("const", alpha, cfg.delta), cfg.trials, cfg.master_seed,
                              (_CELL, cell.index), threads)
        rows.append({"cell": cell.index, "epsilon": eps, "p": p, "alpha": alpha, "d": d, "n": n,
                     **_both_rates(rates), "indistinguishable": rates.indistinguishable(),
                     "trials": cfg.trials, "master_seed": cfg.master_seed})
    return ExperimentReport(cfg.scenario, IMPOSSIBILITY_COLUMNS, rows, _manifest(cfg, started, threads))


RUNNERS = {
    "power-curve": run_power_curve,
    "phase-diagram": run_phase_diagram,
    "scaling": run_scaling,
    "bias-frontier": run_bias_frontier,
    "impossibility-demo": run_impossibility_demo,
}


def run(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    return RUNNERS[cfg.scenario](cfg, threads)


# ---------------------------------------------------------------------------
# estimator coverage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageResult:
    covered: int
    trials: int
    bound: float
    errors: np.ndarray

    @property
    def rate(self) -> float:
        return self.covered / self.trials


def recovery_errors(instance: AdversaryInstance, n: int, trials: int, master_seed: int, stream_id: tuple,
                    net=None, tolerance: float = 1e-6, threads: int = 1) -> np.ndarray:
    """||mu_hat - mu_P|| over ``trials`` truncated batches of size n."""
    d = instance.base.dimension
    net = net if net is not None else direction_net(d, rng=stream(master_seed, _NET, d))
    mu = instance.base.true_mean()

    def one(t):
        x = truncated_sampler(instance, n, stream(master_seed, *stream_id, t))
        return float(np.linalg.norm(estimate_center(x, net, tolerance).mu_hat - mu))

    return np.array(_map(one, trials, threads))


def coverage(errors: np.ndarray, profile: RegularityProfile, epsilon: float, d: int, delta: float, n: int,
             C: float) -> CoverageResult:
    """Share of recovery errors inside the bound for constant C."""
    bound = recovery_bound(profile, epsilon, d, delta, n, C)
    errors = np.asarray(errors, dtype=float)
    return CoverageResult(int(np.sum(errors <= bound)), errors.size, bound, errors)
