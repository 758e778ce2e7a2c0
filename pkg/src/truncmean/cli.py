"""Command-line entry point: ``truncmean test|estimate|simulate|oracle``.

Exit codes: 0 success, 2 config or input error, 3 every simulated cell was
infeasible, 4 an oracle check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InfeasibleRegimeError, SpecError
from .harness import SCENARIOS, ExperimentConfig, run
from .median import direction_net, estimate_center, regularity_test
from .oracle import OracleRow, verify_grid
from .rng import stream
from .ustat import amplified_test, const_error_test

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_ORACLE = 0, 2, 3, 4

ORACLE_COLUMNS = ("law", "n", "exact_mean", "norm_sq", "mean_ok", "exact_var", "var_bound", "var_ok")


def _load_data(path: str) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".npy":
        x = np.load(p)
    else:
        text = p.read_text()
        x = np.loadtxt(io.StringIO(text), delimiter="," if "," in text else None, ndmin=2)
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _emit(obj: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(obj, indent=2, default=float))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        flat = {k: v for k, v in obj.items() if not isinstance(v, (dict, list))}
        w.writerow(flat.keys())
        w.writerow(flat.values())


def _net(args, d: int):
    return direction_net(d, args.net_size, stream(args.seed, 3, d))


def cmd_test(args) -> int:
    x = _load_data(args.data)
    if args.method == "const":
        verdict = const_error_test(x, args.alpha)
    elif args.method == "amplified":
        verdict = amplified_test(x, args.alpha, args.delta)
    else:
        verdict = regularity_test(x, args.alpha, _net(args, x.shape[1]), args.tolerance)
    _emit(verdict.to_dict(), args.format)
    return EXIT_OK


def cmd_estimate(args) -> int:
    x = _load_data(args.data)
    net = _net(args, x.shape[1])
    est = estimate_center(x, net, args.tolerance, args.method)
    residuals = net.directions @ est.mu_hat - est.medians
    if args.format == "json":
        _emit({"mu_hat": est.mu_hat.tolist(), "objective": est.objective, "net_size": net.size,
               "n": x.shape[0], "residuals": residuals.tolist()}, "json")
        return EXIT_OK
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("field", "index", "value"))
    w.writerows(("mu_hat", i, repr(float(v))) for i, v in enumerate(est.mu_hat))
    w.writerow(("objective", 0, repr(est.objective)))
    w.writerows(("residual", j, repr(float(r))) for j, r in enumerate(residuals))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if cfg.scenario != args.scenario:
        raise ConfigError(f"config scenario {cfg.scenario!r} does not match subcommand {args.scenario!r}")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    report = run(cfg, threads=args.threads)
    for path in report.write(args.out_dir, args.format):
        print(path)
    return EXIT_INFEASIBLE if report.all_infeasible else EXIT_OK


def oracle_table(rows: list[OracleRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((*ORACLE_COLUMNS, "status"))
    for r in rows:
        vals = [getattr(r, c) for c in ORACLE_COLUMNS]
        w.writerow([repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v
                    for v in vals] + ["pass" if r.ok else "FAIL"])
    return buf.getvalue()


def cmd_oracle(args) -> int:
    rows = verify_grid()
    table = oracle_table(rows)
    sys.stdout.write(table)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.csv").write_text(table)
    return EXIT_OK if all(r.ok for r in rows) else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truncmean", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    # each subcommand gets its own copies: actions shared through ``parents``
    # would let one subcommand's defaults leak into the others
    def common(p, seed=None, out_dir="."):
        p.add_argument("--seed", type=int, default=seed, help="master seed (overrides the config)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out-dir", default=out_dir)

    def data_args(p):
        p.add_argument("--data", required=True, help=".npy, CSV or whitespace-separated rows")
        p.add_argument("--net-size", type=int, default=None)
        p.add_argument("--tolerance", type=float, default=1e-6)

    p = sub.add_parser("test", help="run a mean test on a data file")
    common(p, seed=0)
    data_args(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--method", choices=("const", "amplified", "regularity"), default="const")
    p.add_argument("--delta", type=float, default=0.05)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("estimate", help="Chebyshev-center estimate of the mean")
    common(p, seed=0)
    data_args(p)
    p.add_argument("--method", choices=("lp", "subgradient"), default="lp")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="run an experiment from a JSON config")
    common(p)
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="exact enumeration checks")
    common(p, out_dir=None)
    p.add_argument("action", choices=("verify",))
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpecError, InfeasibleRegimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
