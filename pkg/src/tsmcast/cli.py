"""Command-line front end.

    tsmcast analyze   --config run.json
    tsmcast simulate  --config run.json --trials 20000 --seed 7 --threads 4
    tsmcast sweep     --config run.json --sweep theta:1e5:1e7:20:log --engine both
    tsmcast compare   --config run.json --sweep theta:1e5:1e7:10:log
    tsmcast asymptotic --config run.json --regime large-t --schedule 8,16,32,64

Without ``--config`` the built-in reference operating point is used.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

from . import analysis, asymptotics, simulator
from .analysis import QuadratureError
from .config import RunConfig, Sweep, default_theta_sweep
from .model import ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

BASE_COLUMNS = ("sweep_var", "sweep_value", "variant", "q_analysis", "q_sim", "ci95", "no_serving_freq", "seed")


@dataclass
class ResultRow:
    sweep_var: str = ""
    sweep_value: float | None = None
    variant: str = simulator.PROPOSED
    q_analysis: float | None = None
    q_sim: float | None = None
    ci95: float | None = None
    no_serving_freq: float | None = None
    seed: int | None = None
    q_per_file: list = field(default_factory=list)
    note: str = ""

    def record(self, n_files: int) -> dict:
        rec = {c: getattr(self, c) for c in BASE_COLUMNS}
        for n in range(1, n_files + 1):
            rec[f"q_{n}"] = self.q_per_file[n - 1] if len(self.q_per_file) >= n else None
        rec["note"] = self.note
        return rec


def columns(n_files: int) -> list[str]:
    return [*BASE_COLUMNS, *(f"q_{n}" for n in range(1, n_files + 1)), "note"]


def _analysis_row(cfg: RunConfig, row: ResultRow) -> ResultRow:
    b = cfg.bundle
    per_file = analysis.success_prob_per_file(b.pop, b.design, b.net, b.scheme, cfg.quadrature)
    row.q_analysis = float(b.pop.a @ per_file)
    row.q_per_file = [float(v) for v in per_file]
    return row


def _fill_sim(row: ResultRow, est: simulator.EstimateResult) -> ResultRow:
    row.q_sim = est.q_hat
    row.ci95 = est.ci95
    row.no_serving_freq = est.no_serving_freq
    row.seed = est.seed
    if not row.q_per_file:
        row.q_per_file = [None if math.isnan(v) else v for v in est.q_hat_per_file]
    return row


def cmd_analyze(cfg: RunConfig) -> list[ResultRow]:
    return [_analysis_row(cfg, ResultRow())]


def cmd_simulate(cfg: RunConfig) -> list[ResultRow]:
    est = simulator.estimate(cfg.bundle, cfg.simulation)
    return [_fill_sim(ResultRow(variant=cfg.simulation.variant), est)]


def _sweep_rows(cfg: RunConfig, sweep: Sweep, engines: set[str], variant: str) -> list[ResultRow]:
    rows = []
    shared = None
    if "simulation" in engines and sweep.axis == "theta":
        # Draws do not depend on theta: one batch serves every grid point.
        try:
            shared = simulator.simulate(cfg.bundle, cfg.simulation)
        except (ValidationError, ArithmeticError) as exc:
            shared = exc
    for value in sweep.grid:
        row = ResultRow(sweep_var=sweep.axis, sweep_value=value, variant=variant)
        try:
            point = cfg.at(sweep.axis, value)
            if "analysis" in engines and variant != simulator.BASELINE_TEMPORAL:
                a_cfg = point.at("period_t", 1) if variant == simulator.BASELINE_CONTINUOUS else point
                _analysis_row(a_cfg, row)
            if "simulation" in engines:
                if isinstance(shared, Exception):
                    raise shared
                b = point.bundle
                batch = shared if shared is not None else simulator.simulate(b, point.simulation)
                est = simulator.summarize(
                    batch, b.scheme.rate_theta, b.net, b.pop.n_files, point.simulation.seed, variant
                )
                _fill_sim(row, est)
        except (ValidationError, ArithmeticError, ValueError) as exc:
            row.note = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def cmd_sweep(cfg: RunConfig, engines=("analysis",)) -> list[ResultRow]:
    sweep = cfg.sweep or default_theta_sweep()
    rows = _sweep_rows(cfg, sweep, set(engines), cfg.simulation.variant)
    return sorted(rows, key=lambda r: r.sweep_value)


def cmd_compare(cfg: RunConfig, engines=("analysis", "simulation")) -> list[ResultRow]:
    sweep = cfg.sweep or Sweep("theta", (cfg.bundle.scheme.rate_theta,))
    rows = []
    for variant in simulator.VARIANTS:
        vcfg = cfg.with_simulation(variant=variant)
        rows.extend(_sweep_rows(vcfg, sweep, set(engines) | {"simulation"}, variant))
    return sorted(rows, key=lambda r: (r.sweep_value, simulator.VARIANTS.index(r.variant)))


REGIMES = ("large-t", "dense", "sparse", "synthetic")
DEFAULT_SCHEDULES = {
    "large-t": (8, 16, 32, 64),
    "dense": (1.0, 2.0, 4.0),
    "sparse": (4e-3, 2e-3, 1e-3),
    "synthetic": (4, 8, 16, 32),
}


def cmd_asymptotic(cfg: RunConfig, regime: str = "large-t", schedule=None) -> asymptotics.ConvergenceReport:
    if regime not in REGIMES:
        raise ValidationError([f"regime one of {REGIMES} (got {regime!r})"])
    schedule = tuple(schedule or DEFAULT_SCHEDULES[regime])
    b, quad = cfg.bundle, cfg.quadrature
    if regime == "large-t":
        return asymptotics.probe_large_t(b.pop, b.design, b.net, b.scheme.rate_theta, schedule, quad)
    if regime == "dense":
        return asymptotics.probe_dense(b.pop, b.design, b.net, b.scheme, schedule, quad)
    if regime == "sparse":
        return asymptotics.probe_sparse(b.pop, b.design, b.net, b.scheme, schedule, quad)
    # fixture law q = 1/2 + 1/T, order exactly 1
    return asymptotics.probe_convergence(lambda t: 0.5 + 1.0 / t, 0.5, schedule, parameter="period_t")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_rows(rows: list[ResultRow], n_files: int, fmt: str) -> str:
    records = [r.record(n_files) for r in rows]
    if fmt == "json":
        return json.dumps({"columns": columns(n_files), "rows": records}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns(n_files))
    for rec in records:
        writer.writerow([_fmt(rec[c]) for c in columns(n_files)])
    return buf.getvalue()


def render_report(report: asymptotics.ConvergenceReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    buf = io.StringIO()
    cols = ["parameter", "value", "q", "q_limit", "error", "ratio", "order"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for rec in report.rows():
        writer.writerow([_fmt(rec[c]) for c in cols])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (default: built-in reference operating point)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--variant", choices=simulator.VARIANTS)
    common.add_argument("--sweep", help="AXIS:START:STOP:POINTS[:log], AXIS in theta|period_t|lambda_u")
    common.add_argument("--theta", type=float, help="override rate_theta")
    common.add_argument("--period", type=int, help="override period_t")
    common.add_argument("--lambda-u", type=float, help="override lambda_u")

    parser = argparse.ArgumentParser(prog="tsmcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="analytical success probability")
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate")
    sim.add_argument("--dump-scenarios", metavar="DIR", help="write the first trials' snapshots as JSON")
    sim.add_argument("--dump-count", type=int, default=10)
    sw = sub.add_parser("sweep", parents=[common], help="one row per grid point")
    sw.add_argument("--engine", choices=("analysis", "simulation", "both"), default="analysis")
    cmp_ = sub.add_parser("compare", parents=[common], help="proposed scheme against both baselines")
    cmp_.add_argument("--no-analysis", action="store_true")
    asy = sub.add_parser("asymptotic", parents=[common], help="convergence probes of the limit regimes")
    asy.add_argument("--regime", choices=REGIMES, default="large-t")
    asy.add_argument("--schedule", help="comma-separated parameter values")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    if args.theta is not None:
        overrides["rate_theta"] = args.theta
    if args.period is not None:
        overrides["period_t"] = args.period
    if args.lambda_u is not None:
        overrides["lambda_u"] = args.lambda_u
    if overrides:
        cfg = cfg.with_model(**overrides)
    sim = {
        k: v
        for k, v in (("trials", args.trials), ("seed", args.seed), ("threads", args.threads), ("variant", args.variant))
        if v is not None
    }
    if sim:
        cfg = cfg.with_simulation(**sim)
    if args.sweep:
        cfg = cfg.with_sweep(Sweep.parse(args.sweep))
    return cfg


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        n_files = cfg.bundle.pop.n_files
        if args.command == "asymptotic":
            schedule = [float(v) for v in args.schedule.split(",")] if args.schedule else None
            text = render_report(cmd_asymptotic(cfg, args.regime, schedule), args.format)
            status = EXIT_OK
        else:
            if args.command == "analyze":
                rows = cmd_analyze(cfg)
            elif args.command == "simulate":
                if args.dump_scenarios:
                    simulator.dump_scenarios(cfg.bundle, cfg.simulation, args.dump_count, args.dump_scenarios)
                rows = cmd_simulate(cfg)
            elif args.command == "sweep":
                engines = ("analysis", "simulation") if args.engine == "both" else (args.engine,)
                rows = cmd_sweep(cfg, engines)
            else:
                engines = ("simulation",) if args.no_analysis else ("analysis", "simulation")
                rows = cmd_compare(cfg, engines)
            text = render_rows(rows, n_files, args.format)
            status = EXIT_PARTIAL if any(r.note for r in rows) else EXIT_OK
    except ValidationError as exc:
        print("validation error:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except QuadratureError as exc:
        print(f"analysis: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
