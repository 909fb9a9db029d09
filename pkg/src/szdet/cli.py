"""Command-line entry point: ``szdet <subcommand>``.

Exit codes: 0 success, 1 a criterion failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import acceptance, forms, gronwall
from .config import ConfigError, RunConfig, load_config, write_csv
from .determining import (ThresholdReport, TwinConfig, threshold_2d, threshold_3d,
                          twin_experiment)
from .mesh import build_box_mesh, metrics, refine
from .nse2d import BlowUpError, CFLError, SimConfig, simulate
from .szinterp import l2_error_and_rate, model_field

PIPELINES = {
    "sz-rates": (1, 2, 3),
    "forms-suite": (4, 5),
    "apriori": (6, 7),
    "gronwall-suite": (8,),
    "twin-laminar": (9,),
    "thresholds-sweep": (10,),
}


@dataclass
class ThresholdConfig:
    nu: float = 1.0
    F: float = 1.0
    C1: float = 1.0
    gamma_2d: float = 0.5
    gamma_3d: float = 1.0 / 3.0
    lambda1: float = 1.0
    # CSV with columns t and grad_linf (simulate or twin output); empty skips 3D
    grad_series: str = ""
    T_grid: str = "1"


def _args_config(command: str, args: argparse.Namespace) -> RunConfig:
    paths = ("out", "out_dir", "checkpoint_dir")
    values = {k: v for k, v in vars(args).items() if k not in ("func", "command") + paths}
    outputs = {k: v for k, v in vars(args).items() if k in paths and v is not None}
    return RunConfig(command, {}, values, {k: type(v).__name__ for k, v in values.items()},
                     outputs)


def _fmt(*values) -> str:
    return ",".join(v if isinstance(v, str) else f"{v:.17g}" for v in values)


def cmd_mesh_study(args) -> int:
    mesh = build_box_mesh(args.dim, 1.0, args.n)
    rows = ["level,N,n_cells,h,h_min,shape_regularity,c_lower"]
    for level in range(args.refinements + 1):
        m = metrics(mesh)
        rows.append(_fmt(str(level), str(m.N), str(mesh.n_cells), m.h, m.h_min,
                         m.shape_regularity, m.c_lower))
        if level < args.refinements:
            mesh = refine(mesh)
    write_csv(args.out, _args_config("mesh-study", args).header(), rows)
    return 0


def cmd_sz_convergence(args) -> int:
    n0 = args.n0 if args.n0 else (4 if args.dim == 2 else 2)
    ops = acceptance.sz_family(args.dim, n0, args.levels)
    table = l2_error_and_rate(ops, model_field(args.field, args.dim), args.field)
    rows = [acceptance.CONVERGENCE_HEADER] + acceptance.convergence_rows(table)
    write_csv(args.out, _args_config("sz-convergence", args).header(), rows)
    print(f"{args.field} field, {args.dim}D: fitted slope {table.slope:.4f}")
    return 0


def cmd_forms_verify(args) -> int:
    M = 32 if args.dim == 2 else 16
    triples = forms.random_triples(args.dim, args.samples, args.seed, M=M, kmax=M / 3 - 1)
    report = forms.verify_ladyzhenskaya(list(triples), args.dim)
    rows = ["inequality,sample,lhs,rhs,ratio"]
    rows += [_fmt(r[0], str(r[1]), *r[2:]) for r in report.rows]
    write_csv(args.out, _args_config("forms-verify", args).header(), rows)
    worst = max(r[4] for r in report.rows)
    print(f"max ratio {worst:.6g}")
    return 0 if worst <= 1 + 1e-9 else 1


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, "simulate", SimConfig)
    sim = cfg.build(SimConfig)
    rec = simulate(sim, checkpoint_dir=args.checkpoint_dir)
    write_csv(args.out, cfg.header(), rec.to_csv_rows())
    return 0


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Numeric columns of a CSV written by this package (``#`` lines skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        names = next(reader)
        data = np.array([[float(x) for x in row] for row in reader if row])
    return {name: data[:, i] for i, name in enumerate(names)}


def cmd_gronwall_demo(args) -> int:
    if args.input:
        cols = read_csv_columns(args.input)
        y_name = "y" if "y" in cols else "w_l2sq"
        missing = [c for c in ("t", "alpha", "beta", y_name) if c not in cols]
        if missing:
            raise ConfigError(f"{args.input}: missing columns {missing}")
        alpha = gronwall.TimeSeries(cols["t"], cols["alpha"])
        beta = gronwall.TimeSeries(cols["t"], cols["beta"])
        y0 = float(cols[y_name][0])
        window = args.window
    elif args.case == "exp":
        alpha = gronwall.TimeSeries.sample(lambda t: np.ones_like(t), 20.0, 1e-2)
        beta = gronwall.TimeSeries.sample(lambda t: np.exp(-t), 20.0, 1e-2)
        y0, window = 1.0, args.window
    elif args.case == "oscillatory":
        alpha = gronwall.TimeSeries.sample(lambda t: 1 + np.sin(t), 80.0, 1e-2)
        beta = gronwall.TimeSeries.sample(lambda t: 0 * t, 80.0, 1e-2)
        y0, window = 1.0, 2 * math.pi
    else:
        alpha, beta, y0, window = acceptance.random_gronwall_case(np.random.default_rng(args.seed))
    rep = gronwall.check_hypotheses(alpha, beta, window)
    y = gronwall.integrate_inequality(alpha, beta, y0)
    concl = gronwall.verify_conclusion(y, window)
    rows = ["t,alpha,beta,y"]
    rows += [_fmt(*v) for v in zip(y.times, alpha.values, beta.values, y.values)]
    write_csv(args.out, _args_config("gronwall-demo", args).header(), rows)
    print(f"window T={window:.6g}: m={rep.m:.6g} M={rep.M:.6g} "
          f"beta+ limit={rep.beta_plus_limit:.6g} hypotheses={rep.hypotheses_met}")
    print(f"envelope: first window max {concl.first_window_max:.6g}, "
          f"final window max {concl.final_window_max:.6g}, decayed={concl.decayed}")
    return 1 if rep.all_met and not concl.decayed else 0


def cmd_twin(args) -> int:
    cfg = load_config(args.config, "twin", TwinConfig)
    diag = twin_experiment(cfg.build(TwinConfig))
    header = cfg.header() + [f"# C1 = {diag.C1!r}", f"# N = {diag.N}"]
    write_csv(args.out, header, diag.to_csv_rows())
    return 0


def cmd_thresholds(args) -> int:
    cfg = load_config(args.config, "thresholds", ThresholdConfig)
    c = cfg.build(ThresholdConfig)
    N2, h2 = threshold_2d(c.nu, c.F, c.gamma_2d, c.C1)
    N3 = h3 = eps = math.nan
    if c.grad_series:
        cols = read_csv_columns(c.grad_series)
        series = gronwall.TimeSeries(cols["t"], cols["grad_linf"])
        T_grid = [float(x) for x in c.T_grid.split(",")]
        N3, h3, eps = threshold_3d(c.nu, series, c.gamma_3d, c.C1, T_grid)
    report = ThresholdReport(
        gamma=c.gamma_2d, C1_empirical=c.C1, nu=c.nu, F=c.F, epsilon_quantity=eps,
        epsilon_inf=c.nu * eps, N_threshold_2d=N2, h_threshold_2d=h2,
        N_threshold_3d=N3, h_threshold_3d=h3,
        grashof=forms.grashof(c.F, c.lambda1, c.nu),
    )
    rows = ["quantity,value"] + [_fmt(k, v) for k, v in report.rows()]
    write_csv(args.out, cfg.header(), rows)
    return 0


def run_pipeline(name: str, out_dir: str | Path | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    if name not in PIPELINES:
        raise ConfigError(f"unknown pipeline {name!r}; choose from {', '.join(PIPELINES)}")
    cfg = RunConfig(f"pipeline {name}", {}, {"pipeline": name}, {"pipeline": "str"})
    ok = True
    for number in PIPELINES[name]:
        result = acceptance.CRITERIA[number]()
        ok &= result.passed
        print(result.report(), file=stream, flush=True)
        if out_dir is not None:
            for table, (columns, rows) in result.tables.items():
                write_csv(Path(out_dir) / f"{table}.csv", cfg.header(), [columns] + rows)
    return 0 if ok else 1


def cmd_pipeline(args) -> int:
    return run_pipeline(args.name, args.out_dir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="szdet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mesh-study", help="metrics of a refined box mesh family")
    s.add_argument("--dim", type=int, choices=(2, 3), required=True)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--refinements", type=int, default=3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mesh_study)

    s = sub.add_parser("sz-convergence", help="Scott-Zhang L2 convergence table")
    s.add_argument("--dim", type=int, choices=(2, 3), required=True)
    s.add_argument("--field", choices=("smooth", "rough", "linear"), required=True)
    s.add_argument("--levels", type=int, default=4)
    s.add_argument("--n0", type=int, default=0, help="cells per axis on the coarsest level")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sz_convergence)

    s = sub.add_parser("forms-verify", help="trilinear-form inequality ratios")
    s.add_argument("--dim", type=int, choices=(2, 3), required=True)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_forms_verify)

    s = sub.add_parser("simulate", help="2D periodic Navier-Stokes run")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--checkpoint-dir")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("gronwall-demo", help="Gronwall hypotheses and envelope")
    s.add_argument("--case", choices=("exp", "oscillatory", "random"), default="exp")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--input", help="CSV with t, alpha, beta and y (or w_l2sq) columns")
    s.add_argument("--window", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gronwall_demo)

    s = sub.add_parser("twin", help="twin-trajectory determining experiment")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_twin)

    s = sub.add_parser("thresholds", help="2D/3D determining thresholds")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_thresholds)

    s = sub.add_parser("pipeline", help="run acceptance criteria and write their tables")
    s.add_argument("name", help=", ".join(PIPELINES))
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:  # config, mesh and series errors are ValueErrors
        print(f"szdet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CFLError, BlowUpError) as exc:
        print(f"szdet {args.command}: run aborted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
