"""Command-line entry point: ``mixbound <subcommand> ...``.

Exit codes: 0 when every verdict passes (or is not applicable), 1 on a
verdict failure, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bounds as B
from . import harness as H

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(args, cfg: H.ExperimentConfig) -> Path:
    if args.out is not None:
        return Path(args.out)
    if cfg.output_dir is not None:
        return Path(cfg.output_dir)
    return Path("runs") / cfg.name


def _print_report(rep: H.Report) -> None:
    for f in rep.fits:
        print(f"fit {f.quantity:<11} slope {f.slope:+.4f} +- {f.stderr:.1e}  C {f.C:.4g}")
    for v in rep.verdicts:
        line = f"bound {v.bound:<16} {v.status}"
        if v.exponent_theory is not None:
            line += (
                f"  exponent theory {v.exponent_theory:+.4f} observed {v.exponent_observed:+.4f}"
                f"  violations {v.violations}/{v.n_checked}"
            )
        for note in v.notes:
            line += f"  [{note}]"
        print(line)
    c = rep.classification
    print(f"lambda class {c['observed_label']} (chart: {c['chart']})")
    if rep.flags:
        print("flags: " + ", ".join(rep.flags))


def cmd_simulate(args) -> int:
    cfg = H.load_config(args.config)
    out = _out_dir(args, cfg)
    rep = H.run_experiment(cfg, out)
    _print_report(rep)
    print(f"wrote {out / 'series.csv'}, {out / 'report.json'}, {out / 'plot_data.csv'}")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_decay(args) -> int:
    cfg = H.load_config(args.config)
    rep = H.decay_character_report(cfg, args.tol)
    print(
        f"{rep.family}: r* = {rep.estimate:.4f} +- {rep.stderr:.1e} over "
        f"[{rep.window[0]:.4g}, {rep.window[1]:.4g}]; analytic {rep.analytic:g}"
        + (f"  flags: {', '.join(rep.flags)}" if rep.flags else "")
    )
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_check_bounds(args) -> int:
    cfg = H.load_config(args.config)
    params = cfg.bound_params()
    if params is None:
        print("pure advection: only the pure_advection_lambda bound applies")
        return EXIT_OK
    names = cfg.bounds or tuple(H.BOUND_BUILDERS)
    rows = []
    for name in names:
        if name == "pure_advection_lambda":
            continue
        curve = H.BOUND_BUILDERS[name](params)
        status = "applicable" if curve.applicable else "not applicable"
        failed = [g.name for g in curve.gates if not g.passed]
        extra = f" (t >= {curve.t_min:.6g})" if name == "theta_lower" and curve.applicable else ""
        print(
            f"{name:<14} {status:<15} exponent {curve.poly_exponent:+.4f}"
            f" exp_sign {curve.exp_sign:+d} regime {curve.regime}{extra}"
            + (f"  violated: {'; '.join(failed)}" if failed else "")
        )
        rows.append(curve.to_json())
    if args.json:
        print(json.dumps(rows, indent=2))
    if not args.simulate:
        return EXIT_OK
    rep = H.run_experiment(cfg, _out_dir(args, cfg))
    _print_report(rep)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_chart(args) -> int:
    cfg = H.load_config(args.config)
    out = _out_dir(args, cfg)
    sweep = H.chart_sweep(cfg, out, workers=args.workers)
    print(sweep.table())
    for c in sweep.cells:
        if "floor_holds" in c:
            print(
                f"{c['name']}: tail min lambda {c['lambda_tail_min']:.4g} vs floor "
                f"{c['lambda_floor']:.4g} -> {'holds' if c['floor_holds'] else 'VIOLATED'}"
            )
    floors = all(c.get("floor_holds", True) for c in sweep.cells)
    return EXIT_OK if (sweep.ok and floors) else EXIT_FAIL


def cmd_fit(args) -> int:
    cols = H.read_series_csv(args.csv)
    if args.col not in cols:
        raise H.ConfigError(f"column {args.col!r} not in {args.csv}; have {', '.join(cols)}")
    if "t" not in cols:
        raise H.ConfigError(f"{args.csv} has no t column")
    fit = H.fit_exponent(cols["t"], cols[args.col], tuple(args.window), quantity=args.col)
    print(
        f"{args.col}: slope {fit.slope:.6f} +- {fit.stderr:.2e}  C {fit.C:.6g}  "
        f"window t in [{fit.window[0]:.4g}, {fit.window[1]:.4g}] ({fit.n_points} points)"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mixbound", description="Passive-scalar mixing simulator and bound checker.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one experiment and write CSV/JSON reports")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("decay-character", help="estimate r* of the configured initial data")
    s.add_argument("config")
    s.add_argument("--tol", type=float, default=0.05)
    s.set_defaults(func=cmd_decay)

    s = sub.add_parser("check-bounds", help="evaluate bound gates (optionally simulate)")
    s.add_argument("config")
    s.add_argument("--simulate", action="store_true")
    s.add_argument("--json", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_check_bounds)

    s = sub.add_parser("chart-sweep", help="classify lambda over the equation x nu grid")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_chart)

    s = sub.add_parser("fit", help="fit a power law in (1+t) to one CSV column")
    s.add_argument("csv")
    s.add_argument("--col", required=True)
    s.add_argument("--window", type=float, nargs=2, default=(0.5, 1.0), metavar=("W0", "W1"))
    s.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (H.ConfigError, FileNotFoundError) as exc:
        print(f"mixbound: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # resolution and parameter errors raised while building the run
        print(f"mixbound: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
