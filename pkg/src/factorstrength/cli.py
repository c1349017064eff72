"""Command-line interface: ``simulate``, ``estimate`` and ``montecarlo``.

Exit codes: 0 success, 2 invalid arguments, 3 unreadable panel or config,
4 degenerate estimate (non-positive diagonal or trace), 5 reference check
failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import io as fio
from .core import MatrixPanel
from .dgp import SETTINGS, NoiseSpec, matrix_setting, simulate_matrix, simulate_vector, vector_setting
from .errors import FactorStrengthError, NonPositiveDiagonalError, NonPositiveTraceError, PanelFormatError
from .estimators import ProjectionConfig
from .harness import compare_reference, reference_tables, run_grid
from .strength import estimate_matrix, estimate_vector

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_DEGENERATE = 4
EXIT_CHECK = 5

log = logging.getLogger("factorstrength")


def _noise_from_args(args) -> NoiseSpec:
    kind = "iid_gaussian" if args.noise == "iid" else "correlated"
    return NoiseSpec(kind=kind, cross_rho=args.cross_rho, serial_phi=args.serial_phi, delta=args.delta)


def cmd_simulate(args, parser) -> int:
    try:
        noise = _noise_from_args(args)
        if args.model == "vector":
            if args.d is None:
                parser.error("simulate --model vector requires --d")
            spec = vector_setting(args.setting, args.d, args.T, seed=args.seed, ar_coef=args.ar_coef, noise=noise)
            panel, truth = simulate_vector(spec)
        else:
            if args.d1 is None or args.d2 is None:
                parser.error("simulate --model matrix requires --d1 and --d2")
            spec = matrix_setting(args.setting, args.d1, args.d2, args.T, seed=args.seed,
                                  ar_coef=args.ar_coef, noise=noise)
            panel, truth = simulate_matrix(spec)
    except FactorStrengthError as exc:
        parser.error(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fio.write_panel(panel, out / "panel.csv", fmt=args.format)
    fio.write_truth(truth, spec, out / "truth.json")
    realized = "; ".join(" ".join(f"{a:.4f}" for a in alpha) for alpha in truth.realized_alpha)
    print(f"wrote {out / 'panel.csv'} (realized strengths: {realized})")
    return 0


def cmd_estimate(args, parser) -> int:
    try:
        panel = fio.read_panel(args.input, fmt=args.input_format)
    except (PanelFormatError, OSError) as exc:
        print(f"error: cannot parse {args.input}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    is_matrix = isinstance(panel, MatrixPanel)
    if (args.model == "matrix") != is_matrix:
        print(f"error: {args.input} holds a {'matrix' if is_matrix else 'vector'} panel", file=sys.stderr)
        return EXIT_PARSE
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if is_matrix:
                if args.r1 is None or args.r2 is None:
                    parser.error("estimate --model matrix requires --r1 and --r2")
                estimator = args.estimator or "iterative_projection"
                cfg = ProjectionConfig(max_iters=args.max_iters, tol=args.tol)
                fit = estimate_matrix(panel, args.r1, args.r2, estimator=estimator, cfg=cfg, demean=args.demean)
                reports, loadings = fit.reports, fit.loadings
                extra = dict(fit.info)
                extra["g1_hat"], extra["g2_hat"] = fit.traces.g1_hat, fit.traces.g2_hat
            else:
                if args.r is None:
                    parser.error("estimate --model vector requires --r")
                estimator = args.estimator or "pca"
                fit = estimate_vector(panel, args.r, estimator=estimator, demean=args.demean)
                reports, loadings, extra = (fit.report,), (fit.loading,), {}
    except NonPositiveDiagonalError as exc:
        print(f"error: degenerate estimate for factor {exc.factor} ({exc.mode}): {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NonPositiveTraceError as exc:
        print(f"error: degenerate estimate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except FactorStrengthError as exc:
        parser.error(str(exc))
    extra["warnings"] = [str(w.message) for w in caught]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    fio.write_report(reports, out / "report.json", estimator=fit.estimator, config=config, extra=extra)
    if is_matrix:
        fio.write_loadings(loadings[0], out / "loadings_mode1.csv", label_name="row")
        fio.write_loadings(loadings[1], out / "loadings_mode2.csv", label_name="column")
    else:
        fio.write_loadings(loadings[0], out / "loadings.csv", label_name="series")
    for rep in reports:
        alphas = " ".join(f"{a:.4f}" for a in rep.alpha_hat)
        print(f"{rep.mode}: alpha_hat = {alphas}")
    return 0


def cmd_montecarlo(args, parser) -> int:
    try:
        config = fio.read_mc_config(args.config)
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FactorStrengthError as exc:
        print(f"error: invalid config {args.config}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    table = run_grid(config, workers=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fio.write_mc_table(table, out, out.with_suffix(".json"), config=config)
    print(f"wrote {out} ({len(table.rows)} rows)")
    if args.reference is None:
        if args.check:
            parser.error("--check needs --reference (a table file or 'builtin')")
        return 0
    try:
        reference = reference_tables() if args.reference == "builtin" else fio.read_mc_table(args.reference)
        report = compare_reference(table, reference, mean_tol=args.mean_tol, sd_factor=args.sd_factor)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot use reference {args.reference}: {exc}", file=sys.stderr)
        return EXIT_PARSE if not args.check else EXIT_CHECK
    for line in report.lines():
        print(line)
    if args.check and not report.passed:
        print(f"reference check failed for {len(report.failures)} of {len(report.verdicts)} rows", file=sys.stderr)
        return EXIT_CHECK
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factorstrength", description="Factor strength estimation for vector "
                                     "and matrix time-series factor models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic panel with known loadings")
    sim.add_argument("--model", choices=("vector", "matrix"), required=True)
    sim.add_argument("--setting", choices=sorted(SETTINGS), default="I")
    sim.add_argument("--d", type=int)
    sim.add_argument("--d1", type=int)
    sim.add_argument("--d2", type=int)
    sim.add_argument("--T", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--delta", type=float, default=2.0, help="signal-to-noise ratio (default 2)")
    sim.add_argument("--noise", choices=("correlated", "iid"), default="correlated")
    sim.add_argument("--cross-rho", type=float, default=0.2)
    sim.add_argument("--serial-phi", type=float, default=0.2)
    sim.add_argument("--ar-coef", type=float, default=0.8)
    sim.add_argument("--format", choices=fio.PANEL_FORMATS, default="long_csv")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="estimate factor strengths of a panel file")
    est.add_argument("--model", choices=("vector", "matrix"), required=True)
    est.add_argument("--r", type=int)
    est.add_argument("--r1", type=int)
    est.add_argument("--r2", type=int)
    est.add_argument("--estimator", choices=("pca", "iterative_projection"))
    est.add_argument("--demean", action="store_true", help="subtract the time mean before estimation")
    est.add_argument("--max-iters", type=int, default=30)
    est.add_argument("--tol", type=float, default=1e-6)
    est.add_argument("--input", required=True)
    est.add_argument("--input-format", choices=fio.PANEL_FORMATS)
    est.add_argument("--out", required=True, help="output directory")
    est.set_defaults(func=cmd_estimate)

    mc = sub.add_parser("montecarlo", help="run a Monte Carlo grid and optionally check it against a reference")
    mc.add_argument("--config", required=True)
    mc.add_argument("--out", required=True, help="CSV path; a .json twin is written next to it")
    mc.add_argument("--reference", help="reference table (CSV or JSON), or 'builtin' for the published tables")
    mc.add_argument("--check", action="store_true", help="exit 5 if any row misses the reference")
    mc.add_argument("--mean-tol", type=float, default=0.03)
    mc.add_argument("--sd-factor", type=float, default=2.0)
    mc.add_argument("--threads", type=int, help="worker count (default: $FSL_THREADS or 1)")
    mc.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
