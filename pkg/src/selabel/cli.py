"""Command-line front end: simulate datasets, estimate from CSV, run Monte Carlo.

Options may come from a JSON config file (``--config``); flags given on the
command line win over config values, and unknown config keys are an error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import pandas as pd

from selabel import simlab
from selabel.io import CsvSchema, load_csv, write_csv

METHOD_KINDS = ("mle", "nls", "matching", "sieve")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selabel",
        description="Selective-labels binary outcome estimators and simulations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON file with option defaults")

    sim = sub.add_parser("simulate", help="generate a dataset CSV")
    common(sim)
    sim.add_argument("--n", type=int)
    sim.add_argument("--p-z", type=int)
    sim.add_argument("--p-x", type=int)
    sim.add_argument("--errors", choices=("normal", "cauchy"))
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", type=Path)

    est = sub.add_parser("estimate", help="estimate coefficients from a CSV")
    common(est)
    est.add_argument("--input", type=Path)
    est.add_argument("--methods", help="comma list from: mle,nls,matching,sieve")
    est.add_argument("--standardize", action="store_true", default=None)
    est.add_argument("--sieve-order", type=int)
    est.add_argument("--out", type=Path, help="report path prefix (.csv/.txt added)")

    mc = sub.add_parser("mc", help="run a Monte Carlo study")
    common(mc)
    mc.add_argument("--n", type=int)
    mc.add_argument("--p-z", type=int)
    mc.add_argument("--p-x", type=int)
    mc.add_argument("--errors", choices=("normal", "cauchy"))
    mc.add_argument("--seed", type=int)
    mc.add_argument("--reps", type=int)
    mc.add_argument("--methods", help="comma list from: mle,nls,matching,sieve")
    mc.add_argument("--threads", type=int, help="worker processes (overrides env)")
    mc.add_argument("--out", type=Path, help="report path prefix (.csv/.txt added)")
    return parser


_DEFAULTS = {
    "simulate": {
        "n": 1000,
        "p_z": 2,
        "p_x": 2,
        "errors": "normal",
        "seed": 0,
        "out": None,
    },
    "estimate": {
        "input": None,
        "methods": "mle,nls,matching,sieve",
        "standardize": False,
        "sieve_order": None,
        "out": None,
    },
    "mc": {
        "n": 1000,
        "p_z": 2,
        "p_x": 2,
        "errors": "normal",
        "seed": 0,
        "reps": 2,
        "methods": "mle,nls,matching,sieve",
        "threads": None,
        "out": None,
    },
}
_PATH_KEYS = ("out", "input", "config")


def _effective_options(args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicit flags, rejecting unknown keys."""
    opts = dict(_DEFAULTS[args.command])
    if args.config is not None:
        loaded = json.loads(Path(args.config).read_text())
        if not isinstance(loaded, dict):
            raise ValueError("config must be a JSON object")
        unknown = sorted(set(loaded) - set(opts))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        opts.update(loaded)
    for key in opts:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            opts[key] = flag_value
    for key in _PATH_KEYS:
        if key in opts and opts[key] is not None:
            opts[key] = Path(opts[key])
    return opts


def _parse_methods(text: str) -> list[str]:
    names = [t.strip() for t in str(text).split(",") if t.strip()]
    bad = [t for t in names if t not in METHOD_KINDS]
    if bad:
        raise ValueError(f"unknown methods: {', '.join(bad)}")
    if not names:
        raise ValueError("at least one method is required")
    return names


def _infer_schema(path: Path) -> CsvSchema:
    """Schema for files following the simulate naming: z0,z1..,x0,x1..,D,Y."""
    header = list(pd.read_csv(path, nrows=0).columns)
    z_free = sorted(
        (c for c in header if re.fullmatch(r"z[1-9]\d*", c)),
        key=lambda c: int(c[1:]),
    )
    x_free = sorted(
        (c for c in header if re.fullmatch(r"x[1-9]\d*", c)),
        key=lambda c: int(c[1:]),
    )
    return CsvSchema(selection_free=tuple(z_free), outcome_free=tuple(x_free))


def _cmd_simulate(opts: dict) -> int:
    if opts["out"] is None:
        raise ValueError("simulate requires --out")
    spec = simlab.DgpSpec(
        n=opts["n"],
        p_z=opts["p_z"],
        p_x=opts["p_x"],
        error_law=opts["errors"],
        seed=opts["seed"],
    )
    write_csv(opts["out"], simlab.generate_dataset(spec))
    print(f"wrote {opts['out']}")
    return 0


def _coefficient_rows(name: str, fit_delta, fit_beta, rho=None):
    rows = []
    for j, v in enumerate(fit_delta):
        rows.append((name, f"delta_{j + 1}", float(v)))
    for j, v in enumerate(fit_beta):
        rows.append((name, f"beta_{j + 1}", float(v)))
    if rho is not None:
        rows.append((name, "rho", float(rho)))
    return rows


def _cmd_estimate(opts: dict) -> int:
    if opts["input"] is None or opts["out"] is None:
        raise ValueError("estimate requires --input and --out")
    names = _parse_methods(opts["methods"])
    dataset = load_csv(opts["input"], _infer_schema(opts["input"]), opts["standardize"])

    from selabel import parametric, stage1, stage2

    gd1 = stage1.GdConfig(tolerance=1e-5, max_iterations=50_000,
                          sieve_order=opts["sieve_order"])
    gd2 = stage1.GdConfig(tolerance=1e-5, max_iterations=50_000,
                          sieve_order=opts["sieve_order"])
    rows, failures = [], []
    first = None
    for name in names:
        try:
            if name == "mle":
                fit = parametric.joint_mle(dataset)
                rows += _coefficient_rows(name, fit.delta, fit.beta, fit.rho)
            elif name == "nls":
                fit = parametric.two_step_nls(dataset)
                rows += _coefficient_rows(name, fit.delta, fit.beta, fit.rho)
            else:
                if first is None:
                    first = stage1.sbgd_first_stage(dataset, gd1)
                if name == "matching":
                    second = stage2.matching_estimate(
                        dataset, first, gd2,
                        stage2.MatchingTermination(max_iterations=2_000),
                    )
                else:
                    second = stage2.sieve_estimate(dataset, first, gd2)
                rows += _coefficient_rows(name, first.delta, second.beta)
        except Exception as exc:  # noqa: BLE001 - report per-method failures
            failures.append((name, repr(exc)))

    csv_lines = ["method,coefficient,estimate"]
    csv_lines += [f"{m},{c},{v:.17g}" for m, c, v in rows]
    csv_lines += [f"{m},ERROR,{msg}" for m, msg in failures]
    Path(str(opts["out"]) + ".csv").write_text("\n".join(csv_lines) + "\n")
    txt_lines = [f"{'method':<10}{'coefficient':<14}{'estimate':>14}"]
    txt_lines += [f"{m:<10}{c:<14}{v:>14.6f}" for m, c, v in rows]
    txt_lines += [f"{m:<10}{'FAILED':<14}  {msg}" for m, msg in failures]
    text = "\n".join(txt_lines) + "\n"
    Path(str(opts["out"]) + ".txt").write_text(text)
    print(text, end="")
    return 1 if failures else 0


def _cmd_mc(opts: dict) -> int:
    names = _parse_methods(opts["methods"])
    spec = simlab.DgpSpec(
        n=opts["n"],
        p_z=opts["p_z"],
        p_x=opts["p_x"],
        error_law=opts["errors"],
        seed=opts["seed"],
    )
    methods = [simlab.EstimatorConfig(kind=name) for name in names]
    report = simlab.run_monte_carlo(
        spec, methods, reps=opts["reps"], workers=opts["threads"]
    )
    text = simlab.report_to_text(report)
    if opts["out"] is not None:
        Path(str(opts["out"]) + ".csv").write_text(simlab.report_to_csv(report))
        Path(str(opts["out"]) + ".txt").write_text(text)
    print(text, end="")
    return 1 if any(m.failed for m in report.methods) else 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = _effective_options(args)
        handler = {
            "simulate": _cmd_simulate,
            "estimate": _cmd_estimate,
            "mc": _cmd_mc,
        }[args.command]
        return handler(opts)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"selabel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
