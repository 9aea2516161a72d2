"""Command-line entry point ``kcbo``.

Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 on an
admissibility failure, 3 when blown-up replicas dominate the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .admissibility import Admissibility, CenteredDecay, PoC, Stability, check_assumptions
from .core import RngStream
from .diagnostics import report_columns
from .dynamics import run_trajectory
from .errors import AdmissibilityError, BlowupError, NoAdmissibleParams
from .experiments import (
    DEFAULT_PROFILES,
    ExperimentConfig,
    ExperimentResult,
    run_appendixB_contrast,
    run_concentration,
    run_moment_decay,
    run_optimize,
    run_poc_sweep,
    run_stability_sweep,
    run_wm_mc_rate,
    write_outputs,
)

EXIT_OK, EXIT_FAIL, EXIT_ADMISSIBILITY, EXIT_BLOWUP = 0, 1, 2, 3

DRIVERS = {
    "decay": run_moment_decay,
    "poc": run_poc_sweep,
    "stability": run_stability_sweep,
    "wm-rate": run_wm_mc_rate,
    "contrast": run_appendixB_contrast,
    "concentration": run_concentration,
    "optimize": run_optimize,
}

_PROFILE_KINDS = {"adm": Admissibility, "decay": CenteredDecay, "poc": PoC, "stab": Stability}


def parse_profile(text: str):
    """``decay:8`` -> ``CenteredDecay(8)``; likewise ``adm:p``, ``poc:r``, ``stab:q``."""
    kind, _, value = text.partition(":")
    if kind not in _PROFILE_KINDS or not value:
        raise argparse.ArgumentTypeError(f"profile must look like decay:8, poc:4, stab:1 or adm:2; got {text!r}")
    return _PROFILE_KINDS[kind](float(value))


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _emit(payload: dict, text: str, as_json: bool):
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _cmd_check(args) -> int:
    cfg = _load_config(args)
    objective = cfg.objective_spec()
    params = cfg.resolve_params(objective)
    profiles = args.profile or list(DEFAULT_PROFILES)
    report = check_assumptions(params, objective, profiles)
    payload = {"params": params.to_dict(), **report.to_dict()}
    text = f"params: {params.to_dict()}\n{report.format()}"
    _emit(payload, text, args.json)
    return EXIT_OK if report.passed else EXIT_ADMISSIBILITY


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    objective = cfg.objective_spec()
    params = cfg.resolve_params(objective)
    ens = cfg.init.ensemble(cfg.J, cfg.dim, RngStream(cfg.seed, 0))
    ps = cfg.ps
    rows = []
    final = run_trajectory(
        ens,
        params,
        objective,
        cfg.T,
        RngStream(cfg.seed, 1),
        observer=lambda rep: rows.append(rep.row(ps)),
        record_stride=cfg.record_stride,
        ps=ps,
    )
    result = ExperimentResult(
        "simulate",
        report_columns(ps),
        rows,
        {"config": cfg.to_dict(), "params": params, "final_time": final.t, "final_mean_X": final.X.mean(axis=0).tolist()},
        {},
        {"total": 1, "used": 1, "excluded": 0},
    )
    return _finish(result, args)


def _finish(result: ExperimentResult, args) -> int:
    out = Path(args.out)
    write_outputs(result, out)
    payload = result.to_json()
    lines = [f"{result.name}: {'PASS' if result.passed else 'FAIL'}"]
    lines += [f"  {name:<24} {'PASS' if ok else 'FAIL'}" for name, ok in result.verdicts.items()]
    lines.append(f"  outputs in {out}")
    _emit(payload, "\n".join(lines), args.json)
    if result.blowup_dominated:
        return EXIT_BLOWUP
    return EXIT_OK if result.passed else EXIT_FAIL


def _cmd_experiment(args) -> int:
    cfg = _load_config(args)
    return _finish(DRIVERS[args.command](cfg), args)


def _cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    out = Path(args.out)
    src = Path(args.input) if args.input else out / "series.csv"
    with open(src, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) if v else np.nan for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    x_name = header[0]
    group = "J" if "J" in header[1:] and x_name == "t" else None
    written = []
    for j, name in enumerate(header):
        if name in (x_name, group) or np.all(np.isnan(arr[:, j])):
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        keys = np.unique(arr[:, header.index(group)]) if group else [None]
        for key in keys:
            sel = arr[:, header.index(group)] == key if group else slice(None)
            y = arr[sel, j]
            label = f"J={key:g}" if group else None
            ax.plot(arr[sel, 0], y, label=label)
        if np.all(arr[:, j][~np.isnan(arr[:, j])] > 0):
            ax.set_yscale("log")
        if x_name == "J":
            ax.set_xscale("log")
        ax.set_xlabel(x_name)
        ax.set_ylabel(name)
        if group:
            ax.legend()
        fig.tight_layout()
        path = out / f"{name}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(str(path))
    _emit({"written": written}, "\n".join(written), args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kcbo", description="Kinetic consensus-based optimization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default="kcbo-out", help="output directory")
        p.add_argument("--json", action="store_true", help="print JSON instead of text")
        return p

    check = common(sub.add_parser("check", help="evaluate constants and assumption clauses"))
    check.add_argument(
        "--profile", action="append", type=parse_profile, help="decay:p, adm:p, poc:r or stab:q (repeatable)"
    )
    check.set_defaults(func=_cmd_check)
    common(sub.add_parser("simulate", help="one trajectory with per-record diagnostics")).set_defaults(func=_cmd_simulate)
    helps = {
        "decay": "centered-moment decay rates",
        "poc": "propagation-of-chaos exponent in J",
        "stability": "stability control and remainder",
        "wm-rate": "Monte Carlo rate of the weighted mean",
        "contrast": "shifted versus unshifted functional",
        "concentration": "tail frequency of large excursions",
        "optimize": "minimize the objective",
    }
    for name, text in helps.items():
        common(sub.add_parser(name, help=text)).set_defaults(func=_cmd_experiment)
    plot = common(sub.add_parser("plot", help="SVG plots of a series.csv"))
    plot.add_argument("--input", help="series.csv to plot (default: <out>/series.csv)")
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AdmissibilityError, NoAdmissibleParams) as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except BlowupError as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
