"""Command line entry point: ``latticewave run|validate|list-experiments``."""
from __future__ import annotations

import argparse
import importlib.util
import json
import os
import platform
import sys
import traceback
from importlib import metadata

from .config import EXPERIMENTS, PARAM_DEFAULTS, THRESHOLD_DEFAULTS, ConfigError, ExperimentConfig, load_config

__all__ = ["main", "run_experiment", "EXIT_PASS", "EXIT_FAIL", "EXIT_CONFIG", "EXIT_RUNTIME"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

_DESCRIPTIONS = {
    "simulate": "integrate the chain and export snapshots, energy and gap bounds",
    "riemann_compare": "compare chain snapshots with the entropy Riemann fan",
    "linear_convergence": "H1 error against the exact fan for quadratic W across N",
    "nonlinear_oscillation": "post-shock oscillation, Young histograms and energy gap",
    "light_cone": "perturbation outside the cone and the Gronwall bound",
    "blowup": "delta-gap decay and the reversed growth construction",
    "shock_obstruction": "jump speed, convexity residual and dispersion roots",
    "identity_check": "weak-form integral identity under refinement",
}


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("latticewave", "numpy", "scipy", "jsonschema", "matplotlib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def run_experiment(cfg: ExperimentConfig, output_dir: str | None = None, figures: bool = False) -> int:
    """Run one configured experiment, write artifacts, return the exit code."""
    from .analysis import _jsonable
    from .experiments import execute

    outdir = output_dir or cfg.output_dir
    res = execute(cfg, outdir)
    res.report.summary = {
        "experiment": cfg.experiment,
        "N_list": cfg.N_list,
        "T": cfg.T,
        "dt": cfg.dt,
        "config_hash": cfg.config_hash,
        "pass": res.passed,
    }
    res.report.write_csv(os.path.join(outdir, "summary.csv"))
    res.report.write_json(os.path.join(outdir, "summary.json"))
    verdict = {
        "experiment": cfg.experiment,
        "pass": res.passed,
        "assertions": [a.as_dict() for a in res.assertions],
    }
    with open(os.path.join(outdir, "verdict.json"), "w") as fh:
        json.dump(_jsonable(verdict), fh, indent=2)
        fh.write("\n")
    if figures:
        from .figures import render

        res.files.extend(render(res.plots, outdir))
    manifest = {
        "config_hash": cfg.config_hash,
        "config": cfg.raw,
        "versions": _versions(),
        "derived": {**cfg.derived, **res.derived, "params": cfg.params, "thresholds": cfg.thresholds},
        "files": sorted(res.files + ["summary.csv", "summary.json", "verdict.json"]),
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for a in res.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'} {a.name} value={_short(a.value)} threshold={_short(a.threshold)}")
    print(f"{cfg.experiment}: {'PASS' if res.passed else 'FAIL'} ({outdir})")
    return EXIT_PASS if res.passed else EXIT_FAIL


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latticewave", description="Atomic chain versus p-system experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--output-dir", help="override output_dir from the config")
    r.add_argument("--workers", type=int, help="override the worker count")
    r.add_argument("--figures", action="store_true", help="also render PNG figures (matplotlib)")
    v = sub.add_parser("validate", help="validate a config and print the resolved defaults")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="list experiment kinds with default thresholds")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-experiments":
        for e in EXPERIMENTS:
            print(f"{e}: {_DESCRIPTIONS[e]}")
            print(f"    params: {json.dumps(PARAM_DEFAULTS[e], sort_keys=True)}")
            print(f"    thresholds: {json.dumps(THRESHOLD_DEFAULTS[e], sort_keys=True)}")
        return EXIT_PASS
    env = os.environ.get("LATTICEWAVE_WORKERS")
    try:
        cfg = load_config(args.config, env_workers=env)
        if args.command == "run" and args.workers:
            cfg.workers = args.workers
            cfg.derived["workers"] = args.workers
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        from .analysis import _jsonable

        print(json.dumps(_jsonable({"experiment": cfg.experiment, "N_list": cfg.N_list, "T": cfg.T,
                                    "dt": cfg.dt, "workers": cfg.workers, "params": cfg.params,
                                    "thresholds": cfg.thresholds}), indent=2, sort_keys=True))
        print("valid")
        return EXIT_PASS
    if args.figures and importlib.util.find_spec("matplotlib") is None:
        print("config error: --figures needs matplotlib (pip install 'latticewave[figures]')", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_experiment(cfg, args.output_dir, figures=args.figures)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # integrator or solver failure
        print(f"runtime error in {cfg.experiment}: {type(e).__name__}: {e}", file=sys.stderr)
        if os.environ.get("LATTICEWAVE_DEBUG"):
            traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
