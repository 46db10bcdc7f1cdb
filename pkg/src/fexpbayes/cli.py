"""Command line entry point: ``fexpbayes {simulate,fit,experiment,validate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 when an experiment
exceeds its replicate-failure threshold (or ``validate`` finds a
counterexample).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .harness import (
    PRESETS,
    ExperimentConfig,
    parse_config,
    preset,
    run_experiment,
    validate_properties,
)
from .posterior import (
    estimate_d,
    estimate_f_h,
    estimate_f_log,
    log_mean_params,
    posterior_prob,
    run_mcmc,
)
from .simulate import SimRequest, read_series_csv, sample, write_series_csv
from .spectral import Fexp, fourier_grid

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _load_config(args) -> ExperimentConfig:
    cfg = preset(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        cfg = parse_config(Path(args.config).read_text(), base=cfg)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None):
        changes["out_dir"] = str(args.out)
    return replace(cfg, **changes) if changes else cfg


def _add_common(p, out_default=None):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    p.add_argument("--seed", type=_seed, help="override the config seed")
    p.add_argument("--out", default=out_default, help="output directory")


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    n = args.n or cfg.n_list[-1]
    reps = args.replicates or cfg.replicates
    x = sample(SimRequest(Fexp(cfg.truth), n, replicates=reps, seed=cfg.seed))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "series.csv"
    write_series_csv(path, x, cfg.seed, cfg.truth_descriptor())
    print(f"wrote {reps} x {n} series to {path}")
    return EXIT_OK


def _read_data(path: str, row: int) -> np.ndarray:
    text = Path(path).read_text()
    if text.startswith("#"):
        arr, _ = read_series_csv(path)
    else:
        arr = np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=1))
        if arr.shape[0] > 1 and arr.shape[1] == 1:
            arr = arr.T
    if not 0 <= row < arr.shape[0]:
        raise UsageError(f"row {row} out of range (file has {arr.shape[0]} series)")
    return arr[row]


def _cmd_fit(args) -> int:
    cfg = _load_config(args)
    x = _read_data(args.data, args.row)
    if args.demean:
        x = x - x.mean()
    scfg = replace(cfg.sampler, seed=cfg.seed)
    s = run_mcmc(x, cfg.prior, scfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s.to_csv(out / "samples.csv")
    grid = fourier_grid(x.size)
    est = estimate_d(s)
    summary = {
        "n": int(x.size),
        "draws": len(s),
        "d_hat": est.value,
        "d_hat_se": est.stderr,
        "ess_d": s.ess_d,
        "k_hist": {str(k): v for k, v in s.k_hist.items()},
        "acceptance": s.acceptance,
        "likelihood_failures": s.failures,
        "log_mean_params": {"d": log_mean_params(s).d,
                            "theta": list(map(float, log_mean_params(s).theta))},
        "prob_d_positive": posterior_prob(s, lambda p: p.d > 0).value,
        "grid": grid.tolist(),
        "f_log": estimate_f_log(s, grid).tolist(),
        "f_h": estimate_f_h(s, grid).tolist(),
    }
    with open(out / "fit.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"d_hat = {est.value:.4f} (se {est.stderr:.4f}), {len(s)} draws -> {out}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    cfg = _load_config(args)
    rep = run_experiment(cfg)
    print(f"{cfg.kind}: {rep.total} rows, {rep.failed} failed -> {cfg.out_dir}")
    if rep.exceeded(cfg.failure_threshold):
        print(f"failure fraction {rep.failure_fraction:.2f} exceeds "
              f"{cfg.failure_threshold:.2f}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _load_config(args)
    cases = cfg.case_count if args.cases is None else args.cases
    rep = validate_properties(cfg.seed, cases)
    print(f"{rep.cases} cases, {rep.checks} checks, {rep.small_h_cases} in the small-h regime, "
          f"{len(rep.counterexamples)} violations")
    for c in rep.counterexamples:
        print(f"  case {c['case']}: {c['check']} fails (lhs={c['lhs']!r}, rhs={c['rhs']!r}) "
              f"for {c['pair']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "validate.json", "w") as fh:
            json.dump({"cases": rep.cases, "checks": rep.checks, "passed": rep.passed,
                       "counterexamples": rep.counterexamples}, fh, indent=2)
            fh.write("\n")
    return EXIT_OK if rep.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fexpbayes",
                     description="Bayesian FEXP spectral estimation for long-memory series.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate series from the configured truth")
    _add_common(p)
    p.add_argument("--n", type=int, help="series length (default: max of n_list)")
    p.add_argument("--replicates", type=int, help="number of series")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="sample the posterior for one series")
    _add_common(p)
    p.add_argument("--data", required=True, help="series CSV (simulate output or plain numbers)")
    p.add_argument("--row", type=int, default=0, help="which series of the file to fit")
    p.add_argument("--demean", action="store_true", help="subtract the sample mean first")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("experiment", help="run a configured experiment")
    _add_common(p)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("validate", help="randomized divergence property suite")
    _add_common(p)
    p.add_argument("--cases", type=int, help="number of random pairs (default: case_count)")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, TypeError, FileNotFoundError) as exc:
        print(f"fexpbayes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
