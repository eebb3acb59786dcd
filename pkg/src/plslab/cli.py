"""Command-line surface: ``fit``, ``simulate``, ``verify``, ``constants``.

Exit codes are uniform across subcommands: 0 success, 1 runtime failure,
2 validation failure (bad arguments, config, or dataset), 3 verification
failure (``verify`` only, when empirical coverage falls below the audit
threshold).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .bounds import EVENT_NAMES, dense_proof_constant, sparse_proof_constant
from .errors import ConfigError, ConvergenceError, DatasetError, InvalidInputError
from .linalg import gram, spectral_radius, trace
from .pls import fit_pls
from .simulate import DESIGN_KINDS, ESTIMATORS, DesignSpec, _target_gram, run_replicates
from .single import threshold_constants, threshold_scalars
from .sparse import (
    RATIO_BOUND_SPARSE,
    SIGNAL_ASSEMBLY_CONSTANT,
    alt_estimator,
    mu_level,
    signal_factor,
    spls_estimator,
    support_sets,
)

CONSTANTS_HEADER = "name,value,mode"


def _float_list(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float)]


def cmd_fit(args) -> int:
    estimator = args.estimator
    needs_noise = estimator in ("thresholded", "spls", "alt")
    if needs_noise:
        if args.tau is None:
            raise InvalidInputError(f"--tau is required for estimator {estimator}")
        if args.delta is None:
            raise InvalidInputError(f"--delta is required for estimator {estimator}")

    x, y = dataio.load_dataset(args.data, standardize=args.standardize)
    n, p = x.shape
    sig = gram(x)
    sigma_hat = x.T @ y / n

    diagnostics: dict = {}
    if estimator == "pls_k":
        fit = fit_pls(x, y, args.k)
        beta = fit.beta
        diagnostics = {
            "k_requested": fit.k_requested,
            "k_effective": fit.k_effective,
            "early_stopped": fit.early_stopped,
            "degenerate": fit.degenerate,
            "truncated": fit.truncated,
        }
    elif estimator == "single":
        from .single import single_component_estimator

        beta = single_component_estimator(sigma_hat, sig)
        quad = float(sigma_hat @ (sig @ sigma_hat))
        diagnostics = {
            "quad_form": quad,
            "intensity": float(sigma_hat @ sigma_hat) / quad if quad > 0.0 else 0.0,
        }
    elif estimator == "thresholded":
        from .single import thresholded_estimator

        beta, diag = thresholded_estimator(x, y, args.tau, args.delta, args.r)
        diagnostics = {
            "quad_form": diag.quad_form,
            "intensity": diag.intensity,
            "test_threshold": diag.test_threshold,
            "test_passed": diag.test_passed,
        }
    else:
        fit_fn = spls_estimator if estimator == "spls" else alt_estimator
        fit = fit_fn(x, y, args.tau, args.delta, mu=args.mu)
        j0, j01, j02 = support_sets(sigma_hat, fit.mu)
        beta = fit.beta
        diagnostics = {
            "mu": fit.mu,
            "lambda_ratio": fit.lambda_ratio,
            "support_hat": list(fit.support_hat),
            "support_above_half_mu": list(j01),
            "support_above_two_mu": list(j02),
            "degenerate": fit.degenerate,
        }

    record = {
        "command": "fit",
        "data": str(args.data),
        "n": n,
        "p": p,
        "estimator": estimator,
        "standardize": bool(args.standardize),
        "params": {
            k: v
            for k, v in (
                ("k", args.k if estimator == "pls_k" else None),
                ("tau", args.tau),
                ("delta", args.delta),
                ("r", args.r if estimator == "thresholded" else None),
                ("mu", args.mu),
            )
            if v is not None
        },
        "beta_hat": _float_list(beta),
        "diagnostics": diagnostics,
    }
    dataio.write_result_json(record, args.out)

    print(f"estimator: {estimator}  (n={n}, p={p})")
    print("beta_hat: " + " ".join(repr(float(b)) for b in beta))
    for key, value in diagnostics.items():
        print(f"{key}: {value}")
    print(f"result written to {args.out}")
    return 0


def _prepare_run(args):
    config_path = Path(args.config)
    rc = dataio.parse_config(config_path)
    cfg = dataio.run_config_to_sim(rc, base_dir=config_path.parent)
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
    elif rc.out_dir is not None:
        out_dir = Path(rc.out_dir)
        if not out_dir.is_absolute():
            out_dir = config_path.parent / out_dir
    else:
        out_dir = Path.cwd()
    return rc, cfg, out_dir


def _write_outputs(summary, rc, out_dir, plot: bool) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    replicates_path = out_dir / "replicates.csv"
    summary_path = out_dir / "summary.json"
    dataio.write_replicates_csv(summary, replicates_path)
    dataio.write_summary_json(summary, summary_path, rc)
    written += [str(replicates_path), str(summary_path)]
    if plot:
        from .plots import render_report_figures

        written += render_report_figures(summary, rc.delta, out_dir)
    return written


def cmd_simulate(args) -> int:
    rc, cfg, out_dir = _prepare_run(args)
    summary = run_replicates(cfg)
    plot = rc.plot and not args.no_plot
    written = _write_outputs(summary, rc, out_dir, plot)
    print(f"theorem: {summary.theorem}  constant_mode: {summary.constant_mode}")
    print(f"replicates: {summary.replicates}  covered: {summary.covered_count}")
    print(f"coverage: {summary.coverage!r}")
    print(f"mean_loss: {summary.mean_loss!r}  median_loss: {summary.median_loss!r}")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    rc, cfg, out_dir = _prepare_run(args)
    if rc.theorem is None or rc.theorem == "none":
        raise ConfigError("verify requires an explicit theorem tag", key="theorem")
    summary = run_replicates(cfg)
    threshold = 1.0 - rc.delta - 3.0 * math.sqrt(rc.delta * (1.0 - rc.delta) / rc.replicates)

    rows = [
        ("theorem", summary.theorem),
        ("constant_mode", summary.constant_mode),
        ("constant", repr(summary.constant)),
        ("replicates", summary.replicates),
        ("covered", summary.covered_count),
        ("coverage", repr(summary.coverage)),
        ("threshold", repr(threshold)),
        ("delta", repr(rc.delta)),
        ("rhs", repr(summary.rhs)),
        ("bias", repr(summary.bias)),
        ("variance", repr(summary.variance)),
        ("signal_condition", summary.signal_condition),
        ("error_count", summary.error_count),
    ]
    rows += [(f"rate_{name}", repr(summary.deviation_event_rates[name])) for name in EVENT_NAMES]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")

    if args.out_dir is not None or rc.out_dir is not None:
        for path in _write_outputs(summary, rc, out_dir, rc.plot and not args.no_plot):
            print(f"wrote {path}")

    if summary.coverage >= threshold:
        print("verdict: PASS")
        return 0
    print("verdict: FAIL (coverage below audit threshold)")
    return 3


def _constants_gram(args) -> np.ndarray:
    values = tuple(float(v) for v in args.diag.split(",")) if args.diag else None
    spec = DesignSpec(
        kind=args.design,
        n=args.n,
        p=args.p,
        rho=args.rho,
        eigenvalue=args.eigenvalue,
        values=values,
    )
    rng = np.random.default_rng(args.seed)
    return _target_gram(spec, rng)


def cmd_constants(args) -> int:
    delta, r, tau, n, p = args.delta, args.r, args.tau, args.n, args.p
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    sig = _constants_gram(args)
    x, g, t, h, c = threshold_scalars(delta, r)
    dense = threshold_constants(delta, r, tau, n, sig)

    rows: list[tuple[str, float, str]] = [
        ("delta", delta, "input"),
        ("r", r, "input"),
        ("tau", tau, "input"),
        ("n", float(n), "input"),
        ("p", float(p), "input"),
        ("gram_trace", trace(sig), "input"),
        ("gram_spectral_radius", spectral_radius(sig), "input"),
        ("log_level", x, "shared"),
        ("tail_factor", g, "shared"),
        ("test_factor", t, "shared"),
        ("strong_factor", h, "shared"),
        ("ratio_bound", c, "shared"),
        ("noise_floor", dense.noise_floor, "shared"),
        ("sparse_log_level", math.log(10.0 / delta), "shared"),
        ("mu_spls", mu_level(tau, n, p, delta, "spls"), "shared"),
        ("mu_alt", mu_level(tau, n, p, delta, "alt"), "shared"),
        ("F", RATIO_BOUND_SPARSE, "shared"),
        ("C0", SIGNAL_ASSEMBLY_CONSTANT, "shared"),
        ("bound_constant_thresholded", dense_proof_constant(delta, r), "proof"),
    ]
    if delta < 0.5:
        rows += [
            ("signal_factor", signal_factor(delta, p, "theorem"), "theorem"),
            ("signal_factor", signal_factor(delta, p, "proof"), "proof"),
            ("bound_constant_sparse", sparse_proof_constant(delta, p), "proof"),
        ]

    print(CONSTANTS_HEADER)
    for name, value, mode in rows:
        print(f"{name},{value!r},{mode}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plslab",
        description="PLS-family estimators with finite-sample prediction bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit an estimator on a CSV dataset")
    fit.add_argument("--data", required=True, help="dataset CSV with header x1..xp,y")
    fit.add_argument("--estimator", required=True, choices=ESTIMATORS)
    fit.add_argument("--k", type=int, default=1, help="components for pls_k")
    fit.add_argument("--tau", type=float, default=None, help="noise level")
    fit.add_argument("--delta", type=float, default=None, help="confidence level")
    fit.add_argument("--r", type=float, default=0.5, help="test split parameter")
    fit.add_argument("--mu", type=float, default=None, help="threshold override")
    fit.add_argument("--standardize", action="store_true", help="scale columns to unit Gram diagonal")
    fit.add_argument("--out", default="fit_result.json", help="result JSON path")
    fit.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="run a Monte Carlo coverage batch")
    sim.add_argument("--config", required=True, help="run config file")
    sim.add_argument("--out-dir", default=None, help="output directory override")
    sim.add_argument("--no-plot", action="store_true", help="skip report figures")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="audit a coverage guarantee at 3 binomial sigma")
    ver.add_argument("--config", required=True, help="run config file (theorem tag required)")
    ver.add_argument("--out-dir", default=None, help="also write simulate outputs here")
    ver.add_argument("--no-plot", action="store_true", help="skip report figures")
    ver.set_defaults(func=cmd_verify)

    con = sub.add_parser("constants", help="print every named bound constant as CSV")
    con.add_argument("--delta", type=float, required=True)
    con.add_argument("--r", type=float, default=0.5)
    con.add_argument("--tau", type=float, default=1.0)
    con.add_argument("--n", type=int, default=100)
    con.add_argument("--p", type=int, default=20)
    con.add_argument("--design", default="identity", choices=[k for k in DESIGN_KINDS if k != "custom"])
    con.add_argument("--rho", type=float, default=None, help="ar1 correlation")
    con.add_argument("--eigenvalue", type=float, default=None, help="rank_one eigenvalue")
    con.add_argument("--diag", default=None, help="comma-separated diagonal values")
    con.add_argument("--seed", type=int, default=0, help="seed for randomized design parts")
    con.set_defaults(func=cmd_constants)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
