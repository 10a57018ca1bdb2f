"""Command-line entry point.

Subcommands: kernel-eval, posdef, markov-test, sample, variation, asym.
Exit codes: 0 success, 2 invalid parameters, 3 numerical failure.  All JSON
artifacts embed the frozen report schema version.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import NumericalError, ParameterError
from .gram import (GramMatrix, MinorQuery, TimeGrid, build_gram, gram_to_csv,
                   lindstrom_minor, psd_check, standard_grid)
from .kernels import Family, ProcessSpec, make_kernel, parse_spec_string
from .markov import asym_coeff_estimate, markov_test, sqrt_diag_profile
from .samplers import (empirical_cov, ensemble_to_csv, sample_spec,
                       save_ensemble, set_max_workers)
from .variation import pvariation_trichotomy, variation_to_csv

SCHEMA_VERSION = "1"


def report_schema_version() -> str:
    """Frozen version string embedded in every emitted JSON report."""
    return SCHEMA_VERSION


def _write_json(path, payload: dict) -> None:
    payload = dict(payload)
    payload["version"] = report_schema_version()
    Path(path).write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "-inf" if obj < 0 else "inf"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _finite_or_str(x):
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def _parse_grid_arg(text: str) -> TimeGrid:
    text = text.strip()
    if text.startswith("geometric:"):
        parts = text[len("geometric:"):].split(",")
        if len(parts) != 3:
            raise ParameterError("grid spec: geometric:start,stop,points")
        return TimeGrid.geometric(float(parts[0]), float(parts[1]), int(parts[2]))
    return TimeGrid(np.array([float(x) for x in text.split(",")], dtype=float))


def _parse_nlist(text: str):
    """Parse '2^10..2^16' or a comma list of powers of two."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo = _parse_pow(lo_s)
        hi = _parse_pow(hi_s)
        k0, k1 = int(math.log2(lo)), int(math.log2(hi))
        return [2**k for k in range(k0, k1 + 1)]
    return [_parse_pow(x) for x in text.split(",")]


def _parse_pow(text: str) -> int:
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return int(base) ** int(exp)
    return int(text)


def _spec_and_grid(args) -> tuple[ProcessSpec, TimeGrid, RunConfig | None]:
    cfg = load_config(args.config) if getattr(args, "config", None) else None
    spec = None
    grid = None
    if cfg is not None:
        spec = cfg.process
        grid = cfg.grid.build()
    spec_arg = getattr(args, "kernel", None) or getattr(args, "spec", None)
    if spec_arg:
        spec = parse_spec_string(spec_arg)
    if getattr(args, "grid", None):
        grid = _parse_grid_arg(args.grid)
    if spec is None:
        raise ParameterError("no process spec given (flag or config [process] block)")
    return spec, grid, cfg


def _cmd_kernel_eval(args) -> int:
    spec, grid, cfg = _spec_and_grid(args)
    if args.budget is not None:
        kernel = make_kernel(spec, tol=args.tol, budget=args.budget)
    else:
        kernel = make_kernel(spec, tol=args.tol)
    if args.s is not None and args.t is not None:
        value = float(kernel(args.s, args.t))
        print(f"kernel-eval {spec.label()} R({args.s:g},{args.t:g}) = {value:.16e}")
        if args.json:
            _write_json(args.json, {"kernel": spec.label(), "s": args.s, "t": args.t, "value": value})
        return 0
    if grid is None:
        grid = standard_grid()
    gram = build_gram(kernel, grid)
    if args.csv:
        Path(args.csv).write_bytes(gram_to_csv(gram).encode())
    print(f"kernel-eval {spec.label()} gram {len(grid)}x{len(grid)} "
          f"max|R| = {np.max(np.abs(gram.entries)):.6e}")
    if args.json:
        _write_json(args.json, {"kernel": spec.label(), "grid": grid.times, "entries": gram.entries})
    return 0


def _cmd_posdef(args) -> int:
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise ParameterError("--alpha and --beta go together")
        grid = _parse_grid_arg(args.grid) if args.grid else standard_grid()
        q = MinorQuery(args.alpha, args.beta, grid)
        t = grid.times
        entries = np.maximum.outer(t, t) ** args.alpha / np.minimum.outer(t, t) ** args.beta
        gram = GramMatrix(grid, entries)
        label = f"power-family:alpha={args.alpha!r},beta={args.beta!r}"
        minor = lindstrom_minor(q)
    else:
        spec, grid, _ = _spec_and_grid(args)
        if grid is None:
            grid = standard_grid()
        gram = build_gram(make_kernel(spec, tol=args.tol), grid)
        label = spec.label()
        minor = None
    report = psd_check(gram, tol=args.psd_tol)
    verdict = "PSD" if report.is_psd else "NotPSD"
    print(f"posdef {label}: {verdict} (min eigenvalue {report.min_eigenvalue_bound:.6e})")
    if args.csv:
        Path(args.csv).write_bytes(gram_to_csv(gram).encode())
    if args.json:
        payload = {
            "kernel": label,
            "verdict": verdict,
            "min_eigenvalue_bound": report.min_eigenvalue_bound,
            "tol": report.tol,
            "witness": report.witness,
            "quadratic_form": report.quadratic_form,
        }
        if minor is not None:
            payload["lindstrom_minor"] = minor
        _write_json(args.json, payload)
    return 0


def _cmd_markov_test(args) -> int:
    spec, grid, _ = _spec_and_grid(args)
    kernel = make_kernel(spec, tol=args.tol)
    report = markov_test(kernel, grid)
    payload = {
        "kernel": report.kernel,
        "verdict": report.verdict,
        "doob": {"max": report.doob_max_residual, "mean": report.doob_mean_residual},
        "fit": {
            "r11": report.fit.r11_hat,
            "c": _finite_or_str(report.fit.c_hat),
            "residual": report.fit.regression_residual,
        },
        "mult_residual": report.mult_residual,
        "factorization": {"residual": report.factorization_residual},
        "thresholds": report.thresholds,
        "note": report.note,
        "seed": "n/a",
    }
    if spec.family in (Family.FBM, Family.SUBFBM, Family.BIFBM, Family.RIEMANN_LIOUVILLE):
        asym = asym_coeff_estimate(spec, np.geomspace(1e3, 1e6, 49), tol=args.tol)
        payload["asym"] = {
            "constant_term": asym.constant_term,
            "coefficient": asym.coefficient,
            "exponent": asym.exponent,
            "predicted_coefficient": asym.predicted_coefficient,
            "predicted_exponent": asym.predicted_exponent,
            "remainder_below_noise": asym.remainder_below_noise,
        }
    profile = sqrt_diag_profile(kernel, np.geomspace(1e4, 1e10, 49))
    payload["sqrt_diag"] = {
        "coefficient": profile.coefficient,
        "exponent": profile.exponent,
        "two_power_flag": profile.two_power_flag,
        "all_zero": profile.all_zero,
    }
    print(f"markov-test {report.kernel}: {report.verdict} "
          f"(doob max {report.doob_max_residual:.3e})")
    if args.json:
        _write_json(args.json, payload)
    return 0


def _cmd_sample(args) -> int:
    spec, grid, cfg = _spec_and_grid(args)
    if grid is None:
        raise ParameterError("sample requires a grid")
    n_paths = args.paths if args.paths is not None else (cfg.mc.n_paths if cfg else None)
    seed = args.seed if args.seed is not None else (cfg.mc.seed if cfg else None)
    inner = args.inner_steps if args.inner_steps is not None else (cfg.mc.inner_steps if cfg else None)
    if n_paths is None or seed is None:
        raise ParameterError("sample requires --paths and --seed (or an [mc] config block with both)")
    ens = sample_spec(spec, grid, int(n_paths), int(seed), scheme=args.scheme, inner_steps=inner)
    emp = empirical_cov(ens) if ens.n_paths >= 2 else None
    print(f"sample {spec.label()} scheme={ens.scheme} paths={ens.n_paths} "
          f"d={len(grid)} seed={ens.seed}")
    if args.out:
        save_ensemble(ens, args.out)
    if args.csv:
        Path(args.csv).write_bytes(ensemble_to_csv(ens).encode())
    if args.json:
        payload = {
            "spec": spec.label(),
            "scheme": ens.scheme,
            "seed": ens.seed,
            "n_paths": ens.n_paths,
            "grid": grid.times,
            "jitter": ens.jitter,
            "inner_steps": ens.inner_steps,
        }
        if emp is not None:
            payload["empirical_cov"] = emp.cov
            payload["empirical_se"] = emp.se
        _write_json(args.json, payload)
    return 0


def _cmd_variation(args) -> int:
    spec, _, cfg = _spec_and_grid(args)
    n_paths = args.paths if args.paths is not None else (cfg.mc.n_paths if cfg else None)
    seed = args.seed if args.seed is not None else (cfg.mc.seed if cfg else None)
    if n_paths is None or seed is None:
        raise ParameterError("variation requires --paths and --seed")
    n_list = _parse_nlist(args.n)
    report = pvariation_trichotomy(spec, args.p, n_list, int(n_paths), int(seed))
    limit = f" limit~{report.limit_value:.6g}" if report.limit_value is not None else ""
    print(f"variation {spec.label()} p={args.p:g}: {report.verdict} "
          f"(slope {report.slope_estimate:+.3f}){limit}")
    if args.csv:
        Path(args.csv).write_bytes(variation_to_csv(report).encode())
    if args.json:
        _write_json(args.json, {
            "spec": spec.label(),
            "p": args.p,
            "n_values": list(report.n_values),
            "mean_sums": report.mean_sums,
            "se_sums": report.se_sums,
            "slope_estimate": report.slope_estimate,
            "verdict": report.verdict,
            "limit_value": report.limit_value,
            "sigmaJ_sq": report.sigmaJ_sq,
            "proven_regime": report.proven_regime,
            "seed": int(seed),
        })
    return 0


def _cmd_asym(args) -> int:
    spec, _, _ = _spec_and_grid(args)
    u = np.geomspace(args.u_min, args.u_max, args.points)
    report = asym_coeff_estimate(spec, u, tol=args.tol)
    coeff = "n/a" if report.coefficient is None else f"{report.coefficient:.6g}"
    expo = "n/a" if report.exponent is None else f"{report.exponent:+.4f}"
    print(f"asym {spec.label()}: constant {report.constant_term:.6g}, "
          f"power {coeff} * u^{expo}")
    if args.json:
        _write_json(args.json, {
            "spec": spec.label(),
            "constant_term": report.constant_term,
            "coefficient": report.coefficient,
            "exponent": report.exponent,
            "predicted_coefficient": report.predicted_coefficient,
            "predicted_exponent": report.predicted_exponent,
            "fit_residual": report.fit_residual,
            "remainder_below_noise": report.remainder_below_noise,
        })
    return 0


def _add_common(p, spec_flag="--kernel"):
    p.add_argument(spec_flag, help="process spec, e.g. canonical:H=0.7,c=-0.9")
    p.add_argument("--config", help="RunConfig file (flags override its blocks)")
    p.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    p.add_argument("--json", help="write a JSON report here")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (results are identical for any value)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssgm",
                                 description="self-similar Gaussian Markov process toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel-eval", help="evaluate a kernel at a point or on a grid")
    _add_common(p)
    p.add_argument("--grid", help="grid spec: geometric:start,stop,points or t1,t2,...")
    p.add_argument("--s", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--budget", type=int, default=None,
                   help="quadrature evaluation budget (default 2^20)")
    p.add_argument("--csv", help="write the Gram matrix as CSV")
    p.set_defaults(fn=_cmd_kernel_eval)

    p = sub.add_parser("posdef", help="positive-semidefiniteness check")
    _add_common(p)
    p.add_argument("--grid", help="grid spec")
    p.add_argument("--alpha", type=float, help="power-family exponent of s v t")
    p.add_argument("--beta", type=float, help="power-family exponent of s ^ t (divides)")
    p.add_argument("--psd-tol", type=float, default=1e-10)
    p.add_argument("--csv", help="write the Gram matrix as CSV")
    p.set_defaults(fn=_cmd_posdef)

    p = sub.add_parser("markov-test", help="Markovianity diagnostics")
    _add_common(p)
    p.add_argument("--grid", help="grid spec (default: 20-point geometric on [0.05, 5])")
    p.set_defaults(fn=_cmd_markov_test)

    p = sub.add_parser("sample", help="draw paths and export them")
    _add_common(p, spec_flag="--spec")
    p.add_argument("--grid", help="grid spec")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scheme", choices=["timechange", "cholesky", "whitenoise", "volterra"])
    p.add_argument("--inner-steps", type=int)
    p.add_argument("--out", help="binary ensemble file (JSON sidecar alongside)")
    p.add_argument("--csv", help="CSV export (small ensembles)")
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("variation", help="p-variation trichotomy estimate")
    _add_common(p, spec_flag="--spec")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--n", required=True, help="dyadic list, e.g. 2^10..2^16")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", help="CSV with columns n, mean_S_n, se_S_n")
    p.set_defaults(fn=_cmd_variation)

    p = sub.add_parser("asym", help="constant + leading power of l(u) at infinity")
    _add_common(p, spec_flag="--spec")
    p.add_argument("--u-min", type=float, default=1e3)
    p.add_argument("--u-max", type=float, default=1e6)
    p.add_argument("--points", type=int, default=49)
    p.set_defaults(fn=_cmd_asym)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else os.environ.get("SSGM_THREADS")
    if threads is not None:
        try:
            set_max_workers(int(threads))
        except ValueError:
            print(f"ssgm: invalid thread count {threads!r}", file=sys.stderr)
            return 2
    try:
        return args.fn(args)
    except ParameterError as exc:
        print(f"ssgm: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"ssgm: numerical failure: {exc}", file=sys.stderr)
        return 3
    finally:
        set_max_workers(1)


if __name__ == "__main__":
    raise SystemExit(main())
