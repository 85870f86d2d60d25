"""Command-line interface: ``stoc-order <subcommand> ...``.

Exit codes: 0 success, 2 usage or unreadable input, 3 missing or unusable
integral cache, 4 inadmissible model, 5 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import criteria as crit
from .errors import (AdmissibilityError, CacheIOError, ConfigurationError,
                     DegenerateInputError, MissingIntegralError, SingularDesignError)
from .estimators import fit_ar_ladder, fit_arma, pls_errors
from .experiments import ExperimentConfig, emit_report, load_config, run_experiment
from .fisher_info import fim_root, sqrt_det_fim
from .model_core import (CoeffModel, RootConfig, RootModel, coeffs_to_roots, load_model,
                         load_series, roots_to_coeffs, save_series, simulate)
from .quasi_mc import (IntegralEntry, IntegralTable, canonical_config, convergence_delta,
                       default_cache_path, integrate_sqrt_fim)
from .sobol import DEFAULT_DIRECTIONS, DIRECTION_SETS

EXIT_OK, EXIT_USAGE, EXIT_CACHE, EXIT_INADMISSIBLE, EXIT_NUMERIC = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _points(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v != int(v):
        raise argparse.ArgumentTypeError("--points must be a whole number")
    if v < 1000:
        raise argparse.ArgumentTypeError("--points must be at least 1000")
    return int(v)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _cache_path(args) -> tuple[Path, bool]:
    """Resolved cache path and whether the user named it explicitly."""
    if args.cache:
        return Path(args.cache), True
    if os.environ.get("STOC_ORDER_CACHE"):
        return default_cache_path(), True
    return default_cache_path(), False


def _scoring_table(args) -> IntegralTable:
    """Explicit caches are used alone; otherwise the user cache is layered
    over the table shipped with the package (larger M wins)."""
    path, explicit = _cache_path(args)
    if explicit:
        return IntegralTable.load(path, missing_ok=False)
    table = IntegralTable.bundled()
    for e in IntegralTable.load(path, missing_ok=True):
        old = table.get(e.config, use_invariance=False)
        if old is None or e.M >= old.M:
            table.put(e)
    return table


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_integrate(args) -> int:
    try:
        config = RootConfig(args.n, args.m, args.n1, args.m1)
    except AdmissibilityError as exc:
        raise UsageError(str(exc)) from None
    if config.dim == 0:
        raise UsageError("structure has no parameters to integrate over")
    target = canonical_config(config) if args.invariance else config
    path, _ = _cache_path(args)
    table = None
    if not args.no_cache:
        table = IntegralTable.load(path, missing_ok=True)
        hit = table.get(config, min_points=args.points, use_invariance=args.invariance)
        if hit is not None:
            print(f"structure: n={args.n} m={args.m} n1={args.n1} m1={args.m1}")
            print(f"cache hit: {path} (M={hit.M}, {hit.generator_version})")
            print(f"integral: {math.exp(hit.ln_integral):.10g}")
            print(f"ln_integral: {hit.ln_integral:.12g}")
            return EXIT_OK
    t = time.perf_counter()
    est = integrate_sqrt_fim(target, args.points, directions=args.directions, jobs=args.jobs)
    half = args.points // 2
    delta = math.nan
    if half >= 1000:
        est_half = integrate_sqrt_fim(target, half, directions=args.directions, jobs=args.jobs)
        delta = convergence_delta(est_half, est)
    elapsed = time.perf_counter() - t
    print(f"structure: n={args.n} m={args.m} n1={args.n1} m1={args.m1}")
    if target != config:
        print(f"computed as: n={target.n} m=0 n1={target.n1} m1=0")
    print(f"points: {args.points} ({est.generator_version})")
    print(f"integral: {est.value:.10g}")
    print(f"ln_integral: {est.ln_value:.12g}")
    print(f"delta_vs_half: {delta:.6g}")
    print(f"skipped: {est.skipped}")
    print(f"seconds: {elapsed:.2f}")
    if est.flagged:
        print("warning: more than 1% of points skipped", file=sys.stderr)
    if table is not None:
        table.put(IntegralEntry(*target.key, args.points, est.ln_value, est.generator_version,
                                datetime.now(timezone.utc).isoformat(timespec="seconds")))
        table.save(path)
        print(f"cached: {path}")
    return EXIT_OK


def _structure_name(n: int, m: int, arma: bool) -> str:
    return f"ARMA({n},{m})" if arma else f"AR({n})"


def cmd_select(args) -> int:
    try:
        y = load_series(args.input).values
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read series {args.input}: {exc}") from None
    N = len(y)
    if args.arma and args.criterion == "pls":
        raise UsageError("pls is only available for AR order selection")
    table = _scoring_table(args) if args.criterion == "nml" else None
    scores = []
    if args.arma:
        cands = [(n, m) for n in range(1, args.max_order) for m in range(1, args.max_order)
                 if n + m <= args.max_order]
        if not cands:
            raise UsageError("--arma needs --max-order of at least 2")
        for n, m in cands:
            s2 = fit_arma(y, n, m).sigma2
            if args.criterion == "nml":
                scores.append(crit.nml_arma(s2, N, n, m, table, all_configs=args.all_configs))
            elif args.criterion == "bic":
                scores.append(crit.bic(s2, N, n + m + 1, n=n, m=m))
            else:
                scores.append(crit.kicc(s2, N, n + m, n=n, m=m))
    else:
        orders = range(1, args.max_order + 1)
        if args.criterion == "pls":
            scores = crit.pls(pls_errors(y, args.max_order), orders)
        else:
            s2 = fit_ar_ladder(y, args.max_order).sigma2
            for n in orders:
                if args.criterion == "nml":
                    scores.append(crit.nml_ar(s2[n], N, n, table))
                elif args.criterion == "bic":
                    scores.append(crit.bic(s2[n], N, n + 1, n=n))
                else:
                    scores.append(crit.kicc(s2[n], N, n, n=n))
    if args.structure_cost:
        scores = [crit.with_structure_cost(s) for s in scores]
    sys.stdout.write(crit.scores_csv(scores))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        best = crit.select(scores)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"selected: {_structure_name(best.n, best.m, args.arma)}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.replay:
        try:
            cfg = load_config(args.replay)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read sidecar {args.replay}: {exc}") from None
    else:
        if args.example is None:
            raise UsageError("--example or --replay is required")
        cache = args.cache or os.environ.get("STOC_ORDER_CACHE") or None
        cfg = ExperimentConfig(
            example=args.example, sample_sizes=args.sizes or (), runs_outer=args.runs_outer,
            runs_inner=args.runs_inner, criteria=tuple(args.criteria or ()), seed=args.seed,
            cases=args.cases or (), nml_variant=args.nml_variant, cache=cache)
    report = run_experiment(cfg, jobs=args.jobs)
    if args.out:
        side = emit_report(report, args.out)
        print(f"wrote {args.out} and {side}", file=sys.stderr)
    else:
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def _root_model(model) -> RootModel:
    return coeffs_to_roots(model) if isinstance(model, CoeffModel) else model


def _read_model(path):
    try:
        return load_model(path)
    except AdmissibilityError:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from None


def cmd_fisher(args) -> int:
    rm = _root_model(_read_model(args.model))
    J = fim_root(rm, include_sigma=args.include_sigma)
    sys.stdout.write(J.to_csv())
    block = fim_root(rm, include_sigma=False)
    print(f"det: {block.det():.12g}")
    print(f"sqrt_det: {sqrt_det_fim(rm):.12g}")
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        y = load_series(args.input).values
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read series {args.input}: {exc}") from None
    fit = fit_arma(y, args.n, args.m)
    a = fit.model.a if fit.model else ()
    b = fit.model.b if fit.model else ()
    print("a: " + ",".join(f"{v:.10g}" for v in a))
    print("b: " + ",".join(f"{v:.10g}" for v in b))
    print(f"sigma2: {fit.sigma2:.10g}")
    print(f"iterations: {fit.iterations} converged: {fit.converged} boundary: {fit.boundary}")
    for note in fit.notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _read_model(args.model)
    if isinstance(model, RootModel):
        model = roots_to_coeffs(model)
    series = simulate(model, args.length + args.burn_in, args.burn_in, args.seed)
    if args.out:
        save_series(series, args.out)
    else:
        sys.stdout.write("".join(f"{v!r}\n" for v in series.values.tolist()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stoc-order", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def cache_opt(sp):
        sp.add_argument("--cache", help="integral cache file (default: $STOC_ORDER_CACHE "
                                         "or ~/.cache/stoc_order/integrals.json)")

    sp = sub.add_parser("integrate", help="QMC integral of sqrt det J for one structure")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, default=0)
    sp.add_argument("--n1", type=int, default=0, help="number of real poles")
    sp.add_argument("--m1", type=int, default=0, help="number of real zeros")
    sp.add_argument("--points", type=_points, default=10 ** 6)
    sp.add_argument("--directions", choices=sorted(DIRECTION_SETS), default=DEFAULT_DIRECTIONS)
    sp.add_argument("--no-invariance", dest="invariance", action="store_false",
                    help="integrate ARMA structures directly instead of via AR(n+m)")
    sp.add_argument("--no-cache", action="store_true", help="neither read nor write the cache")
    sp.add_argument("--jobs", type=_positive_int, default=1)
    cache_opt(sp)
    sp.set_defaults(func=cmd_integrate)

    sp = sub.add_parser("select", help="choose an AR order or ARMA structure for a series")
    sp.add_argument("--input", required=True, help="text file, one value per line")
    sp.add_argument("--max-order", type=_positive_int, default=6)
    sp.add_argument("--criterion", choices=("nml", "bic", "kicc", "pls"), default="nml")
    sp.add_argument("--arma", action="store_true", help="score ARMA(n, m) with n, m >= 1")
    sp.add_argument("--all-configs", action="store_true",
                    help="NML: sum the integral over every real/complex root split")
    sp.add_argument("--structure-cost", action="store_true",
                    help="add ln k + 2 ln ln k to every score")
    cache_opt(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("experiment", help="run a simulation study")
    sp.add_argument("--example", type=int, choices=(1, 2, 3))
    sp.add_argument("--runs-outer", type=_positive_int, default=10)
    sp.add_argument("--runs-inner", type=_positive_int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sizes", type=_int_list, help="sample sizes, e.g. 25,50,100")
    sp.add_argument("--cases", type=_int_list, help="true AR orders (example 2) or model numbers (example 3)")
    sp.add_argument("--criteria", nargs="+", choices=("nml", "bic", "kicc", "pls"))
    sp.add_argument("--nml-variant", choices=crit.NML_VARIANTS, default="printed")
    sp.add_argument("--replay", help="JSON sidecar of an earlier run")
    sp.add_argument("--out", help="CSV report path (a .json sidecar is written next to it)")
    sp.add_argument("--jobs", type=_positive_int, default=1)
    cache_opt(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("fisher", help="print J(theta) of a model in root coordinates")
    sp.add_argument("--model", required=True, help="JSON model file (coefficients or roots)")
    sp.add_argument("--include-sigma", action="store_true",
                    help="append the noise-variance row and column")
    sp.set_defaults(func=cmd_fisher)

    sp = sub.add_parser("fit", help="prediction-error fit of one ARMA(n, m)")
    sp.add_argument("--input", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, default=0)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("simulate", help="simulate a model from a JSON file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--length", type=_positive_int, default=200)
    sp.add_argument("--burn-in", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MissingIntegralError, CacheIOError) as exc:
        print(f"error: missing integral: {exc}", file=sys.stderr)
        return EXIT_CACHE
    except AdmissibilityError as exc:
        print(f"error: inadmissible model: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularDesignError, DegenerateInputError, FloatingPointError,
            np.linalg.LinAlgError, ValueError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
