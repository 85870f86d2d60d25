"""Simulation studies comparing order-selection criteria.

Three studies are available:

1. polynomial regression, degree 3 true, degrees 0..10 fitted;
2. AR(n), n in {1, 2, 3}, with random poles near the unit circle;
3. three fixed ARMA models scored over {(n, m): n, m >= 1, n + m <= 6}.

Each study is an ``outer x inner`` grid of runs.  Every run draws its
random numbers from ``SeedSequence(seed, spawn_key=(example, case, outer,
inner))``, so results do not depend on how the grid is split across worker
processes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import criteria as crit
from .errors import AdmissibilityError, ConfigurationError, StocOrderError
from .estimators import fit_ar_ladder, fit_arma, fit_regression, pls_prediction_errors
from .model_core import CoeffModel, RootConfig, RootModel, roots_to_coeffs, simulate
from .quasi_mc import IntegralTable

log = logging.getLogger(__name__)

REPORT_HEADER = ["criterion", "N", "true_n", "true_m", "correct", "over", "under",
                 "p_correct", "p_over", "case"]

BURN_IN = 100
POLY_COEFFS = (-1.5, -5.0, -0.5, 1.0)      # x^3 - 0.5 x^2 - 5 x - 1.5, ascending
POLY_TRUE_DEGREE = 3
POLY_MAX_DEGREE = 10
SNR_DB = 10.0
AR_MAX_ORDER = 6
POLE_RANGE = (0.8, 1.0)
ARMA_MODELS = {
    1: CoeffModel([-0.5], [0.8]),
    2: CoeffModel([0.64, 0.7], [0.8]),
    3: CoeffModel([0.3], [0.5]),
}
ARMA_CANDIDATES = tuple((n, m) for n in range(1, 6) for m in range(1, 6) if n + m <= 6)

_DEFAULTS = {
    1: dict(sample_sizes=(25, 30, 40, 50, 60, 70, 80, 90, 100), cases=(3,),
            criteria=("nml", "bic", "kicc")),
    2: dict(sample_sizes=(25, 50, 100, 200), cases=(1, 2, 3),
            criteria=("nml", "bic", "kicc", "pls")),
    3: dict(sample_sizes=(25, 50, 100, 200, 400), cases=(1, 2, 3),
            criteria=("nml", "bic", "kicc")),
}
_ALLOWED = {1: {"nml", "bic", "kicc"}, 2: {"nml", "bic", "kicc", "pls"}, 3: {"nml", "bic", "kicc"}}


@dataclass(frozen=True)
class ExperimentConfig:
    """What to run.

    ``cases`` are the true AR orders (example 2), the model numbers 1-3
    (example 3) or just ``(3,)`` for the polynomial study.  Total runs per
    cell are ``runs_outer * runs_inner``.  ``cache`` points to an integral
    table; None uses the table shipped with the package.
    """

    example: int
    sample_sizes: tuple[int, ...] = ()
    runs_outer: int = 10
    runs_inner: int = 100
    criteria: tuple[str, ...] = ()
    seed: int = 0
    cases: tuple[int, ...] = ()
    nml_variant: str = "printed"
    cache: str | None = None

    def __post_init__(self):
        if self.example not in _DEFAULTS:
            raise ConfigurationError(f"unknown example {self.example}")
        d = _DEFAULTS[self.example]
        for name in ("sample_sizes", "cases", "criteria"):
            val = tuple(getattr(self, name)) or d[name]
            object.__setattr__(self, name, val)
        if self.runs_outer < 1 or self.runs_inner < 1:
            raise ConfigurationError("run counts must be at least 1")
        if any(int(N) != N or N <= 0 for N in self.sample_sizes):
            raise ConfigurationError("sample sizes must be positive integers")
        object.__setattr__(self, "sample_sizes", tuple(sorted({int(N) for N in self.sample_sizes})))
        bad = set(self.criteria) - _ALLOWED[self.example]
        if bad:
            raise ConfigurationError(f"criteria {sorted(bad)} not available for example {self.example}")
        if len(set(self.criteria)) != len(self.criteria):
            raise ConfigurationError("criteria listed twice")
        allowed_cases = {1: {3}, 2: {1, 2, 3}, 3: {1, 2, 3}}[self.example]
        if not set(self.cases) <= allowed_cases:
            raise ConfigurationError(f"cases must be drawn from {sorted(allowed_cases)}")
        if self.nml_variant not in crit.NML_VARIANTS:
            raise ConfigurationError(f"unknown NML variant {self.nml_variant!r}")
        if self.example == 1 and min(self.sample_sizes) <= POLY_MAX_DEGREE + 1:
            raise ConfigurationError("example 1 needs N > 11")
        if self.example == 2 and min(self.sample_sizes) <= AR_MAX_ORDER + 10:
            raise ConfigurationError("example 2 needs N > 16")
        if self.example == 3 and min(self.sample_sizes) < 8:
            raise ConfigurationError("example 3 needs N >= 8")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        for name in ("sample_sizes", "cases", "criteria"):
            d[name] = tuple(d.get(name, ()))
        return cls(**d)


@dataclass(frozen=True)
class CellCounts:
    criterion: str
    N: int
    true_n: int
    true_m: int
    case: str
    correct: int
    over: int
    under: int

    @property
    def runs(self) -> int:
        return self.correct + self.over + self.under

    @property
    def p_correct(self) -> float:
        return self.correct / self.runs if self.runs else math.nan

    @property
    def p_over(self) -> float:
        return self.over / self.runs if self.runs else math.nan


@dataclass
class ExperimentReport:
    config: ExperimentConfig | None
    cells: list[CellCounts] = field(default_factory=list)

    def cell(self, criterion: str, N: int, case: str) -> CellCounts:
        for c in self.cells:
            if (c.criterion, c.N, c.case) == (criterion, N, case):
                return c
        raise KeyError((criterion, N, case))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for c in self.cells:
            w.writerow([c.criterion, c.N, c.true_n, c.true_m, c.correct, c.over, c.under,
                        f"{c.p_correct:.6f}", f"{c.p_over:.6f}", c.case])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Seeding and classification
# ---------------------------------------------------------------------------


def run_seed(seed: int, example: int, case: int, outer: int, inner: int | None = None):
    key = (example, case, outer) if inner is None else (example, case, outer, inner)
    return np.random.SeedSequence(seed, spawn_key=key)


def classify(selected: tuple[int, int], true: tuple[int, int]) -> str:
    """'correct', 'over' (selected structure contains the true one) or 'under'."""
    if selected == true:
        return "correct"
    if selected[0] >= true[0] and selected[1] >= true[1]:
        return "over"
    return "under"


def _argmin(totals: list[float], ks: list[int], ns: list[int]) -> int | None:
    t = np.array(totals, dtype=float)
    if np.isnan(t).all():
        return None
    return crit.select_index(t, np.array(ks), np.array(ns))


# ---------------------------------------------------------------------------
# Example 1: polynomial regression
# ---------------------------------------------------------------------------


def poly_sample(N: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Design points and noisy observations at the configured SNR.

    Noise variance is the empirical mean square of the noiseless values
    divided by 10^(SNR/10).
    """
    x = rng.uniform(-3.0, 3.0, N)
    clean = np.polynomial.polynomial.polyval(x, POLY_COEFFS)
    noise_var = float(np.mean(clean ** 2)) / 10 ** (SNR_DB / 10)
    return x, clean + math.sqrt(noise_var) * rng.standard_normal(N)


def select_polynomial_degree(x, y, criteria, nml_variant="printed") -> dict[str, int]:
    """Selected degree (0..10) per criterion for one sample."""
    N = len(y)
    # rescaling x leaves fits unchanged but keeps the design well conditioned
    X = np.vander(np.asarray(x) / 3.0, POLY_MAX_DEGREE + 1, increasing=True).T
    fits = [fit_regression(X, y, range(d + 1)) for d in range(POLY_MAX_DEGREE + 1)]
    out = {}
    degrees = list(range(POLY_MAX_DEGREE + 1))
    for c in criteria:
        if c == "nml":
            sc = [crit.nml_regression(f, variant=nml_variant) for f in fits]
        elif c == "bic":
            sc = [crit.bic(f.tau, N, d + 1, n=d) for d, f in zip(degrees, fits)]
        else:
            sc = [crit.kicc(f.tau, N, d + 1, n=d) for d, f in zip(degrees, fits)]
        i = _argmin([s.total for s in sc], [s.k for s in sc], degrees)
        out[c] = -1 if i is None else degrees[i]
    return out


def _task_example1(args):
    cfg, N, outer = args
    res = {c: [] for c in cfg.criteria}
    for inner in range(cfg.runs_inner):
        rng = np.random.default_rng(run_seed(cfg.seed, 1, N, outer, inner))
        x, y = poly_sample(N, rng)
        for c, d in select_polynomial_degree(x, y, cfg.criteria, cfg.nml_variant).items():
            res[c].append(((d, 0),))
    return {(c, N, 3): v for c, v in res.items()}


# ---------------------------------------------------------------------------
# Example 2: AR order selection
# ---------------------------------------------------------------------------


def draw_ar_model(n: int, rng: np.random.Generator) -> CoeffModel:
    """Random stable AR(n): pole magnitudes in (0.8, 1), phases in (0, pi).

    Odd orders get one real pole of magnitude in (0.8, 1) and random sign.
    Draws that violate admissibility (e.g. two nearly equal poles) are
    repeated.
    """
    lo, hi = POLE_RANGE
    while True:
        pairs = [(rng.uniform(lo, hi), rng.uniform(0.0, math.pi)) for _ in range(n // 2)]
        reals = []
        if n % 2:
            reals = [rng.choice((-1.0, 1.0)) * rng.uniform(lo, hi)]
        try:
            return roots_to_coeffs(RootModel(real_poles=reals, complex_poles=pairs))
        except AdmissibilityError:
            continue


def ar_integral_logs(table: IntegralTable, max_order: int) -> list[float]:
    return [table.ln_integral(RootConfig.default(n)) for n in range(1, max_order + 1)]


def select_ar_orders(y: np.ndarray, sizes, criteria, ln_integrals=None,
                     max_order: int = AR_MAX_ORDER) -> dict[tuple[str, int], int]:
    """Selected AR order (1..max_order) per (criterion, N) on prefixes of ``y``.

    PLS uses one pass over the longest prefix: an honest prediction at time t
    only sees y_1..y_{t-1}, so totals for shorter prefixes are partial sums.
    """
    orders = list(range(1, max_order + 1))
    out = {}
    pls_cum = None
    if "pls" in criteria:
        e = pls_prediction_errors(y[:max(sizes)], max_order)
        pls_cum = np.cumsum(np.nan_to_num(e * e), axis=1)
    for N in sizes:
        s2 = fit_ar_ladder(y[:N], max_order).sigma2
        for c in criteria:
            if c == "nml":
                sc = [crit.nml_score(s2[n], N, n, 0, ln_integrals[n - 1]) for n in orders]
            elif c == "bic":
                sc = [crit.bic(s2[n], N, n + 1, n=n) for n in orders]
            elif c == "kicc":
                sc = [crit.kicc(s2[n], N, n, n=n) for n in orders]
            else:
                sc = crit.pls(pls_cum[:, N - 1], orders)
            i = _argmin([s.total for s in sc], [s.k for s in sc], orders)
            out[(c, N)] = -1 if i is None else orders[i]
    return out


def _task_example2(args):
    cfg, n, outer, ln_integrals = args
    model = draw_ar_model(n, np.random.default_rng(run_seed(cfg.seed, 2, n, outer)))
    res = {(c, N, n): [] for c in cfg.criteria for N in cfg.sample_sizes}
    total = max(cfg.sample_sizes) + BURN_IN
    for inner in range(cfg.runs_inner):
        y = simulate(model, total, BURN_IN, run_seed(cfg.seed, 2, n, outer, inner)).values
        sel = select_ar_orders(y, cfg.sample_sizes, cfg.criteria, ln_integrals)
        for (c, N), k in sel.items():
            res[(c, N, n)].append(((k, 0),))
    return res


# ---------------------------------------------------------------------------
# Example 3: ARMA structure selection
# ---------------------------------------------------------------------------


def arma_integral_logs(table: IntegralTable, candidates=ARMA_CANDIDATES) -> dict:
    return {nm: table.ln_integral(RootConfig.default(*nm)) for nm in candidates}


def select_arma_structure(y: np.ndarray, criteria, ln_integrals: dict | None,
                          candidates=ARMA_CANDIDATES) -> dict[str, tuple[int, int]]:
    """Selected (n, m) per criterion.  Candidates whose fit fails are skipped."""
    N = len(y)
    s2 = {}
    for n, m in candidates:
        try:
            s2[(n, m)] = fit_arma(y, n, m).sigma2
        except (StocOrderError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("ARMA(%d,%d) fit failed at N=%d: %s", n, m, N, exc)
    cands = [nm for nm in candidates if nm in s2]
    out = {}
    for c in criteria:
        if c == "nml":
            sc = [crit.nml_score(s2[nm], N, *nm, ln_integrals[nm]) for nm in cands]
        elif c == "bic":
            sc = [crit.bic(s2[(n, m)], N, n + m + 1, n=n, m=m) for n, m in cands]
        else:
            sc = [crit.kicc(s2[(n, m)], N, n + m, n=n, m=m) for n, m in cands]
        i = _argmin([s.total for s in sc], [s.k for s in sc], [nm[0] for nm in cands]) if cands else None
        out[c] = (-1, -1) if i is None else cands[i]
    return out


def _task_example3(args):
    cfg, case, outer, ln_integrals = args
    model = ARMA_MODELS[case]
    res = {(c, N, case): [] for c in cfg.criteria for N in cfg.sample_sizes}
    total = max(cfg.sample_sizes) + BURN_IN
    for inner in range(cfg.runs_inner):
        y = simulate(model, total, BURN_IN, run_seed(cfg.seed, 3, case, outer, inner)).values
        for N in cfg.sample_sizes:
            for c, nm in select_arma_structure(y[:N], cfg.criteria, ln_integrals).items():
                res[(c, N, case)].append((nm,))
    return res


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _table(cfg: ExperimentConfig) -> IntegralTable:
    if cfg.cache is None:
        return IntegralTable.bundled()
    return IntegralTable.load(cfg.cache, missing_ok=False)


def _case_truth(example: int, case: int) -> tuple[tuple[int, int], str]:
    if example == 1:
        return (POLY_TRUE_DEGREE, 0), "poly3"
    if example == 2:
        return (case, 0), f"ar{case}"
    model = ARMA_MODELS[case]
    return (model.n, model.m), f"model{case}"


def _tasks(cfg: ExperimentConfig):
    if cfg.example == 1:
        return _task_example1, [(cfg, N, o) for N in cfg.sample_sizes for o in range(cfg.runs_outer)]
    if cfg.example == 2:
        lni = ar_integral_logs(_table(cfg), AR_MAX_ORDER) if "nml" in cfg.criteria else None
        return _task_example2, [(cfg, n, o, lni) for n in cfg.cases for o in range(cfg.runs_outer)]
    lni = arma_integral_logs(_table(cfg)) if "nml" in cfg.criteria else None
    return _task_example3, [(cfg, c, o, lni) for c in cfg.cases for o in range(cfg.runs_outer)]


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run every cell of ``cfg``; the result does not depend on ``jobs``."""
    fn, tasks = _tasks(cfg)
    jobs = max(1, min(int(jobs), len(tasks)))
    if jobs == 1:
        results = [fn(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, tasks))
    counts: dict[tuple, dict[str, int]] = {}
    for res in results:
        for key, picks in res.items():
            c = counts.setdefault(key, {"correct": 0, "over": 0, "under": 0})
            truth = _case_truth(cfg.example, key[2])[0]
            for (sel,) in picks:
                c[classify(tuple(sel), truth)] += 1
    report = ExperimentReport(cfg)
    for case in cfg.cases:
        truth, label = _case_truth(cfg.example, case)
        for N in cfg.sample_sizes:
            for c in cfg.criteria:
                k = counts.get((c, N, case), {"correct": 0, "over": 0, "under": 0})
                report.cells.append(CellCounts(c, N, truth[0], truth[1], label,
                                               k["correct"], k["over"], k["under"]))
    return report


def run_example1(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    if cfg.example != 1:
        raise ConfigurationError("config is not for example 1")
    return run_experiment(cfg, jobs)


def run_example2(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    if cfg.example != 2:
        raise ConfigurationError("config is not for example 2")
    return run_experiment(cfg, jobs)


def run_example3(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    if cfg.example != 3:
        raise ConfigurationError("config is not for example 3")
    return run_experiment(cfg, jobs)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def emit_report(report: ExperimentReport, path) -> Path:
    """Write the CSV to ``path`` and the replay config next to it (``.json``)."""
    path = Path(path)
    side = sidecar_path(path)
    if side == path:
        raise ConfigurationError("report path must not end in .json")
    path.write_text(report.to_csv(), encoding="utf-8")
    payload = {"format": 1, "config": report.config.to_json() if report.config else None}
    side.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return side


def load_config(sidecar) -> ExperimentConfig:
    payload = json.loads(Path(sidecar).read_text(encoding="utf-8"))
    if payload.get("config") is None:
        raise ConfigurationError("sidecar holds no experiment config")
    return ExperimentConfig.from_json(payload["config"])


def replay(sidecar, jobs: int = 1) -> ExperimentReport:
    """Re-run the experiment described by a JSON sidecar."""
    return run_experiment(load_config(sidecar), jobs)
