"""Order-selection criteria and argmin selection.

All code lengths are in nats.  Every score is split into a fit term, a
parameter term and an integral term that sum to ``total``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import digamma

from .estimators import RegressionFit
from .model_core import RootConfig
from .quasi_mc import IntegralTable

CSV_HEADER = "criterion,n,m,fit_term,param_term,integral_term,total"


@dataclass(frozen=True)
class CriterionScore:
    """Score of one candidate structure under one criterion.

    ``n``/``m`` are the AR/MA orders (for regression ``n`` is the number of
    regressors and ``m`` is 0); ``k`` counts the free parameters and drives
    tie-breaking.  ``total`` is NaN when the score is undefined and ``-inf``
    for a perfect fit.
    """

    criterion: str
    n: int
    m: int
    k: int
    fit_term: float
    param_term: float
    integral_term: float = 0.0

    @property
    def total(self) -> float:
        return self.fit_term + self.param_term + self.integral_term

    @property
    def structure(self) -> tuple[int, int]:
        return (self.n, self.m)

    @property
    def defined(self) -> bool:
        return not math.isnan(self.total)

    def csv_row(self) -> str:
        vals = (self.fit_term, self.param_term, self.integral_term, self.total)
        return ",".join([self.criterion, str(self.n), str(self.m), *(repr(float(v)) for v in vals)])


def _undefined(criterion, n, m, k) -> CriterionScore:
    return CriterionScore(criterion, n, m, k, math.nan, 0.0, 0.0)


# ---------------------------------------------------------------------------
# Regression with a constant regressor matrix
# ---------------------------------------------------------------------------

NML_VARIANTS = ("printed", "halved")


def nml_regression(fit: RegressionFit, N: int | None = None, k: int | None = None,
                   variant: str = "printed") -> CriterionScore:
    """(N - k) ln tau + k ln R + (N - k - 1) ln(1/(N - k)) - (k - 1) ln k.

    ``variant="halved"`` returns half of that expression, i.e. the code
    length itself; both rank candidates identically.
    """
    N = fit.N if N is None else N
    k = fit.k if k is None else k
    if variant not in NML_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if not N > k + 1:
        return _undefined("nml", k, 0, k)
    if fit.R <= 0:
        return _undefined("nml", k, 0, k)
    if fit.tau <= 0:
        return CriterionScore("nml", k, 0, k, -math.inf, 0.0)
    c = 0.5 if variant == "halved" else 1.0
    fit_term = c * (N - k) * math.log(fit.tau)
    param = c * (k * math.log(fit.R) - (N - k - 1) * math.log(N - k) - (k - 1) * math.log(k))
    return CriterionScore("nml", k, 0, k, fit_term, param)


# ---------------------------------------------------------------------------
# AR / ARMA stochastic complexity
# ---------------------------------------------------------------------------


def nml_score(sigma2_hat: float, N: int, n: int, m: int, ln_integral: float) -> CriterionScore:
    """Stochastic complexity of ARMA(n, m) given the ln integral directly."""
    k = n + m + 1
    if sigma2_hat <= 0:
        return CriterionScore("nml", n, m, k, -math.inf, 0.0)
    fit_term = 0.5 * N * math.log(2 * math.pi * math.e * sigma2_hat)
    param = 0.5 * k * math.log(N / (2 * math.pi))
    return CriterionScore("nml", n, m, k, fit_term, param, ln_integral)


def nml_ar(sigma2_hat: float, N: int, n: int, table: IntegralTable) -> CriterionScore:
    """(N/2) ln(2 pi e s2) + ((n+1)/2) ln(N/(2 pi)) + ln integral.

    The integral is taken for the default root configuration of order n
    (ln pi exactly for n = 1).  A missing table entry raises
    :class:`~stoc_order.errors.MissingIntegralError`.
    """
    return nml_score(sigma2_hat, N, n, 0, table.ln_integral(RootConfig.default(n)))


def nml_arma(sigma2_hat: float, N: int, n: int, m: int, table: IntegralTable,
             all_configs: bool = False) -> CriterionScore:
    """ARMA(n, m) stochastic complexity with k = n + m + 1.

    ``all_configs`` sums the integral over every real/complex root split
    instead of using the default configuration.
    """
    if all_configs:
        ln_int = table.ln_integral_sum(n, m)
    else:
        ln_int = table.ln_integral(RootConfig.default(n, m))
    return nml_score(sigma2_hat, N, n, m, ln_int)


def structure_code_length(k: int) -> float:
    """ln k + 2 ln ln k, for optionally charging the structure itself."""
    if k < 3:
        return 0.0
    return math.log(k) + 2 * math.log(math.log(k))


def with_structure_cost(score: CriterionScore) -> CriterionScore:
    """Copy of ``score`` with :func:`structure_code_length` added to the parameter term."""
    return replace(score, param_term=score.param_term + structure_code_length(score.k))


# ---------------------------------------------------------------------------
# Competing criteria
# ---------------------------------------------------------------------------


def bic(sigma2_hat: float | None, N: int, k: int, *, loglik: float | None = None,
        n: int | None = None, m: int = 0) -> CriterionScore:
    """(N/2) ln s2 + (k/2) ln N, or -ln L + (k/2) ln N when ``loglik`` is given.

    The two forms differ by a constant, (N/2)(ln 2 pi + 1), for Gaussian fits.
    """
    n = k if n is None else n
    if loglik is not None:
        fit_term = -loglik
    elif sigma2_hat <= 0:
        return CriterionScore("bic", n, m, k, -math.inf, 0.0)
    else:
        fit_term = 0.5 * N * math.log(sigma2_hat)
    return CriterionScore("bic", n, m, k, fit_term, 0.5 * k * math.log(N))


def kicc_correction(N: int, k: int) -> float:
    """Exact bias correction of KIC for Gaussian linear regression.

    N(N + k)/(N - k - 2) - N psi((N - k)/2) + N ln(N/2) - N, where k counts
    the regression coefficients.  It tends to 3(k + 1) as N grows.
    """
    if N - k - 2 <= 0:
        return math.nan
    return (N * (N + k) / (N - k - 2) - N * float(digamma((N - k) / 2))
            + N * math.log(N / 2) - N)


def kicc(sigma2_hat: float, N: int, k: int, *, n: int | None = None, m: int = 0) -> CriterionScore:
    """Bias-corrected Kullback information criterion, N ln s2 + correction.

    ``k`` is the number of mean parameters (regressors, or n + m for
    ARMA), excluding the noise variance.  Adding N(ln 2 pi + 1) gives
    -2 ln L + correction.  NaN when N - k - 2 <= 0.
    """
    n = k if n is None else n
    corr = kicc_correction(N, k)
    if math.isnan(corr):
        return _undefined("kicc", n, m, k)
    if sigma2_hat <= 0:
        return CriterionScore("kicc", n, m, k, -math.inf, corr)
    return CriterionScore("kicc", n, m, k, N * math.log(sigma2_hat), corr)


def kic(sigma2_hat: float, N: int, k: int, *, n: int | None = None, m: int = 0) -> CriterionScore:
    """Uncorrected KIC: N ln s2 + 3(k + 1)."""
    n = k if n is None else n
    if sigma2_hat <= 0:
        return CriterionScore("kic", n, m, k, -math.inf, 3.0 * (k + 1))
    return CriterionScore("kic", n, m, k, N * math.log(sigma2_hat), 3.0 * (k + 1))


def pls(pls_error_totals: Sequence[float], orders: Iterable[int] | None = None) -> list[CriterionScore]:
    """Accumulated honest squared prediction errors as scores, one per order."""
    totals = list(pls_error_totals)
    orders = range(1, len(totals) + 1) if orders is None else list(orders)
    return [CriterionScore("pls", n, 0, n, float(t), 0.0) for n, t in zip(orders, totals)]


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------


def select(scores: Sequence[CriterionScore]) -> CriterionScore:
    """Candidate with the smallest total.

    Exact ties go to the smaller ``k``, then the smaller ``n``.  Candidates
    with undefined scores are dropped with a warning.
    """
    if not scores:
        raise ValueError("no candidates to select from")
    if len({s.criterion for s in scores}) > 1:
        raise ValueError("scores come from different criteria")
    usable = [s for s in scores if s.defined]
    dropped = len(scores) - len(usable)
    if dropped:
        warnings.warn(f"{dropped} candidate(s) with undefined {scores[0].criterion} score ignored",
                      RuntimeWarning, stacklevel=2)
    if not usable:
        raise ValueError("every candidate score is undefined")
    return min(usable, key=lambda s: (s.total, s.k, s.n, s.m))


def select_index(totals: np.ndarray, ks: np.ndarray, ns: np.ndarray) -> int:
    """Same rule as :func:`select` on plain arrays; NaN entries are skipped."""
    totals = np.asarray(totals, dtype=float)
    ok = ~np.isnan(totals)
    if not ok.any():
        raise ValueError("every candidate score is undefined")
    order = np.lexsort((ns, ks, np.where(ok, totals, np.inf)))
    return int(order[0])


def scores_csv(scores: Iterable[CriterionScore]) -> str:
    return "\n".join([CSV_HEADER, *(s.csv_row() for s in scores)]) + "\n"
