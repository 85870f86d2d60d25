"""Least-squares regression, prewindowed AR fitting, predictive least squares
and prediction-error ARMA estimation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.signal import lfilter

from .errors import DegeneracyError, DegenerateInputError, SingularDesignError
from .model_core import CoeffModel, _values

# ---------------------------------------------------------------------------
# Linear regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares fit of y on the rows ``gamma`` of a regressor matrix.

    ``tau`` is the residual mean square and ``R`` the mean square of the
    fitted values, (1/N) beta' X X' beta.
    """

    gamma: tuple[int, ...]
    beta: np.ndarray
    tau: float
    R: float
    N: int

    @property
    def k(self) -> int:
        return len(self.gamma)


def fit_regression(X, y, gamma=None) -> RegressionFit:
    """Fit y_t = sum_{i in gamma} beta_i x_{it} + e_t by QR least squares.

    ``X`` is k x N (one regressor per row).  Raises
    :class:`SingularDesignError` if the selected rows are linearly dependent.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if gamma is None:
        gamma = range(X.shape[0])
    gamma = tuple(int(i) for i in gamma)
    N = len(y)
    if X.shape[1] != N:
        raise ValueError("X must have one column per observation")
    if len(gamma) > N:
        raise SingularDesignError("more regressors than observations")
    A = X[list(gamma)].T
    Q, Rf = np.linalg.qr(A)
    diag = np.abs(np.diag(Rf))
    if len(diag) and diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise SingularDesignError("regressor rows are linearly dependent")
    beta = solve_triangular(Rf, Q.T @ y) if len(gamma) else np.zeros(0)
    fitted = A @ beta
    resid = y - fitted
    return RegressionFit(gamma, beta, float(resid @ resid) / N, float(fitted @ fitted) / N, N)


# ---------------------------------------------------------------------------
# Prewindowed AR fits
# ---------------------------------------------------------------------------


def lag_matrix(y: np.ndarray, n_max: int) -> np.ndarray:
    """Rows phi_t = (y_{t-1}, ..., y_{t-n_max}) with zeros before the start."""
    N = len(y)
    Phi = np.zeros((N, n_max))
    for i in range(1, n_max + 1):
        Phi[i:, i - 1] = y[:N - i]
    return Phi


@dataclass(frozen=True)
class ArFitLadder:
    """Prewindowed least-squares AR fits for orders 0..n_max.

    ``coeffs[n]`` holds a_1..a_n and ``sigma2[n]`` the residual mean square;
    ``errors[n]`` (optional) are the in-sample residuals of order n.
    """

    coeffs: list[np.ndarray]
    sigma2: np.ndarray
    errors: np.ndarray | None = None

    @property
    def n_max(self) -> int:
        return len(self.sigma2) - 1


def fit_ar_ladder(series, n_max: int, keep_errors: bool = False) -> ArFitLadder:
    """All prewindowed AR fits up to ``n_max`` from one orthogonalization.

    The lag columns are orthogonalized in order, so the residual of order n
    is the residual of order n-1 minus its projection on the n-th
    orthogonalized lag (the forward-error update of a lattice filter).
    """
    y = _values(series)
    N = len(y)
    if N <= n_max:
        raise ValueError("need more observations than the largest order")
    if not np.any(y):
        raise DegenerateInputError("series is identically zero")
    Phi = lag_matrix(y, n_max)
    Q, R = np.linalg.qr(Phi)
    scale = math.sqrt(float(y @ y))
    if n_max and np.abs(np.diag(R)).min() <= 1e-12 * scale:
        raise SingularDesignError("lagged regressors are linearly dependent")
    z = Q.T @ y
    f = y.copy()
    sigma2 = np.empty(n_max + 1)
    sigma2[0] = float(f @ f) / N
    errs = [f.copy()] if keep_errors else None
    coeffs = [np.zeros(0)]
    for n in range(1, n_max + 1):
        f = f - z[n - 1] * Q[:, n - 1]
        sigma2[n] = float(f @ f) / N
        coeffs.append(-solve_triangular(R[:n, :n], z[:n]))
        if keep_errors:
            errs.append(f.copy())
    return ArFitLadder(coeffs, sigma2, np.array(errs) if keep_errors else None)


# ---------------------------------------------------------------------------
# Predictive least squares
# ---------------------------------------------------------------------------


def default_t0(n_max: int) -> int:
    return n_max + 10


def pls_prediction_errors(series, n_max: int, t0: int | None = None) -> np.ndarray:
    """Honest one-step prediction errors, shape (n_max, N).

    Row n-1 holds, for t = t0..N (1-based), y_t minus its prediction by the
    order-n prewindowed least-squares fit to y_1..y_{t-1}.  Entries before
    ``t0`` are NaN.
    """
    y = _values(series)
    N = len(y)
    t0 = default_t0(n_max) if t0 is None else t0
    if t0 <= n_max:
        raise ValueError("t0 must exceed n_max")
    if not np.any(y):
        raise DegenerateInputError("series is identically zero")
    out = np.full((n_max, N), np.nan)
    if t0 > N:
        return out
    Phi = lag_matrix(y, n_max)
    # running sums over s <= t-1 of phi_s phi_s' and phi_s y_s
    C = np.cumsum(Phi[:, :, None] * Phi[:, None, :], axis=0)
    c = np.cumsum(Phi * y[:, None], axis=0)
    idx = np.arange(t0 - 1, N)          # 0-based positions being predicted
    for n in range(1, n_max + 1):
        A = C[idx - 1, :n, :n]
        b = c[idx - 1, :n]
        try:
            w = np.linalg.solve(A, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            w = np.array([np.linalg.lstsq(Ai, bi, rcond=None)[0] for Ai, bi in zip(A, b)])
        pred = np.einsum("ij,ij->i", Phi[idx, :n], w)
        out[n - 1, idx] = y[idx] - pred
    return out


def pls_errors(series, n_max: int, t0: int | None = None) -> np.ndarray:
    """Accumulated squared honest prediction errors for orders 1..n_max."""
    e = pls_prediction_errors(series, n_max, t0)
    return np.nansum(e * e, axis=1)


# ---------------------------------------------------------------------------
# ARMA prediction-error fitting
# ---------------------------------------------------------------------------

MAX_ITER = 200
MAX_HALVINGS = 30
GRAD_TOL = 1e-10
REL_TOL = 1e-13
BOUNDARY_EPS = 1e-3


def _shift(x: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(x)
    out[k:] = x[:len(x) - k]
    return out


def residual_jacobian(y: np.ndarray, a, b) -> tuple[np.ndarray, np.ndarray]:
    """Prediction errors e and de/d(a, b), shape (N, n + m).

    de_t/da_i = y_{t-i} / B(q),  de_t/db_j = -e_{t-j} / B(q).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    den = np.r_[1.0, b]
    e = lfilter(np.r_[1.0, a], den, y)
    yf = lfilter([1.0], den, y)
    ef = lfilter([1.0], den, e)
    cols = [_shift(yf, i) for i in range(1, len(a) + 1)]
    cols += [-_shift(ef, j) for j in range(1, len(b) + 1)]
    Psi = np.column_stack(cols) if cols else np.zeros((len(y), 0))
    return e, Psi


def arma_cost_and_gradient(series, a, b) -> tuple[float, np.ndarray]:
    """(1/N) sum e_t^2 and its gradient with respect to (a, b)."""
    y = _values(series)
    e, Psi = residual_jacobian(y, a, b)
    N = len(y)
    return float(e @ e) / N, 2.0 * (Psi.T @ e) / N


def _reflect(c: np.ndarray) -> tuple[np.ndarray, bool]:
    """Mirror roots of 1 + c_1 z^-1 + ... outside the unit circle to 1/conj."""
    if len(c) == 0:
        return c, False
    r = np.roots(np.r_[1.0, c])
    mag = np.abs(r)
    if np.all(mag < 1.0):
        return c, False
    r = np.where(mag > 1.0, 1.0 / np.conj(r), r)
    mag = np.abs(r)
    r = np.where(mag >= 1.0, r / mag * (1.0 - 1e-8), r)
    return np.real(np.poly(r))[1:], True


def _max_radius(c) -> float:
    return float(np.abs(np.roots(np.r_[1.0, c])).max()) if len(c) else 0.0


@dataclass(frozen=True)
class ArmaFit:
    """Result of :func:`fit_arma`.

    ``model`` is None when the estimate sits on a near pole-zero
    cancellation; ``sigma2`` is the minimized mean squared prediction error.
    """

    model: CoeffModel | None
    sigma2: float
    init_sigma2: float
    iterations: int
    grad_norm: float
    converged: bool
    projections: int
    boundary: bool
    notes: tuple[str, ...] = field(default=())


def hannan_rissanen(y: np.ndarray, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-stage initial estimate: long AR, then regression on lagged residuals."""
    N = len(y)
    L = max(min(math.ceil(2 * math.sqrt(N)), N // 4), 1)
    ehat = fit_ar_ladder(y, L, keep_errors=True).errors[L]
    X = np.hstack([-lag_matrix(y, n), lag_matrix(ehat, m)])
    theta = np.linalg.lstsq(X, y, rcond=None)[0]
    return theta[:n], theta[n:]


def fit_arma(series, n: int, m: int, *, max_iter: int = MAX_ITER) -> ArmaFit:
    """Minimize (1/N) sum (y_t - yhat_{t|t-1})^2 over stable, invertible (a, b).

    Start from the Hannan-Rissanen estimate, then take damped Gauss-Newton
    steps (step halved until the cost drops).  Roots leaving the unit disc are
    reflected back after each step.
    """
    y = _values(series)
    N = len(y)
    if N < n + m + 2:
        raise ValueError("series too short for this structure")
    if not np.any(y):
        raise DegenerateInputError("series is identically zero")
    if m == 0:
        a = fit_ar_ladder(y, n).coeffs[n] if n else np.zeros(0)
        a, moved = _reflect(a)
        e = lfilter(np.r_[1.0, a], [1.0], y)
        s2 = float(e @ e) / N
        model = CoeffModel(a, (), s2)
        return ArmaFit(model, s2, s2, 0, 0.0, True, int(moved), _max_radius(a) > 1 - BOUNDARY_EPS)

    a, b = hannan_rissanen(y, n, m)
    a, ma = _reflect(a)
    b, mb = _reflect(b)
    projections = int(ma) + int(mb)
    theta = np.r_[a, b]

    def cost(th):
        e = lfilter(np.r_[1.0, th[:n]], np.r_[1.0, th[n:]], y)
        return float(e @ e) / N

    current = cost(theta)
    init_cost = current
    converged = False
    grad_norm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        e, Psi = residual_jacobian(y, theta[:n], theta[n:])
        grad = 2.0 * (Psi.T @ e) / N
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < GRAD_TOL:
            converged = True
            break
        step = -np.linalg.lstsq(Psi, e, rcond=None)[0]
        s = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + s * step
            ca, ra = _reflect(cand[:n])
            cb, rb = _reflect(cand[n:])
            cand = np.r_[ca, cb]
            c = cost(cand)
            if c < current:
                accepted = True
                projections += int(ra) + int(rb)
                break
            s *= 0.5
        if not accepted:
            converged = True
            break
        improvement = current - c
        theta, current = cand, c
        if improvement <= REL_TOL * current:
            converged = True
            break
    a, b = theta[:n], theta[n:]
    notes = () if converged else ("max iterations reached",)
    try:
        model = CoeffModel(a, b, current)
    except DegeneracyError:
        # over-parametrized fits can land on a near pole-zero cancellation;
        # the error variance is still a valid score input
        model = None
        notes += ("near pole-zero cancellation",)
    boundary = max(_max_radius(a), _max_radius(b)) > 1 - BOUNDARY_EPS
    return ArmaFit(model, current, init_cost, it, grad_norm, converged, projections,
                   boundary, notes)
