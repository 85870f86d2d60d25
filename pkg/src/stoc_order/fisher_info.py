"""Asymptotic Fisher information of ARMA models.

Two parametrizations are covered:

* roots: real poles/zeros and (magnitude, phase) pairs for conjugate pairs,
  plus the noise variance;
* AR coefficients, where the information is the Toeplitz covariance matrix
  of y_t / sigma.

For a pole/zero coordinate v the derivative of the prediction error is a
causal filter of past innovations, de_t/dtheta_v = sum_p d_{v,p} e_{t-p}, and
the information entry is J_{u,v} = sum_p d_{u,p} d_{v,p}.  Each series d_v is
a sum of at most two complex geometric sequences alpha * x^(p-1), so the
infinite sums have the closed form sum alpha_j beta_k / (1 - x_j y_k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model_core import CoeffModel, RootConfig, RootModel

_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class FisherMatrix:
    """Symmetric information matrix with a label per coordinate."""

    matrix: np.ndarray
    labels: tuple[str, ...]

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def det(self) -> float:
        return float(np.linalg.det(self.matrix)) if self.k else 1.0

    def to_csv(self, fmt: str = "%.12g") -> str:
        rows = [",".join(["", *self.labels])]
        for label, row in zip(self.labels, self.matrix):
            rows.append(",".join([label, *(fmt % v for v in row)]))
        return "\n".join(rows) + "\n"


def sign_vector(root_model: RootModel) -> np.ndarray:
    """S_u = -1 on pole coordinates and +1 on zero coordinates."""
    return root_model.config.signs()


def coordinate_labels(config: RootConfig) -> list[str]:
    labels = []
    counters: dict[str, int] = {}
    for i, kind in enumerate(config.kinds()):
        side = "pole" if i < config.n else "zero"
        name = f"{side}_{kind}"
        counters[name] = counters.get(name, 0) + 1
        labels.append(f"{name}{counters[name]}")
    return labels


# ---------------------------------------------------------------------------
# Derivative series
# ---------------------------------------------------------------------------


def deriv_series_coeffs(root_model: RootModel, v: int, p_max: int) -> np.ndarray:
    """d_{v,1..p_max} for coordinate ``v`` (zero-based, noise variance excluded).

    real root:  S_v theta_v^(p-1)
    magnitude:  2 S_v cos(phi)                                         (p = 1)
                2 S_v (r^p sin(p phi) cos(phi) - r^(p-1) sin((p-1) phi) r)
                  / (r sin(phi))                                       (p >= 2)
    phase:      -2 S_v r^p sin(p phi)
    """
    config = root_model.config
    theta = root_model.theta
    kind = config.kinds()[v]
    s = config.signs()[v]
    p = np.arange(1, p_max + 1, dtype=float)
    if kind == "real":
        return s * theta[v] ** (p - 1)
    if kind == "mag":
        r, phi = theta[v], theta[v + 1]
        d = 2 * s * (r ** p * np.sin(p * phi) * math.cos(phi)
                     - r ** (p - 1) * np.sin((p - 1) * phi) * r) / (r * math.sin(phi))
        d[0] = 2 * s * math.cos(phi)
        return d
    r, phi = theta[v - 1], theta[v]
    return -2 * s * r ** p * np.sin(p * phi)


def _modes_batch(theta: np.ndarray, config: RootConfig) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-mode representation d_{v,p} = sum_j alpha_vj x_vj^(p-1).

    ``theta`` has shape (B, d); returns complex arrays of shape (B, d, 2).
    """
    B, d = theta.shape
    alpha = np.zeros((B, d, 2), dtype=complex)
    x = np.zeros((B, d, 2), dtype=complex)
    kinds = config.kinds()
    signs = config.signs()
    for v, kind in enumerate(kinds):
        s = signs[v]
        if kind == "real":
            alpha[:, v, 0] = s
            x[:, v, 0] = theta[:, v]
        elif kind == "mag":
            rot = np.exp(1j * theta[:, v + 1])
            z = theta[:, v] * rot
            # 2 S Re(e^{i phi} z^{p-1})
            alpha[:, v, 0] = s * rot
            alpha[:, v, 1] = s * np.conj(rot)
            x[:, v, 0] = z
            x[:, v, 1] = np.conj(z)
            # -2 S Im(z^p) for the phase coordinate that follows
            alpha[:, v + 1, 0] = 1j * s * z
            alpha[:, v + 1, 1] = -1j * s * np.conj(z)
            x[:, v + 1, 0] = z
            x[:, v + 1, 1] = np.conj(z)
    return alpha, x


def fim_batch(theta: np.ndarray, config: RootConfig) -> np.ndarray:
    """Pole/zero block of J for a batch of points, shape (B, d, d)."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    alpha, x = _modes_batch(theta, config)
    num = alpha[:, :, :, None, None] * alpha[:, None, None, :, :]
    den = 1.0 - x[:, :, :, None, None] * x[:, None, None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        J = (num / den).sum(axis=(2, 4)).real
    return 0.5 * (J + np.swapaxes(J, 1, 2))


def _mode_entry(alpha, x, u, v) -> float:
    total = 0j
    for j in range(2):
        for k in range(2):
            total += alpha[u, j] * alpha[v, k] / (1.0 - x[u, j] * x[v, k])
    return total.real


def _fill_root_block(J, theta, kinds, S, alpha, x) -> None:
    d = len(kinds)
    for u in range(d):
        for v in range(u, d):
            ku, kv = kinds[u], kinds[v]
            if ku != "real" and kv == "real":
                ru, rv = v, u
            else:
                ru, rv = u, v
            kr, ko = kinds[ru], kinds[rv]
            if kr == "real" and ko == "real":
                val = S[ru] * S[rv] / (1.0 - theta[ru] * theta[rv])
            elif kr == "real" and ko == "mag":
                t, r, phi = theta[ru], theta[rv], theta[rv + 1]
                den = 1.0 - 2.0 * t * r * math.cos(phi) + t * t * r * r
                val = 2.0 * S[ru] * S[rv] * (math.cos(phi) - t * r) / den
            elif kr == "real" and ko == "phase":
                t, r, phi = theta[ru], theta[rv - 1], theta[rv]
                den = 1.0 - 2.0 * t * r * math.cos(phi) + t * t * r * r
                val = -2.0 * S[ru] * S[rv] * r * math.sin(phi) / den
            else:
                val = _mode_entry(alpha, x, u, v)
            J[u, v] = J[v, u] = val


def fim_root(root_model: RootModel, include_sigma: bool = True) -> FisherMatrix:
    """Asymptotic Fisher information in the root parametrization.

    Entries between a real root and anything else use the explicit closed
    forms; entries among magnitude/phase coordinates use the mode sums.
    """
    config = root_model.config
    theta = root_model.theta
    kinds = config.kinds()
    S = config.signs()
    d = config.dim
    alpha, x = (a[0] for a in _modes_batch(theta[None, :], config))
    J = np.zeros((d, d))
    with np.errstate(divide="ignore", invalid="ignore"):
        _fill_root_block(J, theta, kinds, S, alpha, x)
    labels = coordinate_labels(config)
    if include_sigma:
        J = np.pad(J, ((0, 1), (0, 1)))
        J[d, d] = 1.0 / (2.0 * root_model.sigma2 ** 2)
        labels.append("sigma2")
    if not np.all(np.isfinite(J)):
        raise DomainError("information matrix is not finite at this point")
    return FisherMatrix(J, tuple(labels))


# ---------------------------------------------------------------------------
# Coefficient parametrization
# ---------------------------------------------------------------------------


def ar_autocovariances(a, sigma2: float = 1.0, lags: int | None = None) -> np.ndarray:
    """Autocovariances r_0..r_lags of the AR process A(q) y = e.

    Solves the Yule-Walker system r_k + sum_i a_i r_{|k-i|} = sigma2 delta_k,
    k = 0..n, exactly, then extends with the AR recursion.
    """
    a = np.asarray(a, dtype=float)
    n = len(a)
    lags = n if lags is None else lags
    c = np.r_[1.0, a]
    M = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        for i in range(n + 1):
            M[k, abs(k - i)] += c[i]
    rhs = np.zeros(n + 1)
    rhs[0] = sigma2
    r = list(np.linalg.solve(M, rhs))
    for k in range(n + 1, lags + 1):
        r.append(-sum(a[i - 1] * r[k - i] for i in range(1, n + 1)))
    return np.array(r[: lags + 1])


def fim_ar_coeff(coeff_model: CoeffModel) -> FisherMatrix:
    """Information for (a_1..a_n, sigma2): blockdiag(R_zz, 1/(2 sigma^4))."""
    if coeff_model.m:
        raise ValueError("fim_ar_coeff needs a pure AR model")
    n = coeff_model.n
    r = ar_autocovariances(coeff_model.a, 1.0, max(n - 1, 0))
    J = np.zeros((n + 1, n + 1))
    idx = np.arange(n)
    J[:n, :n] = r[np.abs(idx[:, None] - idx[None, :])] if n else 0.0
    J[n, n] = 1.0 / (2.0 * coeff_model.sigma2 ** 2)
    return FisherMatrix(J, tuple([f"a{i + 1}" for i in range(n)] + ["sigma2"]))


def _factor_derivs(reals, pairs) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-coordinate (factor, d factor / d coordinate) polynomial pairs."""
    factors, derivs = [], []
    for g in reals:
        factors.append(np.array([1.0, -g]))
        derivs.append([np.array([0.0, -1.0])])
    for r, phi in pairs:
        factors.append(np.array([1.0, -2 * r * math.cos(phi), r * r]))
        derivs.append([np.array([0.0, -2 * math.cos(phi), 2 * r]),
                       np.array([0.0, 2 * r * math.sin(phi), 0.0])])
    return factors, derivs


def _poly_jacobian(reals, pairs) -> np.ndarray:
    factors, derivs = _factor_derivs(reals, pairs)
    deg = sum(len(f) - 1 for f in factors)
    cols = []
    for i, dlist in enumerate(derivs):
        rest = np.array([1.0])
        for j, f in enumerate(factors):
            if j != i:
                rest = np.convolve(rest, f)
        for df in dlist:
            cols.append(np.convolve(rest, df)[1:])
    return np.array(cols).T if cols else np.zeros((deg, 0))


def root_jacobian(root_model: RootModel) -> np.ndarray:
    """d(a_1..a_n, b_1..b_m) / d(theta) in the root parametrization.

    Each coordinate only touches its own factor of the product form, so the
    column is (d factor / d theta) convolved with the remaining factors.
    """
    n, m = root_model.n, root_model.m
    Ja = _poly_jacobian(root_model.real_poles, root_model.complex_poles)
    Jb = _poly_jacobian(root_model.real_zeros, root_model.complex_zeros)
    out = np.zeros((n + m, n + m))
    out[:n, :n] = Ja
    out[n:, n:] = Jb
    return out


# ---------------------------------------------------------------------------
# Integrand
# ---------------------------------------------------------------------------


def _sqrt_det_from_matrices(J: np.ndarray) -> np.ndarray:
    """sqrt(det J) per matrix; nan if invalid, inf on overflow."""
    B, d, _ = J.shape
    out = np.full(B, np.nan)
    if d == 0:
        out[:] = 1.0
        return out
    finite = np.all(np.isfinite(J), axis=(1, 2))
    if not finite.any():
        return out
    w = np.linalg.eigvalsh(J[finite])
    top = np.max(np.abs(w), axis=1)
    lo = w.min(axis=1)
    # tiny negative eigenvalues are rounding on a degenerate (det ~ 0) point
    degenerate = lo <= 1e-12 * top
    bad = lo < -1e-8 * top
    with np.errstate(divide="ignore"):
        logdet = np.sum(np.log(np.clip(w, 1e-300, None)), axis=1)
    vals = np.where(degenerate, 0.0, np.exp(np.minimum(0.5 * logdet, _LOG_MAX)))
    vals = np.where(0.5 * logdet >= _LOG_MAX, np.inf, vals)
    vals = np.where(bad, np.nan, vals)
    out[finite] = vals
    return out


def sqrt_det_batch(theta: np.ndarray, config: RootConfig) -> np.ndarray:
    """|J(theta)|^(1/2) for a batch of points, noise variance excluded."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    return _sqrt_det_from_matrices(fim_batch(theta, config))


def sqrt_det_fim(root_model: RootModel) -> float:
    """Integrand |J(theta)|^(1/2) over the pole/zero coordinates.

    Returns ``inf`` if the determinant overflows near the boundary and
    ``nan`` if the matrix has non-finite entries.
    """
    config = root_model.config
    return float(sqrt_det_batch(root_model.theta[None, :], config)[0])
