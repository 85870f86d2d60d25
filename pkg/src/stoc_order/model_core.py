"""ARMA model representations, root/coefficient conversion, simulation and
the prediction-error filter.

The model is

    y_t + a_1 y_{t-1} + ... + a_n y_{t-n} = e_t + b_1 e_{t-1} + ... + b_m e_{t-m}

with e_t white Gaussian noise of variance ``sigma2``.  Equivalently
A(q) y_t = B(q) e_t with A(q) = prod(1 - g_i q^-1) and B(q) = prod(1 - h_j q^-1);
the g_i (poles) and h_j (zeros) must lie strictly inside the unit disc.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import AdmissibilityError, DegeneracyError

#: Two roots closer than this are treated as repeated.
EPS_REPEAT = 1e-6
#: A pole and a zero closer than this are treated as cancelling.
EPS_CANCEL = 1e-6


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


def _roots_inside(coeffs: Sequence[float]) -> np.ndarray:
    """Roots (in z) of 1 + c_1 z^-1 + ... + c_k z^-k."""
    if len(coeffs) == 0:
        return np.zeros(0, dtype=complex)
    return np.roots(np.r_[1.0, np.asarray(coeffs, dtype=float)]).astype(complex)


def _check_distinct(roots: np.ndarray, eps: float, what: str) -> None:
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) < eps:
                raise DegeneracyError(f"repeated {what} near {roots[i]:.6g}")


def _check_no_cancellation(poles: np.ndarray, zeros: np.ndarray, eps: float) -> None:
    for g in poles:
        for h in zeros:
            if abs(g - h) < eps:
                raise DegeneracyError(f"pole-zero cancellation near {g:.6g}")


@dataclass(frozen=True)
class CoeffModel:
    """ARMA(n, m) in coefficient form.

    Construction validates stability, minimum phase, absence of pole-zero
    cancellation and ``sigma2 > 0``; violations raise
    :class:`~stoc_order.errors.AdmissibilityError`.
    """

    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()
    sigma2: float = 1.0

    def __post_init__(self):
        a = tuple(float(v) for v in np.ravel(np.asarray(self.a, dtype=float)))
        b = tuple(float(v) for v in np.ravel(np.asarray(self.b, dtype=float)))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if not all(math.isfinite(v) for v in a + b):
            raise AdmissibilityError("coefficients must be finite")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise AdmissibilityError("sigma2 must be positive")
        poles, zeros = self.poles(), self.zeros()
        if np.any(np.abs(poles) >= 1.0):
            raise AdmissibilityError("A(q) has a root on or outside the unit circle")
        if np.any(np.abs(zeros) >= 1.0):
            raise AdmissibilityError("B(q) has a root on or outside the unit circle")
        _check_no_cancellation(poles, zeros, EPS_CANCEL)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def k(self) -> int:
        """Number of free parameters including the noise variance."""
        return self.n + self.m + 1

    def poles(self) -> np.ndarray:
        return _roots_inside(self.a)

    def zeros(self) -> np.ndarray:
        return _roots_inside(self.b)

    @property
    def ar_poly(self) -> np.ndarray:
        return np.r_[1.0, self.a]

    @property
    def ma_poly(self) -> np.ndarray:
        return np.r_[1.0, self.b]

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "a": list(self.a), "b": list(self.b),
                "sigma2": self.sigma2}


@dataclass(frozen=True)
class RootConfig:
    """Root-type configuration of an ARMA(n, m) structure.

    ``n1`` poles and ``m1`` zeros are real; the rest come in conjugate pairs.
    The integration dimension is ``n + m`` (noise variance excluded).
    """

    n: int
    m: int = 0
    n1: int = 0
    m1: int = 0

    def __post_init__(self):
        n, m, n1, m1 = self.n, self.m, self.n1, self.m1
        if min(n, m, n1, m1) < 0 or n1 > n or m1 > m:
            raise AdmissibilityError(f"invalid root configuration {self}")
        if (n - n1) % 2 or (m - m1) % 2:
            raise AdmissibilityError("n - n1 and m - m1 must be even")

    @classmethod
    def default(cls, n: int, m: int = 0) -> "RootConfig":
        """One real root when the order is odd, otherwise all complex.

        Applied to poles and zeros separately.
        """
        return cls(n, m, n % 2, m % 2)

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.n, self.m, self.n1, self.m1)

    def kinds(self) -> list[str]:
        """Per-coordinate kind in parameter order.

        One of ``"real"``, ``"mag"``, ``"phase"`` for each of the n + m
        coordinates: real poles, pole (magnitude, phase) pairs, real zeros,
        zero (magnitude, phase) pairs.
        """
        out = ["real"] * self.n1 + ["mag", "phase"] * ((self.n - self.n1) // 2)
        out += ["real"] * self.m1 + ["mag", "phase"] * ((self.m - self.m1) // 2)
        return out

    def signs(self) -> np.ndarray:
        """-1 for pole coordinates, +1 for zero coordinates."""
        return np.r_[-np.ones(self.n), np.ones(self.m)]

    def index_sets(self) -> dict[str, list[int]]:
        """Zero-based index sets of the pole/zero coordinates."""
        n, m, n1, m1 = self.key
        return {
            "P_rho": list(range(0, n1)),
            "P_mu": list(range(n1, n, 2)),
            "P_phi": list(range(n1 + 1, n, 2)),
            "Z_rho": list(range(n, n + m1)),
            "Z_mu": list(range(n + m1, n + m, 2)),
            "Z_phi": list(range(n + m1 + 1, n + m, 2)),
        }

    @classmethod
    def configs_for(cls, n: int, m: int = 0) -> list["RootConfig"]:
        """Every real/complex split of an ARMA(n, m) structure."""
        return [cls(n, m, n1, m1)
                for n1 in range(n % 2, n + 1, 2)
                for m1 in range(m % 2, m + 1, 2)]

    def all_configs(self) -> list["RootConfig"]:
        """Every configuration with the same (n, m)."""
        return self.configs_for(self.n, self.m)


def _as_pairs(values) -> tuple[tuple[float, float], ...]:
    return tuple((float(r), float(p)) for r, p in values)


@dataclass(frozen=True)
class RootModel:
    """ARMA model in root parametrization.

    Complex roots are stored once per conjugate pair as (magnitude, phase)
    with phase in (0, pi).  The flattened parameter vector is

        (real poles, |g|, phi_g, ..., real zeros, |h|, phi_h, ..., sigma2)
    """

    real_poles: tuple[float, ...] = ()
    complex_poles: tuple[tuple[float, float], ...] = ()
    real_zeros: tuple[float, ...] = ()
    complex_zeros: tuple[tuple[float, float], ...] = ()
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "real_poles", tuple(float(v) for v in self.real_poles))
        object.__setattr__(self, "real_zeros", tuple(float(v) for v in self.real_zeros))
        object.__setattr__(self, "complex_poles", _as_pairs(self.complex_poles))
        object.__setattr__(self, "complex_zeros", _as_pairs(self.complex_zeros))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise AdmissibilityError("sigma2 must be positive")
        for v in self.real_poles + self.real_zeros:
            if not -1.0 < v < 1.0:
                raise AdmissibilityError(f"real root {v} outside (-1, 1)")
        for r, phi in self.complex_poles + self.complex_zeros:
            if not 0.0 < r < 1.0:
                raise AdmissibilityError(f"magnitude {r} outside (0, 1)")
            if not 0.0 < phi < math.pi:
                raise AdmissibilityError(f"phase {phi} outside (0, pi)")
        poles, zeros = self.poles(), self.zeros()
        _check_distinct(poles, EPS_REPEAT, "pole")
        _check_distinct(zeros, EPS_REPEAT, "zero")
        _check_no_cancellation(poles, zeros, EPS_CANCEL)

    @property
    def n(self) -> int:
        return len(self.real_poles) + 2 * len(self.complex_poles)

    @property
    def m(self) -> int:
        return len(self.real_zeros) + 2 * len(self.complex_zeros)

    @property
    def config(self) -> RootConfig:
        return RootConfig(self.n, self.m, len(self.real_poles), len(self.real_zeros))

    def poles(self) -> np.ndarray:
        return _expand(self.real_poles, self.complex_poles)

    def zeros(self) -> np.ndarray:
        return _expand(self.real_zeros, self.complex_zeros)

    @property
    def theta(self) -> np.ndarray:
        """Flattened pole/zero parameters (noise variance excluded)."""
        parts = list(self.real_poles)
        for r, phi in self.complex_poles:
            parts += [r, phi]
        parts += list(self.real_zeros)
        for r, phi in self.complex_zeros:
            parts += [r, phi]
        return np.array(parts, dtype=float)

    @classmethod
    def from_theta(cls, theta, config: RootConfig, sigma2: float = 1.0) -> "RootModel":
        theta = [float(v) for v in theta]
        if len(theta) != config.dim:
            raise ValueError(f"expected {config.dim} parameters, got {len(theta)}")
        n, m, n1, m1 = config.key
        pole_part, zero_part = theta[:n], theta[n:]
        return cls(
            real_poles=pole_part[:n1],
            complex_poles=list(zip(pole_part[n1::2], pole_part[n1 + 1::2])),
            real_zeros=zero_part[:m1],
            complex_zeros=list(zip(zero_part[m1::2], zero_part[m1 + 1::2])),
            sigma2=sigma2,
        )

    def canonical(self) -> "RootModel":
        """Real roots ascending, complex pairs by ascending phase."""
        return RootModel(sorted(self.real_poles), sorted(self.complex_poles, key=lambda p: p[1]),
                         sorted(self.real_zeros), sorted(self.complex_zeros, key=lambda p: p[1]),
                         self.sigma2)

    def to_dict(self) -> dict:
        return {"real_poles": list(self.real_poles),
                "complex_poles": [list(p) for p in self.complex_poles],
                "real_zeros": list(self.real_zeros),
                "complex_zeros": [list(p) for p in self.complex_zeros],
                "sigma2": self.sigma2}


def _expand(reals, pairs) -> np.ndarray:
    out = [complex(v) for v in reals]
    for r, phi in pairs:
        z = r * complex(math.cos(phi), math.sin(phi))
        out += [z, z.conjugate()]
    return np.array(out, dtype=complex)


@dataclass(frozen=True)
class TimeSeries:
    """Observed or simulated series; ``burn_in`` records discarded samples."""

    values: np.ndarray
    burn_in: int = 0
    note: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("series contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    y = np.asarray(series, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    return y


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------


def _expand_factors(reals, pairs) -> np.ndarray:
    """Multiply out prod(1 - g q^-1) in real arithmetic (Vieta)."""
    poly = np.array([1.0])
    for g in reals:
        poly = np.convolve(poly, [1.0, -g])
    for r, phi in pairs:
        poly = np.convolve(poly, [1.0, -2.0 * r * math.cos(phi), r * r])
    return poly


def roots_to_coeffs(root_model: RootModel) -> CoeffModel:
    """Expand the pole/zero products into a/b coefficients."""
    a = _expand_factors(root_model.real_poles, root_model.complex_poles)[1:]
    b = _expand_factors(root_model.real_zeros, root_model.complex_zeros)[1:]
    return CoeffModel(a, b, root_model.sigma2)


def _polish(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """One Newton step on the monic polynomial with coefficients ``coeffs``."""
    dcoeffs = np.polyder(coeffs)
    out = roots.copy()
    for i, z in enumerate(roots):
        d = np.polyval(dcoeffs, z)
        if d != 0:
            out[i] = z - np.polyval(coeffs, z) / d
    return out


def _find_roots(c: Sequence[float]) -> tuple[list[float], list[tuple[float, float]]]:
    if len(c) == 0:
        return [], []
    poly = np.r_[1.0, np.asarray(c, dtype=float)]
    n = len(c)
    companion = np.zeros((n, n))
    companion[0, :] = -poly[1:]
    companion[1:, :-1] = np.eye(n - 1)
    roots = _polish(poly, np.linalg.eigvals(companion).astype(complex))
    reals, upper = [], []
    for z in roots:
        if abs(z.imag) <= EPS_REPEAT / 2:
            reals.append(float(z.real))
        elif z.imag > 0:
            upper.append(z)
    n_pairs = (n - len(reals)) // 2
    if len(upper) != n_pairs or len(reals) + 2 * n_pairs != n:
        raise DegeneracyError("could not pair complex roots")
    pairs = [(abs(z), math.atan2(z.imag, z.real)) for z in upper]
    return sorted(reals), sorted(pairs, key=lambda p: p[1])


def backward_error(coeffs: Sequence[float], roots: Iterable[complex]) -> float:
    """Largest |p(z)| / sum_k |c_k| |z|^k over the given roots."""
    poly = np.r_[1.0, np.asarray(coeffs, dtype=float)]
    worst = 0.0
    for z in roots:
        scale = np.polyval(np.abs(poly), abs(z))
        worst = max(worst, abs(np.polyval(poly, z)) / scale)
    return worst


def coeffs_to_roots(coeff_model: CoeffModel) -> RootModel:
    """Root parametrization of a coefficient model.

    Roots come from companion-matrix eigenvalues followed by one Newton step.
    Raises :class:`DegeneracyError` for repeated roots or cancellations.
    """
    real_p, pair_p = _find_roots(coeff_model.a)
    real_z, pair_z = _find_roots(coeff_model.b)
    return RootModel(real_p, pair_p, real_z, pair_z, coeff_model.sigma2)


# ---------------------------------------------------------------------------
# Simulation and prediction errors
# ---------------------------------------------------------------------------


def innovations(total_len: int, sigma2: float, seed) -> np.ndarray:
    """The Gaussian innovation stream :func:`simulate` uses for ``seed``."""
    rng = np.random.default_rng(seed)
    return math.sqrt(sigma2) * rng.standard_normal(total_len)


def simulate(coeff_model: CoeffModel, total_len: int, burn_in: int = 0, seed=None) -> TimeSeries:
    """Run the ARMA recursion from zero initial conditions.

    The first ``burn_in`` outputs are dropped.  ``seed`` is anything
    :func:`numpy.random.default_rng` accepts; equal seeds give equal output.
    """
    if not total_len > burn_in >= 0:
        raise ValueError("need total_len > burn_in >= 0")
    e = innovations(total_len, coeff_model.sigma2, seed)
    y = lfilter(coeff_model.ma_poly, coeff_model.ar_poly, e)
    return TimeSeries(y[burn_in:], burn_in=burn_in,
                      note=f"simulated ARMA({coeff_model.n},{coeff_model.m})")


def filter_residuals(y: np.ndarray, a, b) -> np.ndarray:
    """e = (A(q)/B(q)) y with zero pre-sample values; no admissibility check."""
    return lfilter(np.r_[1.0, a], np.r_[1.0, b], y)


def prediction_errors(series, coeff_model: CoeffModel) -> tuple[np.ndarray, float]:
    """One-step prediction errors y_t - yhat_{t|t-1} and their mean square.

    The predictor is the zero-initial-condition recursion
    yhat_{t+1|t} = sum_i b_i (y_{t-i+1} - yhat_{t-i+1|t-i}) - sum_i a_i y_{t-i+1}.
    """
    y = _values(series)
    if len(y) == 0:
        raise ValueError("empty series")
    if np.any(np.abs(coeff_model.zeros()) >= 1.0):
        raise AdmissibilityError("B(q) is not invertible")
    e = filter_residuals(y, coeff_model.a, coeff_model.b)
    return e, float(np.mean(e * e))


def log_likelihood(series, coeff_model: CoeffModel, sigma2: float | None = None) -> float:
    """Gaussian log-likelihood built from the prediction errors.

    ``sigma2`` defaults to the model's noise variance.
    """
    e, _ = prediction_errors(series, coeff_model)
    s2 = coeff_model.sigma2 if sigma2 is None else float(sigma2)
    N = len(e)
    return -0.5 * N * math.log(2 * math.pi * s2) - float(e @ e) / (2 * s2)


def profile_log_likelihood(series, coeff_model: CoeffModel) -> float:
    """Log-likelihood maximized over the noise variance: -(N/2) ln(2 pi e s2_hat)."""
    e, s2 = prediction_errors(series, coeff_model)
    return -0.5 * len(e) * math.log(2 * math.pi * math.e * s2)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def model_from_dict(d: dict) -> CoeffModel | RootModel:
    if "a" in d or "b" in d:
        model = CoeffModel(d.get("a", []), d.get("b", []), d.get("sigma2", 1.0))
        if "n" in d and d["n"] != model.n or "m" in d and d["m"] != model.m:
            raise ValueError("declared orders do not match coefficient lengths")
        return model
    keys = {"real_poles", "complex_poles", "real_zeros", "complex_zeros"}
    if keys & d.keys():
        return RootModel(d.get("real_poles", []), d.get("complex_poles", []),
                         d.get("real_zeros", []), d.get("complex_zeros", []),
                         d.get("sigma2", 1.0))
    raise ValueError("model file needs coefficient or root fields")


def load_model(path) -> CoeffModel | RootModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model: CoeffModel | RootModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_series(path) -> TimeSeries:
    """One float per line; blank lines are ignored."""
    values = [float(line) for line in Path(path).read_text().splitlines() if line.strip()]
    return TimeSeries(np.array(values), note=str(path))


def save_series(series, path) -> None:
    y = _values(series)
    Path(path).write_text("".join(f"{v!r}\n" for v in y.tolist()))
