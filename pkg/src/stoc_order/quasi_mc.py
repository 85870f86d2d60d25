"""Quasi-Monte Carlo evaluation of the integral of |J(theta)|^(1/2).

The integration domain for a root configuration is the product of
(-1, 1) for each real root, (0, 1) for each magnitude and (0, pi) for each
phase.  Unit-cube points are mapped affinely onto it.  Points whose roots
collide (repeated roots or pole-zero cancellation) are skipped and counted.

Integrals are cached in a JSON table keyed by (n, m, n1, m1).
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import CacheIOError, DegeneracyError, MissingIntegralError
from .fisher_info import sqrt_det_batch
from .model_core import EPS_CANCEL, EPS_REPEAT, RootConfig, RootModel
from .sobol import DEFAULT_DIRECTIONS, SobolGenerator

__all__ = [
    "RootConfig", "IntegralEstimate", "IntegralEntry", "IntegralTable",
    "domain_volume", "map_to_domain", "map_batch", "integrate_sqrt_fim",
    "convergence_delta", "cache_lookup_or_compute", "default_cache_path",
    "canonical_config",
]

BLOCK_SIZE = 1 << 16
MAX_SKIPPED_FRACTION = 0.01
_WIDTH = {"real": 2.0, "mag": 1.0, "phase": math.pi}


def domain_volume(config: RootConfig) -> float:
    return math.prod(_WIDTH[k] for k in config.kinds())


def map_batch(U: np.ndarray, config: RootConfig) -> np.ndarray:
    """Map unit-cube points (B, d) to parameter points (B, d)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    theta = np.empty_like(U)
    for j, kind in enumerate(config.kinds()):
        if kind == "real":
            theta[:, j] = 2.0 * U[:, j] - 1.0
        elif kind == "mag":
            theta[:, j] = U[:, j]
        else:
            theta[:, j] = math.pi * U[:, j]
    return theta


def map_to_domain(point, config: RootConfig) -> RootModel:
    """Single unit-cube point to a root model (noise variance fixed at 1).

    Raises :class:`AdmissibilityError` (or its subclass :class:`DegeneracyError`
    for repeated roots) when the mapped point is inadmissible.
    """
    theta = map_batch(np.asarray(point, dtype=float)[None, :], config)[0]
    return RootModel.from_theta(theta, config)


def _roots_batch(theta: np.ndarray, config: RootConfig) -> tuple[np.ndarray, np.ndarray]:
    kinds = config.kinds()
    cols = []
    for j, kind in enumerate(kinds):
        if kind == "real":
            cols.append(theta[:, j].astype(complex))
        elif kind == "mag":
            z = theta[:, j] * np.exp(1j * theta[:, j + 1])
            cols += [z, np.conj(z)]
    roots = np.stack(cols, axis=1) if cols else np.zeros((len(theta), 0), dtype=complex)
    return roots[:, :config.n], roots[:, config.n:]


def _admissible(theta: np.ndarray, config: RootConfig) -> np.ndarray:
    ok = np.ones(len(theta), dtype=bool)
    for j, kind in enumerate(config.kinds()):
        t = theta[:, j]
        if kind == "real":
            ok &= (t > -1.0) & (t < 1.0)
        elif kind == "mag":
            ok &= (t > 0.0) & (t < 1.0)
        else:
            ok &= (t > 0.0) & (t < math.pi)
    poles, zeros = _roots_batch(theta, config)
    for group, eps in ((poles, EPS_REPEAT), (zeros, EPS_REPEAT)):
        k = group.shape[1]
        for i in range(k):
            for j in range(i + 1, k):
                ok &= np.abs(group[:, i] - group[:, j]) >= eps
    for i in range(poles.shape[1]):
        for j in range(zeros.shape[1]):
            ok &= np.abs(poles[:, i] - zeros[:, j]) >= EPS_CANCEL
    return ok


@dataclass(frozen=True)
class IntegralEstimate:
    """QMC estimate of the integral over one root configuration."""

    config: RootConfig
    value: float
    M: int
    skipped: int
    second_moment: float
    generator_version: str

    @property
    def flagged(self) -> bool:
        return self.skipped >= MAX_SKIPPED_FRACTION * self.M

    @property
    def ln_value(self) -> float:
        return math.log(self.value)

    @property
    def spread(self) -> float:
        """Plain Monte Carlo standard error; only a rough guide for QMC."""
        used = self.M - self.skipped
        return math.sqrt(max(self.second_moment - self.value ** 2, 0.0) / used)


def _block_sums(args) -> tuple[float, float, int]:
    config, directions, start, count = args
    gen = SobolGenerator(config.dim, directions)
    theta = map_batch(gen.block(start, count), config)
    ok = _admissible(theta, config)
    vals = np.full(count, np.nan)
    vals[ok] = sqrt_det_batch(theta[ok], config)
    good = np.isfinite(vals)
    v = vals[good]
    return float(np.sum(v)), float(np.sum(v * v)), int(count - good.sum())


def integrate_sqrt_fim(config: RootConfig, M: int, *, directions: str = DEFAULT_DIRECTIONS,
                       jobs: int = 1) -> IntegralEstimate:
    """Plain QMC average over the first ``M`` Sobol' points times the volume.

    Work is cut into fixed blocks of ``BLOCK_SIZE`` points and block sums are
    combined in block order, so the result does not depend on ``jobs``.
    """
    if M < 1000:
        raise ValueError("need at least 1000 integration points")
    vol = domain_volume(config)
    gen = SobolGenerator(max(config.dim, 1), directions)
    if config.dim == 0:
        return IntegralEstimate(config, 1.0, M, 0, 1.0, gen.version)
    tasks = [(config, directions, s, min(BLOCK_SIZE, M + 1 - s))
             for s in range(1, M + 1, BLOCK_SIZE)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_block_sums, tasks))
    else:
        parts = [_block_sums(t) for t in tasks]
    skipped = sum(p[2] for p in parts)
    used = M - skipped
    if used == 0:
        raise DegeneracyError("every integration point was inadmissible")
    mean = math.fsum(p[0] for p in parts) / used
    m2 = math.fsum(p[1] for p in parts) / used
    return IntegralEstimate(config, vol * mean, M, skipped, vol * vol * m2, gen.version)


def convergence_delta(est_small: IntegralEstimate, est_large: IntegralEstimate) -> float:
    """|I_large - I_small| / I_large; ``nan`` when I_large is zero."""
    if est_small.config != est_large.config:
        raise ValueError("estimates are for different configurations")
    if est_large.value == 0:
        return math.nan
    return abs(est_large.value - est_small.value) / est_large.value


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegralEntry:
    n: int
    m: int
    n1: int
    m1: int
    M: int
    ln_integral: float
    generator_version: str
    created: str | None = None
    reused_from: tuple[int, int, int, int] | None = field(default=None, compare=False)

    @property
    def config(self) -> RootConfig:
        return RootConfig(self.n, self.m, self.n1, self.m1)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("reused_from")
        if d["created"] is None:
            d.pop("created")
        return d


def canonical_config(config: RootConfig) -> RootConfig:
    """AR configuration with the same integral (pole/zero sign invariance)."""
    return RootConfig(config.dim, 0, config.n1 + config.m1, 0)


def default_cache_path() -> Path:
    env = os.environ.get("STOC_ORDER_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "stoc_order" / "integrals.json"


class IntegralTable:
    """ln of the integral of |J|^(1/2), keyed by root configuration."""

    def __init__(self, entries=(), path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[tuple[int, int, int, int], IntegralEntry] = {}
        for e in entries:
            self.put(e)

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries.values(), key=lambda e: (e.n, e.m, e.n1, e.m1)))

    @classmethod
    def load(cls, path, missing_ok: bool = True) -> "IntegralTable":
        path = Path(path)
        try:
            text = path.read_text()
        except FileNotFoundError:
            if missing_ok:
                return cls(path=path)
            raise CacheIOError(f"integral cache {path} not found") from None
        except OSError as exc:
            raise CacheIOError(f"cannot read integral cache {path}: {exc}") from exc
        try:
            raw = json.loads(text) if text.strip() else []
            entries = [IntegralEntry(**{k: v for k, v in item.items()
                                        if k in IntegralEntry.__dataclass_fields__})
                       for item in raw]
        except (ValueError, TypeError) as exc:
            raise CacheIOError(f"malformed integral cache {path}: {exc}") from exc
        return cls(entries, path)

    @classmethod
    def bundled(cls) -> "IntegralTable":
        """Read-only table shipped with the package (M = 10^7)."""
        text = resources.files("stoc_order").joinpath("data/integrals.json").read_text()
        return cls(IntegralEntry(**item) for item in json.loads(text))

    def save(self, path=None) -> None:
        path = Path(path) if path is not None else self.path
        if path is None:
            raise CacheIOError("table has no backing file")
        data = json.dumps([e.to_json() for e in self], indent=1) + "\n"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".integrals-")
            with os.fdopen(fd, "w") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except OSError as exc:
            raise CacheIOError(f"cannot write integral cache {path}: {exc}") from exc

    def put(self, entry: IntegralEntry) -> None:
        if not math.isfinite(entry.ln_integral):
            raise ValueError("cached integrals must be finite")
        self._entries[(entry.n, entry.m, entry.n1, entry.m1)] = entry

    def get(self, config: RootConfig, min_points: int = 0,
            use_invariance: bool = True) -> IntegralEntry | None:
        """Entry for ``config`` computed with at least ``min_points`` points.

        With ``use_invariance`` an ARMA(n, m) configuration may be answered by
        the AR(n + m) entry with the same number of real roots; the returned
        entry then records that in ``reused_from``.
        """
        e = self._entries.get(config.key)
        if e is not None and e.M >= min_points:
            return e
        if use_invariance and config.m:
            c = canonical_config(config)
            e = self._entries.get(c.key)
            if e is not None and e.M >= min_points:
                return IntegralEntry(*config.key, e.M, e.ln_integral, e.generator_version,
                                     e.created, reused_from=c.key)
        return None

    def ln_integral(self, config: RootConfig, use_invariance: bool = True) -> float:
        """Cached ln integral; one-dimensional structures use ln(pi) exactly."""
        if config.dim == 0:
            return 0.0
        if config.dim == 1:
            return math.log(math.pi)
        e = self.get(config, use_invariance=use_invariance)
        if e is None:
            raise MissingIntegralError(f"no cached integral for configuration {config.key}")
        return e.ln_integral

    def ln_integral_sum(self, n: int, m: int = 0) -> float:
        """ln of the integral summed over every root configuration of (n, m)."""
        configs = RootConfig.configs_for(n, m)
        return float(np.logaddexp.reduce([self.ln_integral(c) for c in configs]))


def cache_lookup_or_compute(table: IntegralTable, config: RootConfig, M: int, *,
                            directions: str = DEFAULT_DIRECTIONS, jobs: int = 1,
                            use_invariance: bool = True) -> float:
    """Cached ln integral, computing and storing it on a miss.

    A hit needs an entry computed with at least ``M`` points.  New entries are
    written back to ``table.path`` when the table has one.
    """
    if config.dim <= 1:
        return table.ln_integral(config)
    hit = table.get(config, min_points=M, use_invariance=use_invariance)
    if hit is not None:
        return hit.ln_integral
    target = canonical_config(config) if use_invariance else config
    est = integrate_sqrt_fim(target, M, directions=directions, jobs=jobs)
    entry = IntegralEntry(*target.key, M, est.ln_value, est.generator_version,
                          datetime.now(timezone.utc).isoformat(timespec="seconds"))
    table.put(entry)
    if table.path is not None:
        table.save()
    return entry.ln_integral
