"""Gray-code Sobol' sequence generator.

Points are produced in Gray-code order and the all-zero point is skipped, so
the first point is 0.5 in every coordinate.  Direction numbers are 30-bit.

Direction-number sets
---------------------
``"nr"``
    The six dimensions of the ``sobseq`` routine in Press, Teukolsky,
    Vetterling & Flannery, *Numerical Recipes in C*, 2nd ed. (1992), p. 312:
    primitive polynomials of degree 1, 2, 3, 3, 4, 4 with initial values
    iv = {1,1,1,1,1,1, 3,1,3,3,1,1, 5,7,7,3,3,5, 15,11,5,15,13,9}.
``"joe-kuo"``
    Joe & Kuo, ``new-joe-kuo-6.21201`` (2008), dimensions 1-21; dimension 1
    is the van der Corput sequence.
``"nr+joe-kuo"`` (default)
    The six ``"nr"`` dimensions followed by Joe-Kuo dimensions 8-21.  Both
    tables use the same primitive polynomials for their first six
    non-trivial dimensions, so the continuation never repeats a polynomial.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

BITS = 30
_SCALE = 1.0 / (1 << BITS)

# (degree s, polynomial interior bits a, initial m_1..m_s)
_NR_TABLE = [
    (1, 0, (1,)),
    (2, 1, (1, 1)),
    (3, 1, (1, 3, 7)),
    (3, 2, (1, 3, 3)),
    (4, 1, (1, 1, 3, 13)),
    (4, 4, (1, 1, 5, 9)),
]

# new-joe-kuo-6.21201, dimensions 2..21
_JOE_KUO_TABLE = [
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)),
    (6, 22, (1, 3, 1, 15, 13, 25)),
    (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)),
    (7, 4, (1, 3, 7, 13, 13, 15, 69)),
]

_VDC = "vdc"
DIRECTION_SETS = {
    "nr": list(_NR_TABLE),
    "joe-kuo": [_VDC] + list(_JOE_KUO_TABLE),
    "nr+joe-kuo": list(_NR_TABLE) + list(_JOE_KUO_TABLE[6:]),
}
DEFAULT_DIRECTIONS = "nr+joe-kuo"


def _direction_row(entry) -> list[int]:
    if entry == _VDC:
        return [1 << (BITS - 1 - i) for i in range(BITS)]
    s, a, m_init = entry
    m = list(m_init)
    for i in range(s, BITS):
        x = m[i - s] ^ (m[i - s] << s)
        for k in range(1, s):
            if (a >> (s - 1 - k)) & 1:
                x ^= m[i - k] << k
        m.append(x)
    return [m[i] << (BITS - 1 - i) for i in range(BITS)]


def direction_numbers(dim: int, directions: str = DEFAULT_DIRECTIONS) -> np.ndarray:
    """Integer direction numbers V[j, b] for dimension j and bit b."""
    try:
        table = DIRECTION_SETS[directions]
    except KeyError:
        raise ConfigurationError(f"unknown direction-number set {directions!r}") from None
    if not 1 <= dim <= len(table):
        raise ConfigurationError(
            f"dimension {dim} not supported by {directions!r} (max {len(table)})")
    return np.array([_direction_row(e) for e in table[:dim]], dtype=np.uint64)


class SobolGenerator:
    """Deterministic Sobol' points in [0, 1)^dim.

    ``next()`` steps sequentially (one XOR per coordinate); ``block()`` gives
    random access to any index range, which is how integration work is split.
    """

    def __init__(self, dim: int, directions: str = DEFAULT_DIRECTIONS):
        self.dim = dim
        self.directions = directions
        self._v = direction_numbers(dim, directions)
        self.index = 0
        self._state = np.zeros(dim, dtype=np.uint64)

    @property
    def version(self) -> str:
        return f"sobol-gray-{BITS}bit/{self.directions}"

    def next(self) -> np.ndarray:
        # rightmost zero bit of the current count picks the direction number
        c, i = 0, self.index
        while i & 1:
            i >>= 1
            c += 1
        if c >= BITS:
            raise ConfigurationError("Sobol' sequence exhausted")
        self._state ^= self._v[:, c]
        self.index += 1
        return self._state.astype(float) * _SCALE

    def reset(self) -> None:
        self.index = 0
        self._state[:] = 0

    def block(self, start: int, count: int) -> np.ndarray:
        """Points number ``start .. start + count - 1`` (numbering from 1)."""
        if start < 1 or count < 0 or start + count > (1 << BITS):
            raise ConfigurationError("index range outside the sequence")
        i = np.arange(start, start + count, dtype=np.uint64)
        gray = i ^ (i >> np.uint64(1))
        out = np.zeros((count, self.dim), dtype=np.uint64)
        for b in range(BITS):
            hit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
            if not hit.any():
                if (np.uint64(start + count) >> np.uint64(b)) == 0:
                    break
                continue
            out[hit] ^= self._v[:, b]
        return out.astype(float) * _SCALE


def sobol_next(gen: SobolGenerator) -> np.ndarray:
    return gen.next()
