from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import settings

from stoc_order.model_core import RootConfig, RootModel

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_root_model(rng: np.random.Generator, n: int, m: int = 0, n1: int | None = None,
                      m1: int | None = None, max_mag: float = 0.95) -> RootModel:
    """Admissible random root model; retries on accidental root collisions."""
    n1 = n % 2 if n1 is None else n1
    m1 = m % 2 if m1 is None else m1
    while True:
        try:
            return RootModel(
                real_poles=rng.uniform(-max_mag, max_mag, n1),
                complex_poles=[(rng.uniform(0.05, max_mag), rng.uniform(0.05, math.pi - 0.05))
                               for _ in range((n - n1) // 2)],
                real_zeros=rng.uniform(-max_mag, max_mag, m1),
                complex_zeros=[(rng.uniform(0.05, max_mag), rng.uniform(0.05, math.pi - 0.05))
                               for _ in range((m - m1) // 2)],
            )
        except ValueError:
            continue


def configs_up_to(total: int):
    out = []
    for n in range(total + 1):
        for m in range(total + 1 - n):
            if n + m:
                out.extend(RootConfig.configs_for(n, m))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[k])
