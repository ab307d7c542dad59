from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from steerlab.qcore import DensityMatrix

FIXTURES = Path(__file__).parent / "fixtures"


def random_density(rng: np.random.Generator, n: int, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed mixed state of the given rank."""
    d = 1 << n
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real)


def random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
