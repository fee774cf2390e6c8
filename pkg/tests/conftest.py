import math

import numpy as np
import pytest

from thz_reflection import MagnitudeModel, ReflectionCoefficient
from thz_reflection.reference import reference_gamma


@pytest.fixture
def metal_340_model():
    gamma, k = reference_gamma("metal", 340.0)
    return MagnitudeModel(alpha=70.0, beta=2.0, d0=30.4, gamma=gamma, k=k, frequency=340.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_model(rng, gamma_range=(0.02, 0.15), k_range=(50.0, 110.0)):
    return MagnitudeModel(
        alpha=float(rng.uniform(55.0, 95.0)),
        beta=float(rng.uniform(1.2, 3.5)),
        d0=30.4,
        sigma=float(rng.uniform(0.0, 2.0)),
        gamma=ReflectionCoefficient(float(rng.uniform(*gamma_range)), float(rng.uniform(-math.pi, math.pi))),
        k=float(rng.uniform(*k_range)),
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
