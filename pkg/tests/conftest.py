"""Shared fixtures: default potential, scaling-family configurations,
small oracle settings for fast unit tests, and the golden-value loader."""

from pathlib import Path

import numpy as np
import pytest

from mott1d.duhamel import Oracle, OracleConfig
from mott1d.oscint import StripIntegrand
from mott1d.params import scaling_family
from mott1d.specfun import bump_potential

GOLDEN_DIR = Path(__file__).parent / "golden"


def load_golden(name: str) -> dict:
    values = {}
    for line in (GOLDEN_DIR / name).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, _, val = line.partition("=")
            values[key.strip()] = float(val)
    return values


@pytest.fixture(scope="session")
def bump():
    return bump_potential(1.0, 1.0)


@pytest.fixture(scope="session")
def params05():
    return scaling_family(0.05)


@pytest.fixture(scope="session")
def params10():
    return scaling_family(0.1)


@pytest.fixture(scope="session")
def small_cfg():
    return OracleConfig(n_points=8192, n_time_nodes=160)


@pytest.fixture(scope="session")
def oracle10(params10, bump, small_cfg):
    return Oracle(params10, bump, small_cfg)


def hermite_poly(n, x):
    h0, h1 = np.ones_like(x), 2 * x
    if n == 0:
        return h0
    for k in range(2, n + 1):
        h0, h1 = h1, 2 * x * h1 - 2 * (k - 1) * h0
    return h1


def gaussian_strip_derivative(x, y, a, b):
    return (-1.0) ** (a + b) * hermite_poly(a, x) * hermite_poly(b, y) \
        * np.exp(-x**2 - y**2)


@pytest.fixture(scope="session")
def gaussian_strip():
    return StripIntegrand(
        f=lambda x, y: np.exp(-x**2 - y**2),
        mu=1.0, nu=1.0,
        derivative=gaussian_strip_derivative,
    )
