"""Shared fixtures: src on the path, a seeded generator and the built-in systems"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from geometry import Jet2Point, PhasePoint  # noqa: E402
from systems import builtin_system  # noqa: E402


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Keep tests away from any noetherkit.json in the working directory"""
    from config import config
    saved = config._config
    config._config = config.get_default_config()
    monkeypatch.setenv("NOETHERKIT_CONFIG_DIR", str(tmp_path))
    yield
    config._config = saved


@pytest.fixture
def kepler2d():
    return builtin_system("kepler2d")


@pytest.fixture
def kepler3d():
    return builtin_system("kepler3d")


@pytest.fixture
def oscillator():
    return builtin_system("oscillator")


@pytest.fixture
def havas():
    return builtin_system("havas")


@pytest.fixture
def free_particle():
    return builtin_system("free_particle")


@pytest.fixture
def quadratic_frame():
    return builtin_system("quadratic_frame")


@pytest.fixture
def circular_point():
    """Unit circular Kepler orbit: H = -1/2, M12 = 1, e = 0"""
    return PhasePoint(0.0, (1.0, 0.0), (0.0, 1.0))


@pytest.fixture
def elliptic_point():
    """H = -0.68, M12 = 0.8, e = 0.36"""
    return PhasePoint(0.0, (1.0, 0.0), (0.0, 0.8))


@pytest.fixture
def hyperbolic_point():
    """H = 1, M12 = 2, A = (3, 0)"""
    return PhasePoint(0.0, (1.0, 0.0), (0.0, 2.0))


def random_phase_point(rng, dim=2, radius=0.1):
    while True:
        q = rng.uniform(-2.0, 2.0, size=dim)
        if np.linalg.norm(q) >= radius:
            break
    p = rng.uniform(-2.0, 2.0, size=dim)
    return PhasePoint(float(rng.uniform(0.0, 1.0)), tuple(float(x) for x in q), tuple(float(x) for x in p))


def random_jet2_point(rng, dim=2, radius=0.1):
    while True:
        q = rng.uniform(-2.0, 2.0, size=dim)
        if np.linalg.norm(q) >= radius:
            break
    qt = rng.uniform(-2.0, 2.0, size=dim)
    qtt = rng.uniform(-2.0, 2.0, size=dim)
    return Jet2Point(float(rng.uniform(0.0, 1.0)), tuple(float(x) for x in q),
                     tuple(float(x) for x in qt), tuple(float(x) for x in qtt))


def random_jet_point(rng, dim=2, radius=0.1):
    return random_jet2_point(rng, dim, radius).jet
