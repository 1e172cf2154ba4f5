import numpy as np
import pytest

from flipattack import Dataset, Model, ModelSpec


def linear_model(w, b=0.0):
    w = np.asarray(w, float)
    return Model(ModelSpec(w.size, ()), ((w.reshape(1, -1), np.array([b])),))


def unit(d, k=0, value=1.0):
    v = np.zeros(d)
    v[k] = value
    return v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def lin87():
    """W = (1, 0, ..., 0), b = 0 on 87 inputs."""
    return linear_model(unit(87))


@pytest.fixture
def boundary87():
    """W = (4, 0, ..., 0), b = 0: decision boundary at x_1 = 0."""
    return linear_model(unit(87, value=4.0))


@pytest.fixture
def small_data(rng):
    X = rng.normal(size=(12, 5))
    y = (X[:, 0] > 0).astype(np.int64)
    y[:2] = [0, 1]
    X[0, 0], X[1, 0] = -1.0, 1.0
    return Dataset(X, y)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
