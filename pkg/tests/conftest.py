import numpy as np
import pytest

from spikedwigner.model import (EnsembleSpec, EntryLaw, SpikeSpec, constant_profile,
                                constant_signal, cos_signal)


def make_spec(n=50, theta=None, alphas=(1.0,), signals=None, profile=None, law="gaussian"):
    signals = signals or [constant_signal()] + [cos_signal(m) for m in range(1, len(alphas))]
    theta = float(n) if theta is None else theta
    return EnsembleSpec(n=n, profile=profile or constant_profile(), law=EntryLaw(law),
                        spike=SpikeSpec(theta=theta, alphas=alphas, signals=signals))


def random_symmetric(n, seed=0):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    return np.triu(m) + np.triu(m, 1).T


@pytest.fixture
def spec_k1():
    return make_spec()


@pytest.fixture
def spec_k2():
    return make_spec(n=60, alphas=(2.0, 1.0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
