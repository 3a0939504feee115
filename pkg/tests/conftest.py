import numpy as np
import pytest

from ura_scld.experiment import ExperimentConfig
from ura_scld.tree_code import ParityGenerators, ParityProfile

MICRO_PARITY = (0, 4, 6, 6)


def micro_config(**kw) -> ExperimentConfig:
    """L=4 slots of 6-bit sub-blocks, n=16, B=8."""
    base = dict(B=8, L=4, n=16, M=(64,), K_a=(2,), parity_profile=MICRO_PARITY, trials=5, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture
def default_profile():
    return ParityProfile.default()


@pytest.fixture
def default_gens(default_profile):
    return ParityGenerators.generate(default_profile, seed=11)


@pytest.fixture
def micro_profile():
    return ParityProfile.uniform(MICRO_PARITY, 6)


@pytest.fixture
def micro_gens(micro_profile):
    return ParityGenerators.generate(micro_profile, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
