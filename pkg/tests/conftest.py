import pytest

from qdsource.phonon import PhononEnvironment

# Parameter sets used throughout: the deformation-potential coupling and
# cutoff of a typical InGaAs dot, at zero and cryostat temperature, plus
# the slightly different pair used by the benchmark sweep.
FIG_ALPHA = 0.03        # ps^2
FIG_XI_MEV = 1.45
BENCH_ALPHA = 0.032     # ps^2
BENCH_XI_MEV = 0.95


@pytest.fixture(scope="session")
def env_T0():
    return PhononEnvironment.build(FIG_ALPHA, FIG_XI_MEV, 0.0)


@pytest.fixture(scope="session")
def env_T4():
    return PhononEnvironment.build(FIG_ALPHA, FIG_XI_MEV, 4.0)


@pytest.fixture(scope="session")
def env_bench():
    return PhononEnvironment.build(BENCH_ALPHA, BENCH_XI_MEV, 4.0)


@pytest.fixture(scope="session")
def env_bench_T0():
    return PhononEnvironment.build(BENCH_ALPHA, BENCH_XI_MEV, 0.0)


@pytest.fixture(scope="session")
def env_off():
    return PhononEnvironment.build(0.0, FIG_XI_MEV, 4.0)
