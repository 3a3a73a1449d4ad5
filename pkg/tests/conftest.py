import pytest
from hypothesis import settings

from botorus.nash_moser import IterationConfig, oracle_newton, run

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

CUBIC_EPS = 0.03
CUBIC_CAP = 32


@pytest.fixture(scope="session")
def cubic_run():
    """Pure cubic, modes (2, 3), eps = 0.03, truncation capped at 32, identities checked."""
    cfg = IterationConfig(n_cap=CUBIC_CAP, check_identities=True)
    return run(cfg, (2, 3), "zero", CUBIC_EPS)


@pytest.fixture(scope="session")
def cubic_oracle():
    return oracle_newton((2, 3), "zero", CUBIC_EPS, CUBIC_CAP)
