import pytest

from pshlac.lac_models import Variant
from pshlac.milp import SolveOptions, solve

from toys import rolling_day_setup, window_setup

EXACT = SolveOptions(gap_tol=1e-9, time_limit=60.0)


@pytest.fixture(scope="session")
def toy_day():
    """(system, market_day, da) for the 3-hour rolling toy."""
    return rolling_day_setup()


@pytest.fixture
def basic_window():
    """2-hour window of a 3-hour day with a single flat-price scenario."""
    return window_setup()


def solve_exact(model):
    sol = solve(model, EXACT)
    assert sol.ok, sol.status
    return sol


@pytest.fixture
def exact_solver():
    return solve_exact


ALL_VARIANTS = tuple(Variant)
