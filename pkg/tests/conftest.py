import pytest

from finecology.config import SimConfig
from finecology.environment import load_rates
from finecology.market import init_state


@pytest.fixture(scope="session")
def rates():
    return load_rates()


@pytest.fixture
def small_cfg():
    """A short, small market that still exercises every step of the cycle."""
    return SimConfig(n_banks=30, n_investors=300, start="1973-01", end="1978-12")


@pytest.fixture
def tiny_state(rates):
    cfg = SimConfig(n_banks=2, n_investors=2)
    state = init_state(cfg, 1, rates.window(cfg.start, cfg.end))
    state.banks.reset_accumulators()
    state.investors.reset_accumulators()
    return state
