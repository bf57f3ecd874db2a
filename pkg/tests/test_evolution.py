import numpy as np
import pytest

from finecology.config import EvolutionParams, monthly_infection_probability
from finecology.evolution import (
    centile_benchmark, disseminate_culture, dissemination_increment, infect_strategies,
    most_profitable,
)

ALWAYS = EvolutionParams(dissemination_probability=1.0)


def test_increment_at_zero_rate():
    new = disseminate_culture(np.array([0.05, 0.05]), np.array([0.0, 1.0]), 0.0, ALWAYS)
    assert new[0] == pytest.approx(0.0572275, abs=1e-12)
    assert new[1] == 0.05


def test_increment_at_five_percent():
    assert dissemination_increment(0.05) == pytest.approx(0.007150, abs=5e-7)
    assert dissemination_increment(0.05) == pytest.approx(0.0072275 * np.exp(-0.01084), rel=1e-6)


def test_tied_investors_do_not_move():
    rex = np.array([0.01, 0.02, 0.03])
    assert disseminate_culture(rex, np.full(3, 0.04), 0.02, ALWAYS).tolist() == rex.tolist()


def test_single_investor_no_op():
    assert disseminate_culture(np.array([0.02]), np.array([0.0]), 0.0, ALWAYS).tolist() == [0.02]


def test_disabled_is_no_op():
    rex = np.array([0.01, 0.02])
    p = EvolutionParams(enabled=False, dissemination_probability=1.0)
    assert disseminate_culture(rex, np.array([0.0, 1.0]), 0.0, p).tolist() == rex.tolist()


def test_partial_dissemination_needs_generator():
    with pytest.raises(ValueError):
        disseminate_culture(np.zeros(3), np.arange(3.0), 0.0, EvolutionParams())


def test_benchmark_is_fortieth_centile_from_top():
    assert centile_benchmark(np.arange(10.0)) == 6.0
    below = np.arange(10.0) < centile_benchmark(np.arange(10.0))
    assert below.sum() == 6


def test_annual_infection_rate():
    p = EvolutionParams()
    assert p.infection_rate_annual == 0.01
    assert 1 - (1 - p.infection_rate_monthly) ** 12 == pytest.approx(0.01)
    assert monthly_infection_probability(0.0) == 0.0


class _AlwaysFire:
    def random(self, n):
        return np.zeros(n)


def test_infection_copies_donor_pair():
    sr, bn, changed = infect_strategies(
        np.array([0.08, 0.12]), np.array([0.1, 0.3]), np.array([1.0, 5.0]),
        np.ones(2, bool), _AlwaysFire(), 0.5)
    assert (sr[0], bn[0]) == (0.12, 0.3)
    assert changed.tolist() == [True, False]


def test_most_profitable_bank_keeps_its_strategy():
    sr, bn, changed = infect_strategies(
        np.array([0.12]), np.array([0.3]), np.array([5.0]), np.ones(1, bool), _AlwaysFire(), 1.0)
    assert not changed.any()
    assert most_profitable(np.array([1.0, 3.0, 3.0]), np.ones(3, bool)) == 1
    assert most_profitable(np.array([1.0]), np.zeros(1, bool)) == -1


def test_infection_never_lowers_strategy():
    rng = np.random.default_rng(0)
    sr, bn = rng.uniform(0.05, 0.15, 50), rng.uniform(0, 0.5, 50)
    new_sr, new_bn, changed = infect_strategies(sr, bn, rng.normal(size=50), np.ones(50, bool), rng, 0.5)
    assert (np.round(new_sr + new_bn, 4) >= np.round(sr + bn, 4)).all()
    assert len(set(zip(new_sr, new_bn))) <= len(set(zip(sr, bn)))
