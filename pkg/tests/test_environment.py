import math

import mpmath
import numpy as np
import pytest

from finecology.environment import (
    N_CLUSTERS, RateDataError, RateSeries, cluster_q_vector, compute_cluster_q, compute_mu,
    load_rates, month_index, month_label, price_cluster,
)


def _q_oracle(ls, mu, sigma2=0.5, n=41):
    mpmath.mp.dps = 40
    x = mpmath.log(mpmath.mpf(5) * (n + 1 - ls) / n)
    return float(mpmath.erfc((x - mu) / mpmath.sqrt(2 * mpmath.mpf(sigma2))) / 2)


def test_mu_values():
    assert compute_mu(0.0) == 0.0
    assert compute_mu(0.10) == pytest.approx(0.2583, abs=5e-5)
    assert compute_mu(0.05) == pytest.approx(0.1322, abs=5e-5)


def test_mu_domain():
    with pytest.raises(ValueError):
        compute_mu(-1.0)


# frozen from a 40-digit erfc evaluation at sigma^2 = 0.5
@pytest.mark.parametrize("ls,q", [(1, 0.011420343947075058), (41, 0.9985383730991342)])
def test_cluster_q_frozen(ls, q):
    assert compute_cluster_q(ls, 0.0) == pytest.approx(q, abs=1e-12)
    assert _q_oracle(ls, 0.0) == pytest.approx(q, abs=1e-15)


def test_cluster_q_with_unit_divisor_reference():
    # sigma^2 = 1 turns the tail into the standard normal at ln 5
    assert compute_cluster_q(1, 0.0, sigma2=1.0) == pytest.approx(
        0.5 * math.erfc(math.log(5) / math.sqrt(2)), abs=1e-15)


def test_cluster_count_and_range():
    q = cluster_q_vector(0.1322)
    assert len(q) == N_CLUSTERS == 41
    assert ((q > 0) & (q < 1)).all()


def test_cluster_index_out_of_range():
    with pytest.raises(IndexError):
        compute_cluster_q(0, 0.0)
    with pytest.raises(IndexError):
        compute_cluster_q(42, 0.0)


@pytest.mark.parametrize("q,lp", [(0.0, 0.036), (0.0537, 0.1004), (0.9823, 1.2148)])
def test_loan_price(q, lp):
    assert price_cluster(q) == pytest.approx(lp, abs=5e-5)


def test_month_labels_round_trip():
    assert month_label(month_index("1973-01")) == "1973-01"
    with pytest.raises(RateDataError):
        month_index("1973-13")


def test_bundled_series_spans_the_horizon():
    r = load_rates().window("1973-01", "2011-12")
    assert len(r) == 468
    assert r.labels[0] == "1973-01" and r.labels[-1] == "2011-12"
    assert np.isfinite(r.rates).all()


def test_window_with_gap_raises():
    r = RateSeries(np.array([100, 101, 103]), np.array([0.01, 0.02, 0.03]))
    with pytest.raises(RateDataError):
        r.window(month_label(100), month_label(103))


def test_bad_rates_file(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("month,value\n1973-01,0.05\n")
    with pytest.raises(RateDataError):
        load_rates(p)
    p.write_text("month,rate\n1973-01,abc\n")
    with pytest.raises(RateDataError, match=":2:"):
        load_rates(p)
    with pytest.raises(RateDataError):
        load_rates(tmp_path / "missing.csv")
