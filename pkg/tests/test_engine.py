import hashlib
import json

import numpy as np
import pytest

from finecology import engine, market
from finecology.config import SimConfig
from finecology.engine import (
    detect_crises, export_snapshot, run_batch, run_cycle, simulate, track_dominant_strategies,
)
from finecology.environment import RateDataError


def _hash(result):
    return hashlib.sha256(result.to_json().encode()).hexdigest()


def test_crisis_three_failures_in_a_hundred():
    series = np.zeros(24)
    series[[3, 5, 9]] = 1
    assert detect_crises(series, 100) == [9]


def test_two_percent_is_not_a_crisis():
    series = np.zeros(24)
    series[[3, 5]] = 1
    assert detect_crises(series, 100) == []


def test_no_failures_no_crises():
    assert detect_crises(np.zeros(100), 50) == []
    assert detect_crises([], 50) == []


def test_failures_outside_the_window_do_not_combine():
    series = np.zeros(40)
    series[[0, 13, 26]] = 1
    assert detect_crises(series, 100) == []


def test_separate_crises_are_counted_separately():
    series = np.zeros(60)
    series[[0, 1, 2]] = 1
    series[[40, 41, 42]] = 1
    assert detect_crises(series, 100) == [2, 42]


def test_default_threshold():
    assert SimConfig().crisis_threshold == 0.02


def test_full_run_spans_1973_to_2011():
    r = simulate(SimConfig(n_banks=20, n_investors=200), 3)
    assert len(r.months) == 468
    assert (r.months[0], r.months[-1]) == ("1973-01", "2011-12")
    assert all(len(v) == 468 for v in r.metrics.values())


def test_same_seed_same_result(small_cfg):
    assert _hash(simulate(small_cfg, 11)) == _hash(simulate(small_cfg, 11))


def test_different_seed_differs(small_cfg):
    assert _hash(simulate(small_cfg, 11)) != _hash(simulate(small_cfg, 12))


def test_missing_rate_is_a_data_error():
    with pytest.raises(RateDataError):
        simulate(SimConfig(n_banks=5, n_investors=50, start="2011-01", end="2013-12"), 1)


def test_empty_flow_cycle_only_accrues_capital_income(rates):
    cfg = SimConfig(n_banks=5, n_investors=20)
    cfg.evolution.enabled = False
    st = market.init_state(cfg, 4, rates.window(cfg.start, cfg.end))
    st.investors.F[:] = 0.0
    st.investors.dF_hist[:] = 0.0
    C0, F0 = st.banks.C.copy(), st.investors.F.copy()
    flows = run_cycle(st)
    assert flows["new_deposits"] == 0.0
    cinc = market.remunerate_capital(C0, rates.window(cfg.start, cfg.end).rates[0], cfg.Spr)
    expected = market.retained_capital_change(market.bank_net_result(cinc, st.banks.BN))
    assert st.banks.C - C0 == pytest.approx(expected, abs=1e-12)
    assert (st.investors.F == F0).all()


def test_strategy_shares_partition():
    r = simulate(SimConfig(n_banks=20, n_investors=200, end="1990-12"), 5)
    series = r.strategy_history["series"]
    for t in range(len(r.months)):
        assert sum(s["share"][t] for s in series.values()) <= 1.0 + 1e-12
    assert all(0 < s <= 1 for s in r.metrics["dominant_share"])


def test_single_strategy_share_is_one():
    from collections import Counter
    key = int(market.strategy_key(0.12, 0.3))
    s = track_dominant_strategies([Counter({key: 7})] * 3)["series"][str(key)]
    assert s["share"] == [1.0, 1.0, 1.0]
    assert (s["sr"], s["bn"]) == (0.12, 0.3)
    assert s["dominance"] == [[0, 2]]


def test_snapshot_before_first_placement_has_no_edges():
    cfg = SimConfig(n_banks=100, n_investors=1000, end="1975-12", snapshot_months=["1973-01", "1975-01"])
    r = simulate(cfg, 2)
    assert r.snapshots["1973-01"]["edges"] == []
    assert len(r.snapshots["1975-01"]["investors"]) == 10
    assert len(r.snapshots["1975-01"]["banks"]) == 1
    assert SimConfig().snapshot_fraction == 0.01


def test_snapshot_deterministic(small_cfg, rates):
    st1 = market.init_state(small_cfg, 9, rates.window(small_cfg.start, small_cfg.end))
    st2 = market.init_state(small_cfg, 9, rates.window(small_cfg.start, small_cfg.end))
    for _ in range(6):
        run_cycle(st1)
        run_cycle(st2)
    a, b = export_snapshot(st1, 0.2), export_snapshot(st2, 0.2)
    assert json.dumps(a) == json.dumps(b)
    assert a["edges"]


def test_singleton_batch(small_cfg):
    stats = run_batch(small_cfg, [4])
    assert sum(stats.histogram.values()) == 1
    assert len(stats.manifest_rows()) == 1


def test_batch_records_failing_seed(small_cfg, monkeypatch):
    real = engine.simulate

    def flaky(cfg, seed, **kw):
        if seed == 2:
            raise RuntimeError("boom")
        return real(cfg, seed, **kw)

    monkeypatch.setattr(engine, "simulate", flaky)
    stats = run_batch(small_cfg, [1, 2, 3])
    assert set(stats.crisis_counts) == {1, 3}
    assert "boom" in stats.errors[2]
    rows = stats.manifest_rows()
    assert [r["status"] for r in rows] == ["ok", "error", "ok"]


def test_batch_rejects_empty_seed_list(small_cfg):
    with pytest.raises(ValueError):
        run_batch(small_cfg, [])


def test_audit_trail_is_clean(small_cfg):
    _, st = simulate(small_cfg, 6, audit=True, keep_state=True)
    kinds = {a[0] for a in st.audit}
    assert {"investor_partition", "fs_bounds", "capital_identity", "vintage", "td_cap"} <= kinds
