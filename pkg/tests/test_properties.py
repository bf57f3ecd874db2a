import numpy as np
from hypothesis import HealthCheck, example, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from finecology import _kernels
from finecology.environment import compute_cluster_q
from finecology.market import (
    assign_bank_ratings, downside_risk, equal_frequency_buckets, funding_spread,
    interbank_losses, split_tranches,
)
from finecology.network import lscc, randomize, removal_sweep

from _oracles import brute_lscc, make_graph

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
money = st.floats(0.0, 1e6, allow_nan=False)


@FAST
@given(arrays(float, st.integers(1, 30), elements=money), st.integers(1, 20))
def test_tranches_partition_exactly(amount, nt):
    tr = split_tranches(amount, nt)
    assert tr.shape == (len(amount), nt)
    assert (tr.sum(axis=1) == amount).all()


@FAST
@given(st.floats(0, 1e4), st.floats(1e-6, 1e4), st.lists(st.floats(0, 0.2), min_size=1, max_size=10))
def test_spread_stays_within_rex_bounds(demand, supply, rex):
    lo, hi = min(rex), max(rex)
    fs = funding_spread(demand, supply, lo, hi, float(np.mean(rex)))
    assert lo - 1e-12 <= fs <= hi + 1e-12


@FAST
@given(arrays(float, st.integers(1, 60), elements=st.floats(0.01, 0.5)),
       arrays(float, 60, elements=st.floats(0.01, 0.5)))
def test_ratings_bounded(tcr, sr):
    rt = assign_bank_ratings(tcr, sr[: len(tcr)])
    assert rt.min() >= 1 and rt.max() <= 11


@FAST
@given(arrays(float, st.integers(1, 200), elements=st.floats(-1, 1)), st.integers(1, 12))
def test_buckets_equal_frequency(values, k):
    b = equal_frequency_buckets(values, k)
    counts = np.bincount(b, minlength=k + 1)[1:]
    used = counts[counts > 0]
    assert used.max() - used.min() <= 1
    # monotone: a larger value never lands in a lower bucket
    order = np.argsort(values, kind="stable")
    assert (np.diff(b[order]) >= 0).all()


@FAST
@given(arrays(float, (3, 24), elements=st.floats(-0.5, 0.5)), arrays(float, 3, elements=st.floats(0, 0.2)))
def test_downside_risk_nonnegative(ri, rex):
    q = downside_risk(ri, rex)
    assert (q >= 0).all()
    assert (downside_risk(np.maximum(ri, rex[:, None]), rex) == 0).all()


@FAST
@given(st.integers(1, 41), st.floats(-0.5, 0.5))
def test_cluster_q_is_a_probability(ls, mu):
    q = compute_cluster_q(ls, mu)
    assert 0 < q < 1
    if ls < 41:
        assert compute_cluster_q(ls + 1, mu) > q


@FAST
@given(arrays(float, 12, elements=st.floats(0, 100)), st.integers(0, 2**31))
# subnormal peer balances once made the pro-rata product underflow
@example(np.where(np.arange(12) == 5, 0.5, 5e-324), 0)
def test_interbank_losses_conserve_amount(ib, seed):
    rng = np.random.default_rng(seed)
    rt = rng.integers(1, 4, 12)
    bankrupt = rng.random(12) < 0.3
    lsib, unabsorbed = interbank_losses(ib, rt, bankrupt, ~bankrupt)
    lost = sum(ib[b] for b in np.flatnonzero(bankrupt) if b not in unabsorbed)
    assert np.isclose(lsib.sum(), lost, rtol=1e-9, atol=1e-9)
    assert (lsib[bankrupt] == 0).all()


@FAST
@given(st.integers(0, 2**31), st.integers(1, 15), st.integers(1, 400))
def test_deposit_placement_respects_headroom(seed, n_banks, n_tr):
    rng = np.random.default_rng(seed)
    lim = rng.uniform(0, 50, n_banks)
    td = lim * rng.uniform(0, 1, n_banks)
    amt = rng.uniform(0.01, 10, n_tr)
    placed = _kernels.allocate_deposits_kernel(
        amt, rng.integers(1, 12, n_tr), rng.integers(1, 12, n_banks), rng.random(n_banks) < 0.9,
        lim, td.copy(), np.array([0.8, 0.2, 0.1]), 11, seed)
    ok = placed >= 0
    new = np.bincount(placed[ok], weights=amt[ok], minlength=n_banks)
    assert (td + new <= lim + 1e-9).all()


def _edges(n):
    pair = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1])
    return st.lists(pair, max_size=4 * n, unique=True)


@st.composite
def digraphs(draw, max_n=25):
    n = draw(st.integers(1, max_n))
    return n, draw(_edges(n))


@FAST
@given(digraphs())
def test_lscc_equals_brute_force(graph):
    n, edges = graph
    adj = np.zeros((n, n), dtype=bool)
    for a, b in edges:
        adj[a, b] = True
    assert lscc(make_graph(n, edges)).tolist() == brute_lscc(adj).tolist()


@FAST
@given(digraphs(), st.integers(0, 500), st.integers(0, 2**40))
def test_swaps_keep_degrees_and_simplicity(graph, n_swaps, seed):
    n, edges = graph
    g = make_graph(n, edges)
    r = randomize(g, n_swaps, seed)
    assert (r.out_degree() == g.out_degree()).all()
    assert (r.in_degree() == g.in_degree()).all()
    assert (r.src != r.dst).all()
    assert len(set(zip(r.src.tolist(), r.dst.tolist()))) == r.n_edges


@FAST
@given(digraphs(), st.sampled_from(["sales", "degree"]))
def test_sweep_non_increasing(graph, order):
    n, edges = graph
    sw = removal_sweep(make_graph(n, edges), order, step=0.1)
    assert (np.diff(sw.Q) <= 0).all()
    assert sw.f[-1] == 1.0 and sw.Q[-1] == 0.0
