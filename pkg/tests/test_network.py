import numpy as np
import pytest

from finecology.network import (
    SECTORS, FitError, GenerationError, GraphIntegrityError, PlantedCluster, RemovalSweep,
    SyntheticParams, concentrations, contagion_trial, estimate_pc, fit_fc, generate_synthetic,
    lscc, lscc_size, parse_grid, randomize, read_graph, removal_order, removal_sweep,
    survivors_report, write_graph,
)
from finecology.network.contagion import contagion_start

from _oracles import brute_lscc, make_graph, random_digraph


# components

def test_isolated_node():
    assert lscc_size(make_graph(1, [])) == 1


def test_empty_graph():
    g = make_graph(0, [])
    assert len(lscc(g)) == 0


def test_directed_cycle():
    n = 7
    assert lscc_size(make_graph(n, [(i, (i + 1) % n) for i in range(n)])) == n


def test_path_has_singleton_lscc():
    assert lscc_size(make_graph(4, [(0, 1), (1, 2), (2, 3)])) == 1


@pytest.mark.parametrize("seed", range(10))
def test_lscc_matches_reachability_n50(seed):
    rng = np.random.default_rng(seed)
    g, adj = random_digraph(50, 2.0 / 50, rng)
    assert lscc(g).tolist() == brute_lscc(adj).tolist()


def test_lscc_respects_active_mask():
    g = make_graph(4, [(0, 1), (1, 0), (2, 3), (3, 2), (1, 2)])
    active = np.array([False, True, True, True])
    assert lscc(g, active).tolist() == [2, 3]


# graph files

def _write(tmp_path, nodes, edges):
    (tmp_path / "nodes.csv").write_text(nodes)
    (tmp_path / "edges.csv").write_text(edges)
    return tmp_path / "nodes.csv", tmp_path / "edges.csv"


NODES = "id,sales,sector,region\n1,10,construction,R1\n2,5,services,R2\n3,7,other,R1\n"


def test_read_write_round_trip(tmp_path):
    n, e = _write(tmp_path, NODES, "src,dst\n1,2\n2,3\n3,1\n")
    g = read_graph(n, e)
    assert (g.n, g.n_edges) == (3, 3)
    write_graph(g, tmp_path / "n2.csv", tmp_path / "e2.csv")
    g2 = read_graph(tmp_path / "n2.csv", tmp_path / "e2.csv")
    assert g2.ids.tolist() == g.ids.tolist()
    assert sorted(zip(g2.src, g2.dst)) == sorted(zip(g.src, g.dst))


@pytest.mark.parametrize("edges,needle", [
    ("src,dst\n1,2\n2,9\n", "edges.csv:3"),
    ("src,dst\n1,1\n", "self"),
    ("src,dst\n1,2\n1,2\n", "duplicate"),
    ("a,b\n1,2\n", "header"),
])
def test_bad_edges(tmp_path, edges, needle):
    n, e = _write(tmp_path, NODES, edges)
    with pytest.raises(GraphIntegrityError, match=needle):
        read_graph(n, e)


def test_graph_is_read_only(tmp_path):
    g = read_graph(*_write(tmp_path, NODES, "src,dst\n1,2\n"))
    with pytest.raises(ValueError):
        g.src[0] = 2


# removal sweeps

def test_sweep_starts_at_intact_lscc():
    rng = np.random.default_rng(1)
    g, adj = random_digraph(80, 3.0 / 80, rng)
    sw = removal_sweep(g, "sales", step=0.05)
    assert sw.f[0] == 0.0
    assert sw.Q[0] == pytest.approx(len(brute_lscc(adj)) / 80)


def test_complete_digraph_shrinks_linearly():
    n = 20
    g = make_graph(n, [(i, j) for i in range(n) for j in range(n) if i != j])
    sw = removal_sweep(g, "degree", step=1.0 / n)
    for k, q in zip(sw.n_removed, sw.Q):
        if k <= n - 2:
            assert q == pytest.approx((n - k) / n)
        else:
            assert q == 0.0


def test_three_cycle_collapses_after_first_removal():
    sw = removal_sweep(make_graph(3, [(0, 1), (1, 2), (2, 0)]), "degree", step=1 / 3)
    assert sw.Q[0] == 1.0
    assert (sw.Q[1:] == 0).all()


def test_sweep_is_non_increasing():
    g = generate_synthetic(SyntheticParams(n=1500), seed=2)
    for order in ("sales", "degree"):
        sw = removal_sweep(g, order, step=0.01)
        assert (np.diff(sw.Q) <= 0).all()


def test_removal_order_ties_by_id():
    g = make_graph(4, [], sales=np.array([5.0, 7.0, 5.0, 7.0]))
    assert removal_order(g, "sales").tolist() == [1, 3, 0, 2]
    with pytest.raises(ValueError):
        removal_order(g, "random")


def _synthetic_sweep(Q_of_f, step=0.002):
    f = np.round(np.arange(0, 1 + step / 2, step), 12)
    Q = Q_of_f(f)
    return RemovalSweep("sales", f, Q, np.arange(len(f)), np.arange(len(f)))


def test_fit_recovers_power_law():
    sw = _synthetic_sweep(lambda f: np.sqrt(np.clip(0.3 - f, 0, None)))
    fit = fit_fc(sw)
    assert abs(fit.f_c - 0.3) <= 0.002
    assert abs(fit.exponent - 0.5) <= 0.05


def test_fit_on_flat_sweep_fails():
    with pytest.raises(FitError):
        fit_fc(_synthetic_sweep(lambda f: np.ones_like(f)))


def test_fit_lies_where_q_first_drops():
    g = generate_synthetic(SyntheticParams(n=3000), seed=4)
    sw = removal_sweep(g, "sales")
    fit = fit_fc(sw)
    first = sw.f[np.flatnonzero(sw.Q < 0.01 * sw.Q[0])[0]]
    assert fit.fit_window[1] < fit.f_c <= first


# contagion

def _star():
    return make_graph(11, [(0, i) for i in range(1, 11)])


def test_contagion_starts_at_hub():
    assert contagion_start(_star()) == 0


def test_zero_probability_removes_only_seed_node():
    g = generate_synthetic(SyntheticParams(n=500), seed=1)
    assert all(contagion_trial(g, 0.0, s) == 1 / 500 for s in range(20))


def test_certain_propagation_removes_weak_component():
    # two weak components: a 4-node chain around the hub and a separate pair
    g = make_graph(7, [(0, 1), (2, 0), (3, 2), (0, 4), (5, 6)])
    assert contagion_trial(g, 1.0, 3) == pytest.approx(5 / 7)


def test_star_expected_removal():
    vals = [contagion_trial(_star(), 0.5, s) for s in range(4000)]
    assert np.mean(vals) == pytest.approx(6 / 11, abs=0.01)


def test_edgeless_graph_is_unbounded():
    est = estimate_pc(make_graph(50, []), parse_grid("0:0.25:1"), trials=5)
    assert est.unbounded and est.p_c is None


def test_parse_grid():
    assert parse_grid("0:0.05:1").tolist() == pytest.approx(np.linspace(0, 1, 21).tolist())
    with pytest.raises(ValueError):
        parse_grid("0:1")


def test_spanning_probability_rises_with_p():
    g = generate_synthetic(SyntheticParams(n=2000), seed=3)
    est = estimate_pc(g, parse_grid("0:0.05:0.5"), trials=30, seed=1)
    assert est.trend_pvalue < 0.05
    assert not est.unbounded


# randomization

def test_zero_swaps_is_identity():
    g = generate_synthetic(SyntheticParams(n=300), seed=0)
    r = randomize(g, n_swaps=0)
    assert r.src.tolist() == g.src.tolist() and r.dst.tolist() == g.dst.tolist()


def test_swaps_preserve_degrees_and_simplicity():
    g = generate_synthetic(SyntheticParams(n=2000), seed=5)
    r, done = randomize(g, seed=2, return_count=True)
    assert done > 0
    assert (r.out_degree() == g.out_degree()).all()
    assert (r.in_degree() == g.in_degree()).all()
    assert (r.src != r.dst).all()
    assert len(set(zip(r.src.tolist(), r.dst.tolist()))) == r.n_edges
    assert set(zip(r.src.tolist(), r.dst.tolist())) != set(zip(g.src.tolist(), g.dst.tolist()))


def test_randomize_is_seeded():
    g = generate_synthetic(SyntheticParams(n=500), seed=5)
    assert randomize(g, seed=9).dst.tolist() == randomize(g, seed=9).dst.tolist()


# synthetic generator

def test_sector_shares():
    p = SyntheticParams(n=1000)
    g = generate_synthetic(p, seed=7)
    total = sum(p.sector_mix.values())
    for s, w in p.sector_mix.items():
        assert abs((g.sector == s).mean() - w / total) <= 0.02
    assert set(g.sector.tolist()) <= set(SECTORS)


def test_planted_density_binomial():
    size, dens = 30, 0.5
    g = generate_synthetic(SyntheticParams(n=1000, planted=(PlantedCluster(size, dens),)), seed=8)
    members = np.array(g.meta["planted"][0]["members"])
    inside = np.isin(g.src, members) & np.isin(g.dst, members)
    pairs = size * (size - 1)
    sd = np.sqrt(pairs * dens * (1 - dens))
    assert abs(inside.sum() - pairs * dens) <= 4 * sd + 3
    assert (g.sector[members] == "construction").all()
    assert (g.region[members] == "R00").all()


def test_single_node_graph():
    g = generate_synthetic(SyntheticParams(n=1), seed=0)
    assert (g.n, g.n_edges) == (1, 0)


def test_infeasible_requests():
    with pytest.raises(GenerationError):
        generate_synthetic(SyntheticParams(n=5, mean_degree=20), seed=0)
    with pytest.raises(GenerationError):
        generate_synthetic(SyntheticParams(n=20, planted=(PlantedCluster(size=30),)), seed=0)
    with pytest.raises(GenerationError):
        generate_synthetic(SyntheticParams(n=0), seed=0)


# survivor attribution

def test_uniform_attributes_give_flat_concentrations():
    rng = np.random.default_rng(0)
    n = 4000
    g0, _ = random_digraph(n, 4.0 / n, rng)
    sectors = rng.choice(list(SECTORS), n)
    regions = rng.choice(["A", "B", "C", "D"], n)
    g = type(g0)(g0.ids, g0.sales, sectors, regions, g0.src, g0.dst)
    members = lscc(g)
    conc = concentrations(g, members)
    for table in (conc["sector"], conc["region"]):
        assert all(abs(v - 1) < 0.15 for v in table.values())


def test_report_flags_planted_cell():
    p = SyntheticParams(n=4000, planted=(PlantedCluster(size=40, density=0.15, region="R03"),))
    g = generate_synthetic(p, seed=11)
    sw = removal_sweep(g, "sales")
    fit = fit_fc(sw)
    rep = survivors_report(g, sw, fit.f_c)
    flagged = {(f["kind"], f["key"]) for f in rep["flags"]}
    assert ("cell", "construction|R03") in flagged
    assert rep["f_used"] < fit.f_c
    assert all({"id", "sector", "region", "sales"} <= set(s) for s in rep["survivors"])
