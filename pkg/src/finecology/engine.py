"""Cycle orchestration, crisis detection, ensembles and data exports."""

from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from . import evolution, market
from .config import SimConfig
from .environment import RateDataError, RateSeries, load_rates, month_index, month_label
from .market import ACTIVE, ASSISTED, BANKRUPT, MarketState

logger = logging.getLogger(__name__)

METRIC_NAMES = (
    "n_active", "n_assisted", "n_bankrupt", "failures", "assistances",
    "distinct_strategies", "dominant_share", "total_deposits", "total_capital",
    "total_wealth", "mean_rex", "idle_funds", "loan_share",
)


def resolve_rates(cfg: SimConfig) -> RateSeries:
    return load_rates(cfg.rates_path).window(cfg.start, cfg.end)


def run_cycle(state: MarketState) -> dict[str, Any]:
    """Advance ``state`` by one month; returns the month's flow summary."""
    cfg, banks, inv = state.cfg, state.banks, state.investors
    t = state.t
    if t >= state.horizon:
        raise RateDataError(f"no base rate for cycle {t} (horizon {state.horizon})")
    ir = state.ir
    alive_at_start = int(banks.alive.sum())
    banks.reset_accumulators()
    inv.reset_accumulators()

    # once every bank is gone the month still runs so investor books close
    if alive_at_start:
        banks.RT = market.assign_bank_ratings(banks.TCR, banks.SR, banks.alive, cfg.n_ratings)
    market.update_investor_appetite(state)

    new_inv, new_amt = market.open_investor_tranches(state)
    tr_inv = np.concatenate([state.idle_inv, new_inv])
    tr_amt = np.concatenate([state.idle_amount, new_amt])
    tr_vin = np.concatenate([state.idle_vintage, np.full(len(new_inv), t, dtype=np.int64)])

    market.run_funding_market(state, tr_inv, tr_amt)
    lim = banks.lim
    td_before = banks.TD.copy()
    new_dep = market.allocate_deposits(state, tr_inv, tr_amt, tr_vin, market.substream(state.seed, t, market.STREAM_DEPOSITS))
    if state.audit is not None:
        got = new_dep > 0
        excess = (banks.TD - lim)[got]
        state.audit.append(("td_cap", t, float(excess.max(initial=-np.inf)),
                            float((banks.TD - np.maximum(lim, td_before)).max(initial=-np.inf))))

    banks.TFS, banks.tfs_flag = market.total_funding_spread(banks.fs_weight, banks.TD, banks.TFS)
    banks.BK = market.compute_benchmark_return(banks.C, banks.SR, banks.BN, banks.TD, banks.CB, ir)

    market.reprice_clusters(state)
    tr_bank, tr_lend = market.open_lending_tranches(new_dep, cfg.n_tranches_lending)
    if state.audit is not None and len(tr_lend):
        sums = np.bincount(tr_bank, weights=tr_lend, minlength=banks.n)
        state.audit.append(("lending_partition", t, float(np.abs(sums - new_dep).max())))
    market.allocate_lending(state, tr_bank, tr_lend, market.substream(state.seed, t, market.STREAM_LENDING))

    market.redeem_loans(state)
    banks.Cinc = np.where(banks.alive, market.remunerate_capital(banks.C, ir, cfg.Spr), 0.0)
    failed, assisted = market.test_solvency(state)
    if len(failed):
        market.write_off_failed_deposits(state, failed)
    market.apply_interbank_losses(state, failed)
    market.redeem_bank_borrowing(state)
    market.close_books(state)

    if cfg.evolution.enabled:
        apply_evolution(state)

    state.t += 1
    return {
        "failures": len(failed),
        "assistances": len(assisted),
        "alive_at_start": alive_at_start,
        "new_deposits": float(new_dep.sum()),
    }


def apply_evolution(state: MarketState) -> None:
    cfg, banks, inv = state.cfg, state.banks, state.investors
    evo = cfg.evolution
    inv.Rex = evolution.disseminate_culture(
        inv.Rex, inv.ret_hist.sum(axis=1), state.ir, evo,
        market.substream(state.seed, state.t, market.STREAM_DISSEMINATION),
    )
    rng = market.substream(state.seed, state.t, market.STREAM_INFECTION)
    sr, bn, changed = evolution.infect_strategies(
        banks.SR, banks.BN, banks.ninc_hist.sum(axis=1), banks.status == ACTIVE,
        rng, evo.infection_rate_monthly,
    )
    banks.SR, banks.BN = sr, bn


# --------------------------------------------------------------------------
# crises


def detect_crises(failure_series, population, threshold: float = 0.02, window: int = 12) -> list[int]:
    """Months opening a crisis.

    A month is flagged when failures plus assistances over the trailing
    ``window`` months exceed ``threshold`` times the bank population at the
    window start (``population`` may be a scalar or a per-month series).
    Consecutive flagged months form one crisis dated at its first month.
    """
    events = np.asarray(failure_series, dtype=float)
    n = len(events)
    if n == 0:
        return []
    pop = np.broadcast_to(np.asarray(population, dtype=float), (n,))
    csum = np.concatenate([[0.0], np.cumsum(events)])
    starts = np.maximum(np.arange(n) - window + 1, 0)
    rolling = csum[1:] - csum[starts]
    flagged = rolling > threshold * pop[starts]
    return [int(t) for t in range(n) if flagged[t] and (t == 0 or not flagged[t - 1])]


# --------------------------------------------------------------------------
# runs


@dataclass
class RunResult:
    seed: int
    config: dict[str, Any]
    months: list[str]
    metrics: dict[str, list]
    crisis_months: list[int]
    strategy_history: dict[str, Any]
    snapshots: dict[str, dict] = field(default_factory=dict)
    events: list = field(default_factory=list)

    @property
    def n_crises(self) -> int:
        return len(self.crisis_months)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "config": self.config,
            "months": self.months,
            "metrics": self.metrics,
            "crisis_months": self.crisis_months,
            "crisis_dates": [self.months[t] for t in self.crisis_months],
            "strategy_history": self.strategy_history,
            "events": self.events,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


def strategy_census(state: MarketState) -> Counter:
    keys = state.banks.strategy_keys()[state.banks.alive]
    return Counter(keys.tolist())


def track_dominant_strategies(census: list[Counter]) -> dict[str, Any]:
    """Share-of-operating-banks series for every strategy that is ever the most common.

    Returns ``{"dominant": [key per cycle], "series": {key: {...}}}`` where each
    series entry carries the (SR, BN) pair, the share per cycle and the
    ``[start, end]`` cycle intervals (inclusive) during which it dominated.
    """
    dominant = []
    for counts in census:
        if not counts:
            dominant.append(None)
            continue
        # most common, ties to the smallest key
        best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]
        dominant.append(best)
    keys = sorted({k for k in dominant if k is not None})
    series = {}
    for key in keys:
        share = []
        for counts in census:
            total = sum(counts.values())
            share.append(counts.get(key, 0) / total if total else 0.0)
        intervals, start = [], None
        for t, d in enumerate(dominant + [None]):
            if d == key and start is None:
                start = t
            elif d != key and start is not None:
                intervals.append([start, t - 1])
                start = None
        sr, bn = market.decode_strategy(key)
        series[str(key)] = {"sr": sr, "bn": bn, "share": share, "dominance": intervals}
    return {"dominant": [None if d is None else str(d) for d in dominant], "series": series}


def export_snapshot(state: MarketState, fraction: float | None = None) -> dict[str, Any]:
    """Random sample of investors and banks with the live deposits linking them."""
    cfg, banks, inv = state.cfg, state.banks, state.investors
    fraction = cfg.snapshot_fraction if fraction is None else fraction
    rng = market.substream(state.seed, state.t, market.STREAM_SNAPSHOT)
    n_i = max(1, int(round(fraction * inv.n)))
    alive = np.flatnonzero(banks.alive)
    n_b = min(len(alive), max(1, int(round(fraction * banks.n))))
    s_inv = np.sort(rng.choice(inv.n, n_i, replace=False))
    s_bank = np.sort(rng.choice(alive, n_b, replace=False)) if n_b else np.zeros(0, dtype=np.int64)
    counts = strategy_census(state)
    top = [k for k, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:3]]
    keys = banks.strategy_keys()
    edges: dict[tuple[int, int], float] = {}
    live = state.deposits.live()
    if live:
        sel = np.isin(live["inv"], s_inv) & np.isin(live["bank"], s_bank)
        for i, b, a in zip(live["inv"][sel], live["bank"][sel], live["amount"][sel]):
            edges[(int(i), int(b))] = edges.get((int(i), int(b)), 0.0) + float(a)
    return {
        "month": month_label(int(state.rates.months[min(state.t, state.horizon - 1)])),
        "investors": [{"id": int(i), "wealth": float(inv.F[i]), "q": float(inv.q[i])} for i in s_inv],
        "banks": [
            {"id": int(b), "deposits": float(banks.TD[b]),
             "strategy_rank": top.index(int(keys[b])) + 1 if int(keys[b]) in top else 0}
            for b in s_bank
        ],
        "edges": [{"investor": i, "bank": b, "amount": a} for (i, b), a in sorted(edges.items())],
    }


def snapshot_csv(snapshot: dict[str, Any]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "id", "size", "attr", "edge_src", "edge_dst"])
    for row in snapshot["investors"]:
        w.writerow(["investor", f"i{row['id']}", repr(row["wealth"]), repr(row["q"]), "", ""])
    for row in snapshot["banks"]:
        w.writerow(["bank", f"b{row['id']}", repr(row["deposits"]), row["strategy_rank"], "", ""])
    for row in snapshot["edges"]:
        w.writerow(["edge", "", repr(row["amount"]), "", f"i{row['investor']}", f"b{row['bank']}"])
    return buf.getvalue()


def simulate(cfg: SimConfig, seed: int, rates: RateSeries | None = None, audit: bool = False,
             keep_state: bool = False):
    """Run one realisation over the configured horizon.

    Returns a :class:`RunResult`; with ``keep_state`` a ``(result, state)`` pair.
    """
    rates = resolve_rates(cfg) if rates is None else rates
    state = market.init_state(cfg, seed, rates, audit=audit)
    metrics: dict[str, list] = {name: [] for name in METRIC_NAMES}
    census: list[Counter] = []
    alive_start: list[int] = []
    snap_at = {}
    for label in cfg.snapshot_months:
        idx = month_index(label) - int(rates.months[0])
        if 0 <= idx < len(rates):
            snap_at[idx] = label
    snapshots = {}
    banks, inv = state.banks, state.investors
    for t in range(len(rates)):
        if t in snap_at:
            snapshots[snap_at[t]] = export_snapshot(state)
        flows = run_cycle(state)
        alive_start.append(flows["alive_at_start"])
        counts = strategy_census(state)
        census.append(counts)
        n_alive = int(banks.alive.sum())
        metrics["n_active"].append(int((banks.status == ACTIVE).sum()))
        metrics["n_assisted"].append(int((banks.status == ASSISTED).sum()))
        metrics["n_bankrupt"].append(int((banks.status == BANKRUPT).sum()))
        metrics["failures"].append(flows["failures"])
        metrics["assistances"].append(flows["assistances"])
        metrics["distinct_strategies"].append(len(counts))
        metrics["dominant_share"].append(max(counts.values()) / n_alive if n_alive else 0.0)
        metrics["total_deposits"].append(float(banks.TD[banks.alive].sum()))
        metrics["total_capital"].append(float(banks.C[banks.alive].sum()))
        metrics["total_wealth"].append(float(inv.F.sum()))
        metrics["mean_rex"].append(float(inv.Rex.mean()))
        metrics["idle_funds"].append(float(state.idle_amount.sum()))
        loans = float(banks.L[banks.alive].sum())
        td = metrics["total_deposits"][-1]
        metrics["loan_share"].append(loans / td if td > 0 else 0.0)
    events = np.add(metrics["failures"], metrics["assistances"])
    crises = detect_crises(events, alive_start, cfg.crisis_threshold)
    result = RunResult(
        seed=int(seed), config=cfg.to_dict(), months=rates.labels, metrics=metrics,
        crisis_months=crises, strategy_history=track_dominant_strategies(census),
        snapshots=snapshots, events=state.events,
    )
    if keep_state:
        return result, state
    return result


# --------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleStats:
    evolution: bool
    seeds: list[int]
    crisis_counts: dict[int, int]
    crisis_months: dict[int, list[int]]
    errors: dict[int, str]
    months: list[str]

    @property
    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.crisis_counts.values()).items()))

    @property
    def mean_crises(self) -> float:
        vals = list(self.crisis_counts.values())
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def modal_count(self) -> int | None:
        hist = self.histogram
        if not hist:
            return None
        return max(hist.items(), key=lambda kv: (kv[1], -kv[0]))[0]

    def timing(self) -> dict[int, dict[int, list[int]]]:
        """Crisis months grouped by realised crisis count, then by crisis index."""
        out: dict[int, dict[int, list[int]]] = {}
        for seed in sorted(self.crisis_months):
            months = self.crisis_months[seed]
            slot = out.setdefault(len(months), {})
            for k, m in enumerate(months):
                slot.setdefault(k, []).append(m)
        return out

    def histogram_csv(self) -> str:
        lines = ["crises,count"] + [f"{k},{v}" for k, v in self.histogram.items()]
        return "\n".join(lines) + "\n"

    def timing_csv(self) -> str:
        lines = ["seed,crisis_index,month"]
        for seed in sorted(self.crisis_months):
            for k, m in enumerate(self.crisis_months[seed]):
                lines.append(f"{seed},{k},{self.months[m]}")
        return "\n".join(lines) + "\n"

    def manifest_rows(self) -> list[dict[str, Any]]:
        return [
            {"seed": s, "status": "error" if s in self.errors else "ok",
             "crises": self.crisis_counts.get(s, ""), "error": self.errors.get(s, "")}
            for s in self.seeds
        ]


def _run_one(args) -> tuple[int, list[int] | None, str | None]:
    cfg_dict, seed, rates = args
    try:
        cfg = SimConfig.from_dict(cfg_dict)
        res = simulate(cfg, seed, rates=rates)
        return seed, res.crisis_months, None
    except Exception as exc:  # reported per seed, the batch carries on
        logger.exception("seed %d failed", seed)
        return seed, None, f"{type(exc).__name__}: {exc}"


def run_batch(cfg: SimConfig, seeds: Iterable[int], workers: int = 1,
              evolution: bool | None = None) -> EnsembleStats:
    """One simulation per seed; aggregation does not depend on completion order."""
    seeds = sorted({int(s) for s in seeds})
    if not seeds:
        raise ValueError("run_batch needs at least one seed")
    cfg_dict = cfg.to_dict()
    if evolution is not None:
        cfg_dict["evolution"]["enabled"] = bool(evolution)
    rates = resolve_rates(cfg)
    jobs = [(cfg_dict, s, rates) for s in seeds]
    if workers > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers) as pool:
            results = pool.map(_run_one, jobs, chunksize=1)
    else:
        results = [_run_one(j) for j in jobs]
    counts, months, errors = {}, {}, {}
    for seed, crisis, err in results:
        if err is not None:
            errors[seed] = err
        else:
            counts[seed] = len(crisis)
            months[seed] = crisis
    return EnsembleStats(
        evolution=bool(cfg_dict["evolution"]["enabled"]), seeds=seeds, crisis_counts=counts,
        crisis_months=months, errors=errors, months=rates.labels,
    )
