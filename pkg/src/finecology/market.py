"""Bank / investor / loan-cluster market under conventional dynamics.

Agents are stored column-wise (one numpy array per attribute) so that a
cycle over hundreds of banks and thousands of investors stays cheap. The
step functions below follow the monthly cycle in order; the engine module
strings them together.

Status codes for banks: ``ACTIVE``, ``ASSISTED`` (no funding, may return)
and ``BANKRUPT`` (removed from all later operations).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import SimConfig
from .environment import RateSeries, cluster_q_vector, price_cluster

logger = logging.getLogger(__name__)

ACTIVE, ASSISTED, BANKRUPT = 0, 1, 2

# sub-stream ids for the per-cycle random generators
STREAM_INIT, STREAM_DEPOSITS, STREAM_LENDING, STREAM_INFECTION, STREAM_SNAPSHOT, STREAM_DISSEMINATION = range(6)


class EmptyPopulationError(ValueError):
    pass


class InvalidConfigurationError(ValueError):
    pass


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent counter-based generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in key]])
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# agent containers


@dataclass
class Banks:
    C: np.ndarray
    TCR: np.ndarray
    SR: np.ndarray
    BN: np.ndarray
    RT: np.ndarray
    TD: np.ndarray
    TFS: np.ndarray
    CB: np.ndarray
    BK: np.ndarray
    L: np.ndarray
    fs_weight: np.ndarray
    status: np.ndarray
    tfs_flag: np.ndarray
    had_funding: np.ndarray
    ninc_hist: np.ndarray
    # cycle accumulators
    Inc: np.ndarray
    Loss: np.ndarray
    Lsib: np.ndarray
    Bor: np.ndarray
    Cinc: np.ndarray
    NetRes: np.ndarray
    Ninc: np.ndarray

    @property
    def n(self) -> int:
        return len(self.C)

    @property
    def alive(self) -> np.ndarray:
        return self.status != BANKRUPT

    @property
    def lim(self) -> np.ndarray:
        return compute_borrowing_limit(self.C, self.TCR)

    @property
    def IB(self) -> np.ndarray:
        return np.maximum(self.TD - self.L, 0.0)

    def strategy_keys(self) -> np.ndarray:
        """Strategy identity per bank: (SR, BN) rounded to 4 decimals, packed."""
        return strategy_key(self.SR, self.BN)

    def reset_accumulators(self) -> None:
        for name in ("Inc", "Loss", "Lsib", "Bor", "Cinc", "NetRes", "Ninc"):
            getattr(self, name)[:] = 0.0


@dataclass
class Investors:
    F: np.ndarray
    Rex: np.ndarray
    q: np.ndarray
    AG: np.ndarray
    dF_hist: np.ndarray  # (n, t_inv) ring of past new-fund amounts
    ri_hist: np.ndarray  # (n, m) ring of monthly actual returns, nan = no entry
    ret_hist: np.ndarray  # (n, m) ring of monthly (non-annualised) returns
    placed: np.ndarray  # live principal per investor
    accrual: np.ndarray  # live sum of principal * CB per investor
    Incv: np.ndarray
    Lossv: np.ndarray

    @property
    def n(self) -> int:
        return len(self.F)

    def reset_accumulators(self) -> None:
        self.Incv[:] = 0.0
        self.Lossv[:] = 0.0


@dataclass
class LoanClusters:
    q: np.ndarray
    LP: np.ndarray
    mrk: np.ndarray
    TL: np.ndarray

    @property
    def n(self) -> int:
        return len(self.q)


@dataclass
class Ledger:
    """Records grouped by maturity month; each entry is a dict of arrays."""

    by_maturity: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)

    def add(self, maturity: int, **columns: np.ndarray) -> None:
        if len(next(iter(columns.values()))) == 0:
            return
        cur = self.by_maturity.get(maturity)
        if cur is None:
            self.by_maturity[maturity] = {k: np.asarray(v).copy() for k, v in columns.items()}
        else:
            for k, v in columns.items():
                cur[k] = np.concatenate([cur[k], v])

    def pop(self, maturity: int) -> dict[str, np.ndarray] | None:
        return self.by_maturity.pop(maturity, None)

    def live(self) -> dict[str, np.ndarray]:
        if not self.by_maturity:
            return {}
        keys = next(iter(self.by_maturity.values())).keys()
        return {k: np.concatenate([rec[k] for rec in self.by_maturity.values()]) for k in keys}


@dataclass
class MarketState:
    cfg: SimConfig
    seed: int
    rates: RateSeries
    banks: Banks
    investors: Investors
    clusters: LoanClusters
    deposits: Ledger
    lending: Ledger
    # idle investor tranches carried to later cycles
    idle_inv: np.ndarray
    idle_amount: np.ndarray
    idle_vintage: np.ndarray
    fs_by_group: np.ndarray
    t: int = 0
    events: list = field(default_factory=list)
    audit: list | None = None

    @property
    def horizon(self) -> int:
        return len(self.rates)

    @property
    def ir(self) -> float:
        return float(self.rates.rates[self.t])


def strategy_key(sr, bn):
    return np.round(np.asarray(sr) * 1e4).astype(np.int64) * 100000 + np.round(
        np.asarray(bn) * 1e4
    ).astype(np.int64)


def decode_strategy(key: int) -> tuple[float, float]:
    return (key // 100000) / 1e4, (key % 100000) / 1e4


def init_state(cfg: SimConfig, seed: int, rates: RateSeries, audit: bool = False) -> MarketState:
    cfg.validate()
    rng = substream(seed, 0, STREAM_INIT)
    nb, ni, nc = cfg.n_banks, cfg.n_investors, cfg.n_clusters
    zb = lambda: np.zeros(nb)  # noqa: E731
    C = rng.lognormal(np.log(cfg.bank_capital_median), cfg.bank_capital_sigma, nb)
    banks = Banks(
        C=C,
        TCR=rng.uniform(*cfg.tcr_range, nb),
        SR=np.round(rng.uniform(*cfg.sr_range, nb), 4),
        BN=np.round(rng.uniform(*cfg.bn_range, nb), 4),
        RT=np.ones(nb, dtype=np.int64),
        TD=zb(), TFS=zb(), CB=zb(), BK=zb(), L=zb(), fs_weight=zb(),
        status=np.full(nb, ACTIVE, dtype=np.int8),
        tfs_flag=np.zeros(nb, dtype=bool),
        had_funding=np.zeros(nb, dtype=bool),
        ninc_hist=np.zeros((nb, cfg.evolution.donor_window)),
        Inc=zb(), Loss=zb(), Lsib=zb(), Bor=zb(), Cinc=zb(), NetRes=zb(), Ninc=zb(),
    )
    F = rng.lognormal(np.log(cfg.investor_wealth_median), cfg.investor_wealth_sigma, ni)
    investors = Investors(
        F=F,
        Rex=rng.uniform(*cfg.rex_range, ni),
        q=np.zeros(ni),
        AG=np.ones(ni, dtype=np.int64),
        # staggered entry: as if 1/t_inv of wealth had been committed in each prior month
        dF_hist=(np.repeat(F[:, None] / cfg.t_inv, cfg.t_inv, axis=1) if cfg.staggered_entry
                 else np.zeros((ni, cfg.t_inv))),
        ri_hist=np.full((ni, cfg.m), np.nan),
        ret_hist=np.zeros((ni, cfg.m)),
        placed=np.zeros(ni),
        accrual=np.zeros(ni),
        Incv=np.zeros(ni),
        Lossv=np.zeros(ni),
    )
    mrk = np.full(nc, cfg.market_capacity_ratio * F.sum() / nc)
    clusters = LoanClusters(q=np.zeros(nc), LP=np.zeros(nc), mrk=mrk, TL=np.zeros(nc))
    fs0 = float(np.average(investors.Rex, weights=F))
    return MarketState(
        cfg=cfg, seed=int(seed), rates=rates, banks=banks, investors=investors,
        clusters=clusters, deposits=Ledger(), lending=Ledger(),
        idle_inv=np.zeros(0, dtype=np.int64), idle_amount=np.zeros(0),
        idle_vintage=np.zeros(0, dtype=np.int64),
        fs_by_group=np.full(cfg.n_appetite_groups + 1, fs0),
        audit=[] if audit else None,
    )


# --------------------------------------------------------------------------
# step 1-3: ratings and appetite groups


def equal_frequency_buckets(values: np.ndarray, n_buckets: int, descending: bool = False) -> np.ndarray:
    """1-based equal-frequency bucket per element; ties keep index order."""
    n = len(values)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    key = -values if descending else values
    order = np.argsort(key, kind="stable")
    buckets = np.empty(n, dtype=np.int64)
    buckets[order] = np.arange(n) * n_buckets // n + 1
    return buckets


def assign_bank_ratings(tcr: np.ndarray, sr: np.ndarray, alive: np.ndarray | None = None,
                        n_ratings: int = 10) -> np.ndarray:
    """Ratings 1..n_ratings by descending TCR, one notch down when SR is below mean.

    Entries for banks outside ``alive`` are 0.
    """
    tcr = np.asarray(tcr, dtype=float)
    sr = np.asarray(sr, dtype=float)
    if alive is None:
        alive = np.ones(len(tcr), dtype=bool)
    idx = np.flatnonzero(alive)
    if len(idx) == 0:
        raise EmptyPopulationError("no active banks to rate")
    rt = np.zeros(len(tcr), dtype=np.int64)
    r = equal_frequency_buckets(tcr[idx], n_ratings, descending=True)
    r += sr[idx] < sr[idx].mean()
    rt[idx] = r
    return rt


def downside_risk(ri_window: np.ndarray, rex: np.ndarray) -> np.ndarray:
    """sqrt(mean(min(Ri - Rex, 0)^2)) per row, ignoring nan entries; 0 for empty rows."""
    ri_window = np.atleast_2d(ri_window)
    valid = ~np.isnan(ri_window)
    diff = np.where(valid, np.minimum(ri_window - np.asarray(rex)[:, None], 0.0), 0.0)
    count = valid.sum(axis=1)
    out = np.zeros(ri_window.shape[0])
    has = count > 0
    out[has] = np.sqrt((diff[has] ** 2).sum(axis=1) / count[has])
    return out


def update_investor_appetite(state: MarketState) -> None:
    inv = state.investors
    inv.q = downside_risk(inv.ri_hist, inv.Rex)
    inv.AG = equal_frequency_buckets(inv.q, state.cfg.n_appetite_groups)


# --------------------------------------------------------------------------
# step 4: investor tranching


def split_tranches(amount: np.ndarray, nt: int) -> np.ndarray:
    """(len(amount), nt) equal tranches; the last absorbs rounding so rows sum exactly.

    Tranches are snapped to multiples of the amount's ulp, which makes every
    partial sum representable, so any summation order gives back ``amount``.
    """
    amount = np.asarray(amount, dtype=float)
    ulp = np.spacing(np.abs(amount))
    unit = np.floor(amount / nt / ulp) * ulp
    tr = np.repeat(unit[:, None], nt, axis=1)
    tr[:, -1] = amount - unit * (nt - 1)
    return tr


def new_investable_funds(F: np.ndarray, dF_hist: np.ndarray, t: int) -> np.ndarray:
    """F(t) minus the new funds of the previous t_inv - 1 months, clamped at 0."""
    t_inv = dF_hist.shape[1]
    window = dF_hist.sum(axis=1) - dF_hist[:, t % t_inv]
    return np.maximum(F - window, 0.0)


def open_investor_tranches(state: MarketState) -> tuple[np.ndarray, np.ndarray]:
    """Record this month's new funds and return (investor, amount) of new tranches."""
    cfg, inv, t = state.cfg, state.investors, state.t
    dF = new_investable_funds(inv.F, inv.dF_hist, t)
    inv.dF_hist[:, t % cfg.t_inv] = dF
    nt = cfg.n_tranches_investor
    owners = np.flatnonzero(dF > 0)
    tr = split_tranches(dF[owners], nt)
    if state.audit is not None:
        state.audit.append(("investor_partition", t, float(np.abs(tr.sum(axis=1) - dF[owners]).max(initial=0.0))))
    return np.repeat(owners, nt), tr.ravel()


# --------------------------------------------------------------------------
# step 5-6: limits and funding market


def compute_borrowing_limit(C, TCR):
    TCR = np.asarray(TCR, dtype=float)
    if np.any(TCR <= 0):
        raise InvalidConfigurationError("target capital ratio must be positive")
    return np.asarray(C) * (1.0 / TCR - 1.0)


def funding_spread(demand: float, supply: float, rex_min: float, rex_max: float, rex_wa: float) -> float:
    """Group funding spread r(y - z) + w; nan when both sides are empty."""
    if demand <= 0 and supply <= 0:
        return float("nan")
    if demand <= supply:
        r = demand / supply
        z, y, w = rex_min, rex_wa, rex_min
    else:
        r = -supply / demand
        z, y, w = rex_wa, rex_max, rex_max
    return r * (y - z) + w


def clear_funding_market(bank_rt, bank_headroom, inv_ag, inv_supply, inv_rex, n_groups: int = 11):
    """Funding spread per rating group (index 1..n_groups, nan where undefined).

    Returns ``(fs, detail)`` where ``detail`` maps group -> (demand, supply,
    min Rex, max Rex, weighted Rex) for auditing.
    """
    fs = np.full(n_groups + 1, np.nan)
    demand = np.bincount(bank_rt, weights=np.maximum(bank_headroom, 0.0), minlength=n_groups + 1)
    supply = np.bincount(inv_ag, weights=inv_supply, minlength=n_groups + 1)
    wsum = np.bincount(inv_ag, weights=inv_supply * inv_rex, minlength=n_groups + 1)
    detail = {}
    for g in range(1, n_groups + 1):
        members = inv_ag == g
        if not members.any() or supply[g] <= 0:
            continue
        rex = inv_rex[members]
        lo, hi = float(rex.min()), float(rex.max())
        wa = float(wsum[g] / supply[g])
        fs[g] = funding_spread(float(demand[g]), float(supply[g]), lo, hi, wa)
        detail[g] = (float(demand[g]), float(supply[g]), lo, hi, wa)
    return fs, detail


def run_funding_market(state: MarketState, tr_inv: np.ndarray, tr_amount: np.ndarray) -> None:
    cfg, banks, inv = state.cfg, state.banks, state.investors
    ngrp = cfg.n_appetite_groups
    supply = np.bincount(tr_inv, weights=tr_amount, minlength=inv.n)
    alive = banks.alive
    rt = np.where(alive, banks.RT, 0)
    headroom = np.where(alive, banks.lim - banks.TD, 0.0)
    fs, detail = clear_funding_market(rt, headroom, inv.AG, supply, inv.Rex, ngrp)
    if state.audit is not None:
        for g, (dem, sup, lo, hi, _) in detail.items():
            state.audit.append(("fs_bounds", state.t, g, fs[g], lo, hi))
    # groups with no clearing keep the previous spread
    defined = ~np.isnan(fs)
    state.fs_by_group[defined] = fs[defined]
    banks.CB = np.where(alive, state.ir + state.fs_by_group[np.clip(banks.RT, 0, ngrp)], banks.CB)


# --------------------------------------------------------------------------
# step 7-9


def allocate_deposits(state: MarketState, tr_inv: np.ndarray, tr_amount: np.ndarray,
                      tr_vintage: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Place the open tranches; returns the bank index per tranche (-1 = idle)."""
    cfg, banks, inv, t = state.cfg, state.banks, state.investors, state.t
    lim = banks.lim
    seed = int(rng.integers(0, 2**63 - 1))
    placed = _kernels.allocate_deposits_kernel(
        tr_amount, inv.AG[tr_inv], banks.RT, banks.alive, lim, banks.TD,
        np.asarray(cfg.match_probabilities, dtype=float), cfg.n_appetite_groups, seed,
    )
    ok = placed >= 0
    b = placed[ok]
    amt = tr_amount[ok]
    ivs = tr_inv[ok]
    fs = state.fs_by_group[banks.RT[b]]
    cb = banks.CB[b]
    state.deposits.add(t + cfg.t_inv, inv=ivs, bank=b, amount=amt, cb=cb, fs=fs)
    banks.fs_weight += np.bincount(b, weights=fs * amt, minlength=banks.n)
    inv.placed += np.bincount(ivs, weights=amt, minlength=inv.n)
    inv.accrual += np.bincount(ivs, weights=amt * cb, minlength=inv.n)
    # unplaced tranches retry for a few cycles, never past their investment window
    keep = ~ok & (tr_vintage + min(cfg.idle_retry_months, cfg.t_inv - 1) >= t + 1)
    state.idle_inv, state.idle_amount, state.idle_vintage = tr_inv[keep], tr_amount[keep], tr_vintage[keep]
    return np.bincount(b, weights=amt, minlength=banks.n)


def total_funding_spread(fs_weight, td, previous):
    """Deposit-weighted funding spread; carries ``previous`` where TD = 0.

    Returns ``(tfs, flag)`` with ``flag`` true where no update was possible.
    """
    fs_weight, td, previous = (np.asarray(x, dtype=float) for x in (fs_weight, td, previous))
    flag = td <= 0
    tfs = np.where(flag, previous, fs_weight / np.where(flag, 1.0, td))
    return tfs, flag


def compute_benchmark_return(C, SR, BN, TD, CB, ir):
    BN = np.asarray(BN, dtype=float)
    if np.any(BN >= 1):
        raise InvalidConfigurationError("bonus ratio must be below 1")
    C, TD = np.asarray(C, dtype=float), np.asarray(TD, dtype=float)
    denom = C + TD
    with np.errstate(divide="ignore", invalid="ignore"):
        bk = (C * SR / (1.0 - BN) + TD * CB) / denom - ir
    return np.where(denom > 0, bk, np.asarray(SR) / (1.0 - BN) - ir)


# --------------------------------------------------------------------------
# step 10-12: lending


def reprice_clusters(state: MarketState) -> None:
    cfg = state.cfg
    mu = float(np.log(state.ir + 1.0) * cfg.c)
    state.clusters.q = cluster_q_vector(mu, cfg.sigma2, cfg.n_clusters)
    state.clusters.LP = price_cluster(state.clusters.q, cfg.pr, cfg.vol)


def open_lending_tranches(new_deposits: np.ndarray, nt: int) -> tuple[np.ndarray, np.ndarray]:
    owners = np.flatnonzero(new_deposits > 0)
    tr = split_tranches(new_deposits[owners], nt)
    return np.repeat(owners, nt), tr.ravel()


def gaussian_acceptance(bk, lp):
    """Standard normal density of (BK - LP) measured in percentage points."""
    z = (np.asarray(bk) - np.asarray(lp)) * 100.0
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


def allocate_lending(state: MarketState, tr_bank: np.ndarray, tr_amount: np.ndarray,
                     rng: np.random.Generator) -> None:
    cfg, banks, cl, t = state.cfg, state.banks, state.clusters, state.t
    order = rng.permutation(len(tr_amount))
    tr_bank, tr_amount = tr_bank[order], tr_amount[order]
    seed = int(rng.integers(0, 2**63 - 1))
    dest = _kernels.allocate_lending_kernel(tr_amount, tr_bank, banks.BK, cl.LP, cl.mrk, cl.TL, seed)
    loan = dest >= 0
    lp = np.where(loan, cl.LP[np.maximum(dest, 0)], 0.0)
    state.lending.add(
        t + cfg.t_inv, bank=tr_bank, amount=tr_amount, cluster=dest, lp=lp,
        ir=np.full(len(dest), state.ir),
    )
    banks.L += np.bincount(tr_bank[loan], weights=tr_amount[loan], minlength=banks.n)


# --------------------------------------------------------------------------
# step 13-17: redemptions, solvency, interbank losses


def redemption_income(amount, lp, ir0, is_loan, spr: float, t_inv: int):
    rem = np.where(is_loan, lp + ir0, spr + ir0)
    return amount * rem * (t_inv / 12.0)


def credit_loss(amount, q_now, rec: float):
    return amount * q_now * (1.0 - rec)


def redeem_loans(state: MarketState) -> None:
    cfg, banks, cl = state.cfg, state.banks, state.clusters
    rec = state.lending.pop(state.t)
    if rec is None:
        return
    b, amt, dest = rec["bank"], rec["amount"], rec["cluster"]
    loan = dest >= 0
    # release cluster capacity regardless of the lender's status
    cl.TL -= np.bincount(dest[loan], weights=amt[loan], minlength=cl.n)
    np.maximum(cl.TL, 0.0, out=cl.TL)
    banks.L -= np.bincount(b[loan], weights=amt[loan], minlength=banks.n)
    live = banks.alive[b]
    inc = redemption_income(amt, rec["lp"], rec["ir"], loan, cfg.Spr, cfg.t_inv)
    loss = np.where(loan, credit_loss(amt, cl.q[np.maximum(dest, 0)], cfg.rec), 0.0)
    banks.Inc += np.bincount(b[live], weights=inc[live], minlength=banks.n)
    banks.Loss += np.bincount(b[live], weights=loss[live], minlength=banks.n)


def remunerate_capital(C, ir, spr: float = 0.01):
    return np.asarray(C) * (spr + ir) / 12.0


def solvency_status(C, TD, min_ratio: float = 0.08):
    """Per-bank status from capital and deposits (ACTIVE/ASSISTED/BANKRUPT)."""
    C, TD = np.asarray(C, dtype=float), np.asarray(TD, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        acr = np.where(C + TD > 0, C / (C + TD), 0.0)
    bankrupt = (C <= 0) | (acr < min_ratio)
    return np.where(bankrupt, BANKRUPT, np.where(TD <= 0, ASSISTED, ACTIVE)).astype(np.int8)


def test_solvency(state: MarketState) -> tuple[np.ndarray, np.ndarray]:
    """Update statuses; returns (newly bankrupt, newly assisted) index arrays."""
    banks = state.banks
    idx = np.flatnonzero(banks.alive)
    new_status = solvency_status(banks.C[idx], banks.TD[idx], state.cfg.min_capital_ratio)
    old = banks.status[idx]
    failed = idx[new_status == BANKRUPT]
    # losing funding counts as an assistance event; never-funded banks do not
    assisted = idx[(new_status == ASSISTED) & (old == ACTIVE) & banks.had_funding[idx]]
    banks.status[idx] = new_status
    banks.had_funding[idx] |= banks.TD[idx] > 0
    return failed, assisted


def interbank_losses(ib, rt, bankrupt, survivors):
    """Pari-passu share of each failed bank's interbank amount.

    ``bankrupt`` and ``survivors`` are boolean masks. Returns ``(lsib,
    unabsorbed)`` where ``unabsorbed`` lists failed banks whose rating
    category had no surviving interbank exposure.
    """
    ib, rt = np.asarray(ib, dtype=float), np.asarray(rt)
    lsib = np.zeros(len(ib))
    unabsorbed = []
    for b in np.flatnonzero(bankrupt):
        if ib[b] <= 0:
            continue
        peers = survivors & (rt == rt[b])
        total = ib[peers].sum()
        if total <= 0:
            unabsorbed.append(int(b))
            continue
        lsib[peers] += ib[b] * (ib[peers] / total)
    return lsib, unabsorbed


def write_off_failed_deposits(state: MarketState, failed: np.ndarray) -> None:
    """Stop interest accrual on deposits held by banks that just failed."""
    inv = state.investors
    for rec in state.deposits.by_maturity.values():
        hit = np.isin(rec["bank"], failed)
        if hit.any():
            inv.accrual -= np.bincount(rec["inv"][hit], weights=(rec["amount"] * rec["cb"])[hit], minlength=inv.n)


def apply_interbank_losses(state: MarketState, failed: np.ndarray) -> None:
    banks = state.banks
    if len(failed) == 0:
        return
    mask = np.zeros(banks.n, dtype=bool)
    mask[failed] = True
    lsib, unabsorbed = interbank_losses(banks.IB, banks.RT, mask, banks.alive)
    banks.Lsib += lsib
    for b in unabsorbed:
        state.events.append({"t": state.t, "event": "interbank_loss_unabsorbed", "bank": b})
        logger.debug("t=%d: interbank loss of bank %d not absorbed", state.t, b)


def redeem_bank_borrowing(state: MarketState) -> None:
    cfg, banks, inv = state.cfg, state.banks, state.investors
    rec = state.deposits.pop(state.t)
    if rec is None:
        return
    b, i, amt, cb, fs = rec["bank"], rec["inv"], rec["amount"], rec["cb"], rec["fs"]
    interest = amt * cb * (cfg.t_inv / 12.0)
    live = banks.alive[b]
    banks.Bor += np.bincount(b[live], weights=interest[live], minlength=banks.n)
    inv.Incv += np.bincount(i[live], weights=interest[live], minlength=inv.n)
    inv.Lossv += np.bincount(i[~live], weights=amt[~live], minlength=inv.n)
    banks.TD -= np.bincount(b[live], weights=amt[live], minlength=banks.n)
    banks.fs_weight -= np.bincount(b[live], weights=(fs * amt)[live], minlength=banks.n)
    np.maximum(banks.TD, 0.0, out=banks.TD)
    inv.placed -= np.bincount(i, weights=amt, minlength=inv.n)
    # accrual on deposits in failed banks was already written off at failure
    inv.accrual -= np.bincount(i[live], weights=(amt * cb)[live], minlength=inv.n)
    if state.audit is not None:
        state.audit.append(("vintage", state.t, float(interest[live].sum()), float(banks.Bor.sum()), float(inv.Incv.sum())))


# --------------------------------------------------------------------------
# step 18-19: books


def bank_net_result(ninc, bn):
    ninc = np.asarray(ninc, dtype=float)
    return np.where(ninc > 0, ninc * (1.0 - np.asarray(bn)), ninc)


def retained_capital_change(netres, div: float = 0.95):
    netres = np.asarray(netres, dtype=float)
    return np.where(netres > 0, netres * (1.0 - div), netres)


def investor_wealth_change(incv, lossv, dis: float = 0.90):
    net = np.asarray(incv, dtype=float) - np.asarray(lossv, dtype=float)
    return np.where(net > 0, net * (1.0 - dis), net)


def close_books(state: MarketState) -> None:
    cfg, banks, inv, t = state.cfg, state.banks, state.investors, state.t
    alive = banks.alive
    ninc = banks.Inc - banks.Loss + cfg.cinc_sign * banks.Cinc - banks.Lsib - banks.Bor
    ninc = np.where(alive, ninc, 0.0)
    banks.Ninc = ninc
    banks.NetRes = bank_net_result(ninc, banks.BN)
    dC = retained_capital_change(banks.NetRes, cfg.dividend_ratio)
    C_prev = banks.C.copy()
    banks.C = banks.C + np.where(alive, dC, 0.0)
    banks.ninc_hist[:, t % banks.ninc_hist.shape[1]] = ninc
    if state.audit is not None:
        err = np.abs((banks.C - C_prev) - np.where(alive, dC, 0.0))
        state.audit.append(("capital_identity", t, float(err.max(initial=0.0))))

    F_prev = inv.F.copy()
    inv.F = inv.F + investor_wealth_change(inv.Incv, inv.Lossv, cfg.investor_distribution_ratio)
    # monthly actual return: accrued interest on live placements less realised losses
    with np.errstate(divide="ignore", invalid="ignore"):
        monthly = np.where(F_prev > 0, (inv.accrual / 12.0 - inv.Lossv) / F_prev, 0.0)
    slot = t % cfg.m
    inv.ret_hist[:, slot] = monthly
    inv.ri_hist[:, slot] = monthly * 12.0
