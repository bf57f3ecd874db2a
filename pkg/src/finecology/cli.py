"""Command-line entry point.

Exit codes: 0 success, 2 bad configuration or arguments, 3 unusable input
data (rates file, unfittable sweep), 4 malformed graph files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig, load_config
from .environment import RateDataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_GRAPH = 0, 2, 3, 4
CONFIG_DIR_ENV = "FINECOLOGY_CONFIG_DIR"
DEFAULT_CONFIG_NAME = "default.toml"

log = logging.getLogger("finecology")


class UsageError(ValueError):
    """Bad command-line arguments; reported with exit code 2."""


class DataError(ValueError):
    """Input data that cannot be used; reported with exit code 3."""


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def resolve_config_path(name: str | None) -> Path | None:
    """Find ``name`` as given, else inside ``$FINECOLOGY_CONFIG_DIR``.

    With no name, ``default.toml`` from that directory is used when present.
    """
    cfg_dir = os.environ.get(CONFIG_DIR_ENV)
    if name is None:
        if cfg_dir and (Path(cfg_dir) / DEFAULT_CONFIG_NAME).is_file():
            return Path(cfg_dir) / DEFAULT_CONFIG_NAME
        return None
    path = Path(name)
    if path.is_file():
        return path
    if cfg_dir and (Path(cfg_dir) / name).is_file():
        return Path(cfg_dir) / name
    raise ConfigError(f"config file {name!r} not found")


def _load(args) -> tuple[SimConfig, Path | None]:
    path = resolve_config_path(args.config)
    return load_config(path, args.set), path


def parse_seeds(text: str) -> list[int]:
    """``"1..N"`` ranges and comma lists; seeds must be positive."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = (int(x) for x in part.split("..", 1))
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise UsageError(f"bad seed spec {part!r}") from None
    if not seeds:
        raise UsageError(f"seed spec {text!r} is empty")
    if min(seeds) < 1:
        raise UsageError("seeds must be positive integers")
    return sorted(set(seeds))


def _manifest(command: str, cfg: SimConfig | None, cfg_path: Path | None, **extra) -> dict:
    out = {"command": command, "config_file": str(cfg_path) if cfg_path else None}
    if cfg is not None:
        out["effective_config"] = cfg.to_dict()
    out.update(extra)
    return out


# --------------------------------------------------------------------------
# simulation commands


def cmd_simulate(args) -> int:
    from .engine import simulate, snapshot_csv

    cfg, cfg_path = _load(args)
    if args.seed < 1:
        raise UsageError("seed must be a positive integer")
    out = Path(args.out)
    res = simulate(cfg, args.seed)
    _write(out / f"run_{args.seed}.json", res.to_json() + "\n")
    files = [f"run_{args.seed}.json"]
    for label, snap in sorted(res.snapshots.items()):
        name = f"snapshot_{args.seed}_{label}.csv"
        _write(out / name, snapshot_csv(snap))
        files.append(name)
    _write(out / f"manifest_{args.seed}.json",
           _dump(_manifest("simulate", cfg, cfg_path, seed=args.seed, files=files,
                           crisis_dates=[res.months[t] for t in res.crisis_months])))
    log.info("seed %d: %d crises", args.seed, res.n_crises)
    return EXIT_OK


def cmd_batch(args) -> int:
    from .engine import run_batch

    cfg, cfg_path = _load(args)
    seeds = parse_seeds(args.seeds)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    stats = run_batch(cfg, seeds, workers=args.workers)
    out = Path(args.out)
    _write(out / "histogram.csv", stats.histogram_csv())
    _write(out / "timing.csv", stats.timing_csv())
    rows = ["seed,status,crises,error"]
    for r in stats.manifest_rows():
        err = str(r["error"]).replace(",", ";").replace("\n", " ")
        rows.append(f"{r['seed']},{r['status']},{r['crises']},{err}")
    _write(out / "manifest.csv", "\n".join(rows) + "\n")
    _write(out / "manifest.json", _dump(_manifest(
        "batch", cfg, cfg_path, seeds=[seeds[0], seeds[-1]], n_seeds=len(seeds),
        histogram={str(k): v for k, v in stats.histogram.items()},
        mean_crises=stats.mean_crises, modal_count=stats.modal_count,
        failed_seeds=sorted(stats.errors),
    )))
    log.info("%d runs, histogram %s, %d failed", len(seeds), stats.histogram, len(stats.errors))
    return EXIT_OK


# --------------------------------------------------------------------------
# network commands


def _graph(args):
    from .network import read_graph

    return read_graph(args.nodes, args.edges)


def _baseline(graph, args, order: str, step: float):
    """Randomized counterpart, its sweep, fit and survivor concentrations."""
    from .network import baseline_concentrations, fit_fc, randomize, removal_sweep

    rnd = randomize(graph, args.swaps, seed=args.seed)
    sweep = removal_sweep(rnd, order, step)
    fit = fit_fc(sweep)
    return fit, baseline_concentrations(rnd, sweep, fit.f_c)


def cmd_percolate(args) -> int:
    from .network import FitError, estimate_pc, fit_fc, parse_grid, removal_sweep, survivors_report

    graph = _graph(args)
    out = Path(args.out)
    sweep = removal_sweep(graph, args.order, args.step)
    out.mkdir(parents=True, exist_ok=True)
    sweep.write_csv(out / "sweep.csv")
    info = {"order": args.order, "step": args.step, "n_nodes": graph.n, "n_edges": graph.n_edges,
            "files": ["sweep.csv"]}
    fit = None
    if args.fit or args.report:
        try:
            fit = fit_fc(sweep)
        except FitError as exc:
            raise DataError(f"cannot fit the collapse: {exc}") from exc
        _write(out / "fit.json", _dump({"order": args.order, **fit.to_dict()}))
        info["files"].append("fit.json")
    if args.report:
        threshold = args.f_threshold if args.f_threshold is not None else fit.f_c
        base_fit, base = _baseline(graph, args, args.order, args.step)
        rep = survivors_report(graph, sweep, threshold, base, factor=args.factor)
        rep["baseline_f_c"] = base_fit.f_c
        _write(out / "report.json", _dump(rep))
        info["files"].append("report.json")
    if args.contagion:
        try:
            grid = parse_grid(args.p_grid)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        est = estimate_pc(graph, grid, trials=args.trials, seed=args.seed,
                          spanning_fraction=args.spanning)
        _write(out / "contagion.json", _dump(est.to_dict()))
        info["files"].append("contagion.json")
    _write(out / "manifest.json", _dump(_manifest("percolate", None, None, **info,
                                                  nodes=str(args.nodes), edges=str(args.edges))))
    if fit is not None:
        log.info("f_c = %.4f (exponent %.3f)", fit.f_c, fit.exponent)
    return EXIT_OK


def cmd_report(args) -> int:
    from .network import FitError, fit_fc, removal_sweep, survivors_report

    graph = _graph(args)
    sweep = removal_sweep(graph, args.order, args.step)
    threshold = args.f_threshold
    if threshold is None:
        try:
            threshold = fit_fc(sweep).f_c
        except FitError as exc:
            raise DataError(f"no threshold given and the collapse cannot be fitted: {exc}") from exc
    base_fit, base = _baseline(graph, args, args.order, args.step)
    rep = survivors_report(graph, sweep, threshold, base, factor=args.factor)
    rep["baseline_f_c"] = base_fit.f_c
    _write(Path(args.out) / "report.json", _dump(rep))
    log.info("%d survivors, %d flagged cells", len(rep["survivors"]), len(rep["flags"]))
    return EXIT_OK


def cmd_randomize(args) -> int:
    from .network import randomize, write_edges

    graph = _graph(args)
    rnd, done = randomize(graph, args.swaps, seed=args.seed, return_count=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edges(rnd, out / "edges.csv")
    if Path(args.nodes).resolve() != (out / "nodes.csv").resolve():
        shutil.copyfile(args.nodes, out / "nodes.csv")
    attempts = 10 * graph.n_edges if args.swaps is None else args.swaps
    _write(out / "manifest.json", _dump(_manifest(
        "randomize", None, None, seed=args.seed, attempted_swaps=attempts, accepted_swaps=done,
        nodes=str(args.nodes), edges=str(args.edges))))
    return EXIT_OK


def _planted(text: str):
    from .network import PlantedCluster

    parts = text.split(":")
    if len(parts) != 5:
        raise UsageError(f"--plant wants size:density:sector:region:sales_percentile, got {text!r}")
    try:
        return PlantedCluster(int(parts[0]), float(parts[1]), parts[2], parts[3], float(parts[4]))
    except ValueError:
        raise UsageError(f"bad --plant value {text!r}") from None


def cmd_generate(args) -> int:
    from .network import SyntheticParams, generate_synthetic, write_graph

    params = SyntheticParams(
        n=args.n, mean_degree=args.mean_degree, gamma=args.gamma, n_regions=args.regions,
        locality=args.locality, assortativity=args.assortativity,
        planted=tuple(_planted(p) for p in args.plant),
    )
    graph = generate_synthetic(params, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_graph(graph, out / "nodes.csv", out / "edges.csv")
    _write(out / "truth.json", _dump({"seed": args.seed, "planted": graph.meta["planted"]}))
    log.info("%d nodes, %d links", graph.n, graph.n_edges)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finecology", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_opts(sp):
        sp.add_argument("--config", help=f"TOML file (also searched in ${CONFIG_DIR_ENV})")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. evolution.enabled=false")
        sp.add_argument("--out", default=".", help="output directory")

    s = sub.add_parser("simulate", help="run one simulation")
    sim_opts(s)
    s.add_argument("--seed", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("batch", help="run an ensemble over many seeds")
    sim_opts(s)
    s.add_argument("--seeds", required=True, help="e.g. 1..900 or 1,2,5")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_batch)

    def graph_opts(sp):
        sp.add_argument("--nodes", required=True, help="CSV with id,sales,sector,region")
        sp.add_argument("--edges", required=True, help="CSV with src,dst")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=1)

    def sweep_opts(sp):
        sp.add_argument("--order", choices=["sales", "degree"], default="sales")
        sp.add_argument("--step", type=float, default=0.002, help="removed fraction between samples")
        sp.add_argument("--swaps", type=int, default=None, help="baseline swap attempts (default 10*|E|)")
        sp.add_argument("--factor", type=float, default=3.0, help="flag cells this far above baseline")
        sp.add_argument("--f-threshold", type=float, default=None)

    s = sub.add_parser("percolate", help="removal sweep with optional fit, report and contagion")
    graph_opts(s)
    sweep_opts(s)
    s.add_argument("--fit", action="store_true")
    s.add_argument("--report", action="store_true")
    s.add_argument("--contagion", action="store_true")
    s.add_argument("--p-grid", default="0:0.01:0.3", help="a:step:b")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--spanning", type=float, default=0.05, help="removed share that counts as spanning")
    s.set_defaults(func=cmd_percolate)

    s = sub.add_parser("report", help="survivor attribution at the collapse threshold")
    graph_opts(s)
    sweep_opts(s)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("randomize", help="degree-preserving link swaps")
    graph_opts(s)
    s.add_argument("--swaps", type=int, default=None, help="attempts (default 10*|E|)")
    s.set_defaults(func=cmd_randomize)

    s = sub.add_parser("generate", help="synthetic firm network")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--mean-degree", type=float, default=8.0)
    s.add_argument("--gamma", type=float, default=2.5)
    s.add_argument("--regions", type=int, default=47)
    s.add_argument("--locality", type=float, default=0.5)
    s.add_argument("--assortativity", type=float, default=0.1)
    s.add_argument("--plant", action="append", default=[],
                   metavar="SIZE:DENSITY:SECTOR:REGION:PCT")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_generate)
    return p


def main(argv: list[str] | None = None) -> int:
    from .network import FitError, GenerationError, GraphIntegrityError

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RateDataError, DataError, FitError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GraphIntegrityError as exc:
        print(f"graph error: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
