"""Percolation diagnostics for directed firm-to-firm payment networks."""

from .components import lscc, lscc_size, strong_components
from .contagion import ContagionEstimate, contagion_trial, estimate_pc, parse_grid
from .graph import SECTORS, FirmGraph, GraphIntegrityError, read_graph, write_edges, write_graph
from .nullmodel import randomize
from .percolation import CriticalFit, FitError, RemovalSweep, fit_fc, removal_order, removal_sweep
from .survivors import baseline_concentrations, concentrations, survivors_report
from .synthetic import GenerationError, PlantedCluster, SyntheticParams, generate_synthetic

__all__ = [
    "SECTORS", "ContagionEstimate", "CriticalFit", "FirmGraph", "FitError", "GenerationError",
    "GraphIntegrityError", "PlantedCluster", "RemovalSweep", "SyntheticParams",
    "baseline_concentrations", "concentrations", "contagion_trial", "estimate_pc", "fit_fc",
    "generate_synthetic", "lscc", "lscc_size", "parse_grid", "randomize", "read_graph",
    "removal_order", "removal_sweep", "strong_components", "survivors_report", "write_edges",
    "write_graph",
]
