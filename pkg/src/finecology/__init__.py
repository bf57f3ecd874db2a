"""Bank/investor market simulator and firm-network percolation diagnostics."""

__version__ = "0.1.0"
