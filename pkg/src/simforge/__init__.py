"""simforge: compile target Hamiltonians onto restricted interaction graphs
and certify each transformation against the low-energy simulation definition."""

__version__ = "0.1.0"
