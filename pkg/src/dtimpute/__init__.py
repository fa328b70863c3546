"""Missing-data imputation with neural data models, decision-tree search bounds and a GA."""

__version__ = "0.1.0"
