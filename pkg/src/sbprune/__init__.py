"""Structured Bayesian pruning toolkit.

Trains networks with truncated log-normal multiplicative noise layers via
stochastic variational inference, prunes low-SNR noise groups, and compacts
the result.
"""

from .truncmath import TruncParams

__all__ = ["TruncParams"]
__version__ = "0.1.0"
