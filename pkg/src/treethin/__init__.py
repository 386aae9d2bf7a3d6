"""Exact computations for the Bernoulli field on trees under removal of isolated sites."""

__version__ = "0.1.0"
