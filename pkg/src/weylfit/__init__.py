"""Simulation and inference toolkit for qubit-probed oscillator characteristic functions."""

__version__ = "0.1.0"

from . import charfunc, cli, config, estimator, fockspace, sampler, series  # noqa: F401
