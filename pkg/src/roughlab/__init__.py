"""Simulation and verification toolkit for weighted sums of functionals of
fractional Brownian increments, built on a discrete rough-path calculus."""
from __future__ import annotations

from . import errors
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
