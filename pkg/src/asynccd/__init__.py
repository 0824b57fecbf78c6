"""Asynchronous stochastic proximal coordinate descent toolkit."""
from __future__ import annotations

__version__ = "0.1.0"
