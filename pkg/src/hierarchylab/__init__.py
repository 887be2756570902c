"""Finite-width cumulant hierarchies for deep random fully connected networks."""

__version__ = "0.1.0"

from .errors import HierarchyLabError  # noqa: E402

__all__ = ["__version__", "HierarchyLabError"]
