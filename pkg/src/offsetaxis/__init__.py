"""Mixed-dimensional mesh reconstruction from unsigned distance fields."""

__version__ = "0.1.0"
