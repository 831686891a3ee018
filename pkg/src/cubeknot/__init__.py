"""Cubulation of knots: push a smooth knot in R^3 into the 1-skeleton of a
cubical grid, keeping its isotopy class, and check the result with knot
invariants."""

__version__ = "0.1.0"
