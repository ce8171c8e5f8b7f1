"""Self-similar solutions of the time-fractional porous medium equation.

The package reduces the free-boundary problem on the half-line to a
non-Lipschitz Volterra equation, solves it with product-integration schemes
and compares the result with a finite-difference baseline.
"""
import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
