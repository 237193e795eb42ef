"""confidence-driven price model: delayed sde, analytic moments and quadrature pricing"""

__version__ = "0.1.0"
