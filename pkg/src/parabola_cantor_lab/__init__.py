"""Numerical laboratory for random Cantor measures on the parabola.

Builds the multiscale random Cantor sets E_j (with Lambda(p) digit sets),
the arc measures nu_j over them, and measures ball exponents, Fourier decay,
discrete restriction constants, martingale/tail behaviour and the Knapp
sharpness exponent.
"""

__version__ = "0.1.0"
