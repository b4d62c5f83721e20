"""Numerical laboratory for threshold resonances and bound states of the
3D Dirac operator with compactly supported 4-potentials.

The package solves the Lippmann-Schwinger equation for the perturbed
operator on a cubic quadrature grid, locates critical (threshold)
potentials, classifies them by the tail moment of their threshold states
(resonance vs bound type), and measures the divergence and scaling laws
of near-threshold solutions against closed-form predictions and an
independent radial oracle.
"""

__version__ = "0.1.0"
