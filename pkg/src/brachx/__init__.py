"""Quantum brachistochrone protocols on SU(n).

Lie-algebra utilities, AB decompositions, the brachistochrone flow with its
conserved quantities, closed-form integrable families, a multi-start
boundary-value solver and stability experiments.
"""
__version__ = "0.1.0"
