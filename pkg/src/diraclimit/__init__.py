"""Numerical companion for the semiclassical limit of the Dirac equation
with external time-dependent electromagnetic fields.
"""
__version__ = "0.1.0"
