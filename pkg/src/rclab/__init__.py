"""Numerics laboratory for the long-range random-cluster model.

Couplings have the form J_x = psi(x) * exp(-rho(x)) / Z with rho a norm on
R^d and psi a sub-exponential correction.  The package computes the convex
geometry attached to rho (Wulff shape, dual vectors, surcharge), classifies
saturation of the inverse correlation length, evaluates the model exactly on
small regions, samples it by Monte Carlo at desk scale, and runs the
sharp-asymptotics and cluster-size experiments.
"""

__version__ = "0.1.0"
