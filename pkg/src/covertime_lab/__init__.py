"""Simulation and verification laboratory for Brownian cover times of the
two-dimensional unit torus."""

__version__ = "0.1.0"
