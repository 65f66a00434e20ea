"""Inelastic Kapitza-Dirac blockade simulator for trapped harmonic oscillators."""

__version__ = "0.1.0"
