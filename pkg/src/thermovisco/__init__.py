"""Eulerian thermo-visco-elastodynamics with multipolar viscosity: models, auditor, solver."""

__version__ = "0.1.0"
