"""Periodic orbits of the quartic galactic Hamiltonian by first-order averaging.

Modules
-------
model       Hamiltonian, vector field, Jacobian, eps-rescaling
reduction   energy-level reduction to 3D charts (x- and y-branch)
closedform  unperturbed families, fundamental and gap matrices, averaged functions
averaging   bifurcation-function engine, finite-part quadrature, zero finding
integrator  adaptive RK integration, monodromy, Floquet multipliers, section returns
verify      shooting, axial-period oracle, eps-continuation, orbit counting
cli         command-line front end
"""

__version__ = "0.1.0"

from .model import ModelParams, PhaseState, energy, jacobian, rescale, vector_field  # noqa: E402

__all__ = ["ModelParams", "PhaseState", "energy", "jacobian", "rescale", "vector_field"]
