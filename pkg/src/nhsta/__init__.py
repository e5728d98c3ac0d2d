"""Driven two-mode non-Hermitian transfer: Hamiltonians, spectra, evolution and sweeps."""

from .dynamics import (
    IntegratorConfig,
    TimeConvention,
    Trajectory,
    evolve,
    relative_populations,
    tracking_fidelity,
    transition_probability,
)
from .errors import IntegrationError, ParameterError, PoleError
from .model import NO_ERROR, DiagonalSign, ErrorParams, Protocol, SystemParams, build_hamiltonian

__all__ = [
    "DiagonalSign",
    "ErrorParams",
    "IntegrationError",
    "IntegratorConfig",
    "NO_ERROR",
    "ParameterError",
    "PoleError",
    "Protocol",
    "SystemParams",
    "TimeConvention",
    "Trajectory",
    "build_hamiltonian",
    "evolve",
    "relative_populations",
    "tracking_fidelity",
    "transition_probability",
]
