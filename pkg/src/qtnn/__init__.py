"""Quantum-tunnelling activation networks and their benchmark harness."""

from .activation import (
    Barrier,
    EnergyMap,
    DEFAULT_BARRIER,
    DEFAULT_ENERGY_MAP,
    transmission,
    transmission_grad,
    apply_energy_map,
    energy_map_grad,
    qt_activate,
)
from .rng import SeedStream, gaussian_draw
from .well import bound_state_count, bound_state_energies

__version__ = "0.1.0"

__all__ = [
    "Barrier",
    "EnergyMap",
    "DEFAULT_BARRIER",
    "DEFAULT_ENERGY_MAP",
    "transmission",
    "transmission_grad",
    "apply_energy_map",
    "energy_map_grad",
    "qt_activate",
    "SeedStream",
    "gaussian_draw",
    "bound_state_count",
    "bound_state_energies",
    "__version__",
]
