"""Rectangular-barrier transmission coefficient used as a neural activation.

Units are hbar^2/2m = 1 throughout, so energies and the barrier height share
one scale and the barrier width is a plain length. For a barrier of height V0
and width a, an incident particle of energy E > 0 is transmitted with
probability

    0 < E < V0:  T = 1 / (1 + V0^2 sinh^2(kappa a) / (4 E (V0 - E))),
                 kappa = sqrt(V0 - E)
    E > V0:      T = 1 / (1 + V0^2 sin^2(k a) / (4 E (E - V0))),
                 k = sqrt(E - V0)

The two branches meet at the removable singularity E = V0, where
T = 1 / (1 + a^2 V0 / 4). Within |E - V0| <= 1e-6 V0 a stitched second-order
series is used; for kappa*a > 20 the sinh branch is evaluated in the log
domain so nothing overflows (underflow saturates at 0).

Activations are T(E(x)) where the energy map E(x) turns a pre-activation into
a positive energy; the smooth map is a softplus (no dead zone), the clamp map
is max(x, 1e-12) and is kept for ablations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

BRANCH_DELTA = _kernels.BRANCH_DELTA
DEEP_KAPPA_A = _kernels.DEEP_KAPPA_A
CLAMP_EPS = _kernels.CLAMP_EPS

SMOOTH = "smooth"
CLAMP = "clamp"

_EMAP_KINDS = {SMOOTH: _kernels.EMAP_SMOOTH, CLAMP: _kernels.EMAP_CLAMP}


@dataclass(frozen=True)
class Barrier:
    """Physics parameters of the activation: height V0 and width a."""

    height: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "width", float(self.width))
        if not (math.isfinite(self.height) and self.height > 0):
            raise ValueError(f"barrier height must be finite and > 0, got {self.height}")
        if not (math.isfinite(self.width) and self.width > 0):
            raise ValueError(f"barrier width must be finite and > 0, got {self.width}")


@dataclass(frozen=True)
class EnergyMap:
    """Maps a pre-activation to a positive energy; kind 'smooth' or 'clamp'."""

    kind: str = SMOOTH
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _EMAP_KINDS:
            raise ValueError(f"unknown energy map kind {self.kind!r}")
        object.__setattr__(self, "scale", float(self.scale))
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"energy map scale must be finite and > 0, got {self.scale}")


DEFAULT_BARRIER = Barrier(1.0, 1.0)
DEFAULT_ENERGY_MAP = EnergyMap(SMOOTH, 1.0)


def _check_energy(e) -> float:
    e = float(e)
    if not math.isfinite(e) or e <= 0.0:
        raise ValueError(f"energy must be finite and > 0, got {e}")
    return e


def transmission(e: float, barrier: Barrier) -> float:
    """Transmission probability T(E) in [0, 1]."""
    e = _check_energy(e)
    return float(_kernels.transmission_scalar(e, barrier.height, barrier.width))


def transmission_grad(e: float, barrier: Barrier) -> float:
    """Analytic dT/dE on the branch matching transmission()."""
    e = _check_energy(e)
    return float(_kernels.transmission_grad_scalar(e, barrier.height, barrier.width))


def apply_energy_map(x: float, emap: EnergyMap = DEFAULT_ENERGY_MAP) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"pre-activation must be finite, got {x}")
    return float(_kernels.energy_scalar(x, _EMAP_KINDS[emap.kind], emap.scale))


def energy_map_grad(x: float, emap: EnergyMap = DEFAULT_ENERGY_MAP) -> float:
    """dE/dx of the energy map (clamp derivative is 0 below its floor)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"pre-activation must be finite, got {x}")
    return float(_kernels.energy_grad_scalar(x, _EMAP_KINDS[emap.kind], emap.scale))


def qt_activate(v, barrier: Barrier = DEFAULT_BARRIER,
                emap: EnergyMap = DEFAULT_ENERGY_MAP):
    """Elementwise activation T(E(x)) plus its local derivative d act / d x.

    Accepts any array shape (or a scalar sequence); returns two float64
    arrays of the input shape. All activations lie in [0, 1].
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.size and not np.isfinite(arr).all():
        raise ValueError("pre-activations must all be finite")
    flat = np.ascontiguousarray(arr.reshape(-1))
    act = np.empty_like(flat)
    der = np.empty_like(flat)
    _kernels.qt_activate_kernel(flat, barrier.height, barrier.width,
                                _EMAP_KINDS[emap.kind], emap.scale, act, der)
    return act.reshape(arr.shape), der.reshape(arr.shape)
