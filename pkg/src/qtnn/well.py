"""Bound states of the symmetric finite square well.

Diagnostic for the barrier hyperparameters: a well of depth V0 and full width
a (same hbar^2/2m = 1 units as the activation) binds floor(2 z0 / pi) + 1
levels, z0 = (a/2) sqrt(V0). Even/odd levels solve

    z tan z = sqrt(z0^2 - z^2)      (even)
    -z cot z = sqrt(z0^2 - z^2)     (odd)

on (0, z0); level n has energy E_n = -V0 + (2 z_n / a)^2 < 0.
"""

from __future__ import annotations

import math

from .activation import Barrier

_Z_TOL = 1e-12


def _even_fn(z: float, z0: float) -> float:
    # z tan z - sqrt(z0^2 - z^2), multiplied through by cos z so the
    # bracketing interval has finite endpoints
    return z * math.sin(z) - math.sqrt(max(z0 * z0 - z * z, 0.0)) * math.cos(z)


def _odd_fn(z: float, z0: float) -> float:
    # -z cot z - sqrt(z0^2 - z^2), multiplied through by sin z
    return -z * math.cos(z) - math.sqrt(max(z0 * z0 - z * z, 0.0)) * math.sin(z)


def _bisect(fn, lo: float, hi: float, z0: float) -> float:
    flo = fn(lo, z0)
    fhi = fn(hi, z0)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise RuntimeError(f"no sign change in [{lo}, {hi}]")
    while hi - lo > _Z_TOL:
        mid = 0.5 * (lo + hi)
        fmid = fn(mid, z0)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo = mid
            flo = fmid
    return 0.5 * (lo + hi)


def bound_state_count(barrier: Barrier) -> int:
    z0 = 0.5 * barrier.width * math.sqrt(barrier.height)
    return int(math.floor(2.0 * z0 / math.pi)) + 1


def bound_state_energies(barrier: Barrier) -> list[float]:
    """Ascending negative energies of every bound level (at least one)."""
    v0 = barrier.height
    a = barrier.width
    z0 = 0.5 * a * math.sqrt(v0)
    half_pi = 0.5 * math.pi
    energies = []
    i = 0
    while i * half_pi < z0:
        lo = i * half_pi
        hi = min((i + 1) * half_pi, z0)
        # nudge off the endpoints where both stitched forms vanish trivially
        eps = max(1e-13, 1e-15 * hi)
        fn = _even_fn if i % 2 == 0 else _odd_fn
        z = _bisect(fn, lo + eps, hi - eps if hi < z0 else hi, z0)
        energies.append(-v0 + (2.0 * z / a) ** 2)
        i += 1
    return energies
