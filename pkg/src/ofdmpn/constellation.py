"""Constellations with Gray labels, power statistics, and hard decisions.

Every generated constellation is normalized to unit mean power so that
phase-noise variances are comparable across modulation formats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModulationScheme, ValidationError

__all__ = [
    "Constellation",
    "make_constellation",
    "power_stats",
    "nearest_symbol",
    "bit_errors",
]


@dataclass(frozen=True)
class Constellation:
    """Ordered point set with one Gray-coded bit pattern per point."""

    scheme: ModulationScheme
    points: np.ndarray  # complex128, unit mean power
    labels: np.ndarray  # integer bit patterns, aligned with points

    @property
    def bits_per_symbol(self) -> int:
        return self.scheme.bits_per_symbol

    def __len__(self) -> int:
        return len(self.points)


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def make_constellation(scheme: ModulationScheme | str) -> Constellation:
    """Generate the unit-mean-power point set for a modulation scheme.

    PSK points sit on the unit circle with point 0 at angle zero and Gray
    labels around the ring.  QAM points form a square grid of odd integer
    levels scaled to unit mean power, Gray-coded independently per axis.
    """
    if isinstance(scheme, str):
        scheme = ModulationScheme.parse(scheme)
    m = scheme.order
    if scheme.family == "psk":
        idx = np.arange(m)
        points = np.exp(2j * np.pi * idx / m)
        labels = _gray(idx)
    else:
        side = int(np.sqrt(m))
        if side * side != m or side & (side - 1) != 0:
            raise ValidationError(f"unsupported QAM order {m}")
        axis_bits = side.bit_length() - 1
        u, v = np.divmod(np.arange(m), side)
        levels = 2.0 * np.arange(side) - (side - 1)
        points = levels[u] + 1j * levels[v]
        points = points / np.sqrt(np.mean(np.abs(points) ** 2))
        labels = (_gray(u) << axis_bits) | _gray(v)
    return Constellation(scheme=scheme, points=points, labels=labels)


def power_stats(c: Constellation) -> tuple[float, float, float]:
    """(mean, min, max) of |point|^2 over the constellation."""
    p = np.abs(c.points) ** 2
    return float(p.mean()), float(p.min()), float(p.max())


def nearest_symbol(c: Constellation, z: complex) -> int:
    """Index of the point closest to ``z``; ties go to the lowest index."""
    if not np.isfinite(z):
        raise ValidationError(f"cannot decide on non-finite sample {z!r}")
    d = np.abs(c.points - z)
    return int(np.argmin(d))


def nearest_symbols(c: Constellation, z: np.ndarray) -> np.ndarray:
    """Vectorized hard decision over an array of received samples."""
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise ValidationError("cannot decide on non-finite samples")
    d = np.abs(z[..., None] - c.points)
    return np.argmin(d, axis=-1)


def bit_errors(c: Constellation, sent: int, decided: int) -> int:
    """Hamming distance between the Gray labels of two point indices."""
    n = len(c.points)
    if not (0 <= sent < n and 0 <= decided < n):
        raise IndexError(f"symbol index out of range for {n}-point constellation")
    return int(c.labels[sent] ^ c.labels[decided]).bit_count()
