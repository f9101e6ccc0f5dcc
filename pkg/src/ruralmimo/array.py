"""Uniform cylindrical array geometry and plane-wave steering vectors.

Ports are ordered ring by ring (bottom ring first), element by element around
the ring, and for dual-polarized arrays each element contributes two
co-located ports (+45 deg then -45 deg).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .scenario import ArrayConfig


class Polarization(str, enum.Enum):
    SLANT_PLUS_45 = "slantPlus45"
    SLANT_MINUS_45 = "slantMinus45"


@dataclass(frozen=True)
class ElementLayout:
    positions: np.ndarray  # (M, 3) metres
    polarization: tuple  # per-port Polarization
    radius_m: float
    ring_heights_m: np.ndarray  # (M_v,)

    @property
    def num_ports(self) -> int:
        return self.positions.shape[0]

    @property
    def dual_polarized(self) -> bool:
        return Polarization.SLANT_MINUS_45 in self.polarization

    @property
    def minus45_mask(self) -> np.ndarray:
        return np.array([p == Polarization.SLANT_MINUS_45 for p in self.polarization])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["port", "x_m", "y_m", "z_m", "polarization"])
            for i, (pos, pol) in enumerate(zip(self.positions, self.polarization)):
                w.writerow([i, f"{pos[0]:.6f}", f"{pos[1]:.6f}", f"{pos[2]:.6f}", pol.value])


def build_layout(array: ArrayConfig, wavelength_m: float) -> ElementLayout:
    """Place ``M_h`` elements per ring on ``M_v`` rings of a vertical cylinder.

    The radius is chosen so that adjacent elements on a ring are one element
    spacing apart along the arc; rings are stacked at the same spacing and
    centred on z = 0.
    """
    if wavelength_m <= 0:
        raise ValueError("wavelength must be positive")
    spacing = array.element_spacing_wavelengths * wavelength_m
    radius = array.m_horizontal * spacing / (2 * np.pi)
    phi = 2 * np.pi * np.arange(array.m_horizontal) / array.m_horizontal
    ring_z = (np.arange(array.m_vertical) - (array.m_vertical - 1) / 2) * spacing

    ring_xy = np.stack([radius * np.cos(phi), radius * np.sin(phi)], axis=1)
    elems = np.concatenate(
        [np.column_stack([ring_xy, np.full(array.m_horizontal, z)]) for z in ring_z]
    )
    if array.dual_polarized:
        positions = np.repeat(elems, 2, axis=0)
        pol = (Polarization.SLANT_PLUS_45, Polarization.SLANT_MINUS_45) * elems.shape[0]
    else:
        positions = elems
        pol = (Polarization.SLANT_PLUS_45,) * elems.shape[0]
    return ElementLayout(positions, tuple(pol), float(radius), ring_z)


def direction_vector(azimuth, elevation) -> np.ndarray:
    """Unit vector(s) pointing towards (azimuth, elevation); trailing axis is xyz."""
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    ce = np.cos(elevation)
    return np.stack([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)], axis=-1)


def polarization_coupling(layout: ElementLayout, psi) -> np.ndarray:
    """Per-port amplitude of a path rotated by ``psi``: cos on +45, sin on -45.

    ``psi`` may be an array; the port axis is appended last.
    """
    psi = np.asarray(psi, dtype=float)[..., None]
    minus = layout.minus45_mask
    return np.where(minus, np.sin(psi), np.cos(psi))


def steering(layout: ElementLayout, azimuth, elevation, wavelength_m: float, psi=None) -> np.ndarray:
    """Far-field response exp(+j 2pi/lambda <p_m, u>) for isotropic elements.

    Accepts broadcastable arrays of angles; the port axis is last. With
    ``psi`` given, each port is further weighted by its polarization coupling.
    """
    if wavelength_m <= 0:
        raise ValueError("wavelength must be positive")
    u = direction_vector(azimuth, elevation)
    phase = (2 * np.pi / wavelength_m) * (u @ layout.positions.T)
    a = np.exp(1j * phase)
    if psi is not None:
        a = a * polarization_coupling(layout, psi)
    return a
