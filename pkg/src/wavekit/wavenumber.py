"""Fourier-harmonic wavenumber representation for planar arrays.

The dictionary columns are 2-D spatial harmonics sampled on the element
grid.  Which harmonics enter is decided purely by the array geometry and
the carrier, never by the link distance, so one codebook serves every
transmitter-receiver placement of the same array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix
from .errors import EmptySupportError, ShapeMismatchError
from .geometry import ArrayGeometry, SystemParams

_BOUNDARY_SLACK = 1e-12


@dataclass(frozen=True)
class WavenumberSupport:
    """The admitted harmonic index pairs for one array."""

    indices: tuple
    geom: ArrayGeometry
    beta: float

    @property
    def cardinality(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Dictionary:
    """Orthonormal harmonic dictionary over an array's elements."""

    matrix: np.ndarray
    support: WavenumberSupport

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128).copy()
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class WavenumberChannel:
    """A channel expressed in harmonic coordinates on both ends."""

    entries: np.ndarray
    rx_support: WavenumberSupport
    tx_support: WavenumberSupport

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=np.complex128).copy()
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)


def enumerate_support(geom: ArrayGeometry, params: SystemParams,
                      beta: float = 1.0) -> WavenumberSupport:
    """List the harmonic indices whose spatial frequency stays below the cone.

    A pair (l_x, l_y) is admitted when

        (2*pi*l_x / L_x)^2 + (2*pi*l_y / L_y)^2 <= beta * k^2,

    scanned over the alias-free index box per axis.  beta = 1 keeps only
    propagating harmonics; larger values admit an evanescent margin.  The
    result is sorted lexicographically and is independent of link distance.
    """
    if not (1.0 <= beta <= 4.0):
        raise ValueError(f"beta must lie in [1, 4], got {beta}")
    k = params.wavenumber_rad_per_m
    budget = beta * k * k * (1.0 + _BOUNDARY_SLACK)
    fx = 2.0 * np.pi / geom.aperture_x_m
    fy = 2.0 * np.pi / geom.aperture_y_m
    indices = []
    for lx in range(-(geom.n_x // 2), (geom.n_x + 1) // 2):
        for ly in range(-(geom.n_y // 2), (geom.n_y + 1) // 2):
            if (fx * lx) ** 2 + (fy * ly) ** 2 <= budget:
                indices.append((lx, ly))
    if not indices:
        raise EmptySupportError("no harmonic passes the spatial-frequency cone")
    return WavenumberSupport(indices=tuple(sorted(indices)), geom=geom, beta=float(beta))


def build_dictionary(support: WavenumberSupport) -> Dictionary:
    """Sample the admitted harmonics on the element grid, one per column.

    Column (l_x, l_y) at flattened element (i_x, i_y) is

        exp(+2j*pi*(l_x*i_x/n_x + l_y*i_y/n_y)) / sqrt(N),

    so every entry has magnitude 1/sqrt(N) and distinct columns are exactly
    orthonormal by the geometric-sum identity.
    """
    geom = support.geom
    n = geom.num_elements
    ix = np.repeat(np.arange(geom.n_x), geom.n_y).astype(float)
    iy = np.tile(np.arange(geom.n_y), geom.n_x).astype(float)
    ls = np.array(support.indices, dtype=float).reshape(-1, 2)
    phase = ix[:, None] * (ls[:, 0][None, :] / geom.n_x)
    phase += iy[:, None] * (ls[:, 1][None, :] / geom.n_y)
    matrix = np.exp(2j * np.pi * phase) / np.sqrt(n)
    return Dictionary(matrix=matrix, support=support)


def _entries_of(channel) -> np.ndarray:
    if isinstance(channel, ChannelMatrix):
        return channel.entries
    if isinstance(channel, WavenumberChannel):
        return channel.entries
    return np.asarray(channel, dtype=np.complex128)


def to_wavenumber(channel, rx_dict: Dictionary, tx_dict: Dictionary) -> WavenumberChannel:
    """Project an element-domain channel onto the harmonic dictionaries.

    Computes ``Psi_R^H @ H @ Psi_T``.  With orthonormal columns this is an
    energy-contracting change of coordinates; it is lossless exactly when
    both dictionaries span their full element spaces.
    """
    h = _entries_of(channel)
    expected = (rx_dict.matrix.shape[0], tx_dict.matrix.shape[0])
    if h.shape != expected:
        raise ShapeMismatchError(
            f"channel shape {h.shape} does not match dictionaries {expected}"
        )
    entries = rx_dict.matrix.conj().T @ h @ tx_dict.matrix
    return WavenumberChannel(entries=entries, rx_support=rx_dict.support,
                             tx_support=tx_dict.support)


def from_wavenumber(channel, rx_dict: Dictionary, tx_dict: Dictionary) -> np.ndarray:
    """Map harmonic-domain entries back to the element domain.

    Computes ``Psi_R @ H_a @ Psi_T^H``, the adjoint of :func:`to_wavenumber`.
    """
    h_a = _entries_of(channel)
    expected = (rx_dict.matrix.shape[1], tx_dict.matrix.shape[1])
    if h_a.shape != expected:
        raise ShapeMismatchError(
            f"harmonic shape {h_a.shape} does not match dictionaries {expected}"
        )
    return rx_dict.matrix @ h_a @ tx_dict.matrix.conj().T
