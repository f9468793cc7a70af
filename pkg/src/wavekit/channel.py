"""Near-field channel synthesis for planar arrays.

Entries follow the e^{-jkr} phasor convention throughout.  The line-of-sight
part is the exact spherical wave between every element pair; the scattered
part superposes one rank-one plane-wave-like term per scatterer, phased by
the path-length excess of each element relative to its array centre.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ZeroDistanceError
from .geometry import ArrayGeometry, SystemParams, element_positions

_MIN_SEPARATION_M = 1e-9


@dataclass(frozen=True)
class Scatterer:
    """A point scatterer with a complex amplitude gain."""

    position_m: np.ndarray
    gain: complex

    def __post_init__(self):
        pos = np.asarray(self.position_m, dtype=float)
        if pos.shape != (3,):
            raise ValueError(f"scatterer position must have shape (3,), got {pos.shape}")
        pos = pos.copy()
        pos.flags.writeable = False
        object.__setattr__(self, "position_m", pos)
        object.__setattr__(self, "gain", complex(self.gain))


@dataclass(frozen=True)
class ChannelConfig:
    """Knobs for the random channel draw.

    Scatterers are placed in the transmitter's local frame: a radius drawn
    uniformly between ``min_scatter_radius_m`` and the link distance, and a
    direction drawn uniformly inside the azimuth/elevation cone.
    """

    num_scatterers: int = 2
    scatterer_gain_variance: float = 0.01
    min_scatter_radius_m: float = 1.0
    max_azimuth_rad: float = np.pi / 3.0
    max_elevation_rad: float = np.pi / 3.0
    include_los: bool = True

    def __post_init__(self):
        if self.num_scatterers < 0:
            raise ValueError("num_scatterers must be non-negative")
        if self.scatterer_gain_variance < 0:
            raise ValueError("scatterer_gain_variance must be non-negative")
        if self.min_scatter_radius_m <= 0:
            raise ValueError("min_scatter_radius_m must be positive")
        if not (0 <= self.max_azimuth_rad <= np.pi):
            raise ValueError("max_azimuth_rad out of range")
        if not (0 <= self.max_elevation_rad <= np.pi / 2):
            raise ValueError("max_elevation_rad out of range")


@dataclass(frozen=True)
class ChannelMatrix:
    """A synthesized channel with the draw that produced it."""

    entries: np.ndarray
    tx_geom: ArrayGeometry
    rx_geom: ArrayGeometry
    los_gain: complex = 0.0 + 0.0j
    scatterers: tuple = ()

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=np.complex128)
        expected = (self.rx_geom.num_elements, self.tx_geom.num_elements)
        if ent.shape != expected:
            raise ValueError(f"entries shape {ent.shape} does not match geometry {expected}")
        ent = ent.copy()
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    @property
    def shape(self):
        return self.entries.shape


def synthesize_los(tx: ArrayGeometry, rx: ArrayGeometry, params: SystemParams,
                   los_gain: complex) -> ChannelMatrix:
    """Spherical-wave line-of-sight channel, one exact path per element pair.

    Entry (i, j) is ``los_gain * exp(-j k r_ij) / r_ij`` with r_ij the
    Euclidean distance from transmit element j to receive element i.
    """
    tx_pos = element_positions(tx)
    rx_pos = element_positions(rx)
    diff = rx_pos[:, None, :] - tx_pos[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.min(r) < _MIN_SEPARATION_M:
        raise ZeroDistanceError(
            f"transmit/receive elements closer than {_MIN_SEPARATION_M} m"
        )
    k = params.wavenumber_rad_per_m
    entries = complex(los_gain) * np.exp(-1j * k * r) / r
    return ChannelMatrix(entries=entries, tx_geom=tx, rx_geom=rx,
                         los_gain=complex(los_gain))


def synthesize_nlos(tx: ArrayGeometry, rx: ArrayGeometry, params: SystemParams,
                    scatterers) -> ChannelMatrix:
    """Scattered channel: a sum of rank-one terms, one per scatterer.

    Each term is phased by the per-element path-length excess over the array
    centre on both link ends and normalized by 1/sqrt(N_R * N_T) so the gain
    magnitudes carry the physical scale.
    """
    tx_pos = element_positions(tx)
    rx_pos = element_positions(rx)
    n_r, n_t = rx_pos.shape[0], tx_pos.shape[0]
    entries = np.zeros((n_r, n_t), dtype=np.complex128)
    k = params.wavenumber_rad_per_m
    norm = 1.0 / np.sqrt(n_r * n_t)
    for sc in scatterers:
        q = np.asarray(sc.position_m, dtype=float)
        dr = np.sqrt(np.sum((rx_pos - q) ** 2, axis=1)) - np.sqrt(
            np.sum((rx.center_position_m - q) ** 2)
        )
        dt = np.sqrt(np.sum((tx_pos - q) ** 2, axis=1)) - np.sqrt(
            np.sum((tx.center_position_m - q) ** 2)
        )
        entries += sc.gain * norm * np.exp(-1j * k * (dr[:, None] + dt[None, :]))
    return ChannelMatrix(entries=entries, tx_geom=tx, rx_geom=rx,
                         scatterers=tuple(scatterers))


def _draw_scatterers(tx: ArrayGeometry, rx: ArrayGeometry, config: ChannelConfig,
                     rng: np.random.Generator) -> tuple:
    tx_pos = element_positions(tx)
    rx_pos = element_positions(rx)
    all_pos = np.vstack([tx_pos, rx_pos])
    lo = config.min_scatter_radius_m
    hi = max(float(np.linalg.norm(rx.center_position_m - tx.center_position_m)), lo)
    gain_scale = np.sqrt(config.scatterer_gain_variance / 2.0)
    out = []
    for _ in range(config.num_scatterers):
        while True:
            radius = rng.uniform(lo, hi)
            az = rng.uniform(-config.max_azimuth_rad, config.max_azimuth_rad)
            el = rng.uniform(-config.max_elevation_rad, config.max_elevation_rad)
            direction = np.array([
                np.sin(az) * np.cos(el),
                np.sin(el),
                np.cos(az) * np.cos(el),
            ])
            pos = tx.center_position_m + radius * (tx.orientation @ direction)
            # reject draws that land on an element
            if np.min(np.linalg.norm(all_pos - pos, axis=1)) >= _MIN_SEPARATION_M:
                break
        gain = gain_scale * (rng.standard_normal() + 1j * rng.standard_normal())
        out.append(Scatterer(position_m=pos, gain=gain))
    return tuple(out)


def synthesize_channel(tx: ArrayGeometry, rx: ArrayGeometry, params: SystemParams,
                       config: ChannelConfig, seed: int) -> ChannelMatrix:
    """Draw a random channel: spherical line of sight plus point scatterers.

    The draw order is fixed: line-of-sight gain (real, imaginary), then per
    scatterer (radius, azimuth, elevation, gain real, gain imaginary).  The
    line-of-sight gain is consumed even when ``include_los`` is off, so the
    scatterer geometry is identical across that flag.
    """
    rng = np.random.default_rng(seed)
    g0 = np.sqrt(0.5) * (rng.standard_normal() + 1j * rng.standard_normal())
    scatterers = _draw_scatterers(tx, rx, config, rng)
    los_gain = complex(g0) if config.include_los else 0.0 + 0.0j
    entries = np.zeros((rx.num_elements, tx.num_elements), dtype=np.complex128)
    if config.include_los:
        entries = entries + synthesize_los(tx, rx, params, los_gain).entries
    if scatterers:
        entries = entries + synthesize_nlos(tx, rx, params, scatterers).entries
    return ChannelMatrix(entries=entries, tx_geom=tx, rx_geom=rx,
                         los_gain=los_gain, scatterers=scatterers)


def _entries_of(channel) -> np.ndarray:
    if isinstance(channel, ChannelMatrix):
        return channel.entries
    return np.asarray(channel, dtype=np.complex128)


def save_channel(channel, path, fmt: str = "binary") -> None:
    """Write a channel matrix to disk.

    Binary layout: two little-endian int64 dimensions, then row-major
    float64 (real, imaginary) pairs.  Text layout: a "rows cols" header line,
    then one "real imaginary" pair per line in the same order.
    """
    entries = _entries_of(channel)
    path = Path(path)
    if fmt == "binary":
        with open(path, "wb") as f:
            np.array(entries.shape, dtype="<i8").tofile(f)
            flat = np.empty((entries.size, 2), dtype="<f8")
            flat[:, 0] = entries.real.ravel()
            flat[:, 1] = entries.imag.ravel()
            flat.tofile(f)
    elif fmt == "text":
        lines = [f"{entries.shape[0]} {entries.shape[1]}"]
        for re, im in zip(entries.real.ravel(), entries.imag.ravel()):
            lines.append(f"{float(re)!r} {float(im)!r}")
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown channel format: {fmt!r}")


def load_channel(path, fmt: str = "binary") -> np.ndarray:
    """Read a channel matrix written by :func:`save_channel`."""
    path = Path(path)
    if fmt == "binary":
        with open(path, "rb") as f:
            dims = np.fromfile(f, dtype="<i8", count=2)
            if dims.size != 2 or np.any(dims < 0):
                raise ValueError(f"malformed channel header in {path}")
            n_r, n_t = int(dims[0]), int(dims[1])
            flat = np.fromfile(f, dtype="<f8", count=2 * n_r * n_t)
        if flat.size != 2 * n_r * n_t:
            raise ValueError(f"truncated channel payload in {path}")
        pairs = flat.reshape(n_r * n_t, 2)
        return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(n_r, n_t)
    if fmt == "text":
        lines = path.read_text().split("\n")
        header = lines[0].split()
        n_r, n_t = int(header[0]), int(header[1])
        values = [ln.split() for ln in lines[1 : 1 + n_r * n_t]]
        if len(values) != n_r * n_t or any(len(v) != 2 for v in values):
            raise ValueError(f"malformed channel payload in {path}")
        out = np.array([complex(float(a), float(b)) for a, b in values])
        return out.reshape(n_r, n_t)
    raise ValueError(f"unknown channel format: {fmt!r}")
