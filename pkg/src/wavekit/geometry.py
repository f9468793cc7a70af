"""Uniform planar array layouts and the system constants shared by every stage."""

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def _as_readonly(arr, shape, name):
    out = np.array(arr, dtype=float)
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SystemParams:
    """Carrier, power, and noise constants. Wavelength and wavenumber are stored
    explicitly and checked against the carrier frequency so a stale field cannot
    drift unnoticed."""

    carrier_frequency_hz: float
    wavelength_m: float
    wavenumber_rad_per_m: float
    total_tx_power_w: float
    noise_power_w: float
    num_rf_chains_tx: int | None = None
    num_rf_chains_rx: int | None = None
    bandwidth_hz: float | None = None  # carried through configs, unused by the math

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0:
            raise ValueError("carrier_frequency_hz must be positive")
        if self.total_tx_power_w <= 0:
            raise ValueError("total_tx_power_w must be positive")
        if self.noise_power_w <= 0:
            raise ValueError("noise_power_w must be positive")
        lam = SPEED_OF_LIGHT / self.carrier_frequency_hz
        if abs(self.wavelength_m / lam - 1.0) > 1e-12:
            raise ValueError("wavelength_m inconsistent with carrier_frequency_hz")
        if abs(self.wavenumber_rad_per_m * self.wavelength_m / (2.0 * np.pi) - 1.0) > 1e-12:
            raise ValueError("wavenumber_rad_per_m inconsistent with wavelength_m")
        for name in ("num_rf_chains_tx", "num_rf_chains_rx"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ValueError(f"{name} must be a positive integer when set")

    @classmethod
    def from_frequency(cls, carrier_frequency_hz, total_tx_power_w, noise_power_w,
                       num_rf_chains_tx=None, num_rf_chains_rx=None, bandwidth_hz=None):
        if carrier_frequency_hz <= 0:
            raise ValueError("carrier_frequency_hz must be positive")
        wavelength = SPEED_OF_LIGHT / carrier_frequency_hz
        return cls(
            carrier_frequency_hz=float(carrier_frequency_hz),
            wavelength_m=wavelength,
            wavenumber_rad_per_m=2.0 * np.pi / wavelength,
            total_tx_power_w=float(total_tx_power_w),
            noise_power_w=float(noise_power_w),
            num_rf_chains_tx=num_rf_chains_tx,
            num_rf_chains_rx=num_rf_chains_rx,
            bandwidth_hz=bandwidth_hz,
        )


_IDENTITY3 = np.eye(3)
_IDENTITY3.setflags(write=False)


@dataclass(frozen=True)
class ArrayGeometry:
    """Rectangular grid of n_x * n_y elements with pitch spacing_m, centered on
    center_position_m. The local grid lies in the orientation frame's x-y plane;
    broadside is the local +z axis."""

    n_x: int
    n_y: int
    spacing_m: float
    center_position_m: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: _IDENTITY3)
    aperture_x_m: float = field(init=False)
    aperture_y_m: float = field(init=False)

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("element counts must be positive integers")
        if self.spacing_m <= 0:
            raise ValueError("spacing_m must be positive")
        object.__setattr__(self, "center_position_m",
                           _as_readonly(self.center_position_m, (3,), "center_position_m"))
        rot = _as_readonly(self.orientation, (3, 3), "orientation")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-12 or np.linalg.det(rot) < 0:
            raise ValueError("orientation must be a proper rotation matrix")
        object.__setattr__(self, "orientation", rot)
        object.__setattr__(self, "aperture_x_m", self.n_x * self.spacing_m)
        object.__setattr__(self, "aperture_y_m", self.n_y * self.spacing_m)

    @property
    def num_elements(self):
        return self.n_x * self.n_y


def element_positions(geom):
    """World positions of all elements, shape (N, 3), flattened with i_y fastest.

    Element (i_x, i_y) maps to row i_x * n_y + i_y; every consumer of flattened
    indices (channel rows/columns, dictionary rows) relies on this one order.
    """
    ix = np.arange(geom.n_x) - (geom.n_x - 1) / 2.0
    iy = np.arange(geom.n_y) - (geom.n_y - 1) / 2.0
    local = np.zeros((geom.n_x, geom.n_y, 3))
    local[:, :, 0] = ix[:, None] * geom.spacing_m
    local[:, :, 1] = iy[None, :] * geom.spacing_m
    flat = local.reshape(geom.n_x * geom.n_y, 3)
    return flat @ geom.orientation.T + geom.center_position_m


# Rx mirrors the Tx by a half turn about the vertical (y) axis, so the two
# broadsides point at each other and the vertical axes coincide.
_FACING_ROTATION = np.array([
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, -1.0],
])


def build_facing_arrays(n_x, n_y, spacing_m, distance_m, center=(0.0, 0.0, 0.0)):
    """Tx at `center` looking down +z, an identical Rx at distance_m on that axis
    looking back. Returns (tx, rx)."""
    if distance_m <= 0:
        raise ValueError("distance_m must be positive")
    center = np.asarray(center, dtype=float)
    tx = ArrayGeometry(n_x=n_x, n_y=n_y, spacing_m=spacing_m, center_position_m=center)
    rx = ArrayGeometry(
        n_x=n_x,
        n_y=n_y,
        spacing_m=spacing_m,
        center_position_m=center + np.array([0.0, 0.0, distance_m]),
        orientation=_FACING_ROTATION,
    )
    return tx, rx
