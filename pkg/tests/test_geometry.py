import numpy as np
import pytest

from wavekit.geometry import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    SystemParams,
    build_facing_arrays,
    element_positions,
)


def test_single_element_sits_at_center():
    geom = ArrayGeometry(n_x=1, n_y=1, spacing_m=0.005)
    pos = element_positions(geom)
    assert pos.shape == (1, 3)
    np.testing.assert_array_equal(pos[0], np.zeros(3))


def test_two_element_row_is_symmetric_about_center():
    geom = ArrayGeometry(n_x=2, n_y=1, spacing_m=0.005)
    pos = element_positions(geom)
    np.testing.assert_allclose(pos[0], [-0.0025, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(pos[1], [0.0025, 0.0, 0.0], atol=1e-15)


def test_centroid_matches_center_for_3x2():
    center = np.array([0.5, -0.2, 1.0])
    geom = ArrayGeometry(n_x=3, n_y=2, spacing_m=0.005, center_position_m=center)
    pos = element_positions(geom)
    assert pos.shape == (6, 3)
    # independent oracle: average the six positions directly
    centroid = pos.sum(axis=0) / 6.0
    assert np.max(np.abs(centroid - center)) < 1e-12


def test_centroid_property_random_geometries():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n_x = int(rng.integers(1, 12))
        n_y = int(rng.integers(1, 12))
        center = rng.normal(size=3)
        geom = ArrayGeometry(n_x=n_x, n_y=n_y, spacing_m=0.004, center_position_m=center)
        pos = element_positions(geom)
        centroid = pos.mean(axis=0)
        assert np.max(np.abs(centroid - center)) < 1e-12


def test_nearest_neighbor_distance_equals_spacing():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n_x = int(rng.integers(1, 8))
        n_y = int(rng.integers(1, 8))
        if n_x * n_y < 2:
            n_x = 2
        geom = ArrayGeometry(n_x=n_x, n_y=n_y, spacing_m=0.0071)
        pos = element_positions(geom)
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        dist[np.diag_indices_from(dist)] = np.inf
        assert abs(dist.min() - 0.0071) < 1e-12


def test_flattening_is_row_major_with_y_fastest():
    geom = ArrayGeometry(n_x=3, n_y=2, spacing_m=0.01)
    pos = element_positions(geom)
    # index = i_x * n_y + i_y; walking i_y first advances fastest
    for i_x in range(3):
        for i_y in range(2):
            expected = np.array([(i_x - 1.0) * 0.01, (i_y - 0.5) * 0.01, 0.0])
            np.testing.assert_allclose(pos[i_x * 2 + i_y], expected, atol=1e-15)


def test_orientation_rotates_layout():
    # rotate the local plane a quarter turn about z: local x -> world y
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    geom = ArrayGeometry(n_x=2, n_y=1, spacing_m=0.01, orientation=rot)
    pos = element_positions(geom)
    np.testing.assert_allclose(pos[0], [0.0, -0.005, 0.0], atol=1e-15)
    np.testing.assert_allclose(pos[1], [0.0, 0.005, 0.0], atol=1e-15)


def test_apertures_are_derived_products():
    geom = ArrayGeometry(n_x=7, n_y=3, spacing_m=0.002)
    assert geom.aperture_x_m == 7 * 0.002
    assert geom.aperture_y_m == 3 * 0.002
    assert geom.num_elements == 21


def test_half_wavelength_spacing_at_30ghz():
    params = SystemParams.from_frequency(30e9, total_tx_power_w=0.1, noise_power_w=1e-12)
    half = params.wavelength_m / 2.0
    assert abs(half - SPEED_OF_LIGHT / (2.0 * 30e9)) < 1e-18
    assert abs(half - 4.99654e-3) < 1e-8


def test_system_params_consistency():
    params = SystemParams.from_frequency(30e9, total_tx_power_w=0.2, noise_power_w=1.26e-12)
    assert abs(params.wavelength_m * params.carrier_frequency_hz / SPEED_OF_LIGHT - 1.0) < 1e-12
    assert abs(params.wavenumber_rad_per_m * params.wavelength_m / (2.0 * np.pi) - 1.0) < 1e-12


def test_system_params_rejects_bad_values():
    with pytest.raises(ValueError):
        SystemParams.from_frequency(-1.0, total_tx_power_w=0.1, noise_power_w=1e-12)
    with pytest.raises(ValueError):
        SystemParams.from_frequency(30e9, total_tx_power_w=0.0, noise_power_w=1e-12)
    with pytest.raises(ValueError):
        SystemParams.from_frequency(30e9, total_tx_power_w=0.1, noise_power_w=-1e-12)
    with pytest.raises(ValueError):
        SystemParams(
            carrier_frequency_hz=30e9,
            wavelength_m=0.5,  # inconsistent with c/f
            wavenumber_rad_per_m=2.0 * np.pi / 0.5,
            total_tx_power_w=0.1,
            noise_power_w=1e-12,
        )


def test_array_geometry_rejects_bad_values():
    with pytest.raises(ValueError):
        ArrayGeometry(n_x=0, n_y=1, spacing_m=0.005)
    with pytest.raises(ValueError):
        ArrayGeometry(n_x=1, n_y=1, spacing_m=-0.005)
    with pytest.raises(ValueError):
        ArrayGeometry(n_x=1, n_y=1, spacing_m=0.005, orientation=np.eye(3) * 2.0)


def test_facing_arrays_look_at_each_other():
    tx, rx = build_facing_arrays(n_x=4, n_y=2, spacing_m=0.005, distance_m=2.0)
    np.testing.assert_array_equal(tx.center_position_m, [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(rx.center_position_m, [0.0, 0.0, 2.0])
    # tx broadside points at +z, rx broadside back at -z
    np.testing.assert_allclose(tx.orientation @ [0, 0, 1], [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(rx.orientation @ [0, 0, 1], [0, 0, -1], atol=1e-15)
    # both layouts share the same vertical axis
    np.testing.assert_allclose(rx.orientation @ [0, 1, 0], [0, 1, 0], atol=1e-15)
    # centroid distance equals the requested separation
    d = np.linalg.norm(
        element_positions(rx).mean(axis=0) - element_positions(tx).mean(axis=0)
    )
    assert abs(d - 2.0) < 1e-12
