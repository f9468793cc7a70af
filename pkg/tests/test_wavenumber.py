import numpy as np
import pytest

from wavekit.errors import ShapeMismatchError
from wavekit.geometry import ArrayGeometry, SystemParams, build_facing_arrays
from wavekit.channel import synthesize_los
from wavekit.wavenumber import (
    build_dictionary,
    enumerate_support,
    from_wavenumber,
    to_wavenumber,
)


def _params(f_hz=30e9):
    return SystemParams.from_frequency(f_hz, total_tx_power_w=0.2, noise_power_w=1.26e-12)


def _half_lambda_geom(n_x, n_y, params):
    return ArrayGeometry(n_x=n_x, n_y=n_y, spacing_m=params.wavelength_m / 2.0)


def _brute_support(geom, params, beta):
    """Independent enumeration oracle: scan the full anti-aliased index box."""
    k = params.wavenumber_rad_per_m
    out = []
    for lx in range(int(np.ceil(-geom.n_x / 2)), int(np.ceil(geom.n_x / 2))):
        for ly in range(int(np.ceil(-geom.n_y / 2)), int(np.ceil(geom.n_y / 2))):
            lhs = (2 * np.pi * lx / geom.aperture_x_m) ** 2 + (
                2 * np.pi * ly / geom.aperture_y_m
            ) ** 2
            if lhs <= beta * k * k * (1 + 1e-12):
                out.append((lx, ly))
    return sorted(out)


def test_support_1d_four_elements_half_lambda():
    params = _params()
    geom = _half_lambda_geom(4, 1, params)
    support = enumerate_support(geom, params, beta=1.0)
    # |l_x| <= 2 admitted by the circle, +2 clipped because it aliases -2 mod 4
    assert support.indices == ((-2, 0), (-1, 0), (0, 0), (1, 0))


def test_support_contains_dc_for_any_geometry():
    params = _params()
    rng = np.random.default_rng(11)
    for _ in range(10):
        geom = _half_lambda_geom(int(rng.integers(1, 40)), int(rng.integers(1, 9)), params)
        support = enumerate_support(geom, params, beta=1.0)
        assert (0, 0) in support.indices


def test_support_monotone_in_beta():
    params = _params()
    geom = _half_lambda_geom(4, 1, params)
    s1 = enumerate_support(geom, params, beta=1.0)
    s2 = enumerate_support(geom, params, beta=2.0)
    assert s2.cardinality >= s1.cardinality
    assert set(s1.indices) <= set(s2.indices)


def test_support_matches_brute_enumeration():
    params = _params()
    rng = np.random.default_rng(5)
    for _ in range(12):
        n_x = int(rng.integers(1, 24))
        n_y = int(rng.integers(1, 7))
        beta = float(rng.choice([1.0, 1.5, 2.0, 4.0]))
        geom = _half_lambda_geom(n_x, n_y, params)
        support = enumerate_support(geom, params, beta=beta)
        assert list(support.indices) == _brute_support(geom, params, beta)


def test_support_sorted_unique_and_alias_free():
    params = _params()
    geom = _half_lambda_geom(16, 3, params)
    support = enumerate_support(geom, params, beta=1.0)
    idx = list(support.indices)
    assert idx == sorted(set(idx))
    xs = [lx % geom.n_x for lx, _ in idx]
    ys = [ly % geom.n_y for _, ly in idx]
    # no two indices congruent on both axes simultaneously
    assert len(set(zip(xs, ys))) == len(idx)
    for lx, ly in idx:
        assert -geom.n_x / 2 <= lx < geom.n_x / 2 or geom.n_x == 1
        assert -geom.n_y / 2 <= ly < geom.n_y / 2 or geom.n_y == 1


def test_support_grows_with_aperture():
    params = _params()
    for m in (2, 3, 5, 9):
        small = enumerate_support(_half_lambda_geom(m, 1, params), params, beta=1.0)
        big = enumerate_support(_half_lambda_geom(2 * m, 1, params), params, beta=1.0)
        assert big.cardinality >= small.cardinality


def test_support_rejects_beta_below_one():
    params = _params()
    geom = _half_lambda_geom(4, 1, params)
    with pytest.raises(ValueError):
        enumerate_support(geom, params, beta=0.5)


def test_dictionary_dc_column_is_constant():
    params = _params()
    geom = _half_lambda_geom(4, 2, params)
    support = enumerate_support(geom, params, beta=1.0)
    dic = build_dictionary(support)
    col = dic.matrix[:, support.indices.index((0, 0))]
    np.testing.assert_allclose(col, np.full(8, 1.0 / np.sqrt(8.0)), atol=1e-15)


def test_dictionary_gram_identity_4x1():
    params = _params()
    geom = _half_lambda_geom(4, 1, params)
    dic = build_dictionary(enumerate_support(geom, params, beta=1.0))
    gram = dic.matrix.conj().T @ dic.matrix
    assert np.max(np.abs(gram - np.eye(dic.matrix.shape[1]))) < 1e-12


def test_dictionary_entry_magnitudes_exact():
    params = _params()
    geom = _half_lambda_geom(6, 3, params)
    dic = build_dictionary(enumerate_support(geom, params, beta=1.0))
    n = geom.num_elements
    assert np.max(np.abs(np.abs(dic.matrix) - 1.0 / np.sqrt(n))) < 1e-15


def test_dictionary_column_formula_oracle():
    # re-derive a few entries with scalar arithmetic
    params = _params()
    geom = _half_lambda_geom(5, 2, params)
    support = enumerate_support(geom, params, beta=1.0)
    dic = build_dictionary(support)
    n = geom.num_elements
    rng = np.random.default_rng(2)
    for _ in range(20):
        col = int(rng.integers(0, len(support.indices)))
        lx, ly = support.indices[col]
        i_x = int(rng.integers(0, geom.n_x))
        i_y = int(rng.integers(0, geom.n_y))
        row = i_x * geom.n_y + i_y
        expected = np.exp(2j * np.pi * (lx * i_x / geom.n_x + ly * i_y / geom.n_y)) / np.sqrt(n)
        assert abs(dic.matrix[row, col] - expected) < 1e-13


def test_dictionary_orthonormal_random_geometries():
    params = _params()
    rng = np.random.default_rng(9)
    for _ in range(8):
        geom = _half_lambda_geom(int(rng.integers(2, 32)), int(rng.integers(1, 8)), params)
        dic = build_dictionary(enumerate_support(geom, params, beta=1.0))
        gram = dic.matrix.conj().T @ dic.matrix
        assert np.max(np.abs(gram - np.eye(gram.shape[0]))) < 1e-10


def _random_channel(params, n_x, n_y, distance, seed):
    tx, rx = build_facing_arrays(n_x, n_y, params.wavelength_m / 2.0, distance)
    g0 = np.exp(1j * np.random.default_rng(seed).uniform(0, 2 * np.pi))
    return synthesize_los(tx, rx, params, g0)


def test_to_wavenumber_triple_product_oracle():
    params = _params()
    h = _random_channel(params, 8, 2, 1.0, seed=0)
    rx_dict = build_dictionary(enumerate_support(h.rx_geom, params, beta=1.0))
    tx_dict = build_dictionary(enumerate_support(h.tx_geom, params, beta=1.0))
    wch = to_wavenumber(h, rx_dict, tx_dict)
    rng = np.random.default_rng(1)
    for _ in range(25):
        i = int(rng.integers(0, wch.entries.shape[0]))
        j = int(rng.integers(0, wch.entries.shape[1]))
        oracle = np.vdot(rx_dict.matrix[:, i], h.entries @ tx_dict.matrix[:, j])
        assert abs(wch.entries[i, j] - oracle) < 1e-12


def test_to_wavenumber_recovers_planted_coefficients():
    params = _params()
    geom_r = _half_lambda_geom(6, 1, params)
    geom_t = _half_lambda_geom(4, 1, params)
    rx_dict = build_dictionary(enumerate_support(geom_r, params, beta=1.0))
    tx_dict = build_dictionary(enumerate_support(geom_t, params, beta=1.0))
    rng = np.random.default_rng(4)
    x = rng.normal(size=(rx_dict.matrix.shape[1], tx_dict.matrix.shape[1]))
    x = x + 1j * rng.normal(size=x.shape)
    h = rx_dict.matrix @ x @ tx_dict.matrix.conj().T
    recovered = to_wavenumber(h, rx_dict, tx_dict).entries
    assert np.max(np.abs(recovered - x)) < 1e-10


def test_to_wavenumber_zero_channel():
    params = _params()
    geom = _half_lambda_geom(4, 1, params)
    dic = build_dictionary(enumerate_support(geom, params, beta=1.0))
    wch = to_wavenumber(np.zeros((4, 4), dtype=complex), dic, dic)
    assert np.all(wch.entries == 0)


def test_round_trip_with_complete_basis():
    # beta = 2 fills the whole anti-aliased box at half-lambda spacing
    params = _params()
    h = _random_channel(params, 6, 2, 0.8, seed=3)
    rx_sup = enumerate_support(h.rx_geom, params, beta=2.0)
    tx_sup = enumerate_support(h.tx_geom, params, beta=2.0)
    assert rx_sup.cardinality == h.rx_geom.num_elements
    assert tx_sup.cardinality == h.tx_geom.num_elements
    rx_dict, tx_dict = build_dictionary(rx_sup), build_dictionary(tx_sup)
    h_rec = from_wavenumber(to_wavenumber(h, rx_dict, tx_dict), rx_dict, tx_dict)
    rel = np.linalg.norm(h_rec - h.entries) / np.linalg.norm(h.entries)
    assert rel < 1e-9


def test_from_wavenumber_zero():
    params = _params()
    geom = _half_lambda_geom(4, 1, params)
    dic = build_dictionary(enumerate_support(geom, params, beta=1.0))
    wch = to_wavenumber(np.zeros((4, 4), dtype=complex), dic, dic)
    assert np.all(from_wavenumber(wch, dic, dic) == 0)


def test_far_field_reconstruction_with_propagating_support():
    # 2-D array so the cone prunes corner harmonics: the projection is lossy
    # in general yet captures nearly all far-field energy
    params = _params()
    h = _random_channel(params, 8, 4, 100.0, seed=6)
    rx_dict = build_dictionary(enumerate_support(h.rx_geom, params, beta=1.0))
    tx_dict = build_dictionary(enumerate_support(h.tx_geom, params, beta=1.0))
    h_rec = from_wavenumber(to_wavenumber(h, rx_dict, tx_dict), rx_dict, tx_dict)
    rel = np.linalg.norm(h_rec - h.entries) / np.linalg.norm(h.entries)
    assert rel < 0.05


def test_energy_contraction():
    params = _params()
    rng = np.random.default_rng(13)
    geom = _half_lambda_geom(8, 2, params)
    dic = build_dictionary(enumerate_support(geom, params, beta=1.0))
    for _ in range(5):
        h = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        wch = to_wavenumber(h, dic, dic)
        assert np.linalg.norm(wch.entries) <= np.linalg.norm(h) * (1 + 1e-12)


def test_shape_mismatch_raises():
    params = _params()
    geom = _half_lambda_geom(4, 1, params)
    dic = build_dictionary(enumerate_support(geom, params, beta=1.0))
    with pytest.raises(ShapeMismatchError):
        to_wavenumber(np.zeros((3, 4), dtype=complex), dic, dic)
    wch = to_wavenumber(np.zeros((4, 4), dtype=complex), dic, dic)
    geom5 = _half_lambda_geom(5, 1, params)
    dic5 = build_dictionary(enumerate_support(geom5, params, beta=1.0))
    with pytest.raises(ShapeMismatchError):
        from_wavenumber(wch, dic5, dic)


def test_support_is_distance_free():
    # the enumeration has no distance argument; identical inputs, identical output
    params = _params()
    geom = _half_lambda_geom(12, 3, params)
    a = enumerate_support(geom, params, beta=1.0)
    b = enumerate_support(geom, params, beta=1.0)
    assert a.indices == b.indices
