import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otfs_lab.errors import ResourceLimitError
from otfs_lab.transforms import (circ_conv, commutation_matrix, dft_matrix, isfft,
                                 kron_dft_identity, sfft, unvec, vec)

from conftest import crand, direct_isfft, direct_sfft


def test_isfft_one_point_is_identity():
    assert np.allclose(isfft([[1.0]]), [[1.0]])


def test_isfft_of_impulse_is_flat():
    x = np.zeros((2, 2))
    x[0, 0] = 1
    assert np.allclose(isfft(x), 0.5)


def test_isfft_matches_direct_sum(rng):
    x = crand(rng, 4, 4)
    assert np.max(np.abs(isfft(x) - direct_isfft(x))) <= 1e-12
    assert np.max(np.abs(sfft(isfft(x)) - x)) <= 1e-12


def test_sfft_round_trip_rectangular(rng):
    x = crand(rng, 3, 5)
    assert np.max(np.abs(sfft(isfft(x)) - x)) <= 1e-12


def test_sfft_of_flat_grid_is_scaled_impulse():
    c = 0.7 - 0.2j
    y = sfft(np.full((2, 2), c))
    expected = np.zeros((2, 2), dtype=complex)
    expected[0, 0] = 2 * c
    assert np.allclose(y, expected, atol=1e-15)


def test_sfft_matches_direct_sum_8x8(rng):
    X = crand(rng, 8, 8)
    assert np.max(np.abs(sfft(X) - direct_sfft(X))) <= 1e-12


@pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.zeros((2, 0)), np.zeros(4)])
def test_degenerate_grids_rejected(bad):
    with pytest.raises(ValueError):
        isfft(bad)
    with pytest.raises(ValueError):
        sfft(bad)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        isfft([[np.nan, 0.0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 16), st.integers(1, 16), st.integers(0, 2**31))
def test_round_trip_and_parseval(N, M, seed):
    x = crand(np.random.default_rng(seed), N, M)
    X = isfft(x)
    assert np.max(np.abs(sfft(X) - x)) <= 1e-12
    assert abs(np.linalg.norm(X) ** 2 - np.linalg.norm(x) ** 2) <= 1e-12 * np.linalg.norm(x) ** 2


def test_dft_small_cases():
    assert np.allclose(dft_matrix(1), [[1]])
    assert np.allclose(dft_matrix(2), np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    F = dft_matrix(4)
    assert np.max(np.abs(F @ F.conj().T - np.eye(4))) <= 1e-13


@pytest.mark.parametrize("K", range(1, 65))
def test_dft_unitary(K):
    F = dft_matrix(K)
    assert np.max(np.abs(F @ F.conj().T - np.eye(K))) <= 1e-12


@pytest.mark.parametrize("K", [0, -1, 2.5])
def test_dft_invalid_size(K):
    with pytest.raises(ValueError):
        dft_matrix(K)


def test_vec_convention_and_round_trip(rng):
    x = crand(rng, 3, 4)
    v = vec(x)
    for k in range(3):
        for l in range(4):
            assert v[l * 3 + k] == x[k, l]
    assert np.array_equal(unvec(v, 3, 4), x)
    with pytest.raises(ValueError):
        unvec(v, 4, 4)


def test_kron_small_cases():
    assert np.allclose(kron_dft_identity(1, 3), np.eye(3))
    assert np.allclose(kron_dft_identity(2, 1), dft_matrix(2))


def test_kron_matches_explicit_kronecker_on_e0():
    # the Doppler-major product F_2 (x) I_2, permuted into delay-major vec order
    e0 = np.zeros(4)
    e0[0] = 1
    P = commutation_matrix(2, 2)
    explicit = P @ np.kron(dft_matrix(2), np.eye(2)) @ P.T
    assert np.allclose(kron_dft_identity(2, 2) @ e0, explicit @ e0)
    assert np.allclose(kron_dft_identity(2, 2), explicit)


@pytest.mark.parametrize("N", range(1, 5))
@pytest.mark.parametrize("M", range(1, 5))
def test_kron_conjugate_is_per_column_idft(N, M):
    x = crand(np.random.default_rng(N * 10 + M), N, M)
    got = unvec(kron_dft_identity(N, M, conjugate=True) @ vec(x), N, M)
    expect = np.zeros((N, M), dtype=complex)
    for l in range(M):
        for n in range(N):
            expect[n, l] = sum(x[k, l] * np.exp(2j * np.pi * n * k / N) for k in range(N)) / np.sqrt(N)
    assert np.max(np.abs(got - expect)) <= 1e-12
    U = kron_dft_identity(N, M)
    assert np.max(np.abs(U @ U.conj().T - np.eye(N * M))) <= 1e-12


def test_kron_resource_limit():
    with pytest.raises(ResourceLimitError):
        kron_dft_identity(2048, 1024)
    with pytest.raises(ResourceLimitError):
        kron_dft_identity(4, 4, max_dim=8)


def test_circ_conv_examples(rng):
    g = crand(rng, 5)
    d = np.zeros(5)
    d[0] = 1
    assert np.allclose(circ_conv(d, g), g)
    assert np.allclose(circ_conv([1, 1], [1, 1]), [2, 2])
    f, g = crand(rng, 8), crand(rng, 8)
    direct = np.array([sum(f[q] * g[(k - q) % 8] for q in range(8)) for k in range(8)])
    assert np.max(np.abs(circ_conv(f, g) - direct)) <= 1e-12


def test_circ_conv_length_mismatch():
    with pytest.raises(ValueError):
        circ_conv([1, 2, 3], [1, 2])
