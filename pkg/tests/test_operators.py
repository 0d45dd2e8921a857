import numpy as np
import pytest

from conftest import random_density, random_unitary
from twoqubit_heom.operators import (I2, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z,
                                     anticommutator, clamp_eigenvalues, commutator, dag,
                                     hermitian_eig, hermiticity_defect, kron, partial_trace,
                                     psd_sqrt)


def test_pauli_algebra():
    assert np.allclose(SIGMA_X @ SIGMA_Y, 1j * SIGMA_Z)
    assert np.allclose(commutator(SIGMA_PLUS, SIGMA_MINUS), SIGMA_Z)
    assert np.allclose(anticommutator(SIGMA_X, SIGMA_X), 2 * I2)
    # |1> is the first basis vector and is the +1 eigenstate of sigma_z
    assert np.allclose(SIGMA_Z @ [1, 0], [1, 0])
    assert np.allclose(SIGMA_PLUS @ [0, 1], [1, 0])
    assert np.allclose(dag(SIGMA_PLUS), SIGMA_MINUS)


def test_kron_matches_numpy(rng):
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    assert np.array_equal(kron(a, b), np.kron(a, b))


def test_partial_trace_of_product(rng):
    ra, rb = random_density(rng, 2), random_density(rng, 2)
    rho = kron(ra, rb)
    assert np.allclose(partial_trace(rho, "A"), ra, atol=1e-14)
    assert np.allclose(partial_trace(rho, "B"), rb, atol=1e-14)


def test_partial_trace_is_trace_preserving(rng):
    rho = random_density(rng)
    for keep in "AB":
        assert abs(np.trace(partial_trace(rho, keep)) - 1) < 1e-14


def test_partial_trace_bell_is_maximally_mixed():
    psi = np.array([0, 1, 1, 0]) / np.sqrt(2)
    rho = np.outer(psi, psi)
    assert np.allclose(partial_trace(rho, "A"), I2 / 2)
    assert np.allclose(partial_trace(rho, "B"), I2 / 2)


def test_partial_trace_rejects_bad_input():
    with pytest.raises(ValueError):
        partial_trace(np.eye(3), "A")
    with pytest.raises(ValueError):
        partial_trace(np.eye(4) / 4, "C")


def test_hermitian_eig_reconstructs(rng):
    h = random_density(rng) - 0.25 * np.eye(4)
    dec = hermitian_eig(h)
    assert np.all(np.diff(dec.eigenvalues) >= 0)
    assert np.allclose(dec.reconstruct(), h, atol=1e-13)
    w, v = dec
    assert np.allclose(v.conj().T @ v, np.eye(4), atol=1e-13)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_clamp_eigenvalues():
    assert np.array_equal(clamp_eigenvalues(np.array([-1e-11, 0.5])), [0.0, 0.5])
    with pytest.raises(ValueError):
        clamp_eigenvalues(np.array([-1e-9, 1.0]))


def test_psd_sqrt(rng):
    rho = random_density(rng)
    r = psd_sqrt(rho)
    assert np.allclose(r @ r, rho, atol=1e-13)
    assert hermiticity_defect(r) < 1e-14


def test_local_unitary_commutes_with_partial_trace(rng):
    rho = random_density(rng)
    u = random_unitary(rng)
    big = kron(u, I2)
    assert np.allclose(partial_trace(big @ rho @ dag(big), "A"),
                       u @ partial_trace(rho, "A") @ dag(u), atol=1e-13)
    assert np.allclose(partial_trace(big @ rho @ dag(big), "B"), partial_trace(rho, "B"), atol=1e-13)
