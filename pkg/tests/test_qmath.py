import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from qdspin.qmath import (DegenerateFitError, NotHermitianError, as_matrix, basis, dag, expm,
                          herm_eigen, hermiticity_defect, is_hermitian, lstsq, normalize,
                          projector)


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    return scale * h / np.linalg.norm(h, 2)


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 16)


def test_diagonal_eigen_is_identity_basis():
    w, v = herm_eigen(np.diag([-1.0, 1.0]))
    assert w.tolist() == [-1.0, 1.0]
    assert np.allclose(np.abs(v), np.eye(2), atol=1e-15)


def test_pauli_x_eigenvalues():
    w, _ = herm_eigen([[0, 1], [1, 0]])
    assert np.allclose(w, [-1.0, 1.0], atol=1e-14)


def test_eigen_rejects_non_hermitian():
    with pytest.raises(NotHermitianError, match="not Hermitian"):
        herm_eigen([[0, 1], [0, 0]])


@settings(max_examples=60, deadline=None)
@given(seeds, dims)
def test_eigen_reconstruction_and_orthonormality(seed, n):
    h = random_hermitian(np.random.default_rng(seed), n, 3.0)
    w, v = herm_eigen(h)
    norm = np.linalg.norm(h)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(h @ v - v * w)) < 1e-9 * max(norm, 1.0)
    assert np.max(np.abs(v.conj().T @ v - np.eye(n))) < 1e-9
    assert abs(w.sum() - np.trace(h).real) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_eigenvalues_match_lapack(seed, n):
    h = random_hermitian(np.random.default_rng(seed), n)
    assert np.allclose(herm_eigen(h)[0], scipy.linalg.eigvalsh(h), atol=1e-12)


def test_expm_zero_and_diagonal():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    theta, a, b = 0.7, 1.3, -2.1
    got = expm(1j * theta * np.diag([a, b]))
    assert np.allclose(got, np.diag([np.exp(1j * theta * a), np.exp(1j * theta * b)]),
                       atol=1e-14)


def test_expm_x_rotation_closed_form():
    got = expm(-1j * (math.pi / 2) * np.array([[0, 1], [1, 0]]))
    assert np.allclose(got, [[0, -1j], [-1j, 0]], atol=1e-14)


def test_expm_rejects_non_finite():
    with pytest.raises(ValueError):
        expm([[np.nan, 0], [0, 0]])


@settings(max_examples=60, deadline=None)
@given(seeds, dims, st.floats(0.01, 10.0))
def test_expm_matches_scipy(seed, n, scale):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m *= scale / np.linalg.norm(m, 2)
    ref = scipy.linalg.expm(m)
    assert np.linalg.norm(expm(m) - ref) <= 1e-10 * np.linalg.norm(ref)


@settings(max_examples=40, deadline=None)
@given(seeds, dims, st.floats(0.0, 5.0))
def test_expm_inverse_and_unitarity(seed, n, scale):
    h = random_hermitian(np.random.default_rng(seed), n, scale)
    assert np.max(np.abs(expm(h) @ expm(-h) - np.eye(n))) < 1e-9
    u = expm(-1j * 0.3 * h)
    assert np.max(np.abs(u @ u.conj().T - np.eye(n))) < 1e-10


def test_lstsq_identity_design():
    y = np.array([1.5, -2.0, 3.25])
    coef, resid = lstsq(np.eye(3), y)
    assert np.allclose(coef, y, atol=1e-15) and resid < 1e-15


def test_lstsq_quadratic_interpolation():
    b = np.array([0.0, 1.0, 2.0, 3.0])
    coef, resid = lstsq(np.column_stack([np.ones(4), b, b ** 2]), 2 + 3 * b + 4 * b ** 2)
    assert np.allclose(coef, [2, 3, 4], atol=1e-12) and resid < 1e-10


def test_lstsq_matches_numpy_on_overdetermined_noise():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 4))
    y = rng.normal(size=40)
    coef, resid = lstsq(x, y)
    ref, res, *_ = np.linalg.lstsq(x, y, rcond=None)
    assert np.allclose(coef, ref, atol=1e-12)
    assert math.isclose(resid, math.sqrt(res[0]), rel_tol=1e-10)


def test_lstsq_degenerate_names_null_direction():
    b = np.arange(5.0)
    x = np.column_stack([np.ones(5), b, 2 * b])
    with pytest.raises(DegenerateFitError, match="degenerate fit") as info:
        lstsq(x, b)
    null = info.value.null_direction
    assert np.linalg.norm(x @ null) < 1e-8
    assert abs(null[0]) < 1e-8


def test_lstsq_underdetermined():
    with pytest.raises(DegenerateFitError):
        lstsq(np.ones((2, 3)), np.ones(2))


def test_helpers():
    assert is_hermitian([[1, 2j], [-2j, 3]], 0.0)
    assert not is_hermitian([[1, 2j], [2j, 3]], 0.0)
    assert hermiticity_defect(np.eye(2)) == 0.0
    p = projector(4, 1, 3)
    assert p[1, 3] == 1 and np.count_nonzero(p) == 1
    assert np.array_equal(dag(p), projector(4, 3, 1))
    assert abs(np.linalg.norm(normalize([3, 4j])) - 1) < 1e-12
    assert basis(3, 2).tolist() == [0, 0, 1]
    with pytest.raises(ValueError):
        as_matrix(np.zeros((17, 17)))
    with pytest.raises(ValueError):
        as_matrix(np.zeros((2, 3)))
