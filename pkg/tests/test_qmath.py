import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diqss import qmath
from diqss.qmath import (
    IDENTITY,
    SIGMA_X,
    SIGMA_Y,
    TOL,
    ObservableXY,
    check_density_matrix,
    expectation,
    ghz_state,
    is_normalized,
    kron,
    observable_matrix,
    partial_trace,
    projector,
    tensor3,
)
from oracles import ghz_statevector_loop

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)
unit = st.floats(0.0, 1.0)


def random_density(seed, dim=8):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def test_ghz_1_plus_amplitudes():
    psi = ghz_state(1, "+")
    expected = np.zeros(8)
    expected[[0, 7]] = 1 / np.sqrt(2)
    np.testing.assert_allclose(psi, expected, atol=1e-15)


def test_ghz_4_minus_places_hvv_and_vhh():
    psi = ghz_state(4, "-")
    assert psi[0b011] == pytest.approx(1 / np.sqrt(2))
    assert psi[0b100] == pytest.approx(-1 / np.sqrt(2))
    assert np.count_nonzero(psi) == 2


@pytest.mark.parametrize("index", [1, 2, 3, 4])
@pytest.mark.parametrize("sign", ["+", "-"])
def test_ghz_branches_match_ket_listing(index, sign):
    np.testing.assert_allclose(ghz_state(index, sign), ghz_statevector_loop(index, sign), atol=1e-15)
    assert is_normalized(ghz_state(index, sign))


def test_ghz_branches_form_orthonormal_basis():
    basis = np.array([ghz_state(i, s) for i in range(1, 5) for s in "+-"])
    np.testing.assert_allclose(basis @ basis.conj().T, np.eye(8), atol=1e-14)


@pytest.mark.parametrize("bad", [(0, "+"), (5, "+"), (1, "x")])
def test_ghz_rejects_bad_labels(bad):
    with pytest.raises(ValueError):
        ghz_state(*bad)


def test_observable_special_angles():
    np.testing.assert_allclose(observable_matrix(ObservableXY(0.0)), [[0, 1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(observable_matrix(ObservableXY(np.pi / 2)), [[0, -1j], [1j, 0]], atol=1e-15)
    np.testing.assert_allclose(observable_matrix(-np.pi / 2), -SIGMA_Y, atol=1e-15)


@given(angles)
def test_observable_squares_to_identity(angle):
    m = ObservableXY(angle).matrix
    np.testing.assert_allclose(m @ m, IDENTITY, atol=TOL.algebraic)
    np.testing.assert_allclose(m, m.conj().T, atol=TOL.algebraic)
    assert abs(np.trace(m)) < TOL.algebraic
    np.testing.assert_allclose(np.linalg.eigvalsh(m), [-1, 1], atol=TOL.algebraic)


@given(angles, st.sampled_from([1, -1]))
def test_projectors_resolve_observable(angle, outcome):
    o = ObservableXY(angle)
    p = o.projector(outcome)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    np.testing.assert_allclose(o.projector(1) - o.projector(-1), o.matrix, atol=1e-12)


def test_tensor3_identity_and_ghz_eigenvector():
    np.testing.assert_allclose(tensor3(IDENTITY, IDENTITY, IDENTITY), np.eye(8))
    xxx = tensor3(SIGMA_X, SIGMA_X, SIGMA_X)
    psi = ghz_state(1, "+")
    np.testing.assert_allclose(xxx @ psi, psi, atol=1e-15)
    assert expectation(projector(psi), xxx) == pytest.approx(1.0)


def test_tensor3_rejects_wrong_shape():
    with pytest.raises(ValueError):
        tensor3(np.eye(4), IDENTITY, IDENTITY)


@given(st.integers(0, 2**32 - 1))
def test_tensor3_associative_and_bilinear(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
    x = rng.normal()
    np.testing.assert_allclose(tensor3(a, b, c), np.kron(np.kron(a, b), c), atol=1e-12)
    np.testing.assert_allclose(tensor3(a, b, c), np.kron(a, np.kron(b, c)), atol=1e-12)
    np.testing.assert_allclose(tensor3(a + x * d, b, c), tensor3(a, b, c) + x * tensor3(d, b, c), atol=1e-12)


@given(st.integers(0, 2**32 - 1), angles, angles, angles)
def test_expectation_of_pm1_observable_is_bounded(seed, t1, t2, t3):
    rho = check_density_matrix(random_density(seed))
    obs = tensor3(*(ObservableXY(t).matrix for t in (t1, t2, t3)))
    assert -1.0 <= expectation(rho, obs) <= 1.0


def test_expectation_maximally_mixed_and_linearity():
    xxx = tensor3(SIGMA_X, SIGMA_X, SIGMA_X)
    assert expectation(np.eye(8) / 8, xxx) == pytest.approx(0.0, abs=1e-15)
    for F in (0.0, 0.3, 0.96, 1.0):
        rho = F * projector(ghz_state()) + (1 - F) * np.eye(8) / 8
        assert expectation(rho, xxx) == pytest.approx(F, abs=1e-12)


def test_expectation_shape_mismatch():
    with pytest.raises(ValueError):
        expectation(np.eye(8) / 8, SIGMA_X)


def test_check_density_matrix_rejects_invalid():
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        check_density_matrix(np.eye(2))
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[0.5, 0.1], [0.3, 0.5]]))
    with pytest.raises(ValueError):
        check_density_matrix(np.eye(3) / 3)


@given(st.integers(0, 2**32 - 1))
def test_partial_traces_are_density_matrices(seed):
    rho = random_density(seed)
    for keep in [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]:
        check_density_matrix(partial_trace(rho, keep))


def test_partial_trace_matches_explicit_sum():
    rho = random_density(11)
    t = rho.reshape([2] * 6)
    ab = np.einsum("abcdec->abde", t).reshape(4, 4)
    np.testing.assert_allclose(partial_trace(rho, (0, 1)), ab, atol=1e-14)
    np.testing.assert_allclose(partial_trace(projector(ghz_state()), (0,)), np.eye(2) / 2, atol=1e-15)


def test_kron_and_normalization_helpers():
    np.testing.assert_allclose(kron(SIGMA_X, IDENTITY), np.kron(SIGMA_X, IDENTITY))
    assert not is_normalized(np.ones(3) / np.sqrt(3))
    assert qmath.TOL.spectral == 1e-10
