import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diqss import entropy
from diqss.entropy import (
    S_MAX,
    EntropyBound,
    QubitCorrelationVars,
    RootNotFound,
    binary_entropy,
    entropy_bound,
    g_bound,
    g_bound_q,
    lower_convex_envelope,
    solve_E_half_analytic,
    solve_E_lambda,
)
from oracles import binary_entropy as h_ref
from oracles import objective_best_delta, slsqp_E2

S_open = st.floats(2.0 + 1e-6, S_MAX)
lams = st.floats(0.0, 1.0)
unit = st.floats(0.0, 1.0)
qs = st.floats(0.0, 0.5)


# --- entropy helpers -------------------------------------------------------

def test_binary_entropy_examples():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=2e-4)


@given(unit)
def test_binary_entropy_matches_reference_and_is_symmetric(x):
    assert binary_entropy(x) == pytest.approx(h_ref(x), abs=1e-12)
    assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)
    assert 0.0 <= binary_entropy(x) <= 1.0


def test_binary_entropy_vectorised_and_range():
    np.testing.assert_allclose(binary_entropy(np.array([0.0, 0.5, 1.0])), [0, 1, 0])
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            binary_entropy(bad)


def test_g_bound_examples():
    assert g_bound(1.0) == pytest.approx(1.0)
    assert g_bound(0.0) == pytest.approx(0.0)
    assert g_bound_q(1.0, 0.3) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        g_bound(1.5)
    with pytest.raises(ValueError):
        g_bound_q(0.5, 0.6)


@given(unit, unit, qs)
def test_g_bounds_range_monotone_and_consistent(x, y, q):
    lo, hi = sorted((x, y))
    assert g_bound_q(x, 0.0) == pytest.approx(g_bound(x), abs=1e-12)
    assert -1e-12 <= g_bound_q(x, q) <= 1 + 1e-12
    assert g_bound(hi) >= g_bound(lo) - 1e-12
    assert g_bound_q(hi, q) >= g_bound_q(lo, q) - 1e-12


# --- the constrained minimisation -------------------------------------------

def test_single_basis_example():
    assert solve_E_lambda(2.4, 1.0)[0] == pytest.approx(0.44, abs=1e-6)


@pytest.mark.parametrize("lam", [0.0, 0.3, 0.5, 0.9, 1.0])
def test_maximal_violation_forces_unit_value(lam):
    assert solve_E_lambda(S_MAX, lam)[0] == pytest.approx(1.0, abs=1e-9)


def test_equal_weight_example_reproduces_anchor_entropy():
    e2 = solve_E_lambda(2.4, 0.5)[0]
    assert e2 == pytest.approx(0.573, abs=2e-3)
    assert g_bound(math.sqrt(e2)) == pytest.approx(0.467, abs=2e-3)


def test_classical_region_returns_zero():
    e2, w = solve_E_lambda(2.0, 0.3)
    assert e2 == 0.0
    assert w.is_feasible(2.0)
    assert solve_E_lambda(1.5, 0.3)[0] == 0.0


def test_solver_argument_validation():
    with pytest.raises(ValueError):
        solve_E_lambda(2.4, 1.2)
    with pytest.raises(ValueError):
        solve_E_lambda(3.0, 0.5)


@given(S_open, lams)
def test_witness_is_feasible_and_attains_value(S, lam):
    e2, w = solve_E_lambda(S, lam)
    assert w.is_feasible(S, atol=1e-9)
    slack = w.constraint_slack(S)
    assert set(slack) >= {"chsh", "delta"}
    assert w.objective(lam) == pytest.approx(e2, abs=1e-12)
    # the oracle's own objective agrees at the witness
    phi = 2 * math.atan2(w.s, w.c)
    assert objective_best_delta(phi, w.g, w.h, lam) <= e2 + 1e-9


@given(S_open, lams)
def test_symmetry_in_lambda(S, lam):
    assert solve_E_lambda(S, lam)[0] == pytest.approx(solve_E_lambda(S, 1 - lam)[0], abs=1e-6)


@pytest.mark.parametrize("lam", [0.0, 0.2, 0.5])
def test_value_nondecreasing_in_S(lam):
    vals = [solve_E_lambda(S, lam)[0] for S in np.linspace(2.0, S_MAX, 64)]
    assert np.all(np.diff(vals) >= -1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_solver_matches_constrained_optimiser(seed):
    rng = np.random.default_rng(1000 + seed)
    S, lam = rng.uniform(2.02, S_MAX - 0.01), rng.uniform(0, 1)
    assert solve_E_lambda(S, lam)[0] == pytest.approx(slsqp_E2(S, lam, starts=25), abs=1e-6)


def test_qubit_vars_from_angles_round_trip():
    w = QubitCorrelationVars.from_angles(math.pi / 4, 0.9, 0.8, 0.7)
    assert w.s == pytest.approx(math.sin(math.pi / 4))
    assert w.c ** 2 + w.s ** 2 == pytest.approx(1.0)
    assert -1 <= w.delta <= 1


# --- equal-weight closed form ----------------------------------------------

def test_analytic_endpoint():
    assert solve_E_half_analytic(S_MAX) == pytest.approx(1.0)


@pytest.mark.parametrize("S", [2.05, 2.2, 2.4, 2.6, 2.8])
def test_analytic_matches_numeric(S):
    assert solve_E_half_analytic(S) == pytest.approx(solve_E_lambda(S, 0.5)[0], abs=1e-4)


def test_analytic_rejects_classical_S():
    with pytest.raises(ValueError):
        solve_E_half_analytic(2.0)


def test_analytic_without_root(monkeypatch):
    monkeypatch.setattr(entropy, "_half_stationarity", lambda x, S: 1.0)
    with pytest.raises(RootNotFound):
        solve_E_half_analytic(2.4)
    assert solve_E_half_analytic(2.4, fallback=True) == pytest.approx(solve_E_lambda(2.4, 0.5)[0])


# --- convex envelope and tabulated bound -----------------------------------

@given(st.lists(st.floats(-5, 5), min_size=3, max_size=40))
def test_lower_convex_envelope_properties(ys):
    x = np.linspace(0, 1, len(ys))
    y = np.array(ys)
    env = lower_convex_envelope(x, y)
    assert np.all(env <= y + 1e-12)
    assert env[0] == pytest.approx(y[0]) and env[-1] == pytest.approx(y[-1])
    slopes = np.diff(env) / np.diff(x)
    assert np.all(np.diff(slopes) >= -1e-9)


def test_anchor_entropy_values():
    assert entropy_bound(1.0)(2.4) == pytest.approx(0.346, abs=2e-3)
    assert entropy_bound(0.5)(2.4) == pytest.approx(0.467, abs=2e-3)


def _check_bound_invariants(b: EntropyBound):
    assert np.all(np.diff(b.h) >= -1e-12)
    assert b.h[0] >= -1e-12 and b.h[-1] <= 1 + 1e-9
    second = np.diff(b.h, 2)
    assert np.all(second >= -1e-9)
    assert np.all(b.h <= b.raw + 1e-12)


@pytest.mark.parametrize("lam,q", [(1.0, 0.0), (0.5, 0.0), (0.5, 0.4), (0.9, 0.2)])
def test_bound_invariants(lam, q):
    b = entropy_bound(lam, q)
    _check_bound_invariants(b)
    assert b(S_MAX) == pytest.approx(1.0, abs=1e-6)
    assert b(2.0) == pytest.approx(binary_entropy(q), abs=1e-9)
    assert b.grid[0][0] == 2.0 and len(b.grid) == 512


def test_single_basis_bound_is_known_curve():
    b = entropy_bound(1.0, convexify=False, resolution=64)
    expected = [g_bound(math.sqrt(max(0.0, S * S / 4 - 1))) for S in b.s]
    np.testing.assert_allclose(b.raw, expected, atol=1e-6)


def test_bound_clips_outside_range_and_vectorises():
    b = entropy_bound(0.5, resolution=64)
    assert b(1.0) == b(2.0)
    assert b(np.array([2.0, S_MAX])).shape == (2,)


def test_bound_argument_validation():
    with pytest.raises(ValueError):
        entropy_bound(0.5, resolution=16)
    with pytest.raises(ValueError):
        entropy_bound(1.5)
    with pytest.raises(ValueError):
        entropy_bound(0.5, q=0.7)


def test_bound_depends_on_lambda_through_distance_from_half():
    assert entropy_bound(0.2, resolution=64) is entropy_bound(0.8, resolution=64)
