import warnings

import numpy as np
import pytest

from cpekit.errors import DimensionError, InputError
from cpekit.experiments import designed_records, mode_for
from cpekit.hankel import CompositionMode
from cpekit.identification import (
    DistributedState,
    IdentifiabilityWarning,
    IdentifierState,
    adaptive_step,
    check_convergence_conditions,
    distributed_step,
    fit_log_linear,
    ls_identify,
    regressor,
    run_adaptive,
    run_distributed,
    write_error_trace,
)
from cpekit.trajectories import (
    GraphTopology,
    LtiSystem,
    Trajectory,
    TrajectoryBundle,
    default_topology,
    simulate_feedback,
    simulate_lti,
)


# --- least squares ---------------------------------------------------------

def test_ls_recovers_shift_system(rng):
    sys = LtiSystem(np.zeros((2, 2)), np.eye(2))
    rec = simulate_lti(sys, np.zeros(2), rng.standard_normal((10, 2)))
    res = ls_identify([rec], CompositionMode.single())
    np.testing.assert_allclose(res.g_hat, np.hstack([np.zeros((2, 2)), np.eye(2)]), atol=1e-12)
    assert res.unique


@pytest.mark.parametrize("name", ["mosaic", "cumulative", "hybrid"])
def test_ls_exact_on_designed_reactor_data(name, reactor):
    recs, bundle, _ = designed_records(reactor, name, seed=5)
    res = ls_identify(recs, mode_for(name), bundle.weights)
    assert res.error(reactor) <= 1e-8
    np.testing.assert_allclose(res.a_hat, reactor.a_matrix, atol=1e-8)
    np.testing.assert_allclose(res.b_hat, reactor.b_matrix, atol=1e-8)


def test_ls_warns_when_data_are_not_informative(reactor):
    K = np.zeros((2, 4))
    rec = simulate_feedback(reactor, np.ones(4), lambda k, x: K @ x, 12, 0.0, None)
    with pytest.warns(IdentifiabilityWarning):
        res = ls_identify([rec], CompositionMode.single())
    assert not res.unique


# --- single identifier -----------------------------------------------------

def test_zero_error_leaves_estimate_unchanged():
    theta = np.array([0.3, -0.2])
    r = regressor([1.0], [2.0])
    x_next = r.T @ theta
    out = adaptive_step(IdentifierState(theta), r, x_next)
    np.testing.assert_allclose(out.theta, theta)
    assert out.k == 1


def test_scalar_update_matches_hand_formula():
    a, b, x, u, xn, alpha, xi = 0.1, 0.4, 2.0, -1.0, 1.5, 0.7, 2.0
    out = adaptive_step(IdentifierState(np.array([a, b]), alpha, xi), regressor([x], [u]), [xn])
    eps = xn - (a * x + b * u)
    expected = np.array([a, b]) + alpha * np.array([x, u]) * eps / (x * x + u * u + xi)
    np.testing.assert_allclose(out.theta, expected, rtol=1e-14)


def test_regressor_structure():
    r = regressor([1.0, 2.0], [3.0])
    assert r.shape == (6, 2)
    np.testing.assert_array_equal(r[:3, 0], [1, 2, 3])
    np.testing.assert_array_equal(r[3:, 1], [1, 2, 3])
    assert np.all(r[:3, 1] == 0) and np.all(r[3:, 0] == 0)


def test_true_parameters_are_a_fixed_point(converter, rng):
    trace = run_adaptive(converter, rng.uniform(-1, 1, (50, 1)), IdentifierState(converter.theta), x0=[1.0, 1.0])
    assert np.max(trace.errors) <= 1e-12


def test_converges_with_rich_input(converter, rng):
    state0 = IdentifierState(np.zeros(6), 1.0, 2.0)
    trace = run_adaptive(converter, rng.uniform(-10, 10, (5000, 1)), state0, x0=[0.5, -0.5])
    assert trace.errors[-1] <= 1e-3


def test_feedback_only_input_plateaus(converter):
    K = np.array([[-5.0, 3.0]])
    trace = run_adaptive(converter, lambda k, x: K @ x, IdentifierState(np.zeros(6)), steps=3000, x0=[1.0, 1.0])
    assert trace.errors[-1] > 0.1 * trace.errors[0]


def test_identifier_gain_validation():
    with pytest.raises(InputError):
        IdentifierState(np.zeros(2), alpha_gain=2.01)
    with pytest.raises(InputError):
        IdentifierState(np.zeros(2), alpha_gain=0.0)
    with pytest.raises(InputError):
        IdentifierState(np.zeros(2), xi=0.0)
    IdentifierState(np.zeros(2), alpha_gain=2.0)


def test_regressor_shape_mismatch():
    with pytest.raises(DimensionError):
        adaptive_step(IdentifierState(np.zeros(3)), regressor([1.0], [1.0]), [0.0])


# --- distributed identifier ------------------------------------------------

def test_distributed_fixed_point(converter):
    topo = default_topology()
    state = DistributedState(np.tile(converter.theta, (5, 1)), 1.0, 0.25, 2.0, topo)
    inputs = [np.ones((20, 1)) * (i + 1) for i in range(5)]
    trace = run_distributed(converter, state, inputs, 20, x0s=np.ones((5, 2)))
    assert np.max(trace.errors) <= 1e-12


def test_consensus_only_step_averages():
    topo = GraphTopology.complete(3)
    state = DistributedState(np.array([[1.0], [0.0], [0.0]]), 1.0, 0.1, 1.0, topo)
    r = [np.zeros((1, 1))] * 3
    out = distributed_step(state, r, [[0.0]] * 3)
    np.testing.assert_allclose(out.thetas.ravel(), [0.8, 0.1, 0.1])
    assert out.thetas.sum() == pytest.approx(1.0)


def test_gamma_above_bound_rejected():
    topo = default_topology()
    with pytest.raises(InputError):
        DistributedState(np.zeros((5, 6)), 1.0, 1.5 / topo.lambda_max, 2.0, topo)


def test_disconnected_graph_rejected():
    topo = GraphTopology.from_edges(3, [(0, 1)])
    with pytest.raises(InputError):
        DistributedState(np.zeros((3, 2)), 1.0, 0.1, 1.0, topo)


def test_condition_boundaries():
    assert check_convergence_conditions(2.0, 1.0).alpha_ok
    assert not check_convergence_conditions(2.01, 1.0).alpha_ok
    k5 = GraphTopology.complete(5)
    assert check_convergence_conditions(1.0, 1.0, gamma_gain=0.199, topology=k5).gamma_ok
    assert not check_convergence_conditions(1.0, 1.0, gamma_gain=0.201, topology=k5).gamma_ok


def test_short_window_reports_deficient_window(rng):
    bundle = TrajectoryBundle(tuple(Trajectory(rng.uniform(-1, 1, (40, 1))) for _ in range(2)))
    rep = check_convergence_conditions(1.0, 2.0, inputs=bundle, order=3, window_l=2)
    assert rep.windowed_excitation is False and rep.deficient_window == 0
    ok = check_convergence_conditions(1.0, 2.0, inputs=bundle, order=3, window_l=10)
    assert ok.windowed_excitation and ok.windows_checked == 4


def test_constant_inputs_fail_windowed_excitation():
    bundle = TrajectoryBundle(tuple(Trajectory(np.ones((30, 1)) * (i + 1)) for i in range(3)))
    rep = check_convergence_conditions(1.0, 2.0, inputs=bundle, order=2, window_l=10)
    assert rep.windowed_excitation is False and not rep.all_ok


# --- helpers ---------------------------------------------------------------

def test_log_linear_fit_on_exact_exponential():
    slope, r2 = fit_log_linear(np.exp(-0.01 * np.arange(200)))
    assert slope == pytest.approx(-0.01) and r2 == pytest.approx(1.0)


def test_error_trace_csv(tmp_path):
    write_error_trace(np.ones((3, 2)), tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "k,err_1,err_2" and len(lines) == 4
