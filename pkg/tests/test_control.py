import numpy as np
import pytest

from cpekit.control import (
    InformativityWarning,
    MpcProblem,
    build_behavioral_basis,
    build_impulse_operators,
    mpc_run,
    mpc_step,
    represent_trajectory,
    synthesize_gain,
    warm_up,
)
from cpekit.errors import DimensionError, InputError
from cpekit.experiments import designed_records, mode_for, mpc_prior_basis
from cpekit.hankel import CompositionMode
from cpekit.trajectories import LtiSystem, builtin_system, simulate_feedback, simulate_lti


# --- impulse operators -----------------------------------------------------

def test_depth_one_operators(reactor):
    ops = build_impulse_operators(reactor, 1)
    assert np.all(ops.toeplitz == 0)
    np.testing.assert_array_equal(ops.observability, np.eye(4))


def test_shift_system_operators():
    ops = build_impulse_operators(LtiSystem(np.zeros((2, 2)), np.eye(2)), 3)
    expected = np.zeros((6, 6))
    expected[2:4, 0:2] = np.eye(2)
    expected[4:6, 2:4] = np.eye(2)
    np.testing.assert_array_equal(ops.toeplitz, expected)


def test_operators_reproduce_rollout(reactor, rng):
    L = 6
    u = rng.standard_normal((L, reactor.m))
    x0 = rng.standard_normal(reactor.n)
    rec = simulate_lti(reactor, x0, u)
    ops = build_impulse_operators(reactor, L)
    np.testing.assert_allclose(ops.toeplitz @ u.ravel() + ops.observability @ x0, rec.x[:L].ravel(), atol=1e-12)


def test_operators_reject_zero_depth(reactor):
    with pytest.raises(InputError):
        build_impulse_operators(reactor, 0)


# --- representation --------------------------------------------------------

def _reactor_basis(name, L=3, seed=0):
    sys = builtin_system("batch_reactor")
    recs, bundle, _ = designed_records(sys, name, seed, order=L + sys.n)
    return build_behavioral_basis(recs, L, mode_for(name), bundle.weights, sys=sys), recs


@pytest.mark.parametrize("name", ["mosaic", "cumulative", "hybrid"])
def test_fresh_rollout_is_represented(name, reactor, rng):
    basis, _ = _reactor_basis(name)
    assert basis.rank().numeric_rank == reactor.n + reactor.m * 3
    rec = simulate_lti(reactor, rng.standard_normal(4), rng.standard_normal((3, 2)))
    rep = represent_trajectory(basis, rec.x[:3], rec.u)
    assert rep.ok and rep.residual <= 1e-8 * (1 + np.linalg.norm(np.r_[rec.x[:3].ravel(), rec.u.ravel()]))


def test_verbatim_window_has_zero_residual():
    basis, recs = _reactor_basis("mosaic")
    rep = represent_trajectory(basis, recs[0].x[:3], recs[0].u[:3])
    assert rep.residual <= 1e-10


def test_closed_loop_basis_fails_with_diagnostic(reactor, rng):
    K = np.zeros((2, 4))
    recs = [simulate_feedback(reactor, rng.standard_normal(4), lambda k, x: K @ x, 20) for _ in range(3)]
    basis = build_behavioral_basis(recs, 3, CompositionMode.mosaic())
    rec = simulate_lti(reactor, rng.standard_normal(4), rng.standard_normal((3, 2)))
    rep = represent_trajectory(basis, rec.x[:3], rec.u)
    assert not rep.ok
    assert rep.basis_rank < rep.expected_rank
    assert "insufficient excitation" in rep.diagnostic


def test_basis_rejects_records_from_other_system(reactor, converter, rng):
    rec = simulate_lti(reactor, np.zeros(4), rng.standard_normal((10, 2)))
    other = LtiSystem(reactor.a_matrix * 0.5, reactor.b_matrix)
    with pytest.raises(InputError):
        build_behavioral_basis([rec], 2, CompositionMode.single(), sys=other)


def test_basis_rejects_mixed_dimensions(reactor, converter, rng):
    a = simulate_lti(reactor, np.zeros(4), rng.standard_normal((10, 2)))
    b = simulate_lti(converter, np.zeros(2), rng.standard_normal((10, 1)))
    with pytest.raises(DimensionError):
        build_behavioral_basis([a, b], 2, CompositionMode.mosaic())


# --- gain synthesis --------------------------------------------------------

@pytest.mark.parametrize("name", ["mosaic", "cumulative", "hybrid"])
def test_reactor_gain_stabilizes(name, reactor):
    recs, bundle, _ = designed_records(reactor, name, 3)
    res = synthesize_gain(recs, mode_for(name), bundle.weights, sys=reactor)
    assert res.success and res.closed_loop_radius < 1
    assert res.data_radius == pytest.approx(res.closed_loop_radius, abs=1e-6)
    assert res.to_dict()["success"] is True


def test_scalar_unstable_plant(rng):
    sys = LtiSystem(np.array([[2.0]]), np.array([[1.0]]))
    recs = [simulate_lti(sys, [rng.standard_normal()], rng.standard_normal((4, 1))) for _ in range(2)]
    res = synthesize_gain(recs, CompositionMode.mosaic(), sys=sys)
    assert res.success
    assert abs(2.0 + res.K[0, 0]) < 1


def test_uninformative_data_warns_and_reports(reactor):
    K = np.zeros((2, 4))
    rec = simulate_feedback(reactor, np.ones(4), lambda k, x: K @ x, 12)
    with pytest.warns(InformativityWarning):
        res = synthesize_gain([rec], CompositionMode.single(), sys=reactor)
    if not res.success:
        assert res.K is None and "singular_values_D" in res.diagnostic


# --- receding horizon ------------------------------------------------------

@pytest.fixture(scope="module")
def mpc_basis():
    return mpc_prior_basis("cumulative", 0)


def _problem(basis, x0, **kw):
    sys = builtin_system("batch_reactor")
    u_hist, x_hist = warm_up(sys, x0, np.zeros((4, 2)))
    return MpcProblem(basis, 5, 3 * np.eye(4), 1e-2 * np.eye(2), np.zeros(4), u_hist, x_hist, **kw)


def test_origin_is_a_fixed_point(mpc_basis):
    res = mpc_step(_problem(mpc_basis, np.zeros(4)))
    assert np.max(np.abs(res.u_pred)) <= 1e-9 and np.max(np.abs(res.x_pred)) <= 1e-9
    assert res.constraint_residual <= 1e-9


def test_predictions_match_true_dynamics(mpc_basis):
    sys = builtin_system("batch_reactor")
    prob = _problem(mpc_basis, np.ones(4))
    res = mpc_step(prob)
    u_all = np.vstack([prob.u_history, res.u_pred])
    rec = simulate_lti(sys, prob.x_history[-1], u_all[3:8])
    np.testing.assert_allclose(res.x_pred, rec.x[1:6], atol=1e-6)


def test_input_bounds_are_respected(mpc_basis):
    res = mpc_step(_problem(mpc_basis, np.ones(4), u_lower=-0.5, u_upper=0.5))
    assert np.all(res.u_pred >= -0.5 - 1e-9) and np.all(res.u_pred <= 0.5 + 1e-9)


def test_closed_loop_regulates(mpc_basis):
    run = mpc_run(builtin_system("batch_reactor"), _problem(mpc_basis, np.ones(4)), 40)
    assert run.state_norms[-1] / run.state_norms[0] < 1e-2
    assert len(run.solve_seconds) == 40


def test_problem_validation(mpc_basis):
    with pytest.raises(InputError):
        MpcProblem(mpc_basis, 4, np.eye(4), np.eye(2), np.zeros(4), np.zeros((4, 2)), np.zeros((4, 4)))
    with pytest.raises(InputError):
        MpcProblem(mpc_basis, 5, -np.eye(4), np.eye(2), np.zeros(4), np.zeros((4, 2)), np.zeros((4, 4)))
    with pytest.raises(InputError):
        MpcProblem(mpc_basis, 5, np.eye(4), 0 * np.eye(2), np.zeros(4), np.zeros((4, 2)), np.zeros((4, 4)))
    with pytest.raises(InputError):
        MpcProblem(mpc_basis, 5, np.eye(4), np.eye(2), np.zeros(4), np.zeros((3, 2)), np.zeros((3, 4)))
    with pytest.raises(DimensionError):
        MpcProblem(mpc_basis, 5, np.eye(3), np.eye(2), np.zeros(4), np.zeros((4, 2)), np.zeros((4, 4)))


def test_warm_up_rejects_wrong_length(reactor):
    with pytest.raises(InputError):
        warm_up(reactor, np.zeros(4), np.zeros((3, 2)))
