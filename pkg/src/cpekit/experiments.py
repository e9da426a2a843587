"""Reproducible benchmark scenarios shared by the CLI, demos and tests.

Every function is deterministic given its seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import place_poles

from .control import (
    BehavioralBasis,
    GainSynthesisResult,
    MpcProblem,
    MpcRunResult,
    build_behavioral_basis,
    mpc_run,
    synthesize_gain,
    warm_up,
)
from .design import DesignRequest, design_signals
from .errors import InputError
from .hankel import CompositionMode
from .identification import (
    AdaptiveTrace,
    DistributedState,
    DistributedTrace,
    IdentifierState,
    ls_identify,
    run_adaptive,
    run_distributed,
)
from .informativity import check_rank_condition
from .trajectories import (
    GraphTopology,
    IoRecord,
    LtiSystem,
    Trajectory,
    TrajectoryBundle,
    builtin_system,
    default_topology,
    make_rng,
)

__all__ = [
    "MODES",
    "mode_for",
    "identification_request",
    "simulate_records",
    "designed_records",
    "ls_error",
    "ls_noise_sweep",
    "weighting_comparison",
    "rotation_gain",
    "DistributedScenario",
    "distributed_scenario",
    "feedback_only_identifier",
    "mpc_prior_basis",
    "mpc_scenario",
    "random_controllable_system",
    "random_stabilization_case",
]

MODES = ("mosaic", "cumulative", "hybrid")
HYBRID_PREFIX = 3


def mode_for(name: str) -> CompositionMode:
    """Composition used by the scenarios for ``name``; hybrid sums three members."""
    if name == "hybrid":
        return CompositionMode.hybrid(HYBRID_PREFIX)
    return CompositionMode.parse(name)


def identification_request(name: str, seed: int, *, order: int = 5, m: int = 2, minimal: bool = True) -> DesignRequest:
    """Ten designed input trajectories of the given order.

    Minimal lengths: mosaic ``10 x L`` (sum ``mL + p(L-1)`` when
    ``m = 2``, ``L = 5``), cumulative ``T0 = (m+1)L - 1``, hybrid
    ``T0 + 7L`` with ``T0`` at its minimum. Otherwise lengths are drawn in
    ``[L, (m+1)L - 1)`` with cumulative ``T0 = 25`` and hybrid ``T0 = 10``.
    """
    p = 10
    L = order
    tc = (m + 1) * L - 1
    rng = make_rng(seed)
    mode = mode_for(name)
    if name == "mosaic":
        lengths = [L] * p if minimal else list(rng.integers(L, tc, p))
        while sum(lengths) < m * L + p * (L - 1):
            lengths[int(np.argmin(lengths))] += 1
    elif name == "cumulative":
        lengths = [tc if minimal else max(tc, 25)] * p
    elif name == "hybrid":
        tails = [L] * (p - HYBRID_PREFIX) if minimal else list(rng.integers(L, tc, p - HYBRID_PREFIX))
        need = m * L + (p - HYBRID_PREFIX + 1) * (L - 1)
        t0 = max(L, need - sum(tails)) if minimal else max(10, need - sum(tails))
        lengths = [t0] * HYBRID_PREFIX + tails
    else:
        raise InputError(f"unknown mode {name!r}")
    return DesignRequest(m, L, tuple(int(t) for t in lengths), mode, rng_seed=seed)


def simulate_records(
    sys: LtiSystem,
    bundle: TrajectoryBundle,
    rng: np.random.Generator,
    *,
    x0_scale: float = 1.0,
    noise_std: float = 0.0,
) -> list[IoRecord]:
    """One record per input member, initial states uniform in ``[-x0_scale, x0_scale]``."""
    x0s = rng.uniform(-x0_scale, x0_scale, (bundle.p, sys.n))
    noise = [rng.standard_normal((m.length, sys.n)) for m in bundle.members]
    out = []
    for x0, member, w in zip(x0s, bundle.members, noise):
        x = np.empty((member.length + 1, sys.n))
        x[0] = x0
        for k in range(member.length):
            x[k + 1] = sys.a_matrix @ x[k] + sys.b_matrix @ member.samples[k] + noise_std * w[k]
        out.append(IoRecord(member, Trajectory(x, "x")))
    return out


def designed_records(
    sys: LtiSystem, name: str, seed: int, *, order: int | None = None, minimal: bool = True, noise_std: float = 0.0
) -> tuple[list[IoRecord], TrajectoryBundle, DesignRequest]:
    """Designed inputs of order ``n + 1`` (by default) applied to ``sys``."""
    req = identification_request(name, seed, order=order or sys.n + 1, m=sys.m, minimal=minimal)
    bundle, _ = design_signals(req)
    recs = simulate_records(sys, bundle, make_rng([seed, 1]), noise_std=noise_std)
    return recs, bundle, req


def ls_error(sys: LtiSystem, name: str, seed: int, noise_std: float = 0.0, *, minimal: bool = True) -> float:
    """``‖Ĝ - [A B]‖`` for designed data with process noise of the given level.

    The noise draw depends only on ``seed``, so errors for different levels
    share random numbers.
    """
    recs, bundle, _ = designed_records(sys, name, seed, minimal=minimal, noise_std=noise_std)
    return ls_identify(recs, mode_for(name), bundle.weights).error(sys)


def ls_noise_sweep(
    sigmas: Sequence[float], seeds: Sequence[int], modes: Sequence[str] = MODES, *, minimal: bool = True
) -> dict[str, np.ndarray]:
    """Errors per mode, shape ``(len(sigmas), len(seeds))``, on the batch reactor."""
    sys = builtin_system("batch_reactor")
    return {
        name: np.array([[ls_error(sys, name, s, sg, minimal=minimal) for s in seeds] for sg in sigmas])
        for name in modes
    }


def weighting_comparison(seed: int, *, scale: float = 1e3, noise_std: float = 0.05) -> tuple[float, float]:
    """Mosaic LS error with unit weights and with weights undoing a scaled record.

    The first recorded trajectory (inputs, states and their noise) is
    multiplied by ``scale``, as if logged in different units. Returns
    ``(error_unit_weights, error_compensated)``.
    """
    sys = builtin_system("batch_reactor")
    recs, _, _ = designed_records(sys, "mosaic", seed, minimal=False, noise_std=noise_std)
    first = recs[0]
    recs[0] = IoRecord(Trajectory(first.u * scale, "u"), Trajectory(first.x * scale, "x"))
    mode = CompositionMode.mosaic()
    ones = np.ones(len(recs))
    comp = ones.copy()
    comp[0] = 1.0 / scale
    return ls_identify(recs, mode, ones).error(sys), ls_identify(recs, mode, comp).error(sys)


def rotation_gain(sys: LtiSystem, radius: float, omega: float) -> np.ndarray:
    """Gain ``K`` (``u = K x``) placing the closed-loop poles at ``radius e^{±jω}``."""
    if sys.n != 2:
        raise InputError("rotation_gain needs a second-order system")
    poles = [radius * np.exp(1j * omega), radius * np.exp(-1j * omega)]
    return -place_poles(sys.a_matrix, sys.b_matrix, poles).gain_matrix


@dataclass(frozen=True)
class DistributedScenario:
    """Distributed identification run with per-agent stabilizing feedback.

    Attributes:
        trace: the identifier trace.
        gains: the agents' feedback gains.
        x0s: the agents' initial states.
        records: recorded input/state data per agent.
    """

    trace: DistributedTrace
    gains: tuple[np.ndarray, ...]
    x0s: np.ndarray
    records: tuple[IoRecord, ...]

    @property
    def input_bundle(self) -> TrajectoryBundle:
        return TrajectoryBundle(tuple(r.input_traj for r in self.records))


AGENT_RADIUS = 0.9999
AGENT_ROTATIONS = (0.003, 0.006, 0.01, 0.015, 0.02)


def distributed_scenario(
    seed: int,
    steps: int = 5000,
    *,
    alpha_gain: float = 1.0,
    gamma_gain: float = 0.25,
    xi: float = 2.0,
    topology: GraphTopology | None = None,
    x0_scale: float = 5.0,
) -> DistributedScenario:
    """Five converter agents, each under its own stabilizing feedback.

    Agent ``i`` uses ``u = K_i x`` with closed-loop poles at
    ``0.9999 e^{±jω_i}``. Each agent's input obeys a second-order recurrence,
    so no agent alone is excited of order ``n + 1 = 3``; the distinct
    recurrences make the agents collectively exciting.
    """
    sys = builtin_system("voltage_converter")
    topology = topology or default_topology()
    if topology.node_count != len(AGENT_ROTATIONS):
        raise InputError(f"scenario has {len(AGENT_ROTATIONS)} agents")
    gains = tuple(rotation_gain(sys, AGENT_RADIUS, w) for w in AGENT_ROTATIONS)
    policies = [(lambda K: (lambda k, x: K @ x))(K) for K in gains]
    x0s = make_rng(seed).uniform(-x0_scale, x0_scale, (len(gains), sys.n))
    d = sys.n * (sys.n + sys.m)
    state0 = DistributedState(np.zeros((len(gains), d)), alpha_gain, gamma_gain, xi, topology)
    trace = run_distributed(sys, state0, policies, steps, x0s=x0s)
    records = tuple(
        IoRecord(Trajectory(np.asarray(u), "u"), Trajectory(np.asarray(x), "x"))
        for u, x in zip(trace.inputs, trace.states)
    )
    return DistributedScenario(trace, gains, x0s, records)


def feedback_only_identifier(seed: int, steps: int = 5000, *, agent: int = 0, x0_scale: float = 5.0) -> AdaptiveTrace:
    """Single identifier on one agent's closed loop, no probing noise."""
    sys = builtin_system("voltage_converter")
    K = rotation_gain(sys, AGENT_RADIUS, AGENT_ROTATIONS[agent])
    x0s = make_rng(seed).uniform(-x0_scale, x0_scale, (len(AGENT_ROTATIONS), sys.n))
    state0 = IdentifierState(np.zeros(sys.n * (sys.n + sys.m)), 1.0, 2.0)
    return run_adaptive(sys, lambda k, x: K @ x, state0, steps=steps, x0=x0s[agent])


def mpc_prior_basis(name: str, seed: int, *, horizon: int = 5) -> BehavioralBasis:
    """Batch-reactor data basis from ten prior trajectories of thirty steps.

    The prior inputs are designed for excitation order ``horizon + 2n``
    where the length budget allows it (mosaic, hybrid) and for the largest
    order thirty samples support otherwise (cumulative).
    """
    sys = builtin_system("batch_reactor")
    n, m = sys.n, sys.m
    depth = horizon + n
    mode = mode_for(name)
    order = depth + n
    if name == "cumulative":
        order = min(order, (30 + 1) // (m + 1))
    req = DesignRequest(m, order, (30,) * 10, mode, rng_seed=seed)
    bundle, _ = design_signals(req)
    recs = simulate_records(sys, bundle, make_rng([seed, 2]))
    return build_behavioral_basis(recs, depth, mode, bundle.weights, sys=sys)


def mpc_scenario(
    name: str,
    seed: int,
    steps: int = 40,
    *,
    horizon: int = 5,
    x0=None,
) -> MpcRunResult:
    """Batch-reactor MPC on :func:`mpc_prior_basis` data.

    ``N = horizon``, ``Q = 3I``, ``R = 0.01 I``, setpoint zero. The warm-up
    applies zero input for ``n`` steps from ``x0`` (default all ones).
    """
    sys = builtin_system("batch_reactor")
    n, m = sys.n, sys.m
    basis = mpc_prior_basis(name, seed, horizon=horizon)
    x0 = np.ones(n) if x0 is None else np.asarray(x0, dtype=float)
    u_hist, x_hist = warm_up(sys, x0, np.zeros((n, m)))
    problem = MpcProblem(basis, horizon, 3.0 * np.eye(n), 1e-2 * np.eye(m), np.zeros(n), u_hist, x_hist)
    return mpc_run(sys, problem, steps)


def random_controllable_system(rng: np.random.Generator, n: int, m: int) -> LtiSystem:
    """Random ``(A, B)`` with spectral radius in ``[0.5, 1.5]``, redrawn until controllable."""
    for _ in range(100):
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0.5, 1.5) / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
        B = rng.standard_normal((n, m))
        sys = LtiSystem(A, B, "random")
        if sys.is_controllable():
            return sys
    raise InputError("could not draw a controllable system")


def random_stabilization_case(seed: int, name: str = "mosaic") -> tuple[LtiSystem, bool, GainSynthesisResult]:
    """Random system, designed data of order ``n + 1``, data-driven gain.

    Returns ``(system, informativity verdict, synthesis result)``.
    """
    rng = make_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 4))
    sys = random_controllable_system(rng, n, m)
    recs, bundle, _ = designed_records(sys, name, seed)
    mode = mode_for(name)
    informative = check_rank_condition(recs, 1, mode, bundle.weights).verdict
    return sys, informative, synthesize_gain(recs, mode, bundle.weights, sys=sys)
