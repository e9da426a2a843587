"""Least-squares, adaptive and distributed identification of ``[A B]``.

Parameters are the row-wise vectorization ``theta`` of ``[A B]``; the
regressor at time ``k`` is ``r(k) = I_n ⊗ [x(k); u(k)]`` so that
``x(k+1) = r(k)' theta``.
"""

from __future__ import annotations

import io
import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, InputError
from .hankel import CompositionMode, compose
from .linalg import RankReport, numeric_rank, pseudo_inverse
from .trajectories import (
    GraphTopology,
    IoRecord,
    LtiSystem,
    Trajectory,
    TrajectoryBundle,
    atomic_write_text,
    make_rng,
)

__all__ = [
    "IdentifiabilityWarning",
    "LsResult",
    "ls_identify",
    "regressor",
    "IdentifierState",
    "adaptive_step",
    "run_adaptive",
    "AdaptiveTrace",
    "DistributedState",
    "distributed_step",
    "run_distributed",
    "DistributedTrace",
    "ConditionReport",
    "check_convergence_conditions",
    "fit_log_linear",
    "write_error_trace",
]


class IdentifiabilityWarning(UserWarning):
    """The stacked data matrix is rank deficient; the estimate is not unique."""


@dataclass(frozen=True)
class LsResult:
    """Least-squares estimate of ``[A B]``.

    Attributes:
        g_hat: estimate of ``[A B]`` with shape ``(n, n+m)``.
        unique: whether ``[X-; U]`` had full row rank ``n+m``.
        residual: Frobenius norm of ``X+ - g_hat [X-; U]``.
        rank_report: rank of ``[X-; U]``.
    """

    g_hat: np.ndarray
    unique: bool
    residual: float
    rank_report: RankReport
    n: int
    m: int

    @property
    def a_hat(self) -> np.ndarray:
        return self.g_hat[:, : self.n]

    @property
    def b_hat(self) -> np.ndarray:
        return self.g_hat[:, self.n:]

    def error(self, sys: LtiSystem) -> float:
        """Frobenius distance to the true ``[A B]``."""
        return float(np.linalg.norm(self.g_hat - np.hstack([sys.a_matrix, sys.b_matrix])))


def depth_one_blocks(
    records: Sequence[IoRecord],
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Composite ``X-``, ``X+`` and ``U`` data matrices (depth 1)."""
    if not records:
        raise InputError("no records given")
    dims = {r.system_dims for r in records}
    if len(dims) != 1:
        raise DimensionError(f"records disagree on (n, m): {sorted(dims)}")
    Xm, _ = compose([r.x[:-1] for r in records], 1, mode, weights)
    Xp, _ = compose([r.x[1:] for r in records], 1, mode, weights)
    U, _ = compose([r.u for r in records], 1, mode, weights)
    return Xm, Xp, U


def ls_identify(
    records: Sequence[IoRecord],
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
    rel_tol: float | None = None,
) -> LsResult:
    """Estimate ``[A B] = X+ [X-; U]^†`` from composite depth-1 data.

    A rank-deficient ``[X-; U]`` still yields the minimum-norm estimate but
    emits :class:`IdentifiabilityWarning`.
    """
    Xm, Xp, U = depth_one_blocks(records, mode, weights)
    n, m = records[0].system_dims
    D = np.vstack([Xm, U])
    rep = numeric_rank(D, rel_tol)
    G = Xp @ pseudo_inverse(D, rel_tol)
    unique = rep.numeric_rank == n + m
    if not unique:
        warnings.warn(
            f"data matrix has rank {rep.numeric_rank} < n+m = {n + m}; estimate is not unique",
            IdentifiabilityWarning,
            stacklevel=2,
        )
    res = float(np.linalg.norm(Xp - G @ D))
    return LsResult(G, unique, res, rep, n, m)


def regressor(x, u) -> np.ndarray:
    """``I_n ⊗ [x; u]`` with shape ``(n(n+m), n)``."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    phi = np.concatenate([x, u])[:, None]
    return np.kron(np.eye(x.size), phi)


def _check_gains(alpha_gain: float, xi: float) -> None:
    if not 0.0 < alpha_gain <= 2.0:
        raise InputError(f"alpha_gain must lie in (0, 2], got {alpha_gain}")
    if not xi > 0.0:
        raise InputError(f"xi must be positive, got {xi}")


@dataclass(frozen=True)
class IdentifierState:
    """State of the normalized-gradient identifier.

    ``theta(k+1) = theta(k) + α r (r'r + ξI)^{-1} (x(k+1) - r' theta(k))``.
    """

    theta: np.ndarray
    alpha_gain: float = 1.0
    xi: float = 2.0
    k: int = 0

    def __post_init__(self):
        _check_gains(self.alpha_gain, self.xi)
        th = np.array(self.theta, dtype=float).ravel()
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)


def adaptive_step(state: IdentifierState, r, x_next) -> IdentifierState:
    """One identifier update."""
    r = np.asarray(r, dtype=float)
    x_next = np.asarray(x_next, dtype=float).ravel()
    if r.shape != (state.theta.size, x_next.size):
        raise DimensionError(f"regressor shape {r.shape} does not match theta/x")
    eps = x_next - r.T @ state.theta
    gain = np.linalg.solve(r.T @ r + state.xi * np.eye(x_next.size), eps)
    theta = state.theta + state.alpha_gain * (r @ gain)
    return IdentifierState(theta, state.alpha_gain, state.xi, state.k + 1)


def _input_fn(source, m: int) -> Callable[[int, np.ndarray], np.ndarray]:
    if callable(source):
        return lambda k, x: np.asarray(source(k, x), dtype=float).ravel()
    arr = source.samples if isinstance(source, Trajectory) else np.asarray(source, dtype=float)
    arr = arr.reshape(len(arr), -1)
    if arr.shape[1] != m:
        raise DimensionError(f"inputs have dimension {arr.shape[1]}, system expects {m}")
    return lambda k, x: arr[k]


def _source_len(source) -> int | None:
    if callable(source):
        return None
    return len(source.samples) if isinstance(source, Trajectory) else len(source)


@dataclass(frozen=True)
class AdaptiveTrace:
    """Error trace ``‖theta(k) - theta‖`` for ``k = 0..steps`` and final state."""

    errors: np.ndarray
    final: IdentifierState
    states: np.ndarray
    inputs: np.ndarray


def run_adaptive(
    sys: LtiSystem,
    inputs,
    state0: IdentifierState,
    noise_std: float = 0.0,
    steps: int | None = None,
    *,
    x0=None,
    rng_seed: int | None = None,
) -> AdaptiveTrace:
    """Simulate the system and run the identifier alongside.

    Args:
        sys: true system (used to simulate and to score the error).
        inputs: open-loop inputs ``(T, m)`` / :class:`Trajectory`, or a
            policy ``u = f(k, x)``.
        state0: initial identifier state.
        noise_std: process-noise standard deviation.
        steps: number of updates (defaults to the input length).
        x0: initial plant state (zeros by default).
        rng_seed: noise seed.
    """
    n, m = sys.n, sys.m
    steps = steps if steps is not None else _source_len(inputs)
    if steps is None:
        raise InputError("steps is required with a feedback policy")
    ufn = _input_fn(inputs, m)
    rng = make_rng(rng_seed)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    theta_true = sys.theta
    Theta = state0.theta.reshape(n, n + m).copy()
    a, xi = state0.alpha_gain, state0.xi
    errs = np.empty(steps + 1)
    xs = np.empty((steps + 1, n))
    us = np.empty((steps, m))
    errs[0] = np.linalg.norm(Theta.ravel() - theta_true)
    xs[0] = x
    A, B = sys.a_matrix, sys.b_matrix
    for k in range(steps):
        u = ufn(k, x)
        x_next = A @ x + B @ u
        if noise_std > 0:
            x_next = x_next + rng.normal(0.0, noise_std, n)
        phi = np.concatenate([x, u])
        eps = x_next - Theta @ phi
        Theta += (a / (phi @ phi + xi)) * np.outer(eps, phi)
        errs[k + 1] = np.linalg.norm(Theta.ravel() - theta_true)
        us[k] = u
        x = x_next
        xs[k + 1] = x
    final = IdentifierState(Theta.ravel(), a, xi, state0.k + steps)
    return AdaptiveTrace(errs, final, xs, us)


@dataclass(frozen=True)
class DistributedState:
    """Per-agent estimates plus consensus gains.

    ``theta_i(k+1) = theta_i + α r_i (r_i'r_i + ξI)^{-1} ε_i - γ Σ_{j∈N_i}(theta_i - theta_j)``.
    Construction enforces ``0 < α <= 2``, ``ξ > 0``, a connected graph and
    ``0 < γ < 1/λ_max(Laplacian)``.
    """

    thetas: np.ndarray
    alpha_gain: float
    gamma_gain: float
    xi: float
    topology: GraphTopology
    k: int = 0

    def __post_init__(self):
        _check_gains(self.alpha_gain, self.xi)
        th = np.array(self.thetas, dtype=float)
        if th.ndim != 2 or th.shape[0] != self.topology.node_count:
            raise DimensionError(
                f"thetas must have one row per agent ({self.topology.node_count}), got {th.shape}"
            )
        if not self.topology.is_connected:
            raise InputError("communication graph must be connected")
        lam = self.topology.lambda_max
        if not 0.0 < self.gamma_gain < 1.0 / lam:
            raise InputError(
                f"gamma_gain must lie in (0, 1/lambda_max) = (0, {1.0 / lam:.6g}), got {self.gamma_gain}"
            )
        th.setflags(write=False)
        object.__setattr__(self, "thetas", th)


def distributed_step(state: DistributedState, regressors: Sequence[np.ndarray], x_nexts: Sequence) -> DistributedState:
    """Synchronous update of all agents."""
    N, d = state.thetas.shape
    if len(regressors) != N or len(x_nexts) != N:
        raise DimensionError(f"need {N} regressors and successor states")
    new = state.thetas - state.gamma_gain * (state.topology.laplacian @ state.thetas)
    for i in range(N):
        r = np.asarray(regressors[i], dtype=float)
        xn = np.asarray(x_nexts[i], dtype=float).ravel()
        eps = xn - r.T @ state.thetas[i]
        new[i] += state.alpha_gain * (r @ np.linalg.solve(r.T @ r + state.xi * np.eye(xn.size), eps))
    return DistributedState(new, state.alpha_gain, state.gamma_gain, state.xi, state.topology, state.k + 1)


@dataclass(frozen=True)
class DistributedTrace:
    """Per-agent error traces with shape ``(steps+1, N)`` and the final state."""

    errors: np.ndarray
    final: DistributedState
    inputs: tuple[np.ndarray, ...]
    states: tuple[np.ndarray, ...]

    @property
    def stacked_errors(self) -> np.ndarray:
        """``‖[theta_1 - theta; ...; theta_N - theta]‖`` per step."""
        return np.sqrt(np.sum(self.errors ** 2, axis=1))


def run_distributed(
    sys: LtiSystem,
    state0: DistributedState,
    inputs: Sequence,
    steps: int,
    *,
    x0s=None,
    noise_std: float = 0.0,
    rng_seed: int | None = None,
) -> DistributedTrace:
    """Simulate one copy of the system per agent and run the distributed identifier.

    Args:
        sys: true system.
        state0: initial estimates and gains.
        inputs: per-agent open-loop inputs or policies ``u = f(k, x)``.
        steps: number of updates.
        x0s: per-agent initial states (zeros by default).
        noise_std: process-noise standard deviation.
        rng_seed: noise seed.
    """
    n, m = sys.n, sys.m
    N, d = state0.thetas.shape
    if d != n * (n + m):
        raise DimensionError(f"theta length {d} does not match n(n+m) = {n * (n + m)}")
    if len(inputs) != N:
        raise DimensionError(f"need inputs for {N} agents, got {len(inputs)}")
    fns = [_input_fn(src, m) for src in inputs]
    X = np.zeros((N, n)) if x0s is None else np.array(x0s, dtype=float).reshape(N, n)
    rng = make_rng(rng_seed)
    Lap = state0.topology.laplacian
    a, g, xi = state0.alpha_gain, state0.gamma_gain, state0.xi
    Th = state0.thetas.reshape(N, n, n + m).copy()
    theta_true = sys.theta.reshape(n, n + m)
    A, B = sys.a_matrix, sys.b_matrix
    errs = np.empty((steps + 1, N))
    us = np.empty((N, steps, m))
    xs = np.empty((N, steps + 1, n))
    errs[0] = np.linalg.norm((Th - theta_true).reshape(N, -1), axis=1)
    xs[:, 0] = X
    for k in range(steps):
        U = np.stack([fns[i](k, X[i]) for i in range(N)])
        Xn = X @ A.T + U @ B.T
        if noise_std > 0:
            Xn = Xn + rng.normal(0.0, noise_std, Xn.shape)
        Phi = np.hstack([X, U])
        eps = Xn - np.einsum("nij,nj->ni", Th, Phi)
        scale = a / (np.sum(Phi * Phi, axis=1) + xi)
        consensus = np.tensordot(Lap, Th, axes=1)
        Th = Th - g * consensus + scale[:, None, None] * eps[:, :, None] * Phi[:, None, :]
        errs[k + 1] = np.linalg.norm((Th - theta_true).reshape(N, -1), axis=1)
        us[:, k] = U
        X = Xn
        xs[:, k + 1] = X
    final = DistributedState(Th.reshape(N, d), a, g, xi, state0.topology, state0.k + steps)
    return DistributedTrace(errs, final, tuple(us), tuple(xs))


@dataclass(frozen=True)
class ConditionReport:
    """Per-condition verdicts for identifier convergence.

    ``None`` means the condition was not evaluated (missing inputs).
    """

    bounded: bool | None
    alpha_ok: bool
    xi_ok: bool
    gamma_ok: bool | None
    connected: bool | None
    windowed_excitation: bool | None
    deficient_window: int | None
    windows_checked: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def all_ok(self) -> bool:
        vals = [self.bounded, self.alpha_ok, self.xi_ok, self.gamma_ok, self.connected, self.windowed_excitation]
        return all(v is not False for v in vals)


def check_convergence_conditions(
    alpha_gain: float,
    xi: float,
    *,
    gamma_gain: float | None = None,
    topology: GraphTopology | None = None,
    inputs: TrajectoryBundle | None = None,
    order: int | None = None,
    window_l: int | None = None,
    rel_tol: float | None = None,
) -> ConditionReport:
    """Check gain ranges, connectivity and windowed collective excitation.

    The windowed test takes windows ``[k, k+l-1]`` at ``k = 0, l, 2l, ...``
    of every member of ``inputs`` and requires the mosaic composite of order
    ``order`` (``n+1`` for identification) to have full row rank. Mosaic is
    the weakest of the three collective notions, so passing it is necessary
    for any of them and sufficient for the identifier.
    """
    alpha_ok = 0.0 < alpha_gain <= 2.0
    xi_ok = xi > 0.0
    gamma_ok = connected = None
    notes = []
    if topology is not None:
        connected = topology.is_connected
        if gamma_gain is not None:
            gamma_ok = 0.0 < gamma_gain < 1.0 / topology.lambda_max
    elif gamma_gain is not None:
        notes.append("gamma not checked: no topology given")

    bounded = excit = None
    deficient = None
    checked = 0
    if inputs is not None:
        bounded = all(np.all(np.isfinite(mb.samples)) for mb in inputs.members)
        if order is None or window_l is None:
            raise InputError("order and window_l are required to check windowed excitation")
        T = min(inputs.lengths)
        target = inputs.dim_m * order
        excit = True
        if window_l < order:
            excit, deficient = False, 0
            notes.append(f"window length {window_l} is shorter than the order {order}")
        else:
            for k in range(0, T - window_l + 1, window_l):
                checked += 1
                sig = [mb.samples[k:k + window_l] for mb in inputs.members]
                M, _ = compose(sig, order, CompositionMode.mosaic(), inputs.weights)
                if M.shape[1] < target or numeric_rank(M, rel_tol).numeric_rank < target:
                    excit, deficient = False, k
                    break
            if checked == 0:
                excit, deficient = False, 0
                notes.append("data shorter than one window")
    return ConditionReport(bounded, alpha_ok, xi_ok, gamma_ok, connected, excit, deficient, checked, tuple(notes))


def fit_log_linear(errors, floor_ratio: float = 1e-10) -> tuple[float, float]:
    """Least-squares line through ``log(err)`` vs ``k``; returns ``(slope, R²)``.

    Points below ``floor_ratio * err[0]`` (numerical floor) are ignored.
    """
    e = np.asarray(errors, dtype=float)
    k = np.arange(e.size)
    keep = e > max(floor_ratio * e[0], 1e-300)
    if np.count_nonzero(keep) < 3:
        raise InputError("too few points above the floor for a fit")
    y = np.log(e[keep])
    kk = k[keep]
    slope, icpt = np.polyfit(kk, y, 1)
    pred = slope * kk + icpt
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def write_error_trace(errors, path) -> None:
    """Write ``k,err_1,...,err_N`` rows."""
    E = np.asarray(errors, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k"] + [f"err_{i + 1}" for i in range(E.shape[1])])
    for k, row in enumerate(E):
        w.writerow([k] + [repr(float(v)) for v in row])
    atomic_write_text(path, buf.getvalue())
