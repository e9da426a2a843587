"""Data-driven control from composite Hankel data.

Trajectory representation through a data basis, state-feedback synthesis
from a data-based Lyapunov LMI, and a receding-horizon controller whose
predictor is the data basis itself.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DimensionError, InfeasibleProblemError, InputError
from .hankel import CompositionMode, compose
from .identification import depth_one_blocks
from .linalg import (
    LmiCertificate,
    RankReport,
    lmi_feasibility,
    numeric_rank,
    pseudo_inverse,
    qp_solve_eq,
    qp_solve_ineq,
    spectral_radius,
)
from .trajectories import IoRecord, LtiSystem, Trajectory

__all__ = [
    "ImpulseOperators",
    "build_impulse_operators",
    "BehavioralBasis",
    "build_behavioral_basis",
    "Representation",
    "represent_trajectory",
    "GainSynthesisResult",
    "InformativityWarning",
    "synthesize_gain",
    "MpcProblem",
    "MpcStepResult",
    "MpcRunResult",
    "mpc_step",
    "mpc_run",
    "warm_up",
]


class InformativityWarning(UserWarning):
    """The data do not satisfy the rank condition the method relies on."""


@dataclass(frozen=True)
class ImpulseOperators:
    """Maps from an input window and initial state to the state window.

    ``x_window = toeplitz @ u_window + observability @ x(0)``, with windows
    stacked time-major.
    """

    toeplitz: np.ndarray
    observability: np.ndarray


def build_impulse_operators(sys: LtiSystem, L: int) -> ImpulseOperators:
    """Block lower-triangular Toeplitz of ``A^{i-j-1} B`` and ``[I; A; ...; A^{L-1}]``."""
    if L < 1:
        raise InputError(f"L must be >= 1, got {L}")
    n, m = sys.n, sys.m
    A, B = sys.a_matrix, sys.b_matrix
    powers = [np.eye(n)]
    for _ in range(L - 1):
        powers.append(A @ powers[-1])
    T = np.zeros((n * L, m * L))
    for i in range(L):
        for j in range(i):
            T[i * n:(i + 1) * n, j * m:(j + 1) * m] = powers[i - j - 1] @ B
    O = np.vstack(powers)
    return ImpulseOperators(T, O)


@dataclass(frozen=True)
class BehavioralBasis:
    """Stacked ``[H_L(state composite); H_L(input composite)]``.

    Attributes:
        matrix: ``(n+m)L`` rows; the first ``nL`` rows are states.
        n, m: state and input dimensions.
        depth: ``L``.
        mode: composition used.
        column_blocks: provenance of the columns.
        weights: composition weights.
    """

    matrix: np.ndarray
    n: int
    m: int
    depth: int
    mode: CompositionMode
    column_blocks: tuple
    weights: tuple[float, ...]

    @property
    def state_part(self) -> np.ndarray:
        return self.matrix[: self.n * self.depth]

    @property
    def input_part(self) -> np.ndarray:
        return self.matrix[self.n * self.depth:]

    def state_rows(self, t: int) -> np.ndarray:
        """Rows producing ``x(t)`` for ``0 <= t < depth``."""
        return self.matrix[t * self.n:(t + 1) * self.n]

    def input_rows(self, t: int) -> np.ndarray:
        """Rows producing ``u(t)`` for ``0 <= t < depth``."""
        off = self.n * self.depth
        return self.matrix[off + t * self.m: off + (t + 1) * self.m]

    def rank(self, rel_tol: float | None = None) -> RankReport:
        return numeric_rank(self.matrix, rel_tol)


def build_behavioral_basis(
    records: Sequence[IoRecord],
    L: int,
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
    *,
    sys: LtiSystem | None = None,
    tol: float = 1e-9,
) -> BehavioralBasis:
    """Basis from recorded data; with ``sys`` given, check the data fit it."""
    if not records:
        raise InputError("no records given")
    dims = {r.system_dims for r in records}
    if len(dims) != 1:
        raise DimensionError(f"records disagree on (n, m): {sorted(dims)}")
    n, m = records[0].system_dims
    if sys is not None:
        for i, r in enumerate(records):
            scale = 1.0 + float(np.max(np.abs(r.x)))
            if r.residual(sys) > tol * scale:
                raise InputError(f"record {i + 1} does not satisfy the given dynamics")
    Hx, blocks = compose([r.x[:-1] for r in records], L, mode, weights)
    Hu, _ = compose([r.u for r in records], L, mode, weights)
    w = tuple(float(v) for v in (weights if weights is not None else np.ones(len(records))))
    return BehavioralBasis(np.vstack([Hx, Hu]), n, m, L, mode, blocks, w)


@dataclass(frozen=True)
class Representation:
    """Outcome of :func:`represent_trajectory`.

    Attributes:
        g: coefficient vector (minimum norm).
        residual: ``‖basis g - target‖``.
        ok: residual within ``1e-8 (1 + ‖target‖)``.
        basis_rank: numeric rank of the basis.
        expected_rank: ``n + mL``, the rank a sufficiently rich basis has.
        diagnostic: explanation when ``ok`` is False.
    """

    g: np.ndarray
    residual: float
    ok: bool
    basis_rank: int
    expected_rank: int
    diagnostic: str = ""


def represent_trajectory(
    basis: BehavioralBasis,
    x_window,
    u_window,
    rel_tol: float | None = None,
    tol: float = 1e-8,
) -> Representation:
    """Express an ``L``-long state/input trajectory through the basis.

    Args:
        basis: data basis of depth ``L``.
        x_window: states ``x(0..L-1)``, shape ``(L, n)``.
        u_window: inputs ``u(0..L-1)``, shape ``(L, m)``.
        rel_tol: rank tolerance for the pseudoinverse.
        tol: relative residual tolerance.
    """
    L, n, m = basis.depth, basis.n, basis.m
    x = np.asarray(x_window, dtype=float).reshape(L, n)
    u = np.asarray(u_window, dtype=float).reshape(L, m)
    target = np.concatenate([x.ravel(), u.ravel()])
    M = basis.matrix
    g = pseudo_inverse(M, rel_tol) @ target
    res = float(np.linalg.norm(M @ g - target))
    rank = numeric_rank(M, rel_tol).numeric_rank
    expected = n + m * L
    ok = res <= tol * (1.0 + float(np.linalg.norm(target)))
    diag = ""
    if not ok:
        diag = (
            f"residual {res:.3e} exceeds tolerance; basis rank {rank} vs n+mL = {expected}"
            + (" (insufficient excitation)" if rank < expected else "")
        )
    return Representation(g, res, ok, rank, expected, diag)


@dataclass(frozen=True)
class GainSynthesisResult:
    """Outcome of :func:`synthesize_gain`.

    Attributes:
        K: feedback gain ``u = K x`` (None on failure).
        certificate: LMI certificate.
        closed_loop_radius: spectral radius of ``A + BK`` when the true
            system was supplied.
        data_radius: spectral radius of the data-implied closed loop
            ``X+ Q (X- Q)^{-1}``.
        Q: the data-side decision matrix.
        success: LMI feasible and a gain produced.
        diagnostic: singular spectra of the data blocks on failure.
    """

    K: np.ndarray | None
    certificate: LmiCertificate
    closed_loop_radius: float | None
    data_radius: float | None
    Q: np.ndarray | None
    success: bool
    mode: str
    weights: tuple[float, ...]
    diagnostic: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "K": None if self.K is None else self.K.tolist(),
            "Q": None if self.Q is None else self.Q.tolist(),
            "radius": self.closed_loop_radius,
            "data_radius": self.data_radius,
            "mode": self.mode,
            "weights": list(self.weights),
            "success": self.success,
            "certificate": {
                "status": self.certificate.status,
                "min_eig_achieved": self.certificate.min_eig_achieved,
                "upper_bound": self.certificate.upper_bound,
                "feasible": self.certificate.feasible,
            },
            "diagnostic": self.diagnostic,
        }


def _sym_basis(n: int) -> np.ndarray:
    mats = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            mats.append(E)
    return np.array(mats)


def synthesize_gain(
    records: Sequence[IoRecord],
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
    rel_tol: float | None = None,
    *,
    sys: LtiSystem | None = None,
    margin: float | None = None,
) -> GainSynthesisResult:
    """Stabilizing state feedback from data alone.

    With ``D = [X-; U]`` (depth-1 composites) the decision ``Q = D^† [P; Y]``
    turns ``[[X-Q, X+Q], [(X+Q)', X-Q]] ≻ 0`` into an LMI in ``(P, Y)``; then
    ``K = U Q (X- Q)^{-1}``.

    Args:
        records: input/state data.
        mode: composition of the depth-1 blocks.
        weights: composition weights.
        rel_tol: rank tolerance.
        sys: true system; only used to report ``closed_loop_radius``.
        margin: LMI strictness margin, default ``1e-6 max(1, ‖X+ D^†‖)``.
    """
    Xm, Xp, U = depth_one_blocks(records, mode, weights)
    n, m = records[0].system_dims
    D = np.vstack([Xm, U])
    rep = numeric_rank(D, rel_tol)
    if rep.numeric_rank < n + m:
        warnings.warn(
            f"[X-; U] has rank {rep.numeric_rank} < n+m = {n + m}; synthesis may fail",
            InformativityWarning,
            stacklevel=2,
        )
    Dp = pseudo_inverse(D, rel_tol)
    Mp = Xp @ Dp  # acts on [P; Y]
    Sb = _sym_basis(n)
    dp = Sb.shape[0]
    scale = max(1.0, float(np.linalg.norm(Mp, 2)))
    margin = 1e-6 * scale if margin is None else margin

    def unpack(v):
        v = np.asarray(v, dtype=float).ravel()
        P = np.tensordot(v[:dp], Sb, axes=1)
        Y = v[dp:].reshape(m, n)
        return P, Y

    def assemble(v):
        P, Y = unpack(v)
        XQ = Xm @ (Dp @ np.vstack([P, Y]))
        XQ = 0.5 * (XQ + XQ.T)
        XpQ = Mp @ np.vstack([P, Y])
        return np.block([[XQ, XpQ], [XpQ.T, XQ]])

    cert = lmi_feasibility(assemble, (dp + m * n,), margin, symmetric=False)
    mode_s = str(mode)
    w = tuple(float(x) for x in (weights if weights is not None else np.ones(len(records))))
    if not cert.feasible:
        diag = {
            "status": cert.status,
            "rank_D": rep.numeric_rank,
            "singular_values_D": [float(s) for s in rep.singular_values],
            "singular_values_X_plus": [float(s) for s in np.linalg.svd(Xp, compute_uv=False)],
        }
        return GainSynthesisResult(None, cert, None, None, None, False, mode_s, w, diag)
    P, Y = unpack(cert.q_matrix)
    Q = Dp @ np.vstack([P, Y])
    XQ = Xm @ Q
    K = (U @ Q) @ np.linalg.inv(XQ)
    data_cl = (Xp @ Q) @ np.linalg.inv(XQ)
    data_radius = spectral_radius(data_cl)
    radius = None
    if sys is not None:
        radius = spectral_radius(sys.a_matrix + sys.b_matrix @ K)
    return GainSynthesisResult(K, cert, radius, data_radius, Q, True, mode_s, w)


# ---------------------------------------------------------------------------
# Receding horizon control
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MpcProblem:
    """One receding-horizon problem.

    Attributes:
        basis: data basis of depth ``horizon + n``.
        horizon: prediction horizon ``N``.
        q_cost: state weight (n x n, PSD).
        r_cost: input weight (m x m, PD).
        setpoint: target state ``x*``.
        u_history: last ``n`` inputs ``u(k-n+1..k)``, shape ``(n, m)``.
        x_history: last ``n`` states ``x(k-n+1..k)``, shape ``(n, n)``.
        u_lower, u_upper: optional input bounds (scalars or length ``m``).
        reg: weight of an optional ``‖g‖²`` regularizer.
    """

    basis: BehavioralBasis
    horizon: int
    q_cost: np.ndarray
    r_cost: np.ndarray
    setpoint: np.ndarray
    u_history: np.ndarray
    x_history: np.ndarray
    u_lower: np.ndarray | float | None = None
    u_upper: np.ndarray | float | None = None
    reg: float = 0.0

    def __post_init__(self):
        b = self.basis
        n, m, N = b.n, b.m, int(self.horizon)
        if N < 1:
            raise InputError("horizon must be >= 1")
        if b.depth != N + n:
            raise InputError(f"basis depth {b.depth} must equal horizon + n = {N + n}")
        Qc = np.atleast_2d(np.asarray(self.q_cost, dtype=float))
        Rc = np.atleast_2d(np.asarray(self.r_cost, dtype=float))
        if Qc.shape != (n, n) or Rc.shape != (m, m):
            raise DimensionError("cost weights have the wrong shape")
        if np.linalg.eigvalsh(0.5 * (Qc + Qc.T))[0] < -1e-12:
            raise InputError("q_cost must be positive semidefinite")
        if np.linalg.eigvalsh(0.5 * (Rc + Rc.T))[0] <= 0:
            raise InputError("r_cost must be positive definite")
        uh = np.asarray(self.u_history, dtype=float).reshape(-1, m)
        xh = np.asarray(self.x_history, dtype=float).reshape(-1, n)
        if uh.shape[0] != n or xh.shape[0] != n:
            raise InputError(f"history must hold exactly n = {n} input/state pairs")
        xs = np.asarray(self.setpoint, dtype=float).ravel()
        if xs.size != n:
            raise DimensionError(f"setpoint must have length {n}")
        object.__setattr__(self, "horizon", N)
        object.__setattr__(self, "q_cost", Qc)
        object.__setattr__(self, "r_cost", Rc)
        object.__setattr__(self, "u_history", uh)
        object.__setattr__(self, "x_history", xh)
        object.__setattr__(self, "setpoint", xs)

    def with_history(self, u_history, x_history) -> "MpcProblem":
        return replace(self, u_history=u_history, x_history=x_history)


@dataclass(frozen=True)
class MpcStepResult:
    """First optimal input, predictions and solve diagnostics."""

    u_first: np.ndarray
    u_pred: np.ndarray
    x_pred: np.ndarray
    g: np.ndarray
    solve_seconds: float
    constraint_residual: float


def _qp_data(problem: MpcProblem):
    b = problem.basis
    n, N = b.n, problem.horizon
    C = b.matrix.shape[1]
    H = np.zeros((C, C))
    f = np.zeros(C)
    for t in range(n, n + N):
        Xt = b.state_rows(t)
        Ut = b.input_rows(t)
        H += Xt.T @ problem.q_cost @ Xt + Ut.T @ problem.r_cost @ Ut
        f -= Xt.T @ problem.q_cost @ problem.setpoint
    H = 2.0 * H
    f = 2.0 * f
    A_eq = np.vstack([b.input_rows(t) for t in range(n)] + [b.state_rows(t) for t in range(n)])
    b_eq = np.concatenate([problem.u_history.ravel(), problem.x_history.ravel()])
    return 0.5 * (H + H.T), f, A_eq, b_eq


def mpc_step(problem: MpcProblem) -> MpcStepResult:
    """Solve one receding-horizon QP in the basis coefficients ``g``.

    The first ``n`` input/state pairs of the predicted trajectory are pinned
    to the history; the cost is ``Σ_{t=1..N} (x_t - x*)'Q(x_t - x*) + u_t'R u_t``.

    Raises:
        InfeasibleProblemError: the history is not representable by the basis.
        BoundHandlingError: the active-set loop for bounds did not settle.
    """
    b = problem.basis
    n, m, N = b.n, b.m, problem.horizon
    t0 = time.perf_counter()
    H, f, A_eq, b_eq = _qp_data(problem)
    try:
        if problem.u_lower is None and problem.u_upper is None:
            g = qp_solve_eq(H, f, A_eq, b_eq, reg=problem.reg)
        else:
            Cm = np.vstack([b.input_rows(t) for t in range(n, n + N)])
            lo = -np.inf if problem.u_lower is None else np.tile(np.broadcast_to(problem.u_lower, (m,)), N)
            hi = np.inf if problem.u_upper is None else np.tile(np.broadcast_to(problem.u_upper, (m,)), N)
            g = qp_solve_ineq(H, f, A_eq, b_eq, Cm, lo, hi, reg=problem.reg)
    except InfeasibleProblemError as exc:
        rank = numeric_rank(b.matrix).numeric_rank
        raise InfeasibleProblemError(
            f"{exc}; history not representable by the basis (rank {rank}, expected {n + m * b.depth})"
        ) from None
    elapsed = time.perf_counter() - t0
    u_pred = np.stack([b.input_rows(t) @ g for t in range(n, n + N)])
    x_pred = np.stack([b.state_rows(t) @ g for t in range(n, n + N)])
    resid = float(np.linalg.norm(A_eq @ g - b_eq))
    return MpcStepResult(u_pred[0], u_pred, x_pred, g, elapsed, resid)


def warm_up(sys: LtiSystem, x0, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``n`` user-chosen inputs from ``x0``; returns ``(u_hist, x_hist)``.

    ``u_hist`` holds ``u(0..n-1)`` and ``x_hist`` holds ``x(0..n-1)``.
    """
    n, m = sys.n, sys.m
    u = np.asarray(inputs, dtype=float).reshape(-1, m)
    if u.shape[0] != n:
        raise InputError(f"warm-up needs exactly n = {n} inputs, got {u.shape[0]}")
    x = np.empty((n, n))
    x[0] = np.asarray(x0, dtype=float).ravel()
    for k in range(n - 1):
        x[k + 1] = sys.a_matrix @ x[k] + sys.b_matrix @ u[k]
    return u, x


@dataclass(frozen=True)
class MpcRunResult:
    """Closed-loop data of :func:`mpc_run`.

    ``record`` spans the warm-up and the closed loop; ``solve_seconds`` has
    one entry per receding-horizon solve.
    """

    record: IoRecord
    solve_seconds: np.ndarray
    predictions: tuple[np.ndarray, ...]

    @property
    def state_norms(self) -> np.ndarray:
        return np.linalg.norm(self.record.x, axis=1)


def mpc_run(sys: LtiSystem, problem: MpcProblem, steps: int) -> MpcRunResult:
    """Closed loop: solve, apply the first planned input, advance, repeat.

    The problem's history is the warm-up: ``u(k-n+1..k)`` and
    ``x(k-n+1..k)`` with ``u(k)`` already committed. Each step computes
    ``x(k+1) = A x(k) + B u(k)`` and commits ``u(k+1)`` from the plan.
    """
    n = sys.n
    if problem.basis.n != n or problem.basis.m != sys.m:
        raise DimensionError("basis and system dimensions differ")
    us = [row for row in problem.u_history]
    xs = [row for row in problem.x_history]
    times, preds = [], []
    cur = problem
    for _ in range(steps):
        res = mpc_step(cur)
        times.append(res.solve_seconds)
        preds.append(res.x_pred)
        x_next = sys.a_matrix @ xs[-1] + sys.b_matrix @ us[-1]
        xs.append(x_next)
        us.append(res.u_first)
        cur = cur.with_history(np.array(us[-n:]), np.array(xs[-n:]))
    # The last committed input has no successor state yet; drop it.
    rec = IoRecord(Trajectory(np.array(us[:-1]), "u"), Trajectory(np.array(xs), "x"))
    return MpcRunResult(rec, np.array(times), tuple(preds))
