"""Dense linear-algebra kernel.

Numeric rank, pseudoinverse, eigenvalue helpers, subspace intersection,
a small log-barrier LMI solver and an equality-constrained QP solver.
Everything works on plain ``numpy`` arrays; LAPACK does the heavy lifting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg as sla

from .errors import (
    BoundHandlingError,
    ContractViolationError,
    DegenerateProblemError,
    DimensionError,
    InfeasibleProblemError,
    InputError,
)

__all__ = [
    "RankReport",
    "LmiCertificate",
    "as_matrix",
    "default_rel_tol",
    "numeric_rank",
    "pseudo_inverse",
    "null_space",
    "spectral_radius",
    "symmetric_eig_max",
    "subspace_intersection_dim",
    "lmi_feasibility",
    "qp_solve_eq",
    "qp_solve_ineq",
]


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite, non-empty 2-D float array.

    Raises:
        InputError: if the array is empty, not 2-D or holds NaN/inf.
    """
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    return arr


def default_rel_tol(shape: Sequence[int]) -> float:
    """Default relative rank tolerance ``1e-9 * max(rows, cols)``."""
    return 1e-9 * max(shape)


def _resolve_tol(rel_tol: float | None, shape) -> float:
    tol = default_rel_tol(shape) if rel_tol is None else float(rel_tol)
    if not 0.0 < tol < 1.0:
        raise InputError(f"rel_tol must lie in (0, 1), got {tol}")
    return tol


@dataclass(frozen=True)
class RankReport:
    """Outcome of a numeric rank computation.

    Attributes:
        numeric_rank: number of singular values above ``tolerance_used``.
        singular_values: full spectrum in descending order.
        tolerance_used: absolute threshold (``rel_tol * sigma_max``).
    """

    numeric_rank: int
    singular_values: np.ndarray
    tolerance_used: float

    def ratio(self, k: int) -> float:
        """Return ``sigma_k / sigma_1`` (1-based), or 0 if unavailable."""
        s = self.singular_values
        if k < 1 or k > s.size or s.size == 0 or s[0] == 0.0:
            return 0.0
        return float(s[k - 1] / s[0])

    def to_dict(self) -> dict:
        return {
            "numeric_rank": int(self.numeric_rank),
            "singular_values": [float(v) for v in self.singular_values],
            "tolerance_used": float(self.tolerance_used),
        }


def numeric_rank(M, rel_tol: float | None = None) -> RankReport:
    """Numeric rank via SVD.

    Args:
        M: matrix to inspect.
        rel_tol: singular values at or below ``rel_tol * sigma_max`` count as
            zero. Defaults to ``1e-9 * max(rows, cols)``.

    Returns:
        A :class:`RankReport`.
    """
    A = as_matrix(M)
    tol = _resolve_tol(rel_tol, A.shape)
    s = np.linalg.svd(A, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    thresh = tol * smax
    rank = 0 if smax == 0.0 else int(np.count_nonzero(s > thresh))
    return RankReport(rank, s, thresh)


def pseudo_inverse(M, rel_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse with small singular values zeroed."""
    A = as_matrix(M)
    tol = _resolve_tol(rel_tol, A.shape)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > tol * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def null_space(M, rel_tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the right kernel of ``M``."""
    A = as_matrix(M)
    rep_tol = _resolve_tol(rel_tol, A.shape)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    r = 0 if s.size == 0 or s[0] == 0.0 else int(np.count_nonzero(s > rep_tol * s[0]))
    return Vt[r:].T.copy()


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {A.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _check_symmetric(A: np.ndarray, tol: float = 1e-10) -> None:
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise InputError("matrix is not symmetric")


def symmetric_eig_max(M) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    A = as_matrix(M)
    _check_symmetric(A)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])


def subspace_intersection_dim(U_basis, V_basis, rel_tol: float | None = None) -> int:
    """Dimension of ``im U ∩ im V`` from the rank-sum formula."""
    U = as_matrix(U_basis, "U_basis")
    V = as_matrix(V_basis, "V_basis")
    if U.shape[0] != V.shape[0]:
        raise DimensionError(
            f"ambient dimensions differ: {U.shape[0]} vs {V.shape[0]}"
        )
    ru = numeric_rank(U, rel_tol).numeric_rank
    rv = numeric_rank(V, rel_tol).numeric_rank
    ruv = numeric_rank(np.hstack([U, V]), rel_tol).numeric_rank
    return ru + rv - ruv


# ---------------------------------------------------------------------------
# LMI feasibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LmiCertificate:
    """Result of :func:`lmi_feasibility`.

    Attributes:
        q_matrix: decision variable returned by the solver (unit Frobenius
            norm when the map is homogeneous).
        min_eig_achieved: smallest eigenvalue of the assembled matrix at
            ``q_matrix``.
        feasible: True when ``min_eig_achieved >= margin``.
        status: ``"feasible"``, ``"infeasible"`` (certified by the barrier
            duality bound) or ``"unknown"`` (iteration cap or inconclusive).
        upper_bound: certified upper bound on the best achievable smallest
            eigenvalue over the search box.
        iterations: total Newton iterations.
    """

    q_matrix: np.ndarray
    min_eig_achieved: float
    feasible: bool
    status: str
    upper_bound: float
    iterations: int


def _decision_basis(q_dim, symmetric: bool) -> tuple[list[np.ndarray], tuple[int, ...]]:
    """Frobenius-orthonormal basis of the decision space."""
    if symmetric:
        if not isinstance(q_dim, (int, np.integer)) or q_dim < 1:
            raise InputError(f"q_dim must be a positive integer, got {q_dim!r}")
        n = int(q_dim)
        basis = []
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n))
                if i == j:
                    E[i, i] = 1.0
                else:
                    E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
                basis.append(E)
        return basis, (n, n)
    shape = (int(q_dim),) if np.isscalar(q_dim) else tuple(int(s) for s in q_dim)
    if any(s < 1 for s in shape):
        raise InputError(f"invalid decision shape {shape}")
    size = int(np.prod(shape))
    basis = [np.eye(size)[k].reshape(shape) for k in range(size)]
    return basis, shape


def _checked_output(assemble: Callable, Q: np.ndarray) -> np.ndarray:
    F = np.asarray(assemble(Q), dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ContractViolationError(f"assembled matrix must be square, got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ContractViolationError("assembled matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(F))))
    if np.max(np.abs(F - F.T)) > 1e-10 * scale:
        raise ContractViolationError("assembled matrix is not symmetric")
    return 0.5 * (F + F.T)


def lmi_feasibility(
    assemble: Callable[[np.ndarray], np.ndarray],
    q_dim,
    margin: float = 1e-6,
    *,
    symmetric: bool = True,
    max_outer: int = 60,
    max_newton: int = 60,
    gap_tol: float = 1e-7,
    seed: int = 0,
) -> LmiCertificate:
    """Find ``Q`` with ``assemble(Q)`` positive definite.

    The problem ``max t  s.t.  assemble(Q) - t I ⪰ 0`` is solved over the box
    ``|q_k| <= 1`` (coordinates in a Frobenius-orthonormal basis) with a
    log-barrier Newton method. The barrier duality gap gives a certified
    upper bound on the optimum, which is what allows an ``"infeasible"``
    verdict.

    Args:
        assemble: affine map from the decision variable to a symmetric matrix.
        q_dim: size of a symmetric ``Q`` (``symmetric=True``) or the shape of
            an unstructured decision array (``symmetric=False``).
        margin: required smallest eigenvalue after scale normalization.
        symmetric: whether the decision variable is a symmetric matrix.
        max_outer: cap on barrier-parameter updates.
        max_newton: cap on Newton steps per centering.
        gap_tol: relative duality gap at which the solver stops.
        seed: seed for the affinity probe.

    Returns:
        An :class:`LmiCertificate`.

    Raises:
        ContractViolationError: if ``assemble`` is not symmetric or not affine.
    """
    if margin <= 0:
        raise InputError(f"margin must be positive, got {margin}")
    basis, shape = _decision_basis(q_dim, symmetric)
    d = len(basis)
    F0 = _checked_output(assemble, np.zeros(shape))
    N = F0.shape[0]
    Fs = np.empty((d, N, N))
    for k, E in enumerate(basis):
        Fk = _checked_output(assemble, E)
        if Fk.shape != F0.shape:
            raise ContractViolationError("assembled matrix changes shape")
        Fs[k] = Fk - F0

    rng = np.random.default_rng(seed)
    probe = rng.uniform(-1.0, 1.0, d)
    lhs = _checked_output(assemble, np.tensordot(probe, np.asarray(basis), axes=1))
    rhs = F0 + np.tensordot(probe, Fs, axes=1)
    scale = max(1.0, float(np.max(np.abs(lhs))))
    if np.max(np.abs(lhs - rhs)) > 1e-8 * scale:
        raise ContractViolationError("assemble is not affine in its argument")

    f_scale = max(float(np.max(np.abs(F0))), float(np.max(np.abs(Fs))), 1e-300)
    homogeneous = float(np.max(np.abs(F0))) <= 1e-12 * f_scale

    # Work on a scaled copy so that barrier tolerances are scale free.
    F0s = F0 / f_scale
    Fss = Fs / f_scale
    eye = np.eye(N)
    theta = N + 2 * d
    q = np.zeros(d)
    t = float(np.linalg.eigvalsh(F0s)[0]) - 1.0
    mu = 1.0
    iters = 0
    status = "unknown"
    upper = np.inf
    margin_s = margin / f_scale

    def objective(qv, tv, muv):
        S = F0s + np.tensordot(qv, Fss, axes=1) - tv * eye
        try:
            Lc = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return np.inf, None
        if np.any(np.abs(qv) >= 1.0):
            return np.inf, None
        val = -muv * tv - 2.0 * np.sum(np.log(np.diag(Lc))) - np.sum(np.log1p(-qv * qv))
        return val, Lc

    for _ in range(max_outer):
        for _ in range(max_newton):
            val, Lc = objective(q, t, mu)
            Linv = sla.solve_triangular(Lc, eye, lower=True)
            G = Linv @ Fss @ Linv.T
            Gt = -(Linv.T @ Linv)
            Gall = np.concatenate([G, Gt[None, :, :]], axis=0)
            grad = -np.einsum("kii->k", Gall)
            grad[:d] += 2.0 * q / (1.0 - q * q)
            grad[d] += -mu
            Hm = np.einsum("kij,lij->kl", Gall, Gall)
            Hm[np.arange(d), np.arange(d)] += 2.0 * (1.0 + q * q) / (1.0 - q * q) ** 2
            try:
                step = -np.linalg.solve(Hm, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(Hm, grad, rcond=None)[0]
            dec = -float(grad @ step)
            iters += 1
            if dec / 2.0 <= 1e-10:
                break
            s = 1.0
            while s > 1e-14:
                qn = q + s * step[:d]
                tn = t + s * step[d]
                vn, _ = objective(qn, tn, mu)
                if vn <= val - 0.25 * s * dec:
                    break
                s *= 0.5
            else:
                break
            q, t = qn, tn
        upper = t + 1.01 * theta / mu
        if upper < margin_s:
            status = "infeasible"
            break
        if theta / mu <= gap_tol * max(1.0, abs(t)):
            status = "converged"
            break
        mu *= 8.0

    Q = np.tensordot(q, np.asarray(basis), axes=1)
    if homogeneous:
        nrm = float(np.linalg.norm(q))
        if nrm > 0:
            Q = Q / nrm
    Fq = _checked_output(assemble, Q)
    lam = float(np.linalg.eigvalsh(Fq)[0])
    feasible = lam >= margin
    if feasible:
        status = "feasible"
    elif status != "infeasible":
        status = "unknown"
    return LmiCertificate(Q, lam, feasible, status, float(upper * f_scale), iters)


# ---------------------------------------------------------------------------
# Quadratic programming
# ---------------------------------------------------------------------------


def qp_solve_eq(
    H,
    f,
    A_eq,
    b_eq,
    *,
    reg: float = 0.0,
    rel_tol: float | None = None,
    return_multipliers: bool = False,
):
    """Minimize ``0.5 g'Hg + f'g`` subject to ``A_eq g = b_eq``.

    Uses the null-space method: a minimum-norm particular solution plus a
    reduced problem on ``ker(A_eq)`` solved by a spectral pseudoinverse. The
    returned point is the minimum-norm minimizer when the minimizer is not
    unique. Redundant constraint rows are eliminated through the SVD.

    Args:
        H: symmetric Hessian, positive semidefinite on ``ker(A_eq)``.
        f: linear term.
        A_eq: constraint matrix, may have zero rows.
        b_eq: right-hand side.
        reg: optional Tikhonov weight added to ``H``.
        rel_tol: rank tolerance for the constraint matrix.
        return_multipliers: also return Lagrange multipliers ``lam`` with
            ``H g + f + A_eq' lam = 0``.

    Raises:
        InfeasibleProblemError: constraints are inconsistent.
        DegenerateProblemError: objective is unbounded below or not convex
            on the feasible set.
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float).ravel()
    n = f.size
    if H.shape != (n, n):
        raise DimensionError(f"H must be {n}x{n}, got {H.shape}")
    A = np.asarray(A_eq, dtype=float).reshape(-1, n)
    b = np.asarray(b_eq, dtype=float).ravel()
    if A.shape[0] != b.size:
        raise DimensionError(f"A_eq has {A.shape[0]} rows but b_eq has {b.size}")
    for name, arr in (("H", H), ("f", f), ("A_eq", A), ("b_eq", b)):
        if not np.all(np.isfinite(arr)):
            raise InputError(f"{name} has non-finite entries")
    _check_symmetric(H, tol=1e-8)
    Hr = 0.5 * (H + H.T)
    if reg:
        Hr = Hr + reg * np.eye(n)

    if A.shape[0]:
        U, s, Vt = np.linalg.svd(A, full_matrices=True)
        tol = _resolve_tol(rel_tol, A.shape)
        r = 0 if s[0] == 0.0 else int(np.count_nonzero(s > tol * s[0]))
        Ur, sr, Vr = U[:, :r], s[:r], Vt[:r]
        resid = b - Ur @ (Ur.T @ b)
        if np.linalg.norm(resid) > 1e-8 * (1.0 + np.linalg.norm(b)):
            raise InfeasibleProblemError(
                f"equality constraints are inconsistent (residual {np.linalg.norm(resid):.3e})"
            )
        g_p = Vr.T @ ((Ur.T @ b) / sr)
        Z = Vt[r:].T
    else:
        g_p = np.zeros(n)
        Z = np.eye(n)

    if Z.shape[1]:
        Hz = Z.T @ Hr @ Z
        Hz = 0.5 * (Hz + Hz.T)
        fz = Z.T @ (Hr @ g_p + f)
        w, V = np.linalg.eigh(Hz)
        wmax = max(float(w[-1]), 0.0)
        wtol = 1e-11 * max(Hz.shape[0], 1) * wmax
        if w[0] < -max(wtol, 1e-12 * float(np.max(np.abs(Hr))) if Hr.size else 0.0):
            raise DegenerateProblemError("objective is not convex on the feasible set")
        pos = w > wtol
        coef = V.T @ fz
        f_scale = max(float(np.linalg.norm(f)), wmax * (1.0 + float(np.linalg.norm(g_p))), 1e-300)
        if np.linalg.norm(coef[~pos]) > 1e-7 * f_scale:
            raise DegenerateProblemError("objective is unbounded below on the feasible set")
        y = -V[:, pos] @ (coef[pos] / w[pos])
        g = g_p + Z @ y
    else:
        g = g_p

    if not return_multipliers:
        return g
    if A.shape[0]:
        lam = -np.linalg.lstsq(A.T, Hr @ g + f, rcond=None)[0]
    else:
        lam = np.zeros(0)
    return g, lam


def qp_solve_ineq(
    H,
    f,
    A_eq,
    b_eq,
    C,
    lower,
    upper,
    *,
    reg: float = 0.0,
    max_iter: int = 200,
    feas_tol: float = 1e-9,
):
    """Minimize ``0.5 g'Hg + f'g`` s.t. ``A_eq g = b_eq``, ``lower <= C g <= upper``.

    Active-set loop over :func:`qp_solve_eq`: violated inequality rows are
    pinned to their bound, rows whose multiplier has the wrong sign are
    released.

    Raises:
        BoundHandlingError: the working set did not settle within ``max_iter``.
    """
    C = np.asarray(C, dtype=float)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (C.shape[0],)).copy()
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (C.shape[0],)).copy()
    if np.any(lo > hi):
        raise InputError("lower bound exceeds upper bound")
    A = np.asarray(A_eq, dtype=float).reshape(-1, C.shape[1])
    b = np.asarray(b_eq, dtype=float).ravel()
    active: dict[int, float] = {}  # row -> sign (+1 upper, -1 lower)
    for _ in range(max_iter):
        rows = sorted(active)
        if rows:
            sg = np.array([active[i] for i in rows])
            Aw = np.vstack([A, sg[:, None] * C[rows]])
            bw = np.concatenate([b, sg * np.where(sg > 0, hi[rows], lo[rows])])
        else:
            Aw, bw = A, b
        g, lam = qp_solve_eq(H, f, Aw, bw, reg=reg, return_multipliers=True)
        cg = C @ g
        scale = 1.0 + np.abs(cg)
        viol_hi = (cg - hi) / scale
        viol_lo = (lo - cg) / scale
        worst = np.maximum(viol_hi, viol_lo)
        worst[rows] = -np.inf
        lam_in = lam[A.shape[0]:]
        changed = False
        if rows and np.min(lam_in) < -1e-9 * (1.0 + np.max(np.abs(lam_in))):
            drop = rows[int(np.argmin(lam_in))]
            del active[drop]
            changed = True
        if worst.size and np.max(worst) > feas_tol:
            i = int(np.argmax(worst))
            active[i] = 1.0 if viol_hi[i] > viol_lo[i] else -1.0
            changed = True
        if not changed:
            return g
    raise BoundHandlingError(f"active-set loop did not settle in {max_iter} iterations")
