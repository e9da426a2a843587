"""Persistency of excitation checks for single signals and bundles.

Includes the rank test for stacked state/input data and the consistency
relations between the three collective excitation notions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .hankel import CompositionMode, compose, cumulative_selector, hankel_matrix, hybrid_selector
from .linalg import RankReport, null_space, numeric_rank, subspace_intersection_dim
from .trajectories import IoRecord, Trajectory, TrajectoryBundle, make_rng

__all__ = [
    "AlphaPolicy",
    "CpeReport",
    "RankConditionReport",
    "TransformationReport",
    "check_pe",
    "check_cpe",
    "check_rank_condition",
    "verify_transformations",
    "excitation_lower_bound",
    "random_weights",
]


@dataclass(frozen=True)
class AlphaPolicy:
    """Which weights a collective check uses.

    ``fixed`` evaluates the given weights (or the bundle's own when None).
    ``randomized`` draws ``trials`` weight vectors with log-uniform magnitude
    in ``[1e-2, 1e2]`` and random sign; the verdict requires every trial to
    pass, which certifies generic weights with high probability.
    """

    kind: str = "fixed"
    weights: tuple[float, ...] | None = None
    trials: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fixed", "randomized"):
            raise InputError(f"unknown weight policy {self.kind!r}")
        if self.kind == "randomized" and self.trials < 1:
            raise InputError("randomized policy needs at least one trial")

    @classmethod
    def fixed(cls, weights: Sequence[float] | None = None) -> "AlphaPolicy":
        return cls("fixed", None if weights is None else tuple(float(w) for w in weights))

    @classmethod
    def randomized(cls, trials: int = 32, seed: int = 0) -> "AlphaPolicy":
        return cls("randomized", None, int(trials), int(seed))

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "weights": None if self.weights is None else list(self.weights)}
        return {"kind": "randomized", "trials": self.trials, "seed": self.seed}


def random_weights(p: int, rng: np.random.Generator) -> np.ndarray:
    """Nonzero weights, log-uniform magnitude on ``[1e-2, 1e2]``, random sign."""
    mag = 10.0 ** rng.uniform(-2.0, 2.0, p)
    sign = rng.choice([-1.0, 1.0], p)
    return mag * sign


@dataclass(frozen=True)
class CpeReport:
    """Verdict of a (collective) excitation check.

    Attributes:
        mode: composition checked.
        order_L: Hankel depth.
        dim_m: signal dimension.
        rank_report: rank of the composite (worst trial when randomized).
        verdict: whether the composite has full row rank ``dim_m * order_L``.
        per_member_pe: whether each member alone is PE of order ``order_L``.
        alpha_policy: weight policy used.
        weights_used: weights of the reported composite.
    """

    mode: CompositionMode
    order_L: int
    dim_m: int
    rank_report: RankReport
    verdict: bool
    per_member_pe: tuple[bool, ...]
    alpha_policy: AlphaPolicy
    weights_used: tuple[float, ...] = ()

    @property
    def target_rank(self) -> int:
        return self.dim_m * self.order_L

    @property
    def conditioning(self) -> float:
        """``sigma_{mL} / sigma_1`` of the composite."""
        return self.rank_report.ratio(self.target_rank)

    def to_dict(self) -> dict:
        return {
            "mode": str(self.mode),
            "order_L": self.order_L,
            "dim_m": self.dim_m,
            "target_rank": self.target_rank,
            "verdict": bool(self.verdict),
            "conditioning": self.conditioning,
            "per_member_pe": [bool(v) for v in self.per_member_pe],
            "alpha_policy": self.alpha_policy.to_dict(),
            "weights_used": list(self.weights_used),
            "rank_report": self.rank_report.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _samples(traj) -> np.ndarray:
    if isinstance(traj, Trajectory):
        return traj.samples
    arr = np.asarray(traj, dtype=float)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def check_pe(traj, L: int, rel_tol: float | None = None) -> bool:
    """True iff the depth-``L`` Hankel matrix has full row rank ``mL``."""
    z = _samples(traj)
    H = hankel_matrix(z, L)
    if H.shape[1] < H.shape[0]:
        return False
    return numeric_rank(H, rel_tol).numeric_rank == H.shape[0]


def check_cpe(
    bundle: TrajectoryBundle,
    L: int,
    mode: CompositionMode,
    alpha_policy: AlphaPolicy | None = None,
    rel_tol: float | None = None,
) -> CpeReport:
    """Collective excitation check of order ``L``.

    Args:
        bundle: the trajectories.
        L: order.
        mode: mosaic, cumulative, hybrid (``p̄`` taken from the mode) or
            single for a one-member bundle.
        alpha_policy: fixed (default, bundle weights) or randomized.
        rel_tol: rank tolerance.
    """
    policy = alpha_policy or AlphaPolicy.fixed()
    signals = [m.samples for m in bundle.members]
    target = bundle.dim_m * L
    if policy.kind == "fixed":
        w_list = [np.asarray(policy.weights if policy.weights is not None else bundle.weights, dtype=float)]
    else:
        rng = make_rng(policy.seed)
        w_list = [random_weights(bundle.p, rng) for _ in range(policy.trials)]
    worst = None
    worst_w = None
    all_ok = True
    for w in w_list:
        M, _ = compose(signals, L, mode, w)
        rep = numeric_rank(M, rel_tol)
        ok = rep.numeric_rank == target
        all_ok &= ok
        key = (rep.numeric_rank, rep.ratio(target))
        if worst is None or key < (worst.numeric_rank, worst.ratio(target)):
            worst, worst_w = rep, w
    per_member = tuple(
        (m.length >= L) and check_pe(m, L, rel_tol) for m in bundle.members
    )
    return CpeReport(
        mode, L, bundle.dim_m, worst, bool(all_ok), per_member, policy,
        tuple(float(v) for v in worst_w),
    )


@dataclass(frozen=True)
class RankConditionReport:
    """Rank of stacked ``[state composite (depth 1); input composite (depth L)]``."""

    rank_report: RankReport
    verdict: bool
    expected_rank: int

    @property
    def conditioning(self) -> float:
        return self.rank_report.ratio(self.expected_rank)

    def to_dict(self) -> dict:
        return {
            "verdict": bool(self.verdict),
            "expected_rank": self.expected_rank,
            "conditioning": self.conditioning,
            "rank_report": self.rank_report.to_dict(),
        }


def stacked_state_input(
    records: Sequence[IoRecord],
    L: int,
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
) -> np.ndarray:
    """Stack the depth-1 composite of ``x(0..T-L)`` over the depth-``L`` input composite."""
    if not records:
        raise InputError("no records given")
    dims = {r.system_dims for r in records}
    if len(dims) != 1:
        raise InputError(f"records disagree on (n, m): {sorted(dims)}")
    xs = [r.x[: r.length - L + 1] for r in records]
    us = [r.u for r in records]
    Hu, _ = compose(us, L, mode, weights)
    Hx, _ = compose(xs, 1, mode, weights)
    return np.vstack([Hx, Hu])


def check_rank_condition(
    records: Sequence[IoRecord],
    L: int,
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
    rel_tol: float | None = None,
) -> RankConditionReport:
    """Check that stacked state/input data has rank ``n + mL``."""
    M = stacked_state_input(records, L, mode, weights)
    n, m = records[0].system_dims
    rep = numeric_rank(M, rel_tol)
    expected = n + m * L
    return RankConditionReport(rep, rep.numeric_rank == expected, expected)


@dataclass(frozen=True)
class TransformationReport:
    """Evaluation of the three notions and the kernel side conditions.

    ``None`` marks a sub-check that does not apply (e.g. cumulative on
    unequal lengths, or hybrid without a shared prefix).

    Attributes:
        kernel_condition_1: ``im(H_mos') ∩ ker((1_p ⊗ I)') = {0}``.
        kernel_condition_2: same with the hybrid block selector.
        kernel_condition_3: ``im(H_hyb') ∩ ker((1_{p-p̄+1} ⊗ I)') = {0}``.
    """

    mcpe_holds: bool
    ccpe_holds: bool | None
    hcpe_holds: bool | None
    kernel_condition_1: bool | None
    kernel_condition_2: bool | None
    kernel_condition_3: bool | None
    p_bar: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    def implications(self) -> dict[str, bool | None]:
        """Each implication's consistency on this instance (None if not applicable)."""

        def imp(hyp, concl):
            if hyp is None or concl is None:
                return None
            return (not hyp) or concl

        def both(a, b):
            if a is None or b is None:
                return None
            return a and b

        return {
            "ccpe=>mcpe": imp(self.ccpe_holds, self.mcpe_holds),
            "ccpe=>hcpe": imp(self.ccpe_holds, self.hcpe_holds),
            "hcpe=>mcpe": imp(self.hcpe_holds, self.mcpe_holds),
            "mcpe&kernel1=>ccpe": imp(both(self.mcpe_holds, self.kernel_condition_1), self.ccpe_holds),
            "mcpe&kernel2=>hcpe": imp(both(self.mcpe_holds, self.kernel_condition_2), self.hcpe_holds),
            "hcpe&kernel3=>ccpe": imp(both(self.hcpe_holds, self.kernel_condition_3), self.ccpe_holds),
        }

    def violations(self) -> list[str]:
        return [k for k, v in self.implications().items() if v is False]


def _row_space_basis(M: np.ndarray, rel_tol: float | None) -> np.ndarray:
    """Orthonormal basis of ``im(M')``."""
    _, s, Vt = np.linalg.svd(M, full_matrices=False)
    rep = numeric_rank(M, rel_tol)
    return Vt[: rep.numeric_rank].T


def _trivial_intersection(Hm: np.ndarray, S: np.ndarray, rel_tol: float | None) -> bool:
    R = _row_space_basis(Hm, rel_tol)
    K = null_space(S.T)
    if R.shape[1] == 0 or K.shape[1] == 0:
        return True
    return subspace_intersection_dim(R, K, rel_tol) == 0


def verify_transformations(
    bundle: TrajectoryBundle,
    L: int,
    rel_tol: float | None = None,
    p_bar: int | None = None,
    weights: Sequence[float] | None = None,
) -> TransformationReport:
    """Evaluate MCPE, CCPE and HCPE together with the kernel conditions.

    Args:
        bundle: trajectories, every length at least ``L``.
        L: order.
        rel_tol: rank tolerance.
        p_bar: hybrid prefix count; defaults to ``bundle.shared_prefix_count``.
        weights: overrides the bundle weights.
    """
    w = np.asarray(bundle.weights if weights is None else weights, dtype=float)
    sig = [m.samples for m in bundle.members]
    lengths = bundle.lengths
    p = bundle.p
    target = bundle.dim_m * L
    notes = []

    Hmos, _ = compose(sig, L, CompositionMode.mosaic(), w)
    mcpe = numeric_rank(Hmos, rel_tol).numeric_rank == target

    equal = len(set(lengths)) == 1
    ccpe = kc1 = None
    if equal:
        Hcum, _ = compose(sig, L, CompositionMode.cumulative(), w)
        ccpe = numeric_rank(Hcum, rel_tol).numeric_rank == target
        C0 = lengths[0] - L + 1
        kc1 = _trivial_intersection(Hmos, cumulative_selector(p, C0), rel_tol)
    else:
        notes.append("cumulative checks skipped: unequal lengths")

    pb = bundle.shared_prefix_count if p_bar is None else int(p_bar)
    hcpe = kc2 = kc3 = None
    prefix_ok = 1 <= pb <= p and len(set(lengths[:pb])) == 1
    if prefix_ok:
        mode = CompositionMode.hybrid(pb)
        Hhyb, _ = compose(sig, L, mode, w)
        hcpe = numeric_rank(Hhyb, rel_tol).numeric_rank == target
        C0 = lengths[0] - L + 1
        tail_cols = sum(T - L + 1 for T in lengths[pb:])
        kc2 = _trivial_intersection(Hmos, hybrid_selector(pb, C0, tail_cols), rel_tol)
        if equal:
            kc3 = _trivial_intersection(Hhyb, cumulative_selector(p - pb + 1, C0), rel_tol)
    else:
        notes.append("hybrid checks skipped: no valid shared prefix")

    return TransformationReport(mcpe, ccpe, hcpe, kc1, kc2, kc3, pb, tuple(notes))


def excitation_lower_bound(
    bundle: TrajectoryBundle, L: int, weights: Sequence[float] | None = None
) -> float:
    """Smallest eigenvalue of ``Σ_i α_i² H_L(z_i) H_L(z_i)'``.

    The sum equals the Gram matrix of the weighted mosaic composite, so the
    value is positive exactly when that composite has full row rank. It is
    quadratic in the weights.
    """
    w = np.asarray(bundle.weights if weights is None else weights, dtype=float)
    M, _ = compose([m.samples for m in bundle.members], L, CompositionMode.mosaic(), w)
    G = M @ M.T
    return max(float(np.linalg.eigvalsh(0.5 * (G + G.T))[0]), 0.0)
