"""Open-loop design of signal families that are collectively exciting.

Every designed member is individually *not* persistently exciting of the
requested order, while the weighted composite has full row rank ``mL``.

Mosaic designs slice one virtual signal ``w`` into members. ``w`` is zero
except at the "diagonal" times ``qL-1`` where it takes independent vectors,
so the first ``mL`` composite columns are block triangular with those
vectors as pivots. Members shorter than ``(m+1)L-1`` have fewer than ``mL``
Hankel columns and cannot be PE on their own.

Cumulative designs make the weighted sum vanish except at the diagonal
times below ``mL`` and then extend each member with a fixed linear
recurrence, which caps every member's Hankel rank at ``mL-1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BoundViolationError, InputError, UnsupportedCaseError
from .hankel import CompositionMode
from .informativity import AlphaPolicy, CpeReport, check_cpe
from .linalg import numeric_rank
from .trajectories import Trajectory, TrajectoryBundle

__all__ = [
    "DesignRequest",
    "DesignLedger",
    "LengthBound",
    "minimal_lengths",
    "diagonal_offsets",
    "design_signals",
    "verify_design",
]

_CONTRACTION = 0.9  # l1 bound on recurrence coefficients (keeps tails bounded)
_MAX_RESAMPLE = 100


@dataclass(frozen=True)
class LengthBound:
    """Minimal-length inequality for a design mode.

    Attributes:
        mode: mode name.
        required: right-hand side of the inequality.
        description: human-readable form.
        prefix_count: ``p̄`` for hybrid, else 0.
    """

    mode: str
    required: int
    description: str
    prefix_count: int = 0

    def lhs(self, lengths: Sequence[int]) -> int:
        """Left-hand side of the inequality for the given lengths."""
        if self.mode == "mosaic":
            return int(sum(lengths))
        if self.mode == "cumulative":
            return int(lengths[0])
        return int(lengths[0] + sum(lengths[self.prefix_count:]))

    def satisfied(self, lengths: Sequence[int]) -> bool:
        return self.lhs(lengths) >= self.required


def minimal_lengths(mode: str | CompositionMode, m: int, L: int, p: int, p_bar: int | None = None) -> LengthBound:
    """Shortest data lengths for which the requested collective order is reachable.

    mosaic: ``Σ T_i >= mL + p(L-1)``; cumulative: ``T_0 >= (m+1)L - 1``;
    hybrid: ``T_0 + Σ_{i>p̄} T_i >= mL + (p-p̄+1)(L-1)``.
    """
    if isinstance(mode, CompositionMode):
        if mode.variant == "hybrid" and p_bar is None:
            p_bar = mode.shared_prefix
        mode = mode.variant
    if p < 1 or m < 1 or L < 1:
        raise InputError("m, L and p must be positive")
    if mode == "mosaic":
        req = m * L + p * (L - 1)
        return LengthBound("mosaic", req, f"sum(T_i) >= mL + p(L-1) = {req}")
    if mode == "cumulative":
        req = (m + 1) * L - 1
        return LengthBound("cumulative", req, f"T_0 >= (m+1)L - 1 = {req}")
    if mode == "hybrid":
        if p_bar is None or not 1 <= p_bar <= p:
            raise InputError(f"hybrid needs 1 <= p_bar <= p, got {p_bar}")
        req = m * L + (p - p_bar + 1) * (L - 1)
        return LengthBound(
            "hybrid", req, f"T_0 + sum(T_i, i > p_bar) >= mL + (p - p_bar + 1)(L-1) = {req}", p_bar
        )
    raise InputError(f"unknown design mode {mode!r}")


def diagonal_offsets(lengths: Sequence[int], L: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Column offsets ``T_i^s`` and diagonal indices ``Δ_i`` of a mosaic chain.

    ``T_i^s = Σ_{j<i} (T_j - L + 1)`` and ``Δ_i = L - 1 - (T_i^s mod L)``.
    """
    offsets, deltas, acc = [], [], 0
    for T in lengths:
        offsets.append(acc)
        deltas.append(L - 1 - (acc % L))
        acc += T - L + 1
    return tuple(offsets), tuple(deltas)


@dataclass(frozen=True)
class DesignRequest:
    """Parameters of a design.

    Attributes:
        dim_m: signal dimension ``m``.
        order_L: requested collective order ``L``.
        lengths: one length per member; cumulative members share a length
            and the first ``p̄`` hybrid members share the prefix length.
        mode: mosaic, cumulative or hybrid (carrying ``p̄``).
        weights: composition weights (ones by default).
        rng_seed: seed for the free entries.
    """

    dim_m: int
    order_L: int
    lengths: tuple[int, ...]
    mode: CompositionMode
    weights: tuple[float, ...] | None = None
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(T) for T in self.lengths))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def cumulative(cls, m: int, L: int, p: int, T0: int, weights=None, seed: int = 0) -> "DesignRequest":
        return cls(m, L, (T0,) * p, CompositionMode.cumulative(), weights, seed)

    @property
    def p(self) -> int:
        return len(self.lengths)

    @property
    def alpha(self) -> np.ndarray:
        return np.ones(self.p) if self.weights is None else np.asarray(self.weights, dtype=float)


@dataclass
class DesignLedger:
    """Structural choices made by :func:`design_signals`.

    Attributes:
        mode: mode string.
        virtual_lengths: lengths of the mosaic chain the offsets refer to
            (for hybrid the summed prefix counts as one entry).
        offsets: ``T_i^s`` per chain entry.
        diagonal_indices: ``Δ_i`` per chain entry.
        diagonal_times: times at which diagonal vectors were placed.
        diagonal_vectors: the vectors themselves.
        zero_sum_coefficients: per-member scalars ``c_i`` with ``Σ α_i c_i = 0``.
        extension_bases: per-member ``Z_i^0`` (cumulative designs).
        extension_coefficients: per-member ``(Z_i^0)^{-1} z_i(mL-1)``.
        notes: remarks on the construction.
    """

    mode: str
    virtual_lengths: tuple[int, ...] = ()
    offsets: tuple[int, ...] = ()
    diagonal_indices: tuple[int, ...] = ()
    diagonal_times: list[int] = field(default_factory=list)
    diagonal_vectors: list[list[float]] = field(default_factory=list)
    zero_sum_coefficients: list[float] = field(default_factory=list)
    extension_bases: dict[int, list[list[float]]] = field(default_factory=dict)
    extension_coefficients: dict[int, list[float]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "virtual_lengths": list(self.virtual_lengths),
            "offsets": list(self.offsets),
            "diagonal_indices": list(self.diagonal_indices),
            "diagonal_times": list(self.diagonal_times),
            "diagonal_vectors": self.diagonal_vectors,
            "zero_sum_coefficients": self.zero_sum_coefficients,
            "extension_bases": {str(k): v for k, v in self.extension_bases.items()},
            "extension_coefficients": {str(k): v for k, v in self.extension_coefficients.items()},
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _independent_vector(existing: list[np.ndarray], m: int, rng: np.random.Generator) -> np.ndarray:
    """Smallest-index unit vector well outside ``span(existing)``, slightly perturbed.

    "Well outside" means its distance to the span is at least 0.5, which
    keeps the pivots of the composite far from degenerate.
    """
    base = np.array(existing).T if existing else np.zeros((m, 0))
    r0 = base.shape[1]
    if r0:
        Qb, _ = np.linalg.qr(base)
    eye = np.eye(m)
    dist = np.linalg.norm(eye - Qb @ (Qb.T @ eye), axis=0) if r0 else np.ones(m)
    good = np.flatnonzero(dist >= 0.5)
    j = int(good[0]) if good.size else int(np.argmax(dist))
    for _ in range(_MAX_RESAMPLE):
        v = eye[j] + 0.01 * rng.uniform(-1.0, 1.0, m)
        if numeric_rank(np.column_stack([base, v])).numeric_rank > r0:
            return v
    raise UnsupportedCaseError("could not find a vector outside the current span")


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _virtual_chain(
    m: int,
    L: int,
    chain: Sequence[int],
    diag_rng: np.random.Generator,
    free_rngs: Sequence[np.random.Generator],
    zero_first_prefix: bool,
    ledger: DesignLedger,
) -> list[np.ndarray]:
    """Slice a sparse virtual signal into members of the given lengths."""
    offsets, deltas = diagonal_offsets(chain, L)
    total = offsets[-1] + chain[-1]
    w = np.zeros((total, m))
    vs: list[np.ndarray] = []
    for q, t in enumerate(range(L - 1, total, L)):
        v = _independent_vector(vs, m, diag_rng) if q < m else diag_rng.uniform(-1.0, 1.0, m)
        w[t] = v
        vs.append(v)
        ledger.diagonal_times.append(int(t))
        ledger.diagonal_vectors.append([float(x) for x in v])
    out = []
    for i, (T, s, d) in enumerate(zip(chain, offsets, deltas)):
        z = w[s:s + T].copy()
        if d > 0 and not (i == 0 and zero_first_prefix):
            z[:d] = free_rngs[i].uniform(-1.0, 1.0, (d, m))
        out.append(z)
    ledger.virtual_lengths = tuple(int(T) for T in chain)
    ledger.offsets = offsets
    ledger.diagonal_indices = deltas
    return out


def _cumulative_members(
    m: int,
    L: int,
    T0: int,
    alpha: np.ndarray,
    rng: np.random.Generator,
    ledger: DesignLedger,
) -> list[np.ndarray]:
    """Members whose weighted sum is sparse below ``mL`` and that obey a tail recurrence."""
    p = alpha.size
    mL = m * L
    vs: list[np.ndarray] = []
    for _ in range(m):
        vs.append(_independent_vector(vs, m, rng))
    V = np.column_stack(vs)

    # Zero-sum coefficients: beta_i = alpha_i * c_i with sum(beta) = 0, all nonzero.
    for _ in range(_MAX_RESAMPLE):
        head = rng.choice([-1.0, 1.0], p - 1) * rng.uniform(0.5, 1.5, p - 1)
        last = -float(np.sum(head))
        if abs(last) >= 0.25:
            break
    else:
        raise UnsupportedCaseError("could not draw zero-sum coefficients")
    beta = np.append(head, last)
    cz = beta / alpha

    # The extension basis is a random orthogonal matrix: an ill-conditioned
    # one inflates the recurrence tail and wrecks the composite's conditioning.
    zero_sum_times = [k for k in range(mL) if k % L != L - 1]
    wk = {k: rng.uniform(-1.0, 1.0, m) for k in zero_sum_times}
    W, _ = np.linalg.qr(rng.standard_normal((m, m)))
    for j in range(m):
        wk[j * L] = W[:, j].copy()

    b = np.linalg.solve(W, V[:, m - 1])
    abs_beta = float(np.sum(np.abs(beta)))
    kappa = max(1.0, float(np.sum(np.abs(b))) / (_CONTRACTION * abs_beta))
    for k in wk:
        wk[k] = kappa * wk[k]
    W = kappa * W
    b = b / kappa

    z = np.zeros((p, T0, m))
    for k in range(mL - 1):
        if k % L != L - 1:
            z[:, k] = cz[:, None] * wk[k][None, :]
        else:
            q = (k + 1) // L
            r = rng.uniform(-1.0, 1.0, (p - 1, m)) / alpha[:-1, None]
            z[:-1, k] = r
            z[-1, k] = (V[:, q - 1] - alpha[:-1] @ r) / alpha[-1]

    coeffs = np.sign(beta)[:, None] * b[None, :] / abs_beta  # (p, m)
    for i in range(p):
        z[i, mL - 1] = cz[i] * (W @ coeffs[i])
        lags = [mL - 1 - s * L for s in range(m)]
        for k in range(mL, T0):
            z[i, k] = sum(coeffs[i, s] * z[i, k - lags[s]] for s in range(m))
        Z0 = z[i, 0:mL:L].T
        ledger.extension_bases[i] = Z0.tolist()
        ledger.extension_coefficients[i] = coeffs[i].tolist()
    ledger.zero_sum_coefficients = [float(c) for c in cz]
    for q in range(m):
        ledger.diagonal_times.append((q + 1) * L - 1)
        ledger.diagonal_vectors.append([float(x) for x in V[:, q]])
    return [z[i] for i in range(p)]


def _validate(req: DesignRequest) -> None:
    m, L, lengths, p = req.dim_m, req.order_L, req.lengths, req.p
    if m < 1 or L < 1:
        raise InputError(f"dim_m and order_L must be positive, got m={m}, L={L}")
    if p < 2:
        raise UnsupportedCaseError(
            "at least two members are required: a single member reaching the order would itself be PE"
        )
    alpha = req.alpha
    if alpha.size != p:
        raise InputError(f"{alpha.size} weights for {p} members")
    if np.any(alpha == 0) or not np.all(np.isfinite(alpha)):
        raise InputError("weights must be finite and nonzero")
    for i, T in enumerate(lengths):
        if T < L:
            raise BoundViolationError(f"member {i + 1} has length {T} < L = {L}")
    Tc = (m + 1) * L - 1
    variant = req.mode.variant
    if variant == "mosaic":
        bound = minimal_lengths("mosaic", m, L, p)
        for i, T in enumerate(lengths):
            if T >= Tc:
                raise UnsupportedCaseError(
                    f"member {i + 1} has length {T} >= (m+1)L-1 = {Tc}; multi-member mosaic designs need shorter members"
                )
    elif variant == "cumulative":
        if len(set(lengths)) != 1:
            raise InputError(f"cumulative members must share a length, got {lengths}")
        if L < 2:
            raise UnsupportedCaseError(
                "cumulative design needs L >= 2: with L = 1 an invertible extension basis makes each member PE"
            )
        bound = minimal_lengths("cumulative", m, L, p)
    elif variant == "hybrid":
        pb = req.mode.shared_prefix
        if pb > p:
            raise InputError(f"prefix count {pb} exceeds member count {p}")
        if len(set(lengths[:pb])) != 1:
            raise InputError(f"the first {pb} members must share a length, got {lengths[:pb]}")
        for i in range(pb, p):
            if lengths[i] >= Tc:
                raise UnsupportedCaseError(
                    f"tail member {i + 1} has length {lengths[i]} >= (m+1)L-1 = {Tc}"
                )
        bound = minimal_lengths("hybrid", m, L, p, pb)
        if lengths[0] >= Tc and (pb < 2 or L < 2):
            raise UnsupportedCaseError(
                "a prefix reaching (m+1)L-1 samples needs at least two summed members and L >= 2"
            )
    else:
        raise InputError(f"cannot design for mode {variant!r}")
    if not bound.satisfied(lengths):
        raise BoundViolationError(
            f"lengths {lengths} violate the minimal-length bound {bound.description} (have {bound.lhs(lengths)})"
        )


def design_signals(req: DesignRequest) -> tuple[TrajectoryBundle, DesignLedger]:
    """Build a bundle meeting the request; see the module docstring.

    Returns:
        ``(bundle, ledger)``; the bundle carries the request's weights and,
        for hybrid designs, its shared prefix count.

    Raises:
        BoundViolationError: lengths are too short.
        UnsupportedCaseError: member lengths outside the supported range.
    """
    _validate(req)
    m, L, lengths, p = req.dim_m, req.order_L, req.lengths, req.p
    alpha = req.alpha
    Tc = (m + 1) * L - 1
    variant = req.mode.variant
    ledger = DesignLedger(str(req.mode))
    diag_rng, cum_rng, *free = _streams(req.rng_seed, p + 3)

    if variant == "mosaic":
        members = _virtual_chain(m, L, lengths, diag_rng, free, False, ledger)
        pbar = 0
    elif variant == "cumulative":
        members = _cumulative_members(m, L, lengths[0], alpha, cum_rng, ledger)
        ledger.virtual_lengths = (lengths[0],)
        ledger.offsets, ledger.diagonal_indices = (0,) * p, (L - 1,) * p
        pbar = 0
    else:
        pbar = req.mode.shared_prefix
        T0 = lengths[0]
        chain = (T0,) + lengths[pbar:]
        if T0 >= Tc:
            prefix = _cumulative_members(m, L, T0, alpha[:pbar], cum_rng, ledger)
            tail_ledger = DesignLedger("tail")
            tails = _virtual_chain(m, L, chain, diag_rng, free, False, tail_ledger)[1:]
            ledger.virtual_lengths = tail_ledger.virtual_lengths
            ledger.offsets, ledger.diagonal_indices = tail_ledger.offsets, tail_ledger.diagonal_indices
            ledger.notes.append("prefix reaches full rank on its own; tails are non-PE fillers")
        else:
            virt = _virtual_chain(m, L, chain, diag_rng, free, True, ledger)
            w0 = virt[0]
            tails = virt[1:]
            a = alpha[:pbar]
            prefix = []
            acc = np.zeros_like(w0)
            for i in range(pbar - 1):
                r = cum_rng.uniform(-1.0, 1.0, w0.shape) / a[i]
                prefix.append(r)
                acc += a[i] * r
            prefix.append((w0 - acc) / a[-1])
            ledger.notes.append(
                "prefix shorter than (m+1)L-1: its weighted sum is the first slice of the mosaic chain"
            )
        members = list(prefix) + list(tails)

    trajs = tuple(Trajectory(z, f"z{i + 1}") for i, z in enumerate(members))
    bundle = TrajectoryBundle(trajs, tuple(float(a) for a in alpha), pbar)
    return bundle, ledger


def verify_design(
    bundle: TrajectoryBundle, req: DesignRequest, rel_tol: float | None = None
) -> tuple[bool, CpeReport]:
    """True iff the composite has rank ``mL`` and no member is PE alone."""
    report = check_cpe(bundle, req.order_L, req.mode, AlphaPolicy.fixed(bundle.weights), rel_tol)
    ok = report.verdict and not any(report.per_member_pe)
    return bool(ok), report
