"""Block Hankel matrices and their mosaic, cumulative and hybrid compositions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InputError, InsufficientLengthError
from .trajectories import Trajectory, TrajectoryBundle, atomic_write_text

__all__ = [
    "CompositionMode",
    "HankelMatrix",
    "hankel_matrix",
    "compose",
    "build_hankel",
    "build_composite",
    "cumulative_selector",
    "hybrid_selector",
    "save_matrix_csv",
]

_VARIANTS = ("single", "mosaic", "cumulative", "hybrid")


@dataclass(frozen=True)
class CompositionMode:
    """How per-trajectory Hankel blocks are combined.

    Attributes:
        variant: ``"single"``, ``"mosaic"``, ``"cumulative"`` or ``"hybrid"``.
        shared_prefix: for hybrid, the number ``p̄`` of leading members that
            are summed; the remaining members are placed side by side.
    """

    variant: str
    shared_prefix: int | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise InputError(f"unknown composition {self.variant!r}; choose from {_VARIANTS}")
        if self.variant == "hybrid":
            if self.shared_prefix is None or int(self.shared_prefix) < 1:
                raise InputError("hybrid composition needs a shared prefix count >= 1")
            object.__setattr__(self, "shared_prefix", int(self.shared_prefix))
        elif self.shared_prefix is not None:
            raise InputError(f"{self.variant} composition takes no shared prefix")

    @classmethod
    def single(cls) -> "CompositionMode":
        return cls("single")

    @classmethod
    def mosaic(cls) -> "CompositionMode":
        return cls("mosaic")

    @classmethod
    def cumulative(cls) -> "CompositionMode":
        return cls("cumulative")

    @classmethod
    def hybrid(cls, p_bar: int) -> "CompositionMode":
        return cls("hybrid", p_bar)

    @classmethod
    def parse(cls, text: str, p_bar: int | None = None) -> "CompositionMode":
        """Parse ``"mosaic"``, ``"cumulative"``, ``"single"`` or ``"hybrid:3"``."""
        text = text.strip().lower()
        if text.startswith("hybrid"):
            _, _, tail = text.partition(":")
            count = int(tail) if tail else p_bar
            if count is None:
                raise InputError("hybrid mode needs a shared prefix count, e.g. 'hybrid:3'")
            return cls.hybrid(count)
        return cls(text)

    def __str__(self) -> str:
        return f"hybrid:{self.shared_prefix}" if self.variant == "hybrid" else self.variant


@dataclass(frozen=True)
class HankelMatrix:
    """A (possibly composite) block Hankel matrix with provenance.

    Attributes:
        matrix: array with ``dim_m * depth_L`` rows.
        depth_L: Hankel depth.
        mode: composition used.
        column_blocks: ``(member indices, column count)`` per block, in
            column order. A cumulative block lists all summed members.
        weights_used: weights applied, one per member.
    """

    matrix: np.ndarray
    depth_L: int
    mode: CompositionMode
    column_blocks: tuple[tuple[tuple[int, ...], int], ...]
    weights_used: tuple[float, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def dim_m(self) -> int:
        return self.matrix.shape[0] // self.depth_L

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for _, cols in self.column_blocks:
            out.append(slice(start, start + cols))
            start += cols
        return out


def hankel_matrix(samples, L: int) -> np.ndarray:
    """Depth-``L`` block Hankel matrix of time-major ``samples``.

    Column ``j`` stacks ``z(j), ..., z(j+L-1)``.

    Args:
        samples: array ``(T, m)`` (1-D means ``m = 1``).
        L: depth, ``1 <= L <= T``.

    Returns:
        Array of shape ``(m*L, T-L+1)``.
    """
    z = np.asarray(samples, dtype=float)
    if z.ndim == 1:
        z = z.reshape(-1, 1)
    T, m = z.shape
    if L < 1:
        raise InputError(f"depth L must be >= 1, got {L}")
    if T < L:
        raise InsufficientLengthError(f"trajectory of length {T} is shorter than depth {L}")
    cols = T - L + 1
    win = np.lib.stride_tricks.sliding_window_view(z, L, axis=0)  # (cols, m, L)
    return np.ascontiguousarray(win.transpose(2, 1, 0).reshape(m * L, cols))


def _check_lengths(lengths: Sequence[int], L: int, mode: CompositionMode) -> None:
    for i, T in enumerate(lengths):
        if T < L:
            raise InsufficientLengthError(
                f"{mode.variant} composition: trajectory {i + 1} has length {T} < depth {L}"
            )
    if mode.variant == "single" and len(lengths) != 1:
        raise InputError(f"single composition needs one trajectory, got {len(lengths)}")
    if mode.variant == "cumulative":
        T0 = lengths[0]
        for i, T in enumerate(lengths):
            if T != T0:
                raise InputError(
                    f"cumulative composition: trajectory {i + 1} has length {T}, expected {T0}"
                )
    if mode.variant == "hybrid":
        pbar = mode.shared_prefix
        if pbar > len(lengths):
            raise InputError(f"hybrid prefix {pbar} exceeds member count {len(lengths)}")
        T0 = lengths[0]
        for i in range(pbar):
            if lengths[i] != T0:
                raise InputError(
                    f"hybrid composition: prefix trajectory {i + 1} has length {lengths[i]}, expected {T0}"
                )


def compose(
    signals: Sequence[np.ndarray],
    L: int,
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
) -> tuple[np.ndarray, tuple[tuple[tuple[int, ...], int], ...]]:
    """Compose raw time-major signals; returns ``(matrix, column_blocks)``."""
    sigs = [np.asarray(s, dtype=float).reshape(len(s), -1) for s in signals]
    if not sigs:
        raise InputError("nothing to compose")
    if len({s.shape[1] for s in sigs}) != 1:
        raise DimensionError("signals disagree on dimension")
    p = len(sigs)
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float)
    if w.size != p:
        raise InputError(f"{w.size} weights for {p} signals")
    if np.any(w == 0):
        raise InputError("weights must be nonzero")
    _check_lengths([s.shape[0] for s in sigs], L, mode)
    H = [hankel_matrix(s, L) for s in sigs]
    if mode.variant in ("single", "mosaic"):
        blocks = tuple(((i,), h.shape[1]) for i, h in enumerate(H))
        return np.hstack([w[i] * H[i] for i in range(p)]), blocks
    if mode.variant == "cumulative":
        total = sum(w[i] * H[i] for i in range(p))
        return total, ((tuple(range(p)), H[0].shape[1]),)
    pbar = mode.shared_prefix
    prefix = sum(w[i] * H[i] for i in range(pbar))
    parts = [prefix] + [w[i] * H[i] for i in range(pbar, p)]
    blocks = ((tuple(range(pbar)), prefix.shape[1]),) + tuple(
        ((i,), H[i].shape[1]) for i in range(pbar, p)
    )
    return np.hstack(parts), blocks


def build_hankel(traj: Trajectory, L: int) -> HankelMatrix:
    """Depth-``L`` Hankel matrix of a single trajectory."""
    if not isinstance(traj, Trajectory):
        traj = Trajectory(traj)
    return HankelMatrix(
        hankel_matrix(traj.samples, L),
        L,
        CompositionMode.single(),
        (((0,), traj.length - L + 1),),
        (1.0,),
    )


def build_composite(
    bundle: TrajectoryBundle,
    L: int,
    mode: CompositionMode,
    weights: Sequence[float] | None = None,
) -> HankelMatrix:
    """Weighted composite Hankel matrix of a bundle.

    Args:
        bundle: the trajectories.
        L: Hankel depth.
        mode: mosaic places ``α_i H_L(z_i)`` side by side, cumulative sums
            them, hybrid sums the first ``p̄`` and places the rest beside.
        weights: overrides ``bundle.weights``.
    """
    w = tuple(bundle.weights if weights is None else weights)
    mat, blocks = compose([m.samples for m in bundle.members], L, mode, w)
    return HankelMatrix(mat, L, mode, blocks, tuple(float(v) for v in w))


def cumulative_selector(p: int, cols: int) -> np.ndarray:
    """``1_p ⊗ I_cols``: maps a mosaic of equal blocks to their sum."""
    return np.kron(np.ones((p, 1)), np.eye(cols))


def hybrid_selector(p_bar: int, prefix_cols: int, tail_cols: int) -> np.ndarray:
    """Block selector ``diag(1_p̄ ⊗ I_prefix_cols, I_tail_cols)``.

    Right-multiplying a mosaic composite by it gives the hybrid composite.
    """
    top = np.kron(np.ones((p_bar, 1)), np.eye(prefix_cols))
    S = np.zeros((p_bar * prefix_cols + tail_cols, prefix_cols + tail_cols))
    S[: p_bar * prefix_cols, :prefix_cols] = top
    S[p_bar * prefix_cols:, prefix_cols:] = np.eye(tail_cols)
    return S


def save_matrix_csv(matrix, path) -> None:
    """Dump a matrix row-major as CSV without a header."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(repr(float(v)) for v in row) for row in M]
    atomic_write_text(path, "\n".join(lines) + "\n")
