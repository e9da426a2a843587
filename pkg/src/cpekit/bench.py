"""Cost accounting and wall-clock benchmarks for excitation checks.

Checking ``K`` separate trials for ordinary persistency of excitation costs
``Σ_k (mL)² C_k`` flops with unit constants; one mosaic check over all
trajectories costs ``(mL)² C``. The mosaic check wins once ``K`` reaches
``⌈C / c̄⌉`` trials of ``c̄`` columns each.
"""

from __future__ import annotations

import contextlib
import math
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InputError
from .linalg import numeric_rank
from .trajectories import atomic_write_text

try:  # optional: pin BLAS to one thread for comparable timings
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - exercised only without the extra
    threadpool_limits = None

__all__ = [
    "FlopModel",
    "flop_costs",
    "crossover_threshold",
    "BenchScenario",
    "BenchRow",
    "BenchReport",
    "timed_rank_bench",
    "time_callable",
    "single_threaded",
]


def _positive_counts(values, what: str) -> tuple[int, ...]:
    out = []
    for v in values:
        if int(v) != v or int(v) < 1:
            raise InputError(f"{what} must be positive integers, got {v!r}")
        out.append(int(v))
    if not out:
        raise InputError(f"{what} must not be empty")
    return tuple(out)


@dataclass(frozen=True)
class FlopModel:
    """Unit-constant cost model for rank checks.

    Attributes:
        m: signal dimension.
        L: excitation order.
        trial_columns: ``C_k``, Hankel columns of each repeated PE trial.
        mosaic_columns: ``C_i = T_i - L + 1`` for each trajectory of the
            mosaic check.
    """

    m: int
    L: int
    trial_columns: tuple[int, ...]
    mosaic_columns: tuple[int, ...]

    def __post_init__(self):
        if int(self.m) < 1 or int(self.L) < 1:
            raise InputError("m and L must be positive integers")
        object.__setattr__(self, "trial_columns", _positive_counts(self.trial_columns, "trial column counts"))
        object.__setattr__(self, "mosaic_columns", _positive_counts(self.mosaic_columns, "mosaic column counts"))

    @classmethod
    def from_lengths(cls, m: int, L: int, trial_lengths, mosaic_lengths) -> "FlopModel":
        """Build from trajectory lengths, ``C = T - L + 1`` each."""
        return cls(m, L, tuple(T - L + 1 for T in trial_lengths), tuple(T - L + 1 for T in mosaic_lengths))

    @property
    def total_mosaic_columns(self) -> int:
        """``C``."""
        return sum(self.mosaic_columns)

    @property
    def mean_columns(self) -> float:
        """``c̄``, the average trial column count."""
        return sum(self.trial_columns) / len(self.trial_columns)


def flop_costs(model: FlopModel) -> dict[str, int]:
    """Exact integer costs ``{"pe_repeated": Σ (mL)² C_k, "mcpe": (mL)² C}``."""
    rows2 = (model.m * model.L) ** 2
    return {
        "pe_repeated": rows2 * sum(model.trial_columns),
        "mcpe": rows2 * model.total_mosaic_columns,
    }


def crossover_threshold(C: int, c_bar: int) -> int:
    """``⌈C / c̄⌉``: trial count at which repeated checks cost at least one mosaic check."""
    if int(c_bar) != c_bar or c_bar < 1:
        raise InputError(f"c_bar must be a positive integer, got {c_bar!r}")
    if int(C) != C or C < 0:
        raise InputError(f"C must be a nonnegative integer, got {C!r}")
    return -(-int(C) // int(c_bar))


@contextlib.contextmanager
def single_threaded():
    """Limit BLAS/LAPACK to one thread when threadpoolctl is installed."""
    if threadpool_limits is None:
        yield False
        return
    with threadpool_limits(limits=1):
        yield True


@dataclass(frozen=True)
class BenchScenario:
    """A labelled matrix whose numeric rank is timed."""

    mode: str
    matrix: np.ndarray


@dataclass(frozen=True)
class BenchRow:
    mode: str
    rows: int
    cols: int
    median_seconds: float
    samples: tuple[float, ...]


@dataclass(frozen=True)
class BenchReport:
    """Timing table.

    Attributes:
        rows: one entry per scenario, in input order.
        ordering: modes sorted from fastest to slowest median.
        conclusive: every consecutive pair in ``ordering`` differs by at
            least ``min_ratio`` in median time.
        single_threaded: whether BLAS threads were pinned.
    """

    rows: tuple[BenchRow, ...]
    ordering: tuple[str, ...]
    conclusive: bool
    single_threaded: bool

    def median(self, mode: str) -> float:
        for r in self.rows:
            if r.mode == mode:
                return r.median_seconds
        raise KeyError(mode)

    def to_csv(self) -> str:
        lines = ["mode,rows,cols,median_seconds"]
        lines += [f"{r.mode},{r.rows},{r.cols},{r.median_seconds!r}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"mode": r.mode, "rows": r.rows, "cols": r.cols, "median_seconds": r.median_seconds}
                for r in self.rows
            ],
            "ordering": list(self.ordering),
            "conclusive": self.conclusive,
            "single_threaded": self.single_threaded,
        }


def time_callable(fn: Callable[[], object], repeats: int = 7, warmups: int = 2) -> list[float]:
    """Wall-clock samples of ``fn()`` after discarded warm-up calls."""
    if repeats < 1 or warmups < 0:
        raise InputError("repeats must be >= 1 and warmups >= 0")
    for _ in range(warmups):
        fn()
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return out


def _build_report(labelled: Sequence[tuple[str, int, int, list[float]]], min_ratio: float, pinned: bool) -> BenchReport:
    rows = tuple(BenchRow(mode, r, c, statistics.median(s), tuple(s)) for mode, r, c, s in labelled)
    ranked = sorted(rows, key=lambda r: r.median_seconds)
    conclusive = all(
        b.median_seconds >= min_ratio * max(a.median_seconds, 1e-12) for a, b in zip(ranked, ranked[1:])
    )
    return BenchReport(rows, tuple(r.mode for r in ranked), conclusive, pinned)


def timed_rank_bench(
    scenarios: Sequence[BenchScenario],
    repeats: int = 7,
    warmups: int = 2,
    min_ratio: float = 1.2,
) -> BenchReport:
    """Median numeric-rank time per scenario, single-threaded when possible.

    Args:
        scenarios: matrices to time, typically one composite per mode built
            from the same data.
        repeats: timed runs per scenario.
        warmups: discarded runs per scenario.
        min_ratio: factor separating consecutive medians for the ordering to
            count as conclusive.
    """
    if not scenarios:
        raise InputError("no scenarios given")
    if min_ratio < 1 or not math.isfinite(min_ratio):
        raise InputError("min_ratio must be a finite number >= 1")
    labelled = []
    with single_threaded() as pinned:
        for sc in scenarios:
            M = np.asarray(sc.matrix, dtype=float)
            samples = time_callable(lambda M=M: numeric_rank(M), repeats, warmups)
            labelled.append((sc.mode, M.shape[0], M.shape[1], samples))
    return _build_report(labelled, min_ratio, pinned)
