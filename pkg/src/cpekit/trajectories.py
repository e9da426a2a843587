"""Signals, bundles, LTI systems, graphs, simulation and file I/O.

Samples are stored time-major: a trajectory of ``T`` samples in ``R^m`` is
an array of shape ``(T, m)``, matching one CSV row per time step.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, InputError, ParseError
from .linalg import numeric_rank

__all__ = [
    "Trajectory",
    "TrajectoryBundle",
    "LtiSystem",
    "IoRecord",
    "GraphTopology",
    "builtin_system",
    "default_topology",
    "simulate_lti",
    "save_bundle",
    "load_bundle",
    "save_records",
    "load_records",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_record_csv",
    "read_record_csv",
    "atomic_write_text",
    "make_rng",
]


def make_rng(seed: int | None) -> np.random.Generator:
    """Seeded PCG64 generator used everywhere in the package."""
    return np.random.Generator(np.random.PCG64(seed))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Trajectory:
    """A finite sampled signal ``z(0), ..., z(T-1)`` in ``R^m``.

    Attributes:
        samples: array of shape ``(T, m)``; a 1-D input is read as ``m = 1``.
        label: free-form name used in files and reports.
    """

    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DimensionError(f"samples must be 1-D or 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"trajectory {self.label!r} is empty")
        if not np.all(np.isfinite(arr)):
            raise InputError(f"trajectory {self.label!r} has non-finite samples")
        object.__setattr__(self, "samples", _freeze(arr))

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    @property
    def dim_m(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.length

    def window(self, start: int, stop: int) -> np.ndarray:
        """Samples ``z(start), ..., z(stop-1)``."""
        return self.samples[start:stop]


@dataclass(frozen=True)
class TrajectoryBundle:
    """An ordered family of trajectories with nonzero composition weights.

    Attributes:
        members: the trajectories, all with the same dimension.
        weights: one nonzero weight per member (defaults to ones).
        shared_prefix_count: number of leading members summed in hybrid
            composition; they must share a length when positive.
    """

    members: tuple[Trajectory, ...]
    weights: tuple[float, ...] = ()
    shared_prefix_count: int = 0

    def __post_init__(self):
        members = tuple(
            m if isinstance(m, Trajectory) else Trajectory(m, f"z{i + 1}")
            for i, m in enumerate(self.members)
        )
        if not members:
            raise InputError("bundle needs at least one member")
        dims = {m.dim_m for m in members}
        if len(dims) != 1:
            raise DimensionError(f"members disagree on dimension: {sorted(dims)}")
        weights = tuple(float(w) for w in self.weights) or (1.0,) * len(members)
        if len(weights) != len(members):
            raise InputError(f"{len(weights)} weights for {len(members)} members")
        for i, w in enumerate(weights):
            if w == 0.0:
                raise InputError(f"zero weight for member {i + 1}")
            if not np.isfinite(w):
                raise InputError(f"non-finite weight for member {i + 1}")
        pbar = int(self.shared_prefix_count)
        if not 0 <= pbar <= len(members):
            raise InputError(f"shared_prefix_count {pbar} outside [0, {len(members)}]")
        if pbar > 0 and len({m.length for m in members[:pbar]}) != 1:
            raise InputError("shared-prefix members must have equal length")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "shared_prefix_count", pbar)

    @property
    def p(self) -> int:
        return len(self.members)

    @property
    def dim_m(self) -> int:
        return self.members[0].dim_m

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(m.length for m in self.members)

    def with_weights(self, weights: Sequence[float]) -> "TrajectoryBundle":
        return TrajectoryBundle(self.members, tuple(weights), self.shared_prefix_count)

    def with_prefix(self, p_bar: int) -> "TrajectoryBundle":
        return TrajectoryBundle(self.members, self.weights, p_bar)


@dataclass(frozen=True)
class LtiSystem:
    """Discrete-time system ``x(k+1) = A x(k) + B u(k)``."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        B = np.asarray(self.b_matrix, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise InputError("system matrices must be finite")
        object.__setattr__(self, "a_matrix", _freeze(A))
        object.__setattr__(self, "b_matrix", _freeze(B))

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.b_matrix.shape[1]

    @property
    def theta(self) -> np.ndarray:
        """Row-wise vectorization of ``[A B]``."""
        return np.hstack([self.a_matrix, self.b_matrix]).ravel()

    def controllability_matrix(self) -> np.ndarray:
        blocks = [self.b_matrix]
        for _ in range(self.n - 1):
            blocks.append(self.a_matrix @ blocks[-1])
        return np.hstack(blocks)

    def is_controllable(self) -> bool:
        return numeric_rank(self.controllability_matrix()).numeric_rank == self.n


_BUILTINS = {
    "batch_reactor": (
        [
            [1.178, 0.001, 0.511, -0.403],
            [-0.051, 0.661, -0.011, 0.061],
            [0.076, 0.335, 0.560, 0.382],
            [0.0, 0.335, 0.089, 0.849],
        ],
        [
            [0.004, -0.087],
            [0.467, 0.001],
            [0.213, -0.235],
            [0.213, -0.016],
        ],
    ),
    "voltage_converter": (
        [[1.0000, -0.0500], [0.0004, 0.9998]],
        [[0.0125], [0.0000]],
    ),
}


def builtin_system(name: str) -> LtiSystem:
    """Return one of the benchmark systems.

    Args:
        name: ``"batch_reactor"`` (n=4, m=2) or ``"voltage_converter"`` (n=2, m=1).
    """
    try:
        A, B = _BUILTINS[name]
    except KeyError:
        raise InputError(
            f"unknown system {name!r}; choose from {sorted(_BUILTINS)}"
        ) from None
    return LtiSystem(np.array(A), np.array(B), name)


@dataclass(frozen=True)
class IoRecord:
    """Input/state data from one rollout: ``u(0..T-1)`` and ``x(0..T)``.

    The window helpers return data matrices with one column per time step.
    """

    input_traj: Trajectory
    state_traj: Trajectory

    def __post_init__(self):
        u = self.input_traj if isinstance(self.input_traj, Trajectory) else Trajectory(self.input_traj, "u")
        x = self.state_traj if isinstance(self.state_traj, Trajectory) else Trajectory(self.state_traj, "x")
        if x.length != u.length + 1:
            raise DimensionError(
                f"state length {x.length} must equal input length {u.length} + 1"
            )
        object.__setattr__(self, "input_traj", u)
        object.__setattr__(self, "state_traj", x)

    @property
    def n(self) -> int:
        return self.state_traj.dim_m

    @property
    def m(self) -> int:
        return self.input_traj.dim_m

    @property
    def system_dims(self) -> tuple[int, int]:
        return self.n, self.m

    @property
    def length(self) -> int:
        return self.input_traj.length

    @property
    def u(self) -> np.ndarray:
        """``u(0..T-1)`` as shape ``(T, m)``."""
        return self.input_traj.samples

    @property
    def x(self) -> np.ndarray:
        """``x(0..T)`` as shape ``(T+1, n)``."""
        return self.state_traj.samples

    @property
    def x_minus(self) -> np.ndarray:
        """``[x(0) ... x(T-1)]`` with shape ``(n, T)``."""
        return self.x[:-1].T

    @property
    def x_plus(self) -> np.ndarray:
        """``[x(1) ... x(T)]`` with shape ``(n, T)``."""
        return self.x[1:].T

    @property
    def u_data(self) -> np.ndarray:
        """``[u(0) ... u(T-1)]`` with shape ``(m, T)``."""
        return self.u.T

    def residual(self, sys: LtiSystem) -> float:
        """Largest entry of ``X+ - A X- - B U``."""
        R = self.x_plus - sys.a_matrix @ self.x_minus - sys.b_matrix @ self.u_data
        return float(np.max(np.abs(R))) if R.size else 0.0


def simulate_lti(
    sys: LtiSystem,
    x0,
    inputs,
    noise_std: float = 0.0,
    rng_seed: int | None = None,
    *,
    rng: np.random.Generator | None = None,
) -> IoRecord:
    """Roll out ``x(k+1) = A x(k) + B u(k) + w(k)``.

    Args:
        sys: the system.
        x0: initial state of length ``n``.
        inputs: a :class:`Trajectory` or array ``(T, m)`` of inputs.
        noise_std: standard deviation of the i.i.d. Gaussian process noise.
        rng_seed: seed for the noise generator (PCG64).
        rng: explicit generator, overrides ``rng_seed``.

    Returns:
        The recorded :class:`IoRecord`.
    """
    u = inputs.samples if isinstance(inputs, Trajectory) else np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.shape[1] != sys.m:
        raise DimensionError(f"inputs have dimension {u.shape[1]}, system expects {sys.m}")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n:
        raise DimensionError(f"x0 has length {x0.size}, system expects {sys.n}")
    if noise_std < 0:
        raise InputError("noise_std must be non-negative")
    T = u.shape[0]
    if noise_std > 0:
        gen = rng if rng is not None else make_rng(rng_seed)
        w = gen.normal(0.0, noise_std, size=(T, sys.n))
    else:
        w = np.zeros((T, sys.n))
    x = np.empty((T + 1, sys.n))
    x[0] = x0
    A, B = sys.a_matrix, sys.b_matrix
    for k in range(T):
        x[k + 1] = A @ x[k] + B @ u[k] + w[k]
    return IoRecord(Trajectory(u, "u"), Trajectory(x, "x"))


def simulate_feedback(
    sys: LtiSystem,
    x0,
    policy: Callable[[int, np.ndarray], np.ndarray],
    steps: int,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> IoRecord:
    """Roll out with inputs computed online as ``u(k) = policy(k, x(k))``."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n:
        raise DimensionError(f"x0 has length {x0.size}, system expects {sys.n}")
    gen = rng if rng is not None else make_rng(None)
    x = np.empty((steps + 1, sys.n))
    u = np.empty((steps, sys.m))
    x[0] = x0
    for k in range(steps):
        u[k] = np.asarray(policy(k, x[k]), dtype=float).ravel()
        w = gen.normal(0.0, noise_std, sys.n) if noise_std > 0 else 0.0
        x[k + 1] = sys.a_matrix @ x[k] + sys.b_matrix @ u[k] + w
    return IoRecord(Trajectory(u, "u"), Trajectory(x, "x"))


@dataclass(frozen=True)
class GraphTopology:
    """Undirected communication graph on nodes ``0..N-1``."""

    node_count: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        N = int(self.node_count)
        if N < 1:
            raise InputError("graph needs at least one node")
        clean = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise InputError(f"self loop at node {i}")
            if not (0 <= i < N and 0 <= j < N):
                raise InputError(f"edge {(i, j)} outside node range 0..{N - 1}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "node_count", N)
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "GraphTopology":
        return cls(node_count, frozenset(tuple(e) for e in edges))

    @classmethod
    def path(cls, N: int) -> "GraphTopology":
        return cls.from_edges(N, [(i, i + 1) for i in range(N - 1)])

    @classmethod
    def ring(cls, N: int) -> "GraphTopology":
        edges = [(i, (i + 1) % N) for i in range(N)] if N > 2 else [(i, i + 1) for i in range(N - 1)]
        return cls.from_edges(N, edges)

    @classmethod
    def complete(cls, N: int) -> "GraphTopology":
        return cls.from_edges(N, [(i, j) for i in range(N) for j in range(i + 1, N)])

    @property
    def laplacian(self) -> np.ndarray:
        Lap = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            Lap[i, j] -= 1.0
            Lap[j, i] -= 1.0
            Lap[i, i] += 1.0
            Lap[j, j] += 1.0
        return Lap

    def neighbors(self, i: int) -> list[int]:
        return sorted({b for a, b in self.edges if a == i} | {a for a, b in self.edges if b == i})

    @property
    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.laplacian)[-1])

    @property
    def is_connected(self) -> bool:
        if self.node_count == 1:
            return True
        ev = np.linalg.eigvalsh(self.laplacian)
        return bool(ev[1] > 1e-9 * max(1.0, ev[-1]))


def default_topology() -> GraphTopology:
    """Five agents on a ring; ``lambda_max`` of its Laplacian is about 3.618."""
    return GraphTopology.ring(5)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return repr(float(v))


def _parse_float(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{where}: cannot parse {text!r} as a number") from None
    if not np.isfinite(v):
        raise ParseError(f"{where}: non-finite value {text!r}")
    return v


def trajectory_csv_text(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k"] + [f"z{j + 1}" for j in range(traj.dim_m)])
    for k, row in enumerate(traj.samples):
        w.writerow([k] + [_fmt(v) for v in row])
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``k,z1,...,zm`` rows."""
    atomic_write_text(path, trajectory_csv_text(traj))


def read_trajectory_csv(path, label: str = "") -> Trajectory:
    """Read a trajectory CSV written by :func:`write_trajectory_csv`."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "k" or len(header) < 2:
        raise ParseError(f"{path}: expected header 'k,z1,...', got {','.join(header)!r}")
    width = len(header)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        data.append([_parse_float(v, f"{path}:{lineno}") for v in row[1:]])
    if not data:
        raise ParseError(f"{path}: no samples")
    return Trajectory(np.array(data), label or path.stem)


def record_csv_text(rec: IoRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k"] + [f"u{j + 1}" for j in range(rec.m)] + [f"x{j + 1}" for j in range(rec.n)])
    T = rec.length
    for k in range(T + 1):
        us = [_fmt(v) for v in rec.u[k]] if k < T else [""] * rec.m
        w.writerow([k] + us + [_fmt(v) for v in rec.x[k]])
    return buf.getvalue()


def write_record_csv(rec: IoRecord, path) -> None:
    """Write ``k,u1..um,x1..xn`` rows; the final row has empty inputs."""
    atomic_write_text(path, record_csv_text(rec))


def read_record_csv(path) -> IoRecord:
    """Read an input/state record CSV."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 3:
        raise ParseError(f"{path}: need a header and at least two rows")
    header = [h.strip() for h in rows[0]]
    m = sum(1 for h in header if h.startswith("u"))
    n = sum(1 for h in header if h.startswith("x"))
    if header[0] != "k" or m < 1 or n < 1 or len(header) != 1 + m + n:
        raise ParseError(f"{path}: expected header 'k,u1..um,x1..xn', got {','.join(header)!r}")
    us, xs = [], []
    for idx, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{idx}: expected {len(header)} fields, got {len(row)}")
        last = idx == len(rows)
        ucells = row[1:1 + m]
        if last and all(c.strip() == "" for c in ucells):
            pass
        elif last:
            raise ParseError(f"{path}:{idx}: final row must leave inputs empty")
        else:
            us.append([_parse_float(c, f"{path}:{idx}") for c in ucells])
        xs.append([_parse_float(c, f"{path}:{idx}") for c in row[1 + m:]])
    return IoRecord(Trajectory(np.array(us), "u"), Trajectory(np.array(xs), "x"))


def _manifest_members(files, weights, labels):
    return [
        {"file": f, "weight": float(w), "label": lab}
        for f, w, lab in zip(files, weights, labels)
    ]


def save_bundle(bundle: TrajectoryBundle, directory, manifest_name: str = "manifest.json") -> Path:
    """Save member CSVs and a JSON manifest; returns the manifest path."""
    directory = Path(directory)
    files, labels = [], []
    for i, member in enumerate(bundle.members):
        fname = f"member_{i + 1:03d}.csv"
        write_trajectory_csv(member, directory / fname)
        files.append(fname)
        labels.append(member.label or f"z{i + 1}")
    manifest = {
        "dim_m": bundle.dim_m,
        "shared_prefix_count": bundle.shared_prefix_count,
        "members": _manifest_members(files, bundle.weights, labels),
    }
    out = directory / manifest_name
    atomic_write_text(out, json.dumps(manifest, indent=2) + "\n")
    return out


def _read_manifest(manifest_path) -> tuple[Path, dict]:
    manifest_path = Path(manifest_path)
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict) or not isinstance(data.get("members"), list) or not data["members"]:
        raise ParseError(f"{manifest_path}: manifest needs a non-empty 'members' list")
    for i, entry in enumerate(data["members"]):
        if not isinstance(entry, dict) or "file" not in entry:
            raise ParseError(f"{manifest_path}: member {i + 1} lacks a 'file' field")
        w = entry.get("weight", 1.0)
        if not isinstance(w, (int, float)) or isinstance(w, bool) or not np.isfinite(w):
            raise ParseError(f"{manifest_path}: member {i + 1} has an invalid weight {w!r}")
        if w == 0:
            raise ParseError(f"{manifest_path}: zero weight for member {i + 1}")
    return manifest_path.parent, data


def load_bundle(manifest_path) -> TrajectoryBundle:
    """Load a bundle from its JSON manifest."""
    base, data = _read_manifest(manifest_path)
    members, weights = [], []
    for entry in data["members"]:
        traj = read_trajectory_csv(base / entry["file"], entry.get("label", ""))
        members.append(traj)
        weights.append(float(entry.get("weight", 1.0)))
    dim = data.get("dim_m")
    if dim is not None and any(t.dim_m != dim for t in members):
        raise ParseError(f"{manifest_path}: member dimension disagrees with dim_m={dim}")
    try:
        return TrajectoryBundle(tuple(members), tuple(weights), int(data.get("shared_prefix_count", 0)))
    except InputError as exc:
        raise ParseError(f"{manifest_path}: {exc}") from None


def save_records(
    records: Sequence[IoRecord],
    directory,
    weights: Sequence[float] | None = None,
    shared_prefix_count: int = 0,
    manifest_name: str = "records.json",
) -> Path:
    """Save input/state records with a manifest mirroring the bundle format."""
    directory = Path(directory)
    weights = list(weights) if weights is not None else [1.0] * len(records)
    files = []
    for i, rec in enumerate(records):
        fname = f"record_{i + 1:03d}.csv"
        write_record_csv(rec, directory / fname)
        files.append(fname)
    manifest = {
        "n": records[0].n,
        "m": records[0].m,
        "dim_m": records[0].m,
        "shared_prefix_count": shared_prefix_count,
        "members": _manifest_members(files, weights, [f"r{i + 1}" for i in range(len(records))]),
    }
    out = directory / manifest_name
    atomic_write_text(out, json.dumps(manifest, indent=2) + "\n")
    return out


def load_records(manifest_path) -> tuple[list[IoRecord], tuple[float, ...], int]:
    """Load records; returns ``(records, weights, shared_prefix_count)``."""
    base, data = _read_manifest(manifest_path)
    records = [read_record_csv(base / e["file"]) for e in data["members"]]
    dims = {r.system_dims for r in records}
    if len(dims) != 1:
        raise ParseError(f"{manifest_path}: records disagree on (n, m): {sorted(dims)}")
    weights = tuple(float(e.get("weight", 1.0)) for e in data["members"])
    return records, weights, int(data.get("shared_prefix_count", 0))
