"""Network and session state: connectivity, reception status, importance and deadlines.

Devices and packets are indexed from 0 internally. Text output (graph dumps,
transcripts) uses the 1-based ``R_k`` / ``P_l`` numbering.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnreachableDevice


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConnectivityMatrix:
    """Symmetric matrix of short-range packet reception probabilities.

    ``y[i, k] = 1 - eps[i, k]`` for directly connected devices, 0 otherwise,
    and 1 on the diagonal.
    """

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 2 or y.shape[0] != y.shape[1] or y.shape[0] == 0:
            raise ConfigError(f"connectivity matrix must be square and non-empty, got shape {y.shape}")
        if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(y > 1):
            raise ConfigError("connectivity entries must lie in [0, 1]")
        m = y.shape[0]
        for i in range(m):
            if y[i, i] != 1.0:
                raise ConfigError(f"diagonal entry y[{i + 1},{i + 1}] must be 1, got {y[i, i]}")
            for k in range(i + 1, m):
                if y[i, k] != y[k, i]:
                    raise ConfigError(
                        f"connectivity matrix is not symmetric at pair (R{i + 1}, R{k + 1}): "
                        f"{y[i, k]} != {y[k, i]}"
                    )
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "_key", y.tobytes())

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def eps(self) -> np.ndarray:
        """Erasure probabilities; only meaningful where a link exists."""
        return 1.0 - self.y

    @property
    def links(self) -> np.ndarray:
        """Boolean coverage relation, diagonal included."""
        return self.y != 0

    def key(self) -> bytes:
        return self._key

    def __eq__(self, other):
        return isinstance(other, ConnectivityMatrix) and self._key == other._key and self.m == other.m

    def __hash__(self):
        return hash((self.m, self._key))

    def to_json(self) -> dict:
        return {"m": self.m, "y": self.y.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> ConnectivityMatrix:
        y = np.asarray(data["y"], dtype=float)
        if "m" in data and y.shape[0] != data["m"]:
            raise ConfigError(f"m = {data['m']} does not match {y.shape[0]} rows")
        return cls(y)


@dataclass(frozen=True, eq=False)
class StatusMatrix:
    """Global status matrix: ``f[k, l] == 1`` iff packet l is missing at device k."""

    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f)
        if f.ndim != 2:
            raise ConfigError(f"status matrix must be 2-D, got shape {f.shape}")
        if not np.all((f == 0) | (f == 1)):
            raise ConfigError("status matrix entries must be 0 or 1")
        f = f.astype(np.uint8)
        held = (f == 0).any(axis=0)
        if not held.all():
            lost = [int(l) + 1 for l in np.flatnonzero(~held)]
            raise ConfigError(f"packets {lost} are not held by any device")
        object.__setattr__(self, "f", _frozen(f))
        object.__setattr__(self, "_key", f.tobytes())

    @property
    def m(self) -> int:
        return self.f.shape[0]

    @property
    def n(self) -> int:
        return self.f.shape[1]

    @property
    def wants_counts(self) -> np.ndarray:
        return self.f.sum(axis=1).astype(int)

    def complete(self) -> bool:
        return not self.f.any()

    def cleared(self, entries) -> StatusMatrix:
        """Copy with the given (device, packet) entries marked as received."""
        f = self.f.copy()
        for k, l in entries:
            f[k, l] = 0
        return StatusMatrix(f)

    def key(self) -> bytes:
        return self._key

    def __eq__(self, other):
        return isinstance(other, StatusMatrix) and self.f.shape == other.f.shape and self._key == other._key

    def __hash__(self):
        return hash((self.f.shape, self._key))

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "f": self.f.astype(int).tolist()}

    @classmethod
    def from_json(cls, data: dict) -> StatusMatrix:
        f = np.asarray(data["f"])
        if ("m" in data and f.shape[0] != data["m"]) or ("n" in data and f.ndim == 2 and f.shape[1] != data["n"]):
            raise ConfigError(f"declared size ({data.get('m')}, {data.get('n')}) does not match {f.shape}")
        return cls(f)


@dataclass(frozen=True)
class SessionClock:
    theta: int
    t: int = 1

    def __post_init__(self):
        if self.theta < 1 or not 1 <= self.t <= self.theta:
            raise ConfigError(f"invalid clock: t = {self.t}, theta = {self.theta}")

    @property
    def remaining(self) -> int:
        """Q, the number of slots left including the current one."""
        return self.theta - self.t + 1

    @classmethod
    def with_remaining(cls, q: int) -> SessionClock:
        return cls(theta=q, t=1)


@dataclass(frozen=True, eq=False)
class ImportanceMatrix:
    """Per (device, packet) distortion weights."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=float)
        if d.ndim != 2:
            raise ConfigError(f"importance matrix must be 2-D, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ConfigError("importance weights must be finite and nonnegative")
        object.__setattr__(self, "delta", _frozen(d))
        object.__setattr__(self, "_key", d.tobytes())

    @classmethod
    def uniform(cls, m: int, per_packet) -> ImportanceMatrix:
        return cls(np.tile(np.asarray(per_packet, dtype=float), (m, 1)))

    @classmethod
    def ones(cls, m: int, n: int) -> ImportanceMatrix:
        return cls(np.ones((m, n)))

    def key(self) -> bytes:
        return self._key

    def __eq__(self, other):
        return isinstance(other, ImportanceMatrix) and self.delta.shape == other.delta.shape and self._key == other._key

    def __hash__(self):
        return hash((self.delta.shape, self._key))

    def to_json(self) -> dict:
        return {"m": self.delta.shape[0], "n": self.delta.shape[1], "delta": self.delta.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> ImportanceMatrix:
        return cls(np.asarray(data["delta"], dtype=float))


def _check_device(k: int, m: int) -> None:
    if not 0 <= k < m:
        raise IndexError(f"device index {k} out of range for {m} devices")


def has_set(f: StatusMatrix, k: int) -> frozenset[int]:
    _check_device(k, f.m)
    return frozenset(int(l) for l in np.flatnonzero(f.f[k] == 0))


def wants_set(f: StatusMatrix, k: int) -> frozenset[int]:
    _check_device(k, f.m)
    return frozenset(int(l) for l in np.flatnonzero(f.f[k]))


def coverage_zone(y: ConnectivityMatrix, i: int) -> frozenset[int]:
    """Devices directly reachable from ``i``, including ``i`` itself."""
    _check_device(i, y.m)
    return frozenset(int(k) for k in np.flatnonzero(y.y[i]))


def critical_set(f: StatusMatrix, clock: SessionClock) -> frozenset[int]:
    w = f.wants_counts
    q = clock.remaining
    return frozenset(int(k) for k in np.flatnonzero((w >= q) & (w > 0)))


def non_critical_set(f: StatusMatrix, clock: SessionClock) -> frozenset[int]:
    w = f.wants_counts
    q = clock.remaining
    return frozenset(int(k) for k in np.flatnonzero((w < q) & (w > 0)))


def individual_distortion(f: StatusMatrix, delta: ImportanceMatrix, k: int) -> float:
    _check_device(k, f.m)
    return float(np.dot(f.f[k], delta.delta[k]))


def distortions(f: StatusMatrix, delta: ImportanceMatrix) -> np.ndarray:
    """Vector of per-device additive distortions."""
    return (f.f * delta.delta).sum(axis=1)


def average_erasure(y: ConnectivityMatrix, k: int) -> float:
    """Mean erasure probability over the direct neighbours of ``k``."""
    _check_device(k, y.m)
    row = y.y[:, k].copy()
    row[k] = 0.0
    nbrs = np.flatnonzero(row)
    if nbrs.size == 0:
        raise UnreachableDevice(f"device R{k + 1} has no direct neighbours")
    return float(np.mean(1.0 - row[nbrs]))


def connectivity_index(y: ConnectivityMatrix) -> float:
    """Sum of all SCM entries (unit diagonal included) over M^2.

    A full mesh whose links all have reception probability p scores
    ``p + (1 - p) / M``, slightly above p.
    """
    return float(y.y.sum() / y.m**2)


def offdiagonal_connectivity(y: ConnectivityMatrix) -> float:
    """Mean reception probability over ordered device pairs, diagonal excluded."""
    m = y.m
    if m == 1:
        return 0.0
    return float((y.y.sum() - m) / (m * (m - 1)))


@dataclass(frozen=True)
class NetworkState:
    """Everything a scheduler may look at in one slot."""

    y: ConnectivityMatrix
    f: StatusMatrix
    delta: ImportanceMatrix
    clock: SessionClock
    _graph: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.y.m != self.f.m or self.delta.delta.shape != self.f.f.shape:
            raise ConfigError(
                f"dimension mismatch: SCM {self.y.m}x{self.y.m}, GSM {self.f.f.shape}, "
                f"importance {self.delta.delta.shape}"
            )

    @property
    def graph(self):
        if not self._graph:
            from .graph import build_graph

            self._graph.append(build_graph(self.y, self.f))
        return self._graph[0]

    def with_graph(self, g) -> NetworkState:
        self._graph[:] = [g]
        return self
