"""Unified IDNC conflict graph and independent-set machinery.

A vertex ``(tx, rx, pkt)`` means "device tx sends packet pkt to neighbour rx".
Two vertices are adjacent when they cannot be served in the same slot:

* C1, C2 (coding conflicts, same transmitter only): the XOR combination would
  not be instantly decodable for one of the two targets.
* C3, C4, C5 (transmission conflicts, different transmitters): collision at a
  common receiver, interference in the shared coverage zone, or a device asked
  to transmit and receive at once.

Every edge carries the tag of the first rule that fires, checked in the order
C1, C2, C3, C5, C4. C5 is tested before C4 because any C5 pair with
neighbouring transmitters also satisfies the broader C4 predicate.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import InstanceTooLarge
from .model import ConnectivityMatrix, StatusMatrix, coverage_zone, has_set

DEFAULT_VERTEX_CAP = 40
RULES = ("C1", "C2", "C3", "C4", "C5")
_TIE_TOL = 1e-12


class Vertex(NamedTuple):
    tx: int
    rx: int
    pkt: int

    def label(self) -> str:
        return f"v({self.tx + 1},{self.rx + 1},{self.pkt + 1})"


IndependentSet = tuple  # sorted tuple of Vertex


@dataclass(frozen=True, eq=False)
class IdncGraph:
    """Vertices sorted by (tx, rx, pkt); ``kinds[u, v]`` is 0 or the rule number.

    Graphs built from an SCM and GSM keep that context and derive conflict
    rows on demand, so greedy selectors never pay for the dense V x V matrix.
    Graphs given an explicit ``dense`` matrix use it as is.
    """

    tx: np.ndarray
    rx: np.ndarray
    pkt: np.ndarray
    dense: np.ndarray | None = None
    links: np.ndarray | None = None
    fmat: np.ndarray | None = None

    def __post_init__(self):
        if self.dense is None and (self.links is None or self.fmat is None):
            raise ValueError("need either a dense conflict matrix or the SCM/GSM context")

    @classmethod
    def from_vertices(cls, vertices, kinds) -> IdncGraph:
        arr = np.asarray(vertices, dtype=np.intp).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], dense=np.asarray(kinds, dtype=np.int8))

    @cached_property
    def kinds(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        return _conflict_kinds(self.links, self.fmat, self.tx, self.rx, self.pkt)

    @cached_property
    def vertices(self) -> tuple[Vertex, ...]:
        return tuple(Vertex(int(a), int(b), int(c)) for a, b, c in zip(self.tx, self.rx, self.pkt))

    @cached_property
    def adjacency(self) -> np.ndarray:
        return self.kinds > 0

    @property
    def lazy(self) -> bool:
        """True while the dense conflict matrix has not been materialised."""
        return self.dense is None and "kinds" not in self.__dict__

    def degrees(self) -> np.ndarray:
        if not self.lazy:
            return self.adjacency.sum(axis=1)
        return _lazy_degrees(self.links, self.fmat, self.tx, self.rx, self.pkt)

    def row(self, i: int) -> np.ndarray:
        """Rule numbers of vertex ``i`` against every vertex (0 = no conflict)."""
        if not self.lazy:
            return self.kinds[i]
        return _conflict_row(self.links, self.fmat, self.tx, self.rx, self.pkt, i)

    def pair(self, i: int, j: int) -> int:
        """Rule number for one vertex pair (0 = no conflict)."""
        if not self.lazy:
            return int(self.kinds[i, j])
        if i == j:
            return 0
        return _kernels.pair_kind(
            self.links, self.fmat, int(self.tx[i]), int(self.rx[i]), int(self.pkt[i]),
            int(self.tx[j]), int(self.rx[j]), int(self.pkt[j]),
        )

    def __len__(self) -> int:
        return self.tx.size

    def index(self) -> dict[Vertex, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    def edges(self) -> list[tuple[int, int, str]]:
        us, vs = np.nonzero(np.triu(self.kinds))
        return [(int(u), int(v), f"C{int(self.kinds[u, v])}") for u, v in zip(us, vs)]

    def induced(self, selector) -> IdncGraph:
        """Subgraph on a boolean mask or an iterable of vertex indices (order kept)."""
        sel = np.asarray(selector)
        if sel.dtype != bool:
            sel = np.unique(np.asarray(list(selector), dtype=np.intp))
        else:
            if sel.all():
                return self
            sel = np.flatnonzero(sel)
        dense = None if self.lazy else self.kinds[np.ix_(sel, sel)]
        return IdncGraph(self.tx[sel], self.rx[sel], self.pkt[sel], dense, self.links, self.fmat)

    def members(self, indices: Iterable[int]) -> IndependentSet:
        return tuple(sorted(Vertex(int(self.tx[i]), int(self.rx[i]), int(self.pkt[i])) for i in indices))

    def locate(self, v: Vertex) -> int | None:
        """Index of ``v``, or None when it is not a vertex (binary search on the sorted order)."""
        lo = int(np.searchsorted(self.tx, v.tx, "left"))
        hi = int(np.searchsorted(self.tx, v.tx, "right"))
        for i in range(lo, hi):
            if self.rx[i] == v.rx and self.pkt[i] == v.pkt:
                return i
        return None


@dataclass(frozen=True)
class LocalStatus:
    """Rows are the coverage zone of the transmitter, columns its Has set."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]
    f: np.ndarray


def build_lsm(y: ConnectivityMatrix, f: StatusMatrix, i: int) -> LocalStatus:
    rows = tuple(sorted(coverage_zone(y, i)))
    cols = tuple(sorted(has_set(f, i)))
    sub = f.f[np.ix_(rows, cols)] if cols else np.zeros((len(rows), 0), dtype=np.uint8)
    return LocalStatus(rows, cols, sub)


def build_graph(y: ConnectivityMatrix, f: StatusMatrix) -> IdncGraph:
    if y.m != f.m:
        raise ValueError(f"SCM has {y.m} devices but GSM has {f.m}")
    links = y.links.copy()
    np.fill_diagonal(links, False)
    missing = f.f.astype(bool)
    cand = links[:, :, None] & ~missing[:, None, :] & missing[None, :, :]
    tx, rx, pkt = np.nonzero(cand)
    return IdncGraph(tx, rx, pkt, links=y.links, fmat=f.f)


def _pair_conflicts(links, tx, rx):
    """Transmission-conflict rule per (tx, rx) pair; vertices sorted by (tx, rx) form runs."""
    n = tx.size
    new_pair = np.ones(n, dtype=bool)
    new_pair[1:] = (tx[1:] != tx[:-1]) | (rx[1:] != rx[:-1])
    pid = np.cumsum(new_pair) - 1
    ptx, prx = tx[new_pair], rx[new_pair]
    cross = ptx[:, None] != ptx[None, :]
    same_rx = prx[:, None] == prx[None, :]
    c3 = cross & same_rx
    t_is_r = ptx[:, None] == prx[None, :]
    c5 = cross & (t_is_r | t_is_r.T)
    # shared[a, b] is "rx of a lies in the zone of tx of b"
    shared = links[ptx][:, prx].T
    c4 = cross & ~same_rx & (shared | shared.T)
    return np.select([c3, c5, c4], [3, 5, 4], default=0).astype(np.int8), pid


def _coding_blocks(fmat, tx, rx, pkt):
    """Yield (start, stop, kinds) for each transmitter's block of C1/C2 conflicts."""
    n = tx.size
    bounds = np.flatnonzero(np.diff(tx)) + 1
    for s, e in zip(np.r_[0, bounds], np.r_[bounds, n]):
        brx, bpkt = rx[s:e], pkt[s:e]
        same = brx[:, None] == brx[None, :]
        diff_pkt = bpkt[:, None] != bpkt[None, :]
        # lacks[u, v] is "packet of u is missing at receiver of v"
        lacks = fmat[:, bpkt][brx].T.astype(bool)
        c1 = same & diff_pkt
        c2 = ~same & diff_pkt & (lacks | lacks.T)
        yield s, e, np.where(c1, 1, np.where(c2, 2, 0)).astype(np.int8)


def _conflict_kinds(links, fmat, tx, rx, pkt) -> np.ndarray:
    if tx.size == 0:
        return np.zeros((0, 0), dtype=np.int8)
    pair_kinds, pid = _pair_conflicts(links, tx, rx)
    kinds = pair_kinds[pid][:, pid]
    for s, e, block in _coding_blocks(fmat, tx, rx, pkt):
        kinds[s:e, s:e] = block
    return kinds


def _lazy_degrees(links, fmat, tx, rx, pkt) -> np.ndarray:
    if tx.size == 0:
        return np.zeros(0, dtype=np.intp)
    pair_kinds, pid = _pair_conflicts(links, tx, rx)
    sizes = np.bincount(pid)
    deg = ((pair_kinds > 0) @ sizes)[pid]
    for s, e, block in _coding_blocks(fmat, tx, rx, pkt):
        deg[s:e] += (block > 0).sum(axis=1)
    return deg


def _conflict_row(links, fmat, tx, rx, pkt, i) -> np.ndarray:
    a, b, p = tx[i], rx[i], pkt[i]
    same_tx = tx == a
    same_rx = rx == b
    diff_pkt = pkt != p
    c1 = same_tx & same_rx & diff_pkt
    c2 = same_tx & ~same_rx & diff_pkt & (fmat[rx, p].astype(bool) | fmat[b, pkt].astype(bool))
    cross = ~same_tx
    c3 = cross & same_rx
    c5 = cross & ~same_rx & ((tx == b) | (rx == a))
    c4 = cross & ~same_rx & ~c5 & (links[tx, b] | links[a, rx])
    out = np.zeros(tx.size, dtype=np.int8)
    out[c1], out[c2], out[c3], out[c4], out[c5] = 1, 2, 3, 4, 5
    return out


def conflict_rule(y: ConnectivityMatrix, f: StatusMatrix, u: Vertex, v: Vertex) -> str | None:
    """Tag of the first rule making ``u`` and ``v`` conflict, or None."""
    if u == v:
        return None
    kind = _kernels.pair_kind(y.links, f.f, *u, *v)
    return f"C{kind}" if kind else None


# -- maximal independent sets ------------------------------------------------


def _free_masks(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    weights = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
    taken = (adj | np.eye(n, dtype=bool)).astype(np.uint64) * weights
    full = np.uint64(2**n - 1) if n < 64 else ~np.uint64(0)
    return full & ~np.bitwise_or.reduce(taken, axis=1)


def _mask_members(masks: np.ndarray, n: int) -> np.ndarray:
    """Boolean (sets x vertices) membership matrix."""
    shifts = np.arange(n, dtype=np.uint64)
    return ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(bool)


def _check_size(n: int, cap: int | None) -> None:
    if cap is not None and n > cap:
        raise InstanceTooLarge(
            f"graph has {n} vertices, above the enumeration cap of {cap}; use the greedy selector instead"
        )
    if n > _kernels.MAX_BITS:
        raise InstanceTooLarge(f"graph has {n} vertices; exact enumeration supports at most {_kernels.MAX_BITS}")


def _mis_membership(adj: np.ndarray, cap: int | None) -> np.ndarray:
    n = adj.shape[0]
    _check_size(n, cap)
    if n == 0:
        return np.zeros((1, 0), dtype=bool)
    return _mask_members(_kernels.mis_masks(_free_masks(adj)), n)


def maximal_independent_sets(adj: np.ndarray, cap: int | None = DEFAULT_VERTEX_CAP) -> list[tuple[int, ...]]:
    """All maximal independent sets of the graph with boolean adjacency ``adj``.

    Bron-Kerbosch with Tomita pivoting on the complement graph (compiled,
    uint64 bitsets). Output is sorted and deterministic.
    """
    members = _mis_membership(np.asarray(adj, dtype=bool), cap)
    return sorted(tuple(int(i) for i in np.flatnonzero(row)) for row in members)


def enumerate_maximal_independent_sets(g: IdncGraph, cap: int | None = DEFAULT_VERTEX_CAP) -> list[tuple[int, ...]]:
    if not g.lazy:
        return maximal_independent_sets(g.adjacency, cap)
    n = len(g)
    _check_size(n, cap)
    if n == 0:
        return [()]
    masks = _kernels.mis_masks(_kernels.free_masks_lazy(g.links, g.fmat, g.tx, g.rx, g.pkt))
    return sorted(tuple(int(i) for i in np.flatnonzero(row)) for row in _mask_members(masks, n))


def best_weighted_set(g: IdncGraph, w, cap: int | None = DEFAULT_VERTEX_CAP) -> tuple[int, ...]:
    """Same answer as ``best_set`` over all maximal sets with an additive score, computed in compiled code."""
    n = len(g)
    if n == 0:
        return ()
    _check_size(n, cap)
    free = _kernels.free_masks_lazy(g.links, g.fmat, g.tx, g.rx, g.pkt) if g.lazy else _free_masks(g.adjacency)
    mask = _kernels.best_mask(_kernels.mis_masks(free), np.asarray(w, dtype=float), _TIE_TOL)
    return tuple(v for v in range(n) if (int(mask) >> v) & 1)


def best_set(candidates: Sequence[tuple[int, ...]], score: Callable[[tuple[int, ...]], float]) -> tuple[int, ...]:
    """Highest score, then larger cardinality, then lexicographically smallest."""
    best = None
    best_key = None
    for s in candidates:
        val = score(s)
        if best is None:
            best, best_key = s, val
            continue
        if val > best_key + _TIE_TOL * max(1.0, abs(best_key)):
            best, best_key = s, val
        elif abs(val - best_key) <= _TIE_TOL * max(1.0, abs(best_key)):
            if len(s) > len(best) or (len(s) == len(best) and s < best):
                best, best_key = s, max(val, best_key)
    return best if best is not None else ()


def max_weight_independent_set(g: IdncGraph, w, cap: int | None = DEFAULT_VERTEX_CAP) -> tuple[int, ...]:
    if len(g) == 0:
        return ()
    w = np.asarray(w, dtype=float)
    if w.shape != (len(g),) or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite, nonnegative, one per vertex")
    return best_weighted_set(g, w, cap)


def greedy_independent_set(g: IdncGraph, w) -> tuple[int, ...]:
    """Repeatedly take the feasible vertex of highest weight (lowest index on ties).

    The result is always a maximal independent set.
    """
    n = len(g)
    if n == 0:
        return ()
    order = np.lexsort((np.arange(n), -np.asarray(w, dtype=float)))
    return greedy_in_order(g, order)


def greedy_in_order(g: IdncGraph, order) -> tuple[int, ...]:
    """Maximal independent set built by scanning vertices in ``order``."""
    order = np.asarray(order, dtype=np.intp)
    if g.lazy:
        chosen = _kernels.greedy_lazy(g.links, g.fmat, g.tx, g.rx, g.pkt, order)
    else:
        chosen = _kernels.greedy_dense(g.adjacency, order)
    return tuple(int(v) for v in chosen)


def conflict_free_subgraph(
    g: IdncGraph, chosen: Iterable[int], keep: Callable[[Vertex], bool] = lambda v: True
) -> IdncGraph:
    chosen = list(chosen)
    blocked = np.zeros(len(g), dtype=bool)
    if chosen:
        blocked = np.logical_or.reduce([g.row(c) > 0 for c in chosen])
        blocked[chosen] = True
    if isinstance(keep, np.ndarray):
        mask = keep & ~blocked
    else:
        mask = np.fromiter((keep(v) for v in g.vertices), dtype=bool, count=len(g)) & ~blocked
    return g.induced(mask)


def partition_by_criticality(g: IdncGraph, critical: Iterable[int]) -> tuple[IdncGraph, IdncGraph]:
    mask = np.isin(g.rx, sorted(set(critical)))
    return g.induced(mask), g.induced(~mask)


# -- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class ConflictReport:
    violations: tuple[tuple[str, str, str], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "ok"
        return "; ".join(f"{a} -- {b} violates {tag}" for a, b, tag in self.violations)


def validate_conflict_free(kappa: Iterable[Vertex], g: IdncGraph) -> ConflictReport:
    """Check a decision against a freshly built graph; reports instead of raising."""
    members = sorted(set(kappa))
    idx = {v: g.locate(v) for v in members}
    known = [v for v in members if idx[v] is not None]
    if len(known) == len(members) and g.lazy:
        arr = np.array(known, dtype=np.intp).reshape(-1, 3)
        if not _kernels.any_conflict(g.links, g.fmat, arr[:, 0], arr[:, 1], arr[:, 2]):
            return ConflictReport()
    bad = [(v.label(), "-", "not-a-vertex") for v in members if idx[v] is None]
    for a in range(len(known)):
        for b in range(a + 1, len(known)):
            kind = g.pair(idx[known[a]], idx[known[b]])
            if kind:
                bad.append((known[a].label(), known[b].label(), f"C{kind}"))
    return ConflictReport(tuple(bad))
