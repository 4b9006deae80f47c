"""Per-slot schedulers over the IDNC graph: TS-MIS and the PCB / FCD baselines.

Every scheduler maps a :class:`~idncsim.model.NetworkState` to a sorted tuple
of :class:`~idncsim.graph.Vertex` that is independent in the state's graph.

Exact selection enumerates maximal independent sets, which is only feasible
on small graphs. ``strategy="auto"`` (the default) enumerates when the graph
has at most ``exact_limit`` vertices and falls back to greedy vertex search
otherwise; ``"exact"`` and ``"greedy"`` force one mode.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import _kernels
from .graph import (
    DEFAULT_VERTEX_CAP,
    IdncGraph,
    Vertex,
    best_set,
    best_weighted_set,
    conflict_free_subgraph,
    enumerate_maximal_independent_sets,
    greedy_in_order,
    greedy_independent_set,
)
from .model import ConnectivityMatrix, ImportanceMatrix, NetworkState, critical_set, non_critical_set

STRATEGIES = ("auto", "exact", "greedy")
DEFAULT_EXACT_LIMIT = 20


# -- completion-time probabilities --------------------------------------------


def completion_pmf(w: int, x: int, eps_bar: float) -> float:
    """P[T = w + x]: the w-th success lands on trial w + x (negative binomial)."""
    if w < 1 or x < 0:
        raise ValueError(f"need w >= 1 and x >= 0, got w={w}, x={x}")
    if not 0.0 <= eps_bar <= 1.0:
        raise ValueError(f"eps_bar must be a probability, got {eps_bar}")
    if eps_bar == 1.0:
        return 0.0
    return math.comb(w + x - 1, x) * eps_bar**x * (1.0 - eps_bar) ** w


@lru_cache(maxsize=65536)
def completion_cdf(w: int, q: int, eps_bar: float) -> float:
    """P[T <= q] for a device missing w packets, targeted every slot."""
    if w <= 0:
        return 1.0
    if q < w:
        return 0.0
    return min(1.0, sum(completion_pmf(w, x, eps_bar) for x in range(q - w + 1)))


@lru_cache(maxsize=64)
def _erasure_means(y: ConnectivityMatrix) -> np.ndarray:
    """Average neighbour erasure per device; NaN for isolated devices."""
    links = y.links.copy()
    np.fill_diagonal(links, False)
    deg = links.sum(axis=0)
    eps_sum = np.where(links, 1.0 - y.y, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(deg > 0, eps_sum / np.maximum(deg, 1), np.nan)
    out.flags.writeable = False
    return out


def _cdf(w: int, q: int, eps_bar: float) -> float:
    if w <= 0:
        return 1.0
    if math.isnan(eps_bar):
        return 0.0
    return completion_cdf(w, q, eps_bar)


@dataclass(frozen=True)
class DeadlineProbability:
    value: float
    terms: tuple[tuple[int, float], ...] = ()


def all_noncritical_deadline_prob(state: NetworkState) -> DeadlineProbability:
    q = state.clock.remaining
    w = state.f.wants_counts
    ebar = _erasure_means(state.y)
    terms = tuple((k, _cdf(int(w[k]), q, float(ebar[k]))) for k in sorted(non_critical_set(state.f, state.clock)))
    return DeadlineProbability(float(np.prod([t for _, t in terms])) if terms else 1.0, terms)


def _targeted_factor(w: int, q: int, ebar: float, eps_link: float) -> float:
    return _cdf(w - 1, q - 1, ebar) * (1.0 - eps_link) + _cdf(w, q - 1, ebar) * eps_link


def _deadline_tables(state: NetworkState) -> tuple[np.ndarray, np.ndarray]:
    """Per-device completion chance over Q-1 slots if served now (hit) or not (miss)."""
    q = state.clock.remaining
    w = state.f.wants_counts
    ebar = _erasure_means(state.y)
    hit_if = np.array([_cdf(int(w[k]) - 1, q - 1, float(ebar[k])) for k in range(state.y.m)])
    miss_if = np.array([_cdf(int(w[k]), q - 1, float(ebar[k])) for k in range(state.y.m)])
    return hit_if, miss_if


def successor_deadline_prob(kappa_a: Iterable[Vertex], state: NetworkState) -> float:
    """Upper bound on P[all non-critical devices finish in the remaining Q-1 slots]."""
    q = state.clock.remaining
    w = state.f.wants_counts
    ebar = _erasure_means(state.y)
    noncrit = non_critical_set(state.f, state.clock)
    targeted = {}
    for v in kappa_a:
        if v.rx not in noncrit:
            raise ValueError(f"{v.label()} targets a device that is not non-critical")
        targeted[v.rx] = 1.0 - state.y.y[v.tx, v.rx]
    p = 1.0
    for k in noncrit:
        if k in targeted:
            p *= _targeted_factor(int(w[k]), q, float(ebar[k]), targeted[k])
        else:
            p *= _cdf(int(w[k]), q - 1, float(ebar[k]))
    return p


# -- selection helpers -----------------------------------------------------------


def _use_exact(g: IdncGraph, strategy: str, exact_limit: int) -> bool:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if strategy == "auto":
        return len(g) <= exact_limit
    return strategy == "exact"


def reception_weights(g: IdncGraph, delta: ImportanceMatrix, y: ConnectivityMatrix) -> np.ndarray:
    """Expected distortion reduction of each vertex, delta[rx, pkt] * (1 - eps[tx, rx])."""
    return delta.delta[g.rx, g.pkt] * y.y[g.tx, g.rx]


def _weighted_choice(g: IdncGraph, w: np.ndarray, strategy: str, exact_limit: int, cap: int) -> tuple[int, ...]:
    if len(g) == 0:
        return ()
    if _use_exact(g, strategy, exact_limit):
        return best_weighted_set(g, w, cap)
    return greedy_independent_set(g, w)


def select_critical_mis(
    graph_c: IdncGraph,
    delta: ImportanceMatrix,
    y: ConnectivityMatrix,
    strategy: str = "auto",
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    cap: int = DEFAULT_VERTEX_CAP,
) -> tuple[int, ...]:
    return _weighted_choice(graph_c, reception_weights(graph_c, delta, y), strategy, exact_limit, cap)


def select_noncritical_mis(
    graph_a: IdncGraph,
    state: NetworkState,
    strategy: str = "auto",
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    cap: int = DEFAULT_VERTEX_CAP,
) -> tuple[int, ...]:
    if len(graph_a) == 0:
        return ()
    hit_if, miss_if = _deadline_tables(state)
    link = state.y.y[graph_a.tx, graph_a.rx]
    hit = hit_if[graph_a.rx] * link + miss_if[graph_a.rx] * (1.0 - link)
    if _use_exact(graph_a, strategy, exact_limit):
        rest = sorted(non_critical_set(state.f, state.clock))

        def prob(s):
            factors = dict(zip(rest, miss_if[rest]))
            for v in s:
                factors[int(graph_a.rx[v])] = hit[v]
            return math.prod(factors[k] for k in rest)

        return best_set(enumerate_maximal_independent_sets(graph_a, cap), prob)
    # the objective factorises per targeted device, so a vertex's gain is static
    miss = miss_if[graph_a.rx]
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(miss > 0, hit / np.where(miss > 0, miss, 1.0), np.where(hit > 0, np.inf, 1.0))
    return greedy_independent_set(graph_a, gain)


# -- schedulers --------------------------------------------------------------------


@dataclass
class Scheduler:
    strategy: str = "auto"
    exact_limit: int = DEFAULT_EXACT_LIMIT
    cap: int = DEFAULT_VERTEX_CAP
    name = "base"

    def select(self, state: NetworkState) -> tuple[Vertex, ...]:
        raise NotImplementedError

    def __call__(self, state: NetworkState) -> tuple[Vertex, ...]:
        return self.select(state)


@dataclass
class TsMisScheduler(Scheduler):
    name = "tsmis"

    def select(self, state: NetworkState) -> tuple[Vertex, ...]:
        return ts_mis_select(state, self.strategy, self.exact_limit, self.cap)


@dataclass
class PcbScheduler(Scheduler):
    name = "pcb"

    def select(self, state: NetworkState) -> tuple[Vertex, ...]:
        return pcb_select(state, self.strategy, self.exact_limit, self.cap)


@dataclass
class FcdScheduler(Scheduler):
    name = "fcd"

    def select(self, state: NetworkState) -> tuple[Vertex, ...]:
        return fcd_select(state, self.strategy, self.exact_limit, self.cap)


def ts_mis_select(
    state: NetworkState, strategy: str = "auto", exact_limit: int = DEFAULT_EXACT_LIMIT, cap: int = DEFAULT_VERTEX_CAP
) -> tuple[Vertex, ...]:
    g = state.graph
    critical = critical_set(state.f, state.clock)
    noncritical = non_critical_set(state.f, state.clock)
    assert state.clock.remaining > 1 or not noncritical, "non-critical device with Q = 1"
    is_crit = np.zeros(state.y.m, dtype=bool)
    is_crit[list(critical)] = True
    is_noncrit = np.zeros(state.y.m, dtype=bool)
    is_noncrit[list(noncritical)] = True
    crit_mask = is_crit[g.rx]
    g_c = g.induced(crit_mask)
    chosen_c = np.flatnonzero(crit_mask)[list(select_critical_mis(g_c, state.delta, state.y, strategy, exact_limit, cap))]
    g_a = conflict_free_subgraph(g, chosen_c, keep=is_noncrit[g.rx])
    kappa_a = g_a.members(select_noncritical_mis(g_a, state, strategy, exact_limit, cap))
    return tuple(sorted(g.members(chosen_c) + kappa_a))


def _greedy_min_degree(g: IdncGraph, tiebreak: np.ndarray) -> tuple[int, ...]:
    """Maximal independent set favouring low live degree (more targets fit), best link on ties."""
    tiebreak = np.asarray(tiebreak, dtype=float)
    if g.lazy:
        chosen = _kernels.min_degree_lazy(g.links, g.fmat, g.tx, g.rx, g.pkt, tiebreak)
    else:
        chosen = _kernels.min_degree_dense(g.adjacency, tiebreak)
    return tuple(int(v) for v in chosen)


def pcb_select(
    state: NetworkState, strategy: str = "auto", exact_limit: int = DEFAULT_EXACT_LIMIT, cap: int = DEFAULT_VERTEX_CAP
) -> tuple[Vertex, ...]:
    """Serve as many devices as possible, blind to deadlines and importance."""
    g = state.graph
    if len(g) == 0:
        return ()
    link = state.y.y[g.tx, g.rx]
    if _use_exact(g, strategy, exact_limit):
        # count dominates: each vertex is worth more than any sum of link terms
        chosen = best_weighted_set(g, (state.y.m + 1) + link, cap)
    else:
        chosen = _greedy_min_degree(g, link)
    return g.members(chosen)


def fcd_select(
    state: NetworkState, strategy: str = "auto", exact_limit: int = DEFAULT_EXACT_LIMIT, cap: int = DEFAULT_VERTEX_CAP
) -> tuple[Vertex, ...]:
    """Single transmitter and XOR combination with the largest expected distortion drop."""
    g = state.graph
    if len(g) == 0:
        return ()
    weights = reception_weights(g, state.delta, state.y)
    # C1 allows one vertex per receiver, so summing each receiver's best
    # vertex bounds a transmitter's total; hopeless transmitters are skipped.
    m = state.y.m
    pair_best = np.zeros(m * m)
    np.maximum.at(pair_best, g.tx * m + g.rx, weights)
    bound = pair_best.reshape(m, m).sum(axis=1)
    best: tuple[Vertex, ...] = ()
    best_w, best_tx = -1.0, -1
    for i in np.lexsort((np.arange(m), -bound)):
        i = int(i)
        lo, hi = np.searchsorted(g.tx, [i, i + 1])
        if lo == hi:
            continue
        tol = 1e-12 * max(1.0, abs(best_w))
        if bound[i] < best_w - tol:
            break
        sub = g.induced(np.arange(lo, hi))
        w = weights[lo:hi]
        chosen = _weighted_choice(sub, w, strategy, exact_limit, cap)
        total = float(w[list(chosen)].sum())
        if total > best_w + tol or (total >= best_w - tol and i < best_tx):
            best, best_w, best_tx = sub.members(chosen), total, i
    return best


SCHEDULERS: dict[str, Callable[..., Scheduler]] = {
    "tsmis": TsMisScheduler,
    "pcb": PcbScheduler,
    "fcd": FcdScheduler,
}


def make_scheduler(name: str, **kwargs) -> Scheduler:
    if name == "mdp":
        from .mdp import MdpScheduler

        return MdpScheduler(**kwargs)
    try:
        return SCHEDULERS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown scheduler {name!r}; expected one of {sorted([*SCHEDULERS, 'mdp'])}") from None
