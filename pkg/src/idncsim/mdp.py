"""Exact finite-horizon MDP over GSM states, solved by backward induction.

States are status matrices, actions are the maximal independent sets of the
state's IDNC graph, and the per-slot reward is the expected distortion
reduction of the action. Values are indexed by the number of remaining
slots, so one solver can serve every start state and deadline of an instance.
Only states reachable from the start state are ever enumerated.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import InstanceTooLarge, check
from .graph import DEFAULT_VERTEX_CAP, Vertex, build_graph, enumerate_maximal_independent_sets
from .model import ConnectivityMatrix, ImportanceMatrix, NetworkState, StatusMatrix

DEFAULT_STATE_CAP = 200_000
DEFAULT_ACTION_CAP = 10_000


@dataclass(frozen=True)
class MdpState:
    f: StatusMatrix
    stage: int


@dataclass(frozen=True)
class TransitionDistribution:
    outcomes: tuple[tuple[StatusMatrix, float], ...]

    def total(self) -> float:
        return sum(p for _, p in self.outcomes)


def actions(
    f: StatusMatrix, y: ConnectivityMatrix, vertex_cap: int = DEFAULT_VERTEX_CAP, action_cap: int = DEFAULT_ACTION_CAP
) -> list[tuple[Vertex, ...]]:
    if isinstance(f, MdpState):
        f = f.f
    g = build_graph(y, f)
    sets = enumerate_maximal_independent_sets(g, vertex_cap)
    if len(sets) > action_cap:
        raise InstanceTooLarge(f"state has {len(sets)} actions, above the cap of {action_cap}")
    return [g.members(s) for s in sets]


def transition(f: StatusMatrix, a, y: ConnectivityMatrix) -> TransitionDistribution:
    """One outcome per subset of targets that succeed; zero-probability outcomes are dropped."""
    if isinstance(f, MdpState):
        f = f.f
    targets = sorted(a)
    outcomes = []
    for hits in itertools.product((True, False), repeat=len(targets)):
        p = 1.0
        cleared = []
        for v, hit in zip(targets, hits):
            ok = y.y[v.tx, v.rx]
            p *= ok if hit else 1.0 - ok
            if hit:
                cleared.append((v.rx, v.pkt))
        if p > 0.0:
            outcomes.append((f.cleared(cleared), p))
    dist = TransitionDistribution(tuple(outcomes))
    check(abs(dist.total() - 1.0) <= 1e-12, f"transition probabilities sum to {dist.total()!r}")
    return dist


def expected_reward(f: StatusMatrix, a, delta: ImportanceMatrix, y: ConnectivityMatrix) -> float:
    return float(sum(delta.delta[v.rx, v.pkt] * y.y[v.tx, v.rx] for v in a))


@dataclass
class MdpSolver:
    """Backward induction with caches shared across start states and deadlines."""

    y: ConnectivityMatrix
    delta: ImportanceMatrix
    state_cap: int = DEFAULT_STATE_CAP
    vertex_cap: int = DEFAULT_VERTEX_CAP
    action_cap: int = DEFAULT_ACTION_CAP
    _actions: dict = field(default_factory=dict, repr=False)
    _succ: dict = field(default_factory=dict, repr=False)
    _values: dict = field(default_factory=dict, repr=False)

    def actions(self, f: StatusMatrix) -> list[tuple[Vertex, ...]]:
        key = f.key()
        if key not in self._actions:
            self._actions[key] = actions(f, self.y, self.vertex_cap, self.action_cap)
        return self._actions[key]

    def successors(self, f: StatusMatrix) -> list[tuple[float, TransitionDistribution]]:
        """(expected reward, transition) for every action, in action order."""
        key = f.key()
        if key not in self._succ:
            self._succ[key] = [
                (expected_reward(f, a, self.delta, self.y), transition(f, a, self.y)) for a in self.actions(f)
            ]
        return self._succ[key]

    def lookup(self, f: StatusMatrix, remaining: int):
        """(value, action) for ``remaining`` slots left, or None when not solved yet."""
        if remaining <= 0:
            return 0.0, ()
        return self._values.get((f.key(), remaining))

    def solve(self, start: StatusMatrix, theta: int) -> ValuePolicyTable:
        layers: list[dict[bytes, StatusMatrix]] = []
        if theta > 0:
            layers.append({start.key(): start})
        total = len(layers[0]) if layers else 0
        for _ in range(1, theta):
            nxt: dict[bytes, StatusMatrix] = {}
            for f in layers[-1].values():
                for _, dist in self.successors(f):
                    for s, _ in dist.outcomes:
                        nxt.setdefault(s.key(), s)
            total += len(nxt)
            if total > self.state_cap:
                raise InstanceTooLarge(
                    f"more than {self.state_cap} reachable (state, stage) pairs "
                    f"({total} after {len(layers) + 1} stages)"
                )
            layers.append(nxt)

        for t in range(theta, 0, -1):
            q = theta - t + 1
            for key, f in layers[t - 1].items():
                if (key, q) in self._values:
                    continue
                best_v, best_a = -1.0, ()
                for a, (r, dist) in zip(self.actions(f), self.successors(f)):
                    v = r
                    if q > 1:
                        v += sum(p * self._values[(s.key(), q - 1)][0] for s, p in dist.outcomes)
                    if v > best_v + 1e-12:
                        best_v, best_a = v, a
                self._values[(key, q)] = (best_v, best_a)

        entries = {}
        for t, layer in enumerate(layers, start=1):
            q = theta - t + 1
            for key, f in layer.items():
                entries[(key, t)] = self._values[(key, q)]
        states = {key: f for layer in layers for key, f in layer.items()}
        return ValuePolicyTable(theta, start, entries, states, self)


@dataclass
class ValuePolicyTable:
    """Optimal values and actions keyed by (state, stage); stage Θ+1 is worth 0."""

    theta: int
    start: StatusMatrix
    entries: dict
    states: dict
    solver: MdpSolver = field(repr=False)

    @property
    def reachable_pairs(self) -> int:
        return len(self.entries)

    @property
    def reachable_states(self) -> int:
        return len(self.states)

    def __contains__(self, item) -> bool:
        f, stage = item
        return stage > self.theta or (f.key(), stage) in self.entries

    def value(self, f: StatusMatrix, stage: int = 1) -> float:
        if stage > self.theta:
            return 0.0
        return self.entries[(f.key(), stage)][0]

    def action(self, f: StatusMatrix, stage: int = 1) -> tuple[Vertex, ...]:
        if stage > self.theta:
            return ()
        return self.entries[(f.key(), stage)][1]

    @property
    def start_value(self) -> float:
        return self.value(self.start, 1)

    def bellman_residual(self) -> float:
        """Largest gap between stored values and a fresh one-step Bellman backup."""
        worst = 0.0
        for (key, t), (v, _) in self.entries.items():
            f = self.states[key]
            best = 0.0 if not self.solver.actions(f) else -1.0
            for r, dist in self.solver.successors(f):
                best = max(best, r + sum(p * self.value(s, t + 1) for s, p in dist.outcomes))
            worst = max(worst, abs(best - v))
        return worst


def backward_induction(
    s_a: StatusMatrix,
    theta: int,
    y: ConnectivityMatrix,
    delta: ImportanceMatrix,
    state_cap: int = DEFAULT_STATE_CAP,
    solver: MdpSolver | None = None,
) -> ValuePolicyTable:
    if isinstance(s_a, MdpState):
        s_a = s_a.f
    if solver is None:
        solver = MdpSolver(y, delta, state_cap=state_cap)
    return solver.solve(s_a, theta)


class TableScheduler:
    """Replays a solved table; states outside it mean the episode left the solved instance."""

    name = "mdp"

    def __init__(self, table: ValuePolicyTable):
        self.table = table

    def select(self, state: NetworkState) -> tuple[Vertex, ...]:
        if state.f.complete():
            return ()
        stage = self.table.theta - state.clock.remaining + 1
        if (state.f, stage) not in self.table:
            raise KeyError(f"state at stage {stage} is not covered by the solved table")
        return self.table.action(state.f, stage)

    __call__ = select


def mdp_scheduler(table: ValuePolicyTable) -> TableScheduler:
    return TableScheduler(table)


class MdpScheduler:
    """Optimal policy, solved lazily from each new start state and cached per instance."""

    name = "mdp"

    def __init__(self, state_cap: int = DEFAULT_STATE_CAP, **_ignored):
        self.state_cap = state_cap
        self._solvers: dict = {}

    def solver_for(self, y: ConnectivityMatrix, delta: ImportanceMatrix) -> MdpSolver:
        key = (y, delta)
        if key not in self._solvers:
            self._solvers[key] = MdpSolver(y, delta, state_cap=self.state_cap)
        return self._solvers[key]

    def select(self, state: NetworkState) -> tuple[Vertex, ...]:
        if state.f.complete():
            return ()
        solver = self.solver_for(state.y, state.delta)
        q = state.clock.remaining
        hit = solver.lookup(state.f, q)
        if hit is None:
            solver.solve(state.f, q)
            hit = solver.lookup(state.f, q)
        return hit[1]

    __call__ = select
