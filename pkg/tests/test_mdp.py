import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import instances
from idncsim.errors import InstanceTooLarge
from idncsim.graph import Vertex
from idncsim.mdp import (
    MdpScheduler,
    MdpSolver,
    MdpState,
    actions,
    backward_induction,
    expected_reward,
    mdp_scheduler,
    transition,
)
from idncsim.model import ConnectivityMatrix, ImportanceMatrix, NetworkState, SessionClock, StatusMatrix
from idncsim.scheduling import make_scheduler
from idncsim.simulator import ScenarioConfig, monte_carlo
from idncsim.video import one_packet_per_layer

LINE3 = ConnectivityMatrix([[1, 0.8, 0], [0.8, 1, 0.6], [0, 0.6, 1]])


def as_lists(y, f, d):
    return y.y.tolist(), f.f.astype(int).tolist(), d.delta.tolist()


# -- actions / transitions / rewards -------------------------------------------------


def test_line4_has_three_actions(line_scm, line_gsm):
    assert len(actions(MdpState(line_gsm, 1), line_scm)) == 3


def test_absorbing_state_has_one_empty_action(line_scm):
    assert actions(StatusMatrix(np.zeros((4, 3), dtype=int)), line_scm) == [()]


@given(instances(max_m=3, max_n=3, min_m=3))
def test_actions_match_brute_force(inst):
    y, f = inst
    yl, fl = y.y.tolist(), f.f.astype(int).tolist()
    vs = oracles.vertices(yl, fl)
    expected = [tuple(Vertex(*vs[j]) for j in s) for s in oracles.brute_force_mis(oracles.adjacency(yl, fl, vs))]
    assert sorted(actions(f, y)) == sorted(expected)


def test_action_cap():
    y = ConnectivityMatrix(np.ones((3, 3)))
    f = StatusMatrix([[0, 0, 1], [1, 0, 0], [0, 1, 0]])
    with pytest.raises(InstanceTooLarge):
        actions(f, y, action_cap=1)


def test_empty_action_keeps_state(line_scm, line_gsm):
    dist = transition(line_gsm, (), line_scm)
    assert dist.outcomes == ((line_gsm, 1.0),)


def test_single_target_is_bernoulli():
    y = ConnectivityMatrix([[1, 0.75], [0.75, 1]])
    f = StatusMatrix([[1], [0]])
    dist = transition(f, (Vertex(1, 0, 0),), y)
    assert [p for _, p in dist.outcomes] == pytest.approx([0.75, 0.25])
    assert dist.outcomes[0][0].complete() and dist.outcomes[1][0] == f


def test_two_target_expansion():
    y = ConnectivityMatrix([[1, 0.8, 0.9], [0.8, 1, 0], [0.9, 0, 1]])
    f = StatusMatrix([[0], [1], [1]])
    dist = transition(f, (Vertex(0, 1, 0), Vertex(0, 2, 0)), y)
    assert sorted(p for _, p in dist.outcomes) == pytest.approx([0.02, 0.08, 0.18, 0.72])
    assert dist.total() == pytest.approx(1.0, abs=1e-12)


@given(instances(max_m=4, max_n=3))
def test_transitions_touch_only_targets(inst):
    y, f = inst
    for a in actions(f, y)[:5]:
        dist = transition(f, a, y)
        assert abs(dist.total() - 1) <= 1e-12
        rows = {v.rx for v in a}
        for s, p in dist.outcomes:
            assert p > 0
            diff = f.f.astype(int) - s.f.astype(int)
            assert diff.min() >= 0
            assert set(np.flatnonzero(diff.sum(axis=1))) <= rows
            assert diff.sum(axis=1).max(initial=0) <= 1


def test_reward_examples(line_scm, line_gsm, ones):
    assert expected_reward(line_gsm, (), ones, line_scm) == 0
    y = ConnectivityMatrix([[1, 0.8], [0.8, 1]])
    d = ImportanceMatrix([[0.5], [0.0]])
    assert expected_reward(StatusMatrix([[1], [0]]), (Vertex(1, 0, 0),), d, y) == pytest.approx(0.4)
    assert expected_reward(line_gsm, (Vertex(1, 0, 0), Vertex(2, 3, 0)), ones, line_scm) == pytest.approx(1.75)


# -- backward induction ------------------------------------------------------------------


def test_zero_deadline(line_scm, line_gsm, ones):
    assert backward_induction(line_gsm, 0, line_scm, ones).start_value == 0


def test_mutual_exchange_single_slot():
    y = ConnectivityMatrix([[1, 0.5], [0.5, 1]])
    f = StatusMatrix([[1, 0], [0, 1]])
    table = backward_induction(f, 1, y, ImportanceMatrix.ones(2, 2))
    assert table.start_value == pytest.approx(0.5)
    assert len(table.action(f)) == 1


def test_line3_matches_policy_tree():
    f = StatusMatrix([[1, 0], [0, 1], [0, 1]])
    d = ImportanceMatrix([[3.0, 1.0]] * 3)
    table = backward_induction(f, 2, LINE3, d)
    assert table.start_value == pytest.approx(oracles.policy_tree_value(*as_lists(LINE3, f, d), 2), abs=1e-12)


@settings(max_examples=25)
@given(instances(max_m=3, max_n=3), st.integers(0, 3), st.data())
def test_values_match_policy_tree(inst, theta, data):
    y, f = inst
    w = data.draw(st.lists(st.sampled_from([0.5, 1.0, 2.5]), min_size=f.n, max_size=f.n))
    d = ImportanceMatrix([w] * f.m)
    table = backward_induction(f, theta, y, d)
    assert table.start_value == pytest.approx(oracles.policy_tree_value(*as_lists(y, f, d), theta), abs=1e-9)


@settings(max_examples=15)
@given(instances(max_m=3, max_n=3), st.integers(1, 3))
def test_bellman_consistency_and_monotone_values(inst, theta):
    y, f = inst
    d = ImportanceMatrix.ones(f.m, f.n)
    solver = MdpSolver(y, d)
    table = solver.solve(f, theta)
    assert table.bellman_residual() <= 1e-9
    for (key, t), (v, _) in table.entries.items():
        assert v >= 0
        s = table.states[key]
        q = theta - t + 1
        shorter = solver.lookup(s, q - 1)
        if shorter is None:
            solver.solve(s, q - 1)
            shorter = solver.lookup(s, q - 1)
        assert v >= shorter[0] - 1e-12


def test_state_cap():
    y = ConnectivityMatrix(np.full((4, 4), 0.8) + np.eye(4) * 0.2)
    f = StatusMatrix([[1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 0], [0, 0, 1, 1]])
    with pytest.raises(InstanceTooLarge, match="reachable"):
        backward_induction(f, 4, y, ImportanceMatrix.ones(4, 4), state_cap=10)


# -- policy replay ---------------------------------------------------------------------


def ns(y, f, theta, t, d):
    return NetworkState(y, f, d, SessionClock(theta, t))


def test_table_scheduler_on_absorbing_state():
    f = StatusMatrix([[0, 0], [0, 0], [0, 0]])
    d = ImportanceMatrix.ones(3, 2)
    sched = mdp_scheduler(backward_induction(f, 2, LINE3, d))
    assert sched(ns(LINE3, f, 2, 1, d)) == ()


def test_table_scheduler_last_stage_single_action():
    y = ConnectivityMatrix([[1, 0.7], [0.7, 1]])
    f = StatusMatrix([[1], [0]])
    d = ImportanceMatrix.ones(2, 1)
    sched = mdp_scheduler(backward_induction(f, 1, y, d))
    assert sched(ns(y, f, 1, 1, d)) == (Vertex(1, 0, 0),)


def test_table_scheduler_start_action_is_optimal():
    f = StatusMatrix([[1, 0], [0, 1], [0, 1]])
    d = ImportanceMatrix([[3.0, 1.0]] * 3)
    table = backward_induction(f, 2, LINE3, d)
    a = mdp_scheduler(table)(ns(LINE3, f, 2, 1, d))
    yl, fl, dl = as_lists(LINE3, f, d)
    r = sum(dl[k][l] * yl[i][k] for i, k, l in a)
    v = r + sum(p * oracles.policy_tree_value(yl, g, dl, 1) for g, p in oracles.outcomes(fl, list(a), yl) if p > 0)
    assert v == pytest.approx(oracles.policy_tree_value(yl, fl, dl, 2), abs=1e-12)


def test_table_scheduler_refuses_foreign_states():
    f = StatusMatrix([[1, 0], [0, 1], [0, 1]])
    d = ImportanceMatrix.ones(3, 2)
    sched = mdp_scheduler(backward_induction(f, 2, LINE3, d))
    with pytest.raises(KeyError):
        sched(ns(LINE3, StatusMatrix([[1, 0], [0, 0], [0, 1]]), 2, 1, d))


def test_lazy_scheduler_agrees_with_table():
    f = StatusMatrix([[1, 0], [0, 1], [0, 1]])
    d = ImportanceMatrix([[3.0, 1.0]] * 3)
    table = backward_induction(f, 3, LINE3, d)
    lazy = MdpScheduler()
    for (key, t), (_, a) in table.entries.items():
        assert lazy(ns(LINE3, table.states[key], 3, t, d)) == a


def test_mdp_collects_at_least_as_much_as_heuristics(line_scm):
    cfg = ScenarioConfig(m=4, theta=4, gop=one_packet_per_layer(), scm=line_scm, seed=3)
    base = monte_carlo(cfg, make_scheduler("mdp"), 400)
    for name in ("tsmis", "pcb", "fcd"):
        other = monte_carlo(cfg, make_scheduler(name), 400)
        se = np.hypot(base.stderr_distortion, other.stderr_distortion)
        assert base.mean_distortion <= other.mean_distortion + 2 * se, name
