import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idncsim.errors import ConfigError, UnreachableDevice
from idncsim.model import (
    ConnectivityMatrix,
    ImportanceMatrix,
    SessionClock,
    StatusMatrix,
    average_erasure,
    connectivity_index,
    coverage_zone,
    critical_set,
    has_set,
    individual_distortion,
    non_critical_set,
    offdiagonal_connectivity,
    wants_set,
)

from conftest import instances


# -- validation ------------------------------------------------------------------


def test_asymmetric_scm_names_the_pair():
    with pytest.raises(ConfigError, match=r"\(R1, R3\)"):
        ConnectivityMatrix([[1, 0, 0.5], [0, 1, 0], [0.4, 0, 1]])


@pytest.mark.parametrize(
    "y",
    [[[0.9, 0.5], [0.5, 1]], [[1, 1.2], [1.2, 1]], [[1, -0.1], [-0.1, 1]], [[1, 0.5, 0.5]]],
)
def test_scm_rejects_bad_entries(y):
    with pytest.raises(ConfigError):
        ConnectivityMatrix(y)


def test_gsm_requires_every_packet_somewhere():
    with pytest.raises(ConfigError, match=r"\[2\]"):
        StatusMatrix([[0, 1], [1, 1]])
    with pytest.raises(ConfigError):
        StatusMatrix([[0, 2], [1, 0]])


def test_clock_bounds():
    assert SessionClock(5, 5).remaining == 1
    assert SessionClock(5, 1).remaining == 5
    with pytest.raises(ConfigError):
        SessionClock(3, 4)
    with pytest.raises(ConfigError):
        SessionClock(0, 1)


def test_importance_rejects_negative():
    with pytest.raises(ConfigError):
        ImportanceMatrix([[1.0, -0.1]])


def test_json_round_trips(line_scm, line_gsm):
    assert ConnectivityMatrix.from_json(line_scm.to_json()).key() == line_scm.key()
    assert StatusMatrix.from_json(line_gsm.to_json()) == line_gsm
    d = ImportanceMatrix([[0.5, 0.3, 0.2]])
    assert ImportanceMatrix.from_json(d.to_json()).key() == d.key()


def test_matrices_are_immutable(line_gsm):
    with pytest.raises(ValueError):
        line_gsm.f[0, 0] = 0


# -- Has / Wants -----------------------------------------------------------------


def test_has_and_wants_of_example(line_gsm):
    assert has_set(line_gsm, 0) == {2}
    assert wants_set(line_gsm, 0) == {0, 1}
    assert wants_set(line_gsm, 2) == {2}


def test_full_and_empty_rows():
    f = StatusMatrix([[0, 0, 0], [1, 1, 1]])
    assert has_set(f, 0) == {0, 1, 2} and wants_set(f, 0) == set()
    assert has_set(f, 1) == set() and wants_set(f, 1) == {0, 1, 2}


def test_out_of_range_device(line_gsm):
    with pytest.raises(IndexError):
        has_set(line_gsm, 4)


@given(instances())
def test_has_wants_partition(inst):
    _, f = inst
    for k in range(f.m):
        h, w = has_set(f, k), wants_set(f, k)
        assert not h & w and h | w == set(range(f.n))


# -- coverage / criticality --------------------------------------------------------


def test_coverage_zone_line(line_scm):
    assert coverage_zone(line_scm, 0) == {0, 1}
    assert coverage_zone(line_scm, 2) == {1, 2, 3}


def test_coverage_zone_full_mesh():
    y = np.full((5, 5), 0.7)
    np.fill_diagonal(y, 1)
    assert coverage_zone(ConnectivityMatrix(y), 3) == set(range(5))


def test_critical_split_with_two_slots_left(line_gsm):
    clock = SessionClock(2, 1)
    assert critical_set(line_gsm, clock) == {0, 1, 3}
    assert non_critical_set(line_gsm, clock) == {2}


def test_long_deadline_has_no_critical_devices(line_gsm):
    assert critical_set(line_gsm, SessionClock(4, 1)) == set()


def test_last_slot_makes_everyone_critical(line_gsm):
    clock = SessionClock(4, 4)
    assert critical_set(line_gsm, clock) == {0, 1, 2, 3}
    assert non_critical_set(line_gsm, clock) == set()


@given(instances(), st.integers(1, 6))
def test_critical_partition(inst, q):
    _, f = inst
    clock = SessionClock.with_remaining(q)
    c, a = critical_set(f, clock), non_critical_set(f, clock)
    wanting = {k for k in range(f.m) if wants_set(f, k)}
    assert not c & a and c | a == wanting


# -- distortion ------------------------------------------------------------------


def test_individual_distortion_examples(line_gsm):
    d = ImportanceMatrix([[0.5, 0.3, 0.2]] * 4)
    assert individual_distortion(line_gsm, d, 0) == pytest.approx(0.8)
    ones = ImportanceMatrix.ones(4, 3)
    assert [individual_distortion(line_gsm, ones, k) for k in range(4)] == [2, 2, 1, 2]
    assert individual_distortion(StatusMatrix([[0, 0, 0]]), ImportanceMatrix([[1, 2, 3]]), 0) == 0


@given(instances(), st.data())
def test_distortion_monotone_under_reception(inst, data):
    _, f = inst
    d = ImportanceMatrix(np.arange(f.m * f.n, dtype=float).reshape(f.m, f.n) / 7)
    k = data.draw(st.integers(0, f.m - 1))
    missing = sorted(wants_set(f, k))
    if missing:
        l = data.draw(st.sampled_from(missing))
        assert individual_distortion(f.cleared([(k, l)]), d, k) <= individual_distortion(f, d, k)


# -- erasure / connectivity ----------------------------------------------------------


def test_average_erasure_line(line_scm):
    assert average_erasure(line_scm, 0) == pytest.approx(0.16)
    assert average_erasure(line_scm, 2) == pytest.approx(0.17)


def test_average_erasure_perfect_channels():
    assert average_erasure(ConnectivityMatrix(np.ones((3, 3))), 1) == 0


def test_isolated_device_is_unreachable():
    with pytest.raises(UnreachableDevice):
        average_erasure(ConnectivityMatrix(np.eye(2)), 0)


def test_connectivity_index_line(line_scm):
    assert connectivity_index(line_scm) == pytest.approx((4 + 2 * (0.84 + 0.75 + 0.91)) / 16)


def test_connectivity_index_identity():
    assert connectivity_index(ConnectivityMatrix(np.eye(5))) == pytest.approx(1 / 5)


def test_connectivity_index_full_mesh_counts_the_diagonal():
    # the literal formula is p + (1 - p) / M for a mesh of uniform p, not p
    m, p = 6, 0.8
    y = np.full((m, m), p)
    np.fill_diagonal(y, 1)
    y = ConnectivityMatrix(y)
    assert connectivity_index(y) == pytest.approx(p + (1 - p) / m)
    assert offdiagonal_connectivity(y) == pytest.approx(p)


@given(instances())
def test_erasure_and_connectivity_are_probabilities(inst):
    y, _ = inst
    assert 0 <= connectivity_index(y) <= 1
    for k in range(y.m):
        if y.links[k].sum() > 1:  # has a neighbour besides itself
            assert 0 <= average_erasure(y, k) <= 1
