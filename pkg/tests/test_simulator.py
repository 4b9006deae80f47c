import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idncsim.errors import ConfigError, ConflictViolation
from idncsim.graph import Vertex
from idncsim.model import ConnectivityMatrix, StatusMatrix, connectivity_index
from idncsim.scheduling import make_scheduler
from idncsim.simulator import (
    CHANNEL_STREAM,
    CONNECTIVITY_TOL,
    ScenarioConfig,
    apply_slot,
    generate_scm,
    is_connected,
    monte_carlo,
    run_episode,
    seed_initial_gsm,
    stream,
)
from idncsim.video import GopModel, one_packet_per_layer


def line_cfg(line_scm, **kw):
    return ScenarioConfig(m=4, theta=kw.pop("theta", 5), gop=one_packet_per_layer(), scm=line_scm, **kw)


# -- scenario generation --------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(m=3, theta=-1)
    with pytest.raises(ConfigError):
        ScenarioConfig(m=3, theta=2, reception_range=(0.9, 0.6))
    with pytest.raises(ConfigError):
        ScenarioConfig(m=3, theta=2, side_info_range=(0.5, 1.0))
    with pytest.raises(ConfigError):
        ScenarioConfig(m=3, theta=2, target_connectivity=0)


def test_full_mesh_target():
    cfg = ScenarioConfig(m=6, theta=3, target_connectivity=0.85)
    y = generate_scm(cfg, stream(1, 0))
    off = y.y[~np.eye(6, dtype=bool)]
    assert (off >= 0.65).all() and (off <= 0.9).all()


def test_two_devices_get_one_link():
    y = generate_scm(ScenarioConfig(m=2, theta=3, target_connectivity=0.9), stream(4, 0))
    assert y.y[0, 1] > 0 and is_connected(y)


@pytest.mark.parametrize("target", [0.3, 0.5, 0.8])
def test_generated_topologies_are_valid(target):
    for m in (8, 15):
        cfg = ScenarioConfig(m=m, theta=3, target_connectivity=target)
        for seed in range(500 // 6 + 1):
            y = generate_scm(cfg, stream(seed, 0))
            assert is_connected(y)
            assert abs(connectivity_index(y) - target) <= CONNECTIVITY_TOL
            off = y.y[y.links & ~np.eye(m, dtype=bool)]
            assert ((off >= 0.65) & (off <= 0.9)).all()


def test_unreachable_target():
    with pytest.raises(ConfigError, match="unreachable"):
        generate_scm(ScenarioConfig(m=4, theta=3, target_connectivity=0.1), stream(0, 0))


def test_four_packets_give_two_each():
    cfg = ScenarioConfig(m=5, theta=3, gop=one_packet_per_layer())
    for seed in range(50):
        f = seed_initial_gsm(cfg, None, stream(seed, 1, 0))
        held = (f.f == 0).sum(axis=1)
        assert (held >= 2).all()
        assert held.sum() - 2 * 5 <= 4  # extra holdings only come from repairs


@given(st.integers(0, 2**32), st.integers(2, 12))
def test_every_packet_is_seeded_somewhere(seed, m):
    cfg = ScenarioConfig(m=m, theta=3)
    f = seed_initial_gsm(cfg, None, stream(seed, 1, 0))
    assert (f.f == 0).any(axis=0).all()
    held = (f.f == 0).sum(axis=1)
    assert (held >= math.ceil(0.45 * 17)).all()
    # repair adds at most one packet per uncovered column
    assert held.sum() <= m * math.floor(0.55 * 17) + 17


def test_side_information_is_reproducible():
    cfg = ScenarioConfig(m=6, theta=3)
    a = seed_initial_gsm(cfg, None, stream(9, 1, 0))
    b = seed_initial_gsm(cfg, None, stream(9, 1, 0))
    assert a == b


# -- channel ---------------------------------------------------------------------------


def test_perfect_and_dead_links():
    y = ConnectivityMatrix([[1, 1.0, 0], [1.0, 1, 0], [0, 0, 1]])
    f = StatusMatrix([[1, 0], [0, 1], [0, 0]])
    f2, out = apply_slot(f, (Vertex(1, 0, 0),), y, stream(0, 2, 0))
    assert out == (True,) and f2.f[0, 0] == 0
    f3, out = apply_slot(f, (Vertex(2, 1, 1),), y, stream(0, 2, 0))
    assert out == (False,) and f3 == f


def test_empirical_success_rate():
    y = ConnectivityMatrix([[1, 0.7], [0.7, 1]])
    f = StatusMatrix([[1], [0]])
    rng = stream(5, CHANNEL_STREAM, 0)
    n = 100_000
    hits = sum(apply_slot(f, (Vertex(1, 0, 0),), y, rng)[1][0] for _ in range(n))
    assert abs(hits / n - 0.7) <= 3 * math.sqrt(0.7 * 0.3 / n)


# -- episodes ---------------------------------------------------------------------------


def test_zero_deadline_episode(line_scm):
    tr = run_episode(line_cfg(line_scm, theta=0), make_scheduler("tsmis"))
    assert tr.slots == () and tr.final_distortion == tr.initial_distortion


def test_perfect_pair_finishes_in_one_slot():
    y = ConnectivityMatrix([[1, 1.0], [1.0, 1]])
    cfg = ScenarioConfig(m=2, theta=3, gop=GopModel((1,), (20.0, 30.0)), scm=y, gsm=StatusMatrix([[1], [0]]))
    tr = run_episode(cfg, make_scheduler("tsmis"))
    assert len(tr.slots) == 1 and tr.final.complete()


def test_bad_scheduler_aborts_with_a_report(line_scm, line_gsm):
    cfg = ScenarioConfig(m=4, theta=2, gop=GopModel((1, 1, 1), (20, 28, 31, 35.64)), scm=line_scm, gsm=line_gsm)
    with pytest.raises(ConflictViolation, match="C5"):
        run_episode(cfg, lambda state: (Vertex(0, 1, 2), Vertex(1, 0, 0)))


@pytest.mark.parametrize("name", ["tsmis", "pcb", "fcd", "mdp"])
def test_trajectories_are_monotone(line_scm, name):
    cfg = line_cfg(line_scm, theta=6, seed=17)
    _, trs = monte_carlo(cfg, make_scheduler(name), 250, keep_transcripts=True)
    for tr in trs:
        d = [float(np.mean(tr.initial_distortion))] + [s.mean_distortion for s in tr.slots]
        assert all(b <= a + 1e-12 for a, b in zip(d, d[1:]))
        assert len(tr.slots) <= cfg.theta
        for s in tr.slots:
            assert not {v.tx for v in s.decision} & {v.rx for v in s.decision}


def test_random_scenarios_keep_invariants():
    for seed in range(8):
        cfg = ScenarioConfig(m=8, theta=19, target_connectivity=0.5, seed=seed)
        for name in ("tsmis", "pcb", "fcd"):
            monte_carlo(cfg, make_scheduler(name), 5)  # always-on checks raise on violation


def test_common_random_numbers(line_scm):
    cfg = line_cfg(line_scm, seed=4)
    a = run_episode(cfg, make_scheduler("tsmis"), 3)
    b = run_episode(cfg, make_scheduler("fcd"), 3)
    assert a.initial == b.initial


# -- aggregation ------------------------------------------------------------------------


def test_single_run_aggregate(line_scm):
    cfg = line_cfg(line_scm, seed=8)
    res = monte_carlo(cfg, make_scheduler("pcb"), 1)
    tr = run_episode(cfg, make_scheduler("pcb"), 0)
    assert res.mean_psnr == tr.mean_psnr and res.mean_distortion == tr.mean_distortion
    assert res.std_psnr == 0


def test_histogram_counts_every_device(line_scm):
    res = monte_carlo(line_cfg(line_scm, seed=8), make_scheduler("pcb"), 40)
    assert sum(c for _, c in res.psnr_histogram) == 40 * 4
    assert res.min_psnr <= res.mean_psnr <= res.max_psnr


def test_same_seed_same_bytes(line_scm):
    a = monte_carlo(line_cfg(line_scm, seed=21), make_scheduler("tsmis"), 60).dumps()
    b = monte_carlo(line_cfg(line_scm, seed=21), make_scheduler("tsmis"), 60).dumps()
    assert a == b


def test_standard_error_shrinks_with_runs(line_scm):
    cfg = line_cfg(line_scm, theta=3, seed=12)
    small = monte_carlo(cfg, make_scheduler("tsmis"), 100)
    large = monte_carlo(cfg, make_scheduler("tsmis"), 10_000)
    ratio = small.stderr_psnr / large.stderr_psnr
    assert 10 / 2 <= ratio <= 10 * 2
