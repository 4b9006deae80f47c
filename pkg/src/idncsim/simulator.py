"""Seeded episode engine and Monte-Carlo aggregation.

Randomness comes from counter-based Philox streams derived from one master
seed, one stream per purpose:

* ``(0,)``           scenario topology (SCM)
* ``(1, episode)``   phase-1 side information (initial GSM)
* ``(2, episode)``   channel draws, one M x M uniform matrix per slot

Channel draws are consumed identically whatever the scheduler decides, so
schedulers run with the same seed see common random numbers: the same
initial holdings and the same link outcomes slot by slot.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, ConflictViolation, check
from .graph import IdncGraph, Vertex, build_graph, validate_conflict_free
from .model import (
    ConnectivityMatrix,
    ImportanceMatrix,
    NetworkState,
    SessionClock,
    StatusMatrix,
    connectivity_index,
    distortions,
)
from .video import GopModel, default_gop, importance_matrix, quality_report

SCENARIO_STREAM, SIDE_INFO_STREAM, CHANNEL_STREAM = 0, 1, 2
CONNECTIVITY_TOL = 0.02
_SMALL_GRAPH = 64  # graphs and decisions are memoised only below this size


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class ScenarioConfig:
    m: int
    theta: int
    gop: GopModel = field(default_factory=default_gop)
    target_connectivity: float = 0.5
    reception_range: tuple[float, float] = (0.65, 0.9)
    side_info_range: tuple[float, float] = (0.45, 0.55)
    seed: int = 0
    scm: ConnectivityMatrix | None = None
    gsm: StatusMatrix | None = None
    importance: ImportanceMatrix | None = None

    def __post_init__(self):
        lo, hi = self.reception_range
        if not 0 < lo <= hi <= 1:
            raise ConfigError(f"reception_range must satisfy 0 < lo <= hi <= 1, got {self.reception_range}")
        a, b = self.side_info_range
        if not 0 < a <= b < 1:
            raise ConfigError(f"side_info_range must lie in (0, 1) with lo <= hi, got {self.side_info_range}")
        if self.theta < 0:
            raise ConfigError(f"theta must be nonnegative, got {self.theta}")
        if self.m < 1:
            raise ConfigError("need at least one device")
        if not 0 < self.target_connectivity <= 1:
            raise ConfigError(f"target connectivity must lie in (0, 1], got {self.target_connectivity}")
        if self.scm is not None and self.scm.m != self.m:
            raise ConfigError(f"explicit SCM has {self.scm.m} devices, config says {self.m}")
        if self.gsm is not None and self.gsm.f.shape != (self.m, self.gop.n):
            raise ConfigError(f"explicit GSM has shape {self.gsm.f.shape}, expected {(self.m, self.gop.n)}")
        if self.importance is not None and self.importance.delta.shape != (self.m, self.gop.n):
            raise ConfigError(f"importance matrix has shape {self.importance.delta.shape}")

    @property
    def n(self) -> int:
        return self.gop.n

    def importance_matrix(self) -> ImportanceMatrix:
        return self.importance if self.importance is not None else importance_matrix(self.gop, self.m)

    def with_(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)


# -- scenario generation ------------------------------------------------------------


def generate_scm(cfg: ScenarioConfig, rng: np.random.Generator, attempts: int = 200) -> ConnectivityMatrix:
    """Random connected topology whose connectivity index is within 0.02 of the target.

    Starts from a random spanning tree and adds random links until the index
    reaches the target band.
    """
    m, target = cfg.m, cfg.target_connectivity
    lo, hi = cfg.reception_range
    if m == 1:
        return ConnectivityMatrix(np.ones((1, 1)))
    floor_ci = (m + 2 * (m - 1) * lo) / m**2
    ceil_ci = (m + m * (m - 1) * hi) / m**2
    if floor_ci > target + CONNECTIVITY_TOL or ceil_ci < target - CONNECTIVITY_TOL:
        raise ConfigError(
            f"target connectivity {target} is unreachable for M = {m} with reception range "
            f"{cfg.reception_range} (achievable [{floor_ci:.3f}, {ceil_ci:.3f}])"
        )
    for _ in range(attempts):
        y = np.eye(m)
        order = rng.permutation(m)
        for j in range(1, m):
            a, b = order[j], order[rng.integers(j)]
            y[a, b] = y[b, a] = rng.uniform(lo, hi)
        total = y.sum()
        if total / m**2 > target + CONNECTIVITY_TOL:
            continue
        free = [(i, k) for i in range(m) for k in range(i + 1, m) if y[i, k] == 0]
        for idx in rng.permutation(len(free)):
            if total / m**2 >= target - CONNECTIVITY_TOL:
                break
            i, k = free[idx]
            y[i, k] = y[k, i] = rng.uniform(lo, hi)
            total += 2 * y[i, k]
        if abs(total / m**2 - target) <= CONNECTIVITY_TOL:
            return ConnectivityMatrix(y)
    raise ConfigError(f"could not hit connectivity {target} +/- {CONNECTIVITY_TOL} for M = {m}")


def is_connected(y: ConnectivityMatrix) -> bool:
    seen = {0}
    todo = [0]
    links = y.links
    while todo:
        i = todo.pop()
        for k in np.flatnonzero(links[i]):
            if int(k) not in seen:
                seen.add(int(k))
                todo.append(int(k))
    return len(seen) == y.m


def seed_initial_gsm(cfg: ScenarioConfig, y: ConnectivityMatrix | None, rng: np.random.Generator) -> StatusMatrix:
    """Phase-1 holdings: each device keeps a random 45-55% of the packets."""
    m, n = cfg.m, cfg.n
    a, b = cfg.side_info_range
    low = math.ceil(a * n)
    high = max(low, math.floor(b * n))
    f = np.ones((m, n), dtype=np.uint8)
    for k in range(m):
        size = int(rng.integers(low, high + 1))
        f[k, rng.choice(n, size=size, replace=False)] = 0
    for l in np.flatnonzero(f.all(axis=0)):
        f[rng.integers(m), l] = 0
    return StatusMatrix(f)


# -- one slot, one episode ---------------------------------------------------------------


def apply_slot(f: StatusMatrix, kappa, y: ConnectivityMatrix, rng: np.random.Generator):
    """Send every vertex of ``kappa`` through its Bernoulli erasure link.

    Draws one uniform per ordered device pair whatever ``kappa`` is, so the
    channel stream stays aligned across schedulers.
    """
    u = rng.random((y.m, y.m))
    outcomes = tuple(bool(u[v.tx, v.rx] < y.y[v.tx, v.rx]) for v in kappa)
    got = [(v.rx, v.pkt) for v, ok in zip(kappa, outcomes) if ok]
    return (f.cleared(got) if got else f), outcomes


def digest(f: StatusMatrix) -> str:
    return hashlib.sha1(f.key() + bytes(f.f.shape)).hexdigest()[:12]


@dataclass(frozen=True)
class SlotRecord:
    t: int
    decision: tuple[Vertex, ...]
    outcomes: tuple[bool, ...]
    status_digest: str
    mean_distortion: float

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "decision": [v.label() for v in self.decision],
            "received": list(self.outcomes),
            "gsm": self.status_digest,
            "mean_distortion": round(self.mean_distortion, 12),
        }


@dataclass(frozen=True)
class EpisodeTranscript:
    episode: int
    initial: StatusMatrix
    final: StatusMatrix
    slots: tuple[SlotRecord, ...]
    initial_distortion: tuple[float, ...]
    final_distortion: tuple[float, ...]
    final_prefix: tuple[int, ...]
    final_psnr: tuple[float, ...]

    @property
    def mean_distortion(self) -> float:
        return float(np.mean(self.final_distortion))

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.final_psnr))

    def to_json(self) -> dict:
        return {
            "episode": self.episode,
            "initial_gsm": self.initial.to_json()["f"],
            "slots": [s.to_json() for s in self.slots],
            "final_distortion": [round(d, 12) for d in self.final_distortion],
            "final_psnr": list(self.final_psnr),
            "mean_psnr": round(self.mean_psnr, 12),
        }


class _Memo:
    """Per-instance caches for graphs and deterministic scheduler decisions."""

    def __init__(self, maxsize: int = 200_000):
        self.graphs: dict = {}
        self.decisions: dict = {}
        self.maxsize = maxsize

    def graph(self, y: ConnectivityMatrix, f: StatusMatrix) -> IdncGraph:
        g = self.graphs.get(f.key())
        if g is None:
            g = build_graph(y, f)
            if len(g) <= _SMALL_GRAPH and len(self.graphs) < self.maxsize:
                self.graphs[f.key()] = g
        return g


def run_episode(
    cfg: ScenarioConfig,
    scheduler: Callable,
    episode: int = 0,
    y: ConnectivityMatrix | None = None,
    memo: _Memo | None = None,
) -> EpisodeTranscript:
    if y is None:
        y = scenario_scm(cfg)
    delta = cfg.importance_matrix()
    memo = memo if memo is not None else _Memo()
    f0 = cfg.gsm if cfg.gsm is not None else seed_initial_gsm(cfg, y, stream(cfg.seed, SIDE_INFO_STREAM, episode))
    channel = stream(cfg.seed, CHANNEL_STREAM, episode)

    f = f0
    d = distortions(f, delta)
    d0 = d
    gained = np.zeros(cfg.m)
    slots = []
    for t in range(1, cfg.theta + 1):
        if f.complete():
            break
        clock = SessionClock(cfg.theta, t)
        g = memo.graph(y, f)
        if len(g) == 0:
            break  # nobody can serve anybody, so the state is frozen
        key = (f.key(), clock.remaining)
        kappa = memo.decisions.get(key)
        if kappa is None:
            state = NetworkState(y, f, delta, clock).with_graph(g)
            kappa = tuple(sorted(scheduler(state)))
            if len(g) <= _SMALL_GRAPH and len(memo.decisions) < memo.maxsize:
                memo.decisions[key] = kappa
        report = validate_conflict_free(kappa, g)
        if not report.ok:
            raise ConflictViolation(report)
        senders = {v.tx for v in kappa}
        check(not senders & {v.rx for v in kappa}, f"slot {t}: a device both transmits and receives")

        f_next, outcomes = apply_slot(f, kappa, y, channel)
        check(bool(np.all(f_next.f <= f.f)), f"slot {t}: a received packet was lost again")
        d_next = distortions(f_next, delta)
        check(bool(np.all(d_next <= d + 1e-12)), f"slot {t}: distortion increased")
        for v, ok in zip(kappa, outcomes):
            if ok:
                gained[v.rx] += delta.delta[v.rx, v.pkt]
        slots.append(SlotRecord(t, kappa, outcomes, digest(f_next), float(d_next.mean())))
        f, d = f_next, d_next

    check(bool(np.allclose(d, d0 - gained, atol=1e-9)), "final distortion differs from initial minus realised gains")
    q = quality_report(cfg.gop, f)
    return EpisodeTranscript(
        episode=episode,
        initial=f0,
        final=f,
        slots=tuple(slots),
        initial_distortion=tuple(float(x) for x in d0),
        final_distortion=tuple(float(x) for x in d),
        final_prefix=q.prefix,
        final_psnr=q.psnr,
    )


def scenario_scm(cfg: ScenarioConfig) -> ConnectivityMatrix:
    if cfg.scm is not None:
        return cfg.scm
    return generate_scm(cfg, stream(cfg.seed, SCENARIO_STREAM))


# -- aggregation ----------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateResult:
    runs: int
    mean_distortion: float
    std_distortion: float
    mean_psnr: float
    std_psnr: float
    psnr_histogram: tuple[tuple[float, int], ...]
    min_psnr: float
    max_psnr: float

    @property
    def stderr_psnr(self) -> float:
        return self.std_psnr / math.sqrt(self.runs)

    @property
    def stderr_distortion(self) -> float:
        return self.std_distortion / math.sqrt(self.runs)

    def to_json(self) -> dict:
        return {
            "runs": self.runs,
            "mean_distortion": self.mean_distortion,
            "std_distortion": self.std_distortion,
            "mean_psnr": self.mean_psnr,
            "std_psnr": self.std_psnr,
            "psnr_histogram": [[p, c] for p, c in self.psnr_histogram],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def aggregate(transcripts, gop: GopModel) -> AggregateResult:
    dist = np.array([t.mean_distortion for t in transcripts])
    psnr = np.array([t.mean_psnr for t in transcripts])
    counts = np.zeros(gop.layers + 1, dtype=int)
    for t in transcripts:
        for p in t.final_prefix:
            counts[p] += 1
    ddof = 1 if len(transcripts) > 1 else 0
    return AggregateResult(
        runs=len(transcripts),
        mean_distortion=float(dist.mean()),
        std_distortion=float(dist.std(ddof=ddof)),
        mean_psnr=float(psnr.mean()),
        std_psnr=float(psnr.std(ddof=ddof)),
        psnr_histogram=tuple((gop.psnr_table[i], int(c)) for i, c in enumerate(counts)),
        min_psnr=float(psnr.min()),
        max_psnr=float(psnr.max()),
    )


def monte_carlo(
    cfg: ScenarioConfig,
    scheduler: Callable,
    runs: int,
    keep_transcripts: bool = False,
    on_episode: Callable[[EpisodeTranscript], None] | None = None,
):
    """Run ``runs`` seeded episodes; episode e always uses streams keyed by e.

    Returns the aggregate, plus the transcripts when ``keep_transcripts``.
    """
    if runs < 1:
        raise ConfigError("runs must be at least 1")
    y = scenario_scm(cfg)
    memo = _Memo()
    finals = []
    kept = []
    for e in range(runs):
        tr = run_episode(cfg, scheduler, e, y, memo)
        if on_episode is not None:
            on_episode(tr)
        if keep_transcripts:
            kept.append(tr)
        finals.append(_Final(tr.mean_distortion, tr.mean_psnr, tr.final_prefix))
    result = aggregate(finals, cfg.gop)
    return (result, kept) if keep_transcripts else result


@dataclass(frozen=True)
class _Final:
    mean_distortion: float
    mean_psnr: float
    final_prefix: tuple[int, ...]


def describe_scm(y: ConnectivityMatrix) -> str:
    return f"M = {y.m}, connectivity index {connectivity_index(y):.4f}"
