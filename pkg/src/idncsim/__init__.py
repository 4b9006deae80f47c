"""Deadline-constrained video dissemination over D2D links with instantly decodable network coding."""
from .errors import ConfigError, ConflictViolation, IdncError, InstanceTooLarge, InvariantViolation, UnreachableDevice
from .graph import (
    IdncGraph,
    Vertex,
    build_graph,
    build_lsm,
    conflict_free_subgraph,
    enumerate_maximal_independent_sets,
    max_weight_independent_set,
    partition_by_criticality,
    validate_conflict_free,
)
from .mdp import MdpScheduler, backward_induction, mdp_scheduler
from .model import (
    ConnectivityMatrix,
    ImportanceMatrix,
    NetworkState,
    SessionClock,
    StatusMatrix,
    connectivity_index,
    critical_set,
    non_critical_set,
)
from .scheduling import completion_cdf, fcd_select, make_scheduler, pcb_select, ts_mis_select
from .simulator import ScenarioConfig, monte_carlo, run_episode
from .video import GopModel, default_gop, one_packet_per_layer, quality_report

__version__ = "0.1.0"
