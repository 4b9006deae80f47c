"""Command-line front end.

Subcommands
-----------
graph-dump   print vertices, tagged edges and every maximal independent set
run          Monte-Carlo evaluation of one or more schedulers, CSV out
sweep        the same over one axis (theta, connectivity or devices), CSV out
mdp-solve    exact optimal value and first action for one start state

CSV columns, in this order:
sweep_variable,scheduler,runs,mean_psnr,std_psnr,mean_distortion

``sweep_variable`` is ``axis=value`` (``-`` for ``run``). Floats are printed
with six decimals, so repeated invocations with one seed are byte-identical.

Exit codes: 0 ok, 2 configuration error, 3 size guard exceeded,
4 invariant violation or internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ConflictViolation, IdncError, InstanceTooLarge, InvariantViolation, UnreachableDevice
from .graph import build_graph, enumerate_maximal_independent_sets
from .mdp import DEFAULT_STATE_CAP, MdpSolver
from .model import ConnectivityMatrix, ImportanceMatrix, StatusMatrix
from .scheduling import SCHEDULERS, STRATEGIES, make_scheduler
from .simulator import SIDE_INFO_STREAM, ScenarioConfig, monte_carlo, scenario_scm, seed_initial_gsm, stream
from .video import GopModel, default_gop

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_INVARIANT = 0, 2, 3, 4
CSV_HEADER = ("sweep_variable", "scheduler", "runs", "mean_psnr", "std_psnr", "mean_distortion")
AXES = ("theta", "connectivity", "devices")
SCHEDULER_NAMES = (*SCHEDULERS, "mdp")


# -- config ------------------------------------------------------------------------


def load_json(path) -> object:
    """Parse a JSON file; syntax errors quote the offending line."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        lines = text.splitlines()
        line = lines[e.lineno - 1] if 0 < e.lineno <= len(lines) else ""
        raise ConfigError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}\n    {line}\n    {' ' * (e.colno - 1)}^"
        ) from None


def _matrix(data, key: str):
    return data if isinstance(data, list) else data[key]


def parse_theta(value, n: int) -> int:
    """An integer, or ``"N+k"`` / ``"N-k"`` relative to the packet count."""
    if isinstance(value, bool):
        raise ConfigError(f"theta must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    text = str(value).strip()
    if re.fullmatch(r"\d+", text):
        return int(text)
    m = re.fullmatch(r"N\s*(?:([+-])\s*(\d+))?", text)
    if not m:
        raise ConfigError(f"theta must be an integer or 'N+k', got {value!r}")
    k = int(m.group(2) or 0)
    return n + k if m.group(1) != "-" else n - k


def scenario_from_json(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    known = {"m", "theta", "gop", "target_connectivity", "reception_range", "side_info_range", "seed", "scm", "gsm", "importance"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown scenario field(s): {', '.join(unknown)}")
    try:
        gop = GopModel.from_json(data["gop"]) if "gop" in data else default_gop()
        scm = ConnectivityMatrix(_matrix(data["scm"], "y")) if "scm" in data else None
        gsm = StatusMatrix(_matrix(data["gsm"], "f")) if "gsm" in data else None
        imp = ImportanceMatrix(_matrix(data["importance"], "delta")) if "importance" in data else None
        m = data.get("m", scm.m if scm is not None else None)
        if m is None:
            raise ConfigError("scenario needs 'm' (or an explicit 'scm')")
        kw = dict(m=int(m), theta=parse_theta(data.get("theta", "N"), gop.n), gop=gop, scm=scm, gsm=gsm, importance=imp)
        for key in ("target_connectivity", "seed"):
            if key in data:
                kw[key] = data[key]
        for key in ("reception_range", "side_info_range"):
            if key in data:
                kw[key] = tuple(data[key])
        return ScenarioConfig(**kw)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed scenario: {e}") from None


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    schedulers: list[str] = field(default_factory=lambda: ["tsmis"])
    axis: str | None = None
    values: list = field(default_factory=list)
    runs: int = 100
    out: str | None = None
    strategy: str = "auto"
    exact_limit: int = 20
    state_cap: int = DEFAULT_STATE_CAP
    dump_transcripts: str | None = None

    def validate(self) -> None:
        bad = [s for s in self.schedulers if s not in SCHEDULER_NAMES]
        if not self.schedulers or bad:
            raise ConfigError(f"unknown scheduler(s) {bad}; choose from {', '.join(SCHEDULER_NAMES)}")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.axis is not None:
            if self.axis not in AXES:
                raise ConfigError(f"sweep axis must be one of {', '.join(AXES)}, got {self.axis!r}")
            if not self.values:
                raise ConfigError("sweep needs at least one value")
            if any(b <= a for a, b in zip(self.values, self.values[1:])):
                raise ConfigError(f"sweep values must be strictly increasing, got {self.values}")
            if self.axis in ("connectivity", "devices") and self.scenario.scm is not None:
                raise ConfigError(f"cannot sweep {self.axis} with an explicit SCM")
            if self.axis == "devices" and (self.scenario.gsm is not None or self.scenario.importance is not None):
                raise ConfigError("cannot sweep devices with an explicit GSM or importance matrix")

    def scheduler(self, name: str):
        if name == "mdp":
            return make_scheduler("mdp", state_cap=self.state_cap)
        return make_scheduler(name, strategy=self.strategy, exact_limit=self.exact_limit)


def spec_from_json(data: dict) -> ExperimentSpec:
    if not isinstance(data, dict) or "scenario" not in data:
        raise ConfigError("config must be a JSON object with a 'scenario' field")
    spec = ExperimentSpec(scenario_from_json(data["scenario"]))
    if "schedulers" in data:
        spec.schedulers = list(data["schedulers"])
    if "sweep" in data:
        spec.axis, spec.values = data["sweep"].get("axis"), list(data["sweep"].get("values", []))
    for key in ("runs", "out", "strategy", "exact_limit", "state_cap", "dump_transcripts"):
        if key in data:
            setattr(spec, key, data[key])
    return spec


def parse_sweep(text: str) -> tuple[str, list]:
    axis, sep, vals = text.partition("=")
    if not sep or not vals:
        raise ConfigError(f"--sweep expects axis=v1,v2,..., got {text!r}")
    return axis.strip(), [v.strip() for v in vals.split(",")]


def _axis_values(axis: str, raw: list, n: int) -> list:
    try:
        if axis == "connectivity":
            return [float(v) for v in raw]
        if axis == "devices":
            return [int(v) for v in raw]
        return [parse_theta(v if isinstance(v, int) else str(v), n) for v in raw]
    except ValueError:
        raise ConfigError(f"bad value in sweep over {axis}: {raw}") from None


def cell_config(base: ScenarioConfig, axis: str | None, value) -> ScenarioConfig:
    if axis is None:
        return base
    if axis == "theta":
        return base.with_(theta=value)
    if axis == "connectivity":
        return base.with_(target_connectivity=value)
    return base.with_(m=value)


def _fmt_value(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


# -- commands ------------------------------------------------------------------------


def graph_report(y: ConnectivityMatrix, f: StatusMatrix) -> str:
    g = build_graph(y, f)
    if len(g) == 0:
        return "empty graph\n"
    vs = g.vertices
    lines = [f"vertices ({len(vs)}):"]
    lines += [f"  {v.label()}" for v in vs]
    edges = g.edges()
    lines.append(f"edges ({len(edges)}):")
    lines += [f"  {vs[u].label()} -- {vs[v].label()}  {tag}" for u, v, tag in edges]
    sets = enumerate_maximal_independent_sets(g)
    lines.append(f"maximal independent sets ({len(sets)}):")
    lines += [f"  k{i} = {{{', '.join(vs[v].label() for v in s)}}}" for i, s in enumerate(sets, start=1)]
    return "\n".join(lines) + "\n"


def _instance(args, spec: ExperimentSpec | None) -> tuple[ConnectivityMatrix, StatusMatrix]:
    if args.scm or args.gsm:
        if not (args.scm and args.gsm):
            raise ConfigError("--scm and --gsm must be given together")
        return (
            ConnectivityMatrix(_matrix(load_json(args.scm), "y")),
            StatusMatrix(_matrix(load_json(args.gsm), "f")),
        )
    if spec is None:
        raise ConfigError("give --config or both --scm and --gsm")
    cfg = spec.scenario
    y = scenario_scm(cfg)
    f = cfg.gsm if cfg.gsm is not None else seed_initial_gsm(cfg, y, stream(cfg.seed, SIDE_INFO_STREAM, 0))
    return y, f


def cmd_graph_dump(args, spec, out) -> int:
    y, f = _instance(args, spec)
    out.write(graph_report(y, f))
    return EXIT_OK


def cmd_mdp_solve(args, spec, out) -> int:
    y, f = _instance(args, spec)
    if spec is not None:
        cfg = spec.scenario
        theta, delta, cap = cfg.theta, cfg.importance_matrix(), spec.state_cap
    else:
        theta, delta, cap = args.theta, ImportanceMatrix.ones(f.m, f.n), DEFAULT_STATE_CAP
    if args.theta is not None:
        theta = args.theta
    if theta is None:
        raise ConfigError("mdp-solve needs a deadline: --theta or a config")
    if delta.delta.shape != f.f.shape:
        raise ConfigError(f"importance matrix has shape {delta.delta.shape}, GSM has {f.f.shape}")
    table = MdpSolver(y, delta, state_cap=cap).solve(f, theta)
    first = table.action(f, 1) if theta > 0 else ()
    out.write(f"V* = {table.start_value:.12f}\n")
    out.write(f"first action = {{{', '.join(v.label() for v in first)}}}\n")
    out.write(f"reachable states = {table.reachable_states}\n")
    out.write(f"reachable (state, stage) pairs = {table.reachable_pairs}\n")
    return EXIT_OK


def run_cells(spec: ExperimentSpec, values: list) -> list[tuple]:
    """One row per (axis value, scheduler); every scheduler in a cell sees the same seeds."""
    rows = []
    dump = open(spec.dump_transcripts, "w") if spec.dump_transcripts else None
    try:
        for value in values:
            cfg = cell_config(spec.scenario, spec.axis, value)
            label = f"{spec.axis}={_fmt_value(value)}" if spec.axis else "-"
            for name in spec.schedulers:
                hook = None
                if dump is not None:
                    def hook(tr, _name=name, _label=label):
                        dump.write(json.dumps({"cell": _label, "scheduler": _name, **tr.to_json()}, sort_keys=True) + "\n")
                res = monte_carlo(cfg, spec.scheduler(name), spec.runs, on_episode=hook)
                rows.append((label, name, res.runs, res.mean_psnr, res.std_psnr, res.mean_distortion))
    finally:
        if dump is not None:
            dump.close()
    return rows


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for label, name, runs, mp, sp, md in rows:
        w.writerow([label, name, runs, f"{mp:.6f}", f"{sp:.6f}", f"{md:.6f}"])
    return buf.getvalue()


def _emit(text: str, spec: ExperimentSpec, out) -> None:
    if spec.out:
        Path(spec.out).write_text(text)
    else:
        out.write(text)


def cmd_run(args, spec, out) -> int:
    spec.axis, spec.values = None, []
    spec.validate()
    _emit(format_csv(run_cells(spec, [None])), spec, out)
    return EXIT_OK


def cmd_sweep(args, spec, out) -> int:
    if args.sweep:
        spec.axis, raw = parse_sweep(args.sweep)
    else:
        raw = spec.values
    if spec.axis is None:
        raise ConfigError("sweep needs --sweep axis=v1,v2,... or a 'sweep' entry in the config")
    spec.values = _axis_values(spec.axis, raw, spec.scenario.n) if spec.axis in AXES else raw
    spec.validate()
    _emit(format_csv(run_cells(spec, spec.values)), spec, out)
    return EXIT_OK


COMMANDS = {"graph-dump": cmd_graph_dump, "run": cmd_run, "sweep": cmd_sweep, "mdp-solve": cmd_mdp_solve}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="idncsim",
        description=__doc__.split("\n\n")[0],
        epilog="CSV columns: " + ",".join(CSV_HEADER) + ". Exit codes: 0 ok, 2 config error, "
        "3 guard exceeded, 4 invariant violation.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment file")
        s.add_argument("--seed", type=int, help="master seed (overrides the config)")
        if name in ("graph-dump", "mdp-solve"):
            s.add_argument("--scm", help="JSON file with the connectivity matrix")
            s.add_argument("--gsm", help="JSON file with the status matrix")
        if name == "mdp-solve":
            s.add_argument("--theta", type=int, help="deadline in slots (overrides the config)")
        if name in ("run", "sweep"):
            s.add_argument("--scheduler", help="comma-separated: " + ",".join(SCHEDULER_NAMES))
            s.add_argument("--runs", type=int, help="episodes per cell")
            s.add_argument("--out", help="write CSV here instead of stdout")
            s.add_argument("--dump-transcripts", metavar="PATH", help="write every episode transcript as JSON lines")
            s.add_argument("--strategy", choices=STRATEGIES, help="exact / greedy independent-set search")
        if name == "sweep":
            s.add_argument("--sweep", help="axis=v1,v2,... with axis in " + ", ".join(AXES))
    return p


def _spec(args) -> ExperimentSpec | None:
    if not args.config:
        if args.command in ("run", "sweep"):
            raise ConfigError(f"{args.command} needs --config")
        return None
    spec = spec_from_json(load_json(args.config))
    if args.seed is not None:
        spec.scenario = spec.scenario.with_(seed=args.seed)
    for key in ("runs", "out", "dump_transcripts", "strategy"):
        if getattr(args, key, None) is not None:
            setattr(spec, key, getattr(args, key))
    if getattr(args, "scheduler", None):
        spec.schedulers = [s.strip() for s in args.scheduler.split(",")]
    return spec


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, _spec(args), out)
    except (ConfigError, UnreachableDevice) as e:
        err.write(f"config error: {e}\n")
        return EXIT_CONFIG
    except InstanceTooLarge as e:
        err.write(f"instance too large: {e}\n")
        return EXIT_GUARD
    except (InvariantViolation, ConflictViolation) as e:
        err.write(f"invariant violation: {e}\n")
        return EXIT_INVARIANT
    except IdncError as e:
        err.write(f"error: {e}\n")
        return EXIT_INVARIANT
    except ValueError as e:
        err.write(f"config error: {e}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
