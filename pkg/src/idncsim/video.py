"""Layered GOP model: packetization, packet importance and concealment PSNR.

Layer ``l`` of a GOP decodes only when every packet of layers ``1..l`` has
arrived. Undecodable layers are concealed with the nearest decoded frames,
and the resulting GOP quality is summarised by a cumulative table
``psnr_table[l]`` (dB with the first ``l`` layers decodable).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .model import ImportanceMatrix, StatusMatrix

PAYLOAD_BYTES = 1400
PACKET_BITS = 1500 * 8

# Only the last entry (error-free 35.64 dB) is a measured figure; the
# concealment levels below it are placeholders chosen to keep the table
# increasing and must not be reported as measurements.
DEFAULT_PSNR_TABLE = (20.0, 28.0, 31.0, 33.5, 35.64)
DEFAULT_PACKETS_PER_LAYER = (8, 3, 3, 3)


@dataclass(frozen=True)
class GopModel:
    packets_per_layer: tuple[int, ...]
    psnr_table: tuple[float, ...]
    rate: float | None = None

    def __post_init__(self):
        ppl = tuple(int(c) for c in self.packets_per_layer)
        table = tuple(float(x) for x in self.psnr_table)
        if not ppl:
            raise ConfigError("GOP needs at least one layer")
        if any(c < 1 for c in ppl):
            raise ConfigError(f"every layer needs at least one packet, got {list(ppl)}")
        if len(table) != len(ppl) + 1:
            raise ConfigError(f"psnr_table needs {len(ppl) + 1} entries (layers 0..{len(ppl)}), got {len(table)}")
        if any(b <= a for a, b in zip(table, table[1:])):
            raise ConfigError(f"psnr_table must be strictly increasing, got {list(table)}")
        if self.rate is not None and not self.rate > 0:
            raise ConfigError("rate must be positive")
        object.__setattr__(self, "packets_per_layer", ppl)
        object.__setattr__(self, "psnr_table", table)

    @property
    def layers(self) -> int:
        return len(self.packets_per_layer)

    @property
    def n(self) -> int:
        return sum(self.packets_per_layer)

    def layer_of(self) -> np.ndarray:
        """1-based layer index of every packet, packets ordered base layer first."""
        return np.repeat(np.arange(1, self.layers + 1), self.packets_per_layer)

    def to_json(self) -> dict:
        out = {
            "layers": self.layers,
            "packets_per_layer": list(self.packets_per_layer),
            "psnr_table": list(self.psnr_table),
        }
        if self.rate is not None:
            out["rate"] = self.rate
        return out

    @classmethod
    def from_json(cls, data: dict) -> GopModel:
        try:
            g = cls(
                packets_per_layer=tuple(data["packets_per_layer"]),
                psnr_table=tuple(data["psnr_table"]),
                rate=data.get("rate"),
            )
        except KeyError as e:
            raise ConfigError(f"GOP model is missing field {e}") from None
        if "layers" in data and data["layers"] != g.layers:
            raise ConfigError(f"layers = {data['layers']} but {g.layers} packet counts were given")
        return g


def default_gop() -> GopModel:
    return GopModel(DEFAULT_PACKETS_PER_LAYER, DEFAULT_PSNR_TABLE)


def one_packet_per_layer(psnr_table: Sequence[float] = DEFAULT_PSNR_TABLE) -> GopModel:
    return GopModel((1,) * (len(psnr_table) - 1), tuple(psnr_table))


def load_gop(path) -> GopModel:
    with open(path) as fh:
        return GopModel.from_json(json.load(fh))


def packetize(sizes: Iterable[int], payload: int = PAYLOAD_BYTES) -> tuple[int, ...]:
    if payload <= 0:
        raise ConfigError("payload must be positive")
    out = []
    for i, s in enumerate(sizes):
        if s <= 0:
            raise ConfigError(f"layer {i + 1} has size {s}; layers must be non-empty")
        out.append(math.ceil(s / payload))
    return tuple(out)


def slots_per_gop(rate: float, gop_frames: int = 8, fps: float = 30, packet_bits: int = PACKET_BITS) -> int:
    """Slots available for one GOP at transmission rate ``rate`` bits/s."""
    if min(rate, gop_frames, fps, packet_bits) <= 0:
        raise ConfigError("rate, frames, fps and packet size must be positive")
    return int(gop_frames * rate // (fps * packet_bits))


def packet_importance(g: GopModel) -> np.ndarray:
    """Loss of a layer-l packet truncates decoding to layers below l."""
    table = np.asarray(g.psnr_table)
    return table[-1] - table[g.layer_of() - 1]


def importance_matrix(g: GopModel, m: int) -> ImportanceMatrix:
    return ImportanceMatrix.uniform(m, packet_importance(g))


def decodable_prefix(g: GopModel, has) -> int:
    """Largest l such that every packet of layers 1..l is held.

    ``has`` is either a set of packet indices or a boolean vector over packets.
    """
    if isinstance(has, (set, frozenset)):
        held = np.zeros(g.n, dtype=bool)
        held[list(has)] = True
    else:
        held = np.asarray(has, dtype=bool)
    start = 0
    for layer, count in enumerate(g.packets_per_layer):
        if not held[start : start + count].all():
            return layer
        start += count
    return g.layers


@dataclass(frozen=True)
class QualityReport:
    prefix: tuple[int, ...]
    psnr: tuple[float, ...]
    residual: tuple[float, ...]

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr))


def quality_report(g: GopModel, f: StatusMatrix) -> QualityReport:
    if f.n != g.n:
        raise ConfigError(f"status matrix has {f.n} packets but the GOP has {g.n}")
    prefix = tuple(decodable_prefix(g, row == 0) for row in f.f)
    psnr = tuple(g.psnr_table[p] for p in prefix)
    top = g.psnr_table[-1]
    return QualityReport(prefix, psnr, tuple(top - p for p in psnr))


def save_gop(g: GopModel, path) -> None:
    Path(path).write_text(json.dumps(g.to_json(), indent=2))
