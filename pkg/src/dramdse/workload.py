"""Convolutional layers, buffer-feasible tilings and DRAM fetch counts.

The tiled loop nest has three tile loops: ``s`` (output spatial tiles, p
outer and q inner), ``m`` (output-channel tiles) and ``c`` (input-channel
tiles).  A scheduling scheme fixes their outer-to-inner order.  Each data
type keeps a single resident tile on chip and is refetched whenever the tile
it needs changes.
"""

from __future__ import annotations

import enum
import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple

from .errors import ConfigError, InfeasibleLayerError, NetworkError

KB = 1024


@dataclass(frozen=True)
class ConvLayer:
    name: str
    H: int
    W: int
    C: int
    R: int
    S: int
    M: int
    stride: int = 1
    pad: int = 0
    elem_bytes: int = 1

    def __post_init__(self):
        for attr in ("H", "W", "C", "R", "S", "M", "stride", "elem_bytes"):
            value = getattr(self, attr)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise NetworkError(f"layer {self.name!r}: {attr} must be a positive integer, got {value!r}")
        if not isinstance(self.pad, int) or self.pad < 0:
            raise NetworkError(f"layer {self.name!r}: pad must be a non-negative integer")
        if self.H + 2 * self.pad < self.R or self.W + 2 * self.pad < self.S:
            raise NetworkError(f"layer {self.name!r}: kernel larger than padded input")

    @property
    def P(self) -> int:
        return (self.H + 2 * self.pad - self.R) // self.stride + 1

    @property
    def Q(self) -> int:
        return (self.W + 2 * self.pad - self.S) // self.stride + 1

    @property
    def ifm_volume(self) -> int:
        return self.H * self.W * self.C

    @property
    def wgh_volume(self) -> int:
        return self.R * self.S * self.C * self.M

    @property
    def ofm_volume(self) -> int:
        return self.P * self.Q * self.M

    @classmethod
    def from_dict(cls, data: dict) -> "ConvLayer":
        data = dict(data)
        given_p, given_q = data.pop("P", None), data.pop("Q", None)
        known = {"name", "H", "W", "C", "R", "S", "M", "stride", "pad", "elem_bytes"}
        unknown = set(data) - known
        if unknown:
            raise NetworkError(f"layer {data.get('name')!r}: unknown keys {sorted(unknown)}")
        try:
            layer = cls(**data)
        except TypeError as exc:
            raise NetworkError(f"layer {data.get('name')!r}: {exc}") from exc
        if given_p is not None and given_p != layer.P:
            raise NetworkError(f"layer {layer.name!r}: P={given_p} but the layer shape gives P={layer.P}")
        if given_q is not None and given_q != layer.Q:
            raise NetworkError(f"layer {layer.name!r}: Q={given_q} but the layer shape gives Q={layer.Q}")
        return layer

    def to_dict(self) -> dict:
        return {"name": self.name, "H": self.H, "W": self.W, "C": self.C, "R": self.R,
                "S": self.S, "M": self.M, "stride": self.stride, "pad": self.pad,
                "elem_bytes": self.elem_bytes, "P": self.P, "Q": self.Q}


def load_network(path) -> List[ConvLayer]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read network file {path}: {exc}") from exc
    if isinstance(data, dict) and "layers" in data:
        data = data["layers"]
    if not isinstance(data, list) or not data:
        raise NetworkError(f"network file {path} must hold a non-empty array of layers")
    layers = [ConvLayer.from_dict(entry) for entry in data]
    names = [layer.name for layer in layers]
    if len(set(names)) != len(names):
        raise NetworkError("layer names must be unique")
    return layers


@dataclass(frozen=True)
class TileConfig:
    Tp: int
    Tq: int
    Tm: int
    Tc: int

    def check(self, layer: ConvLayer):
        if not (1 <= self.Tp <= layer.P and 1 <= self.Tq <= layer.Q
                and 1 <= self.Tm <= layer.M and 1 <= self.Tc <= layer.C):
            raise ValueError(f"tile {self} invalid for layer {layer.name!r}")

    def Th(self, layer: ConvLayer) -> int:
        return (self.Tp - 1) * layer.stride + layer.R

    def Tw(self, layer: ConvLayer) -> int:
        return (self.Tq - 1) * layer.stride + layer.S

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.Tp, self.Tq, self.Tm, self.Tc)


@dataclass(frozen=True)
class BufferConfig:
    iB: int = 64 * KB
    wB: int = 64 * KB
    oB: int = 64 * KB

    def __post_init__(self):
        for attr in ("iB", "wB", "oB"):
            if getattr(self, attr) <= 0:
                raise ConfigError(f"buffer {attr} must be positive")


class ScheduleScheme(str, enum.Enum):
    IFMS = "ifms"
    WGHS = "wghs"
    OFMS = "ofms"
    ADAPTIVE = "adaptive"


FIXED_SCHEMES = (ScheduleScheme.IFMS, ScheduleScheme.WGHS, ScheduleScheme.OFMS)

_LOOP_ORDERS = {
    ScheduleScheme.IFMS: ("c", "s", "m"),
    ScheduleScheme.WGHS: ("m", "c", "s"),
    ScheduleScheme.OFMS: ("s", "m", "c"),
}

DEPENDENCIES = {
    "ifm": frozenset("cs"),
    "wgh": frozenset("mc"),
    "ofm": frozenset("ms"),
}


def scheme_to_loop_order(scheme) -> Tuple[str, str, str]:
    """Outer-to-inner tile-loop order of a fixed scheme."""
    scheme = ScheduleScheme(scheme)
    if scheme is ScheduleScheme.ADAPTIVE:
        raise ValueError("adaptive scheme must be resolved with adaptive_select first")
    return _LOOP_ORDERS[scheme]


def _row_extent(start: int, size: int, stride: int, kernel: int, pad: int, limit: int) -> int:
    # input rows touched by output rows [start, start+size), clipped to the real array
    lo = start * stride - pad
    hi = (start + size - 1) * stride - pad + kernel
    return max(0, min(hi, limit) - max(lo, 0))


def tile_footprints(layer: ConvLayer, tile: TileConfig) -> Tuple[int, int, int]:
    """Bytes needed on chip by one (ifm, wgh, ofm) tile."""
    eb = layer.elem_bytes
    ifm = min(tile.Th(layer), layer.H) * min(tile.Tw(layer), layer.W) * tile.Tc
    wgh = layer.R * layer.S * tile.Tc * tile.Tm
    ofm = tile.Tp * tile.Tq * tile.Tm
    return ifm * eb, wgh * eb, ofm * eb


def fits_buffers(footprints: Sequence[int], buffers: BufferConfig) -> bool:
    ifm, wgh, ofm = footprints
    return ifm <= buffers.iB and wgh <= buffers.wB and ofm <= buffers.oB


def _candidates(dim: int, mode: str) -> List[int]:
    if mode == "divisors":
        return [d for d in range(1, dim + 1) if dim % d == 0]
    if mode == "exhaustive":
        return list(range(1, dim + 1))
    if mode.startswith("step:"):
        try:
            step = int(mode[5:])
        except ValueError:
            step = 0
        if step < 1:
            raise ConfigError(f"invalid tiling mode {mode!r}")
        values = list(range(1, dim + 1, step))
        if values[-1] != dim:
            values.append(dim)
        return values
    raise ConfigError(f"invalid tiling mode {mode!r}; use divisors, exhaustive or step:N")


def iter_tilings(layer: ConvLayer, buffers: BufferConfig, mode: str = "divisors") -> Iterator[TileConfig]:
    """Buffer-feasible tilings, ascending in (Tc, Tm, Tq, Tp)."""
    cands = [_candidates(d, mode) for d in (layer.C, layer.M, layer.Q, layer.P)]
    for tc, tm, tq, tp in itertools.product(*cands):
        tile = TileConfig(tp, tq, tm, tc)
        if fits_buffers(tile_footprints(layer, tile), buffers):
            yield tile


def enumerate_tilings(layer: ConvLayer, buffers: BufferConfig, mode: str = "divisors") -> List[TileConfig]:
    tilings = list(iter_tilings(layer, buffers, mode))
    if not tilings:
        raise InfeasibleLayerError(layer.name)
    return tilings


def trip_counts(layer: ConvLayer, tile: TileConfig) -> Dict[str, int]:
    return {
        "s": ceil(layer.P / tile.Tp) * ceil(layer.Q / tile.Tq),
        "m": ceil(layer.M / tile.Tm),
        "c": ceil(layer.C / tile.Tc),
    }


def redundancy(dtype: str, order: Sequence[str], trips: Dict[str, int]) -> int:
    """How many times every tile of ``dtype`` is fetched from DRAM.

    Loops with a single trip never change any index and are ignored.  Loops
    inside the inner-most dependent loop give free reuse; every independent
    loop outside it multiplies the traffic.
    """
    deps = DEPENDENCIES[dtype]
    live = [loop for loop in order if trips[loop] > 1]
    dep_pos = [i for i, loop in enumerate(live) if loop in deps]
    if not dep_pos:
        return 1
    result = 1
    for loop in live[:dep_pos[-1]]:
        if loop not in deps:
            result *= trips[loop]
    return result


def _tile_sizes(total: int, step: int) -> List[int]:
    return [min(step, total - start) for start in range(0, total, step)]


def _ifm_extents(layer: ConvLayer, tile: TileConfig):
    rows = [_row_extent(p, min(tile.Tp, layer.P - p), layer.stride, layer.R, layer.pad, layer.H)
            for p in range(0, layer.P, tile.Tp)]
    cols = [_row_extent(q, min(tile.Tq, layer.Q - q), layer.stride, layer.S, layer.pad, layer.W)
            for q in range(0, layer.Q, tile.Tq)]
    return rows, cols


@dataclass
class FetchCounts:
    """DRAM traffic of one layer pass, in elements.

    ``histogram`` maps (event kind, elements) to the number of fetch events of
    that size; the explicit in-order event stream comes from
    :func:`tile_fetch_events`.
    """
    ifm_words: int
    wgh_words: int
    ofm_write_words: int
    ofm_read_words: int
    redundancy: Dict[str, int]
    histogram: Dict[Tuple[str, int], int] = field(default_factory=dict)

    @property
    def total_words(self) -> int:
        return self.ifm_words + self.wgh_words + self.ofm_write_words + self.ofm_read_words


EVENT_KINDS = ("ifm", "wgh", "ofm_read", "ofm_write")


def fetch_counts(layer: ConvLayer, tile: TileConfig, order: Sequence[str]) -> FetchCounts:
    tile.check(layer)
    trips = trip_counts(layer, tile)
    red = {d: redundancy(d, order, trips) for d in DEPENDENCIES}

    rows, cols = _ifm_extents(layer, tile)
    ch_c = Counter(_tile_sizes(layer.C, tile.Tc))
    ch_m = Counter(_tile_sizes(layer.M, tile.Tm))
    sp_p = Counter(_tile_sizes(layer.P, tile.Tp))
    sp_q = Counter(_tile_sizes(layer.Q, tile.Tq))
    rr, cc = Counter(rows), Counter(cols)
    kernel = layer.R * layer.S

    hist: Counter = Counter()
    for (h, nh), (w, nw), (c, nc) in itertools.product(rr.items(), cc.items(), ch_c.items()):
        if h * w * c:
            hist[("ifm", h * w * c)] += nh * nw * nc * red["ifm"]
    for (m, nm), (c, nc) in itertools.product(ch_m.items(), ch_c.items()):
        hist[("wgh", kernel * m * c)] += nm * nc * red["wgh"]
    for (p, np_), (q, nq), (m, nm) in itertools.product(sp_p.items(), sp_q.items(), ch_m.items()):
        n = np_ * nq * nm
        hist[("ofm_write", p * q * m)] += n * red["ofm"]
        if red["ofm"] > 1:
            hist[("ofm_read", p * q * m)] += n * (red["ofm"] - 1)

    ifm_once = sum(rows) * sum(cols) * layer.C
    return FetchCounts(
        ifm_words=red["ifm"] * ifm_once,
        wgh_words=red["wgh"] * layer.wgh_volume,
        ofm_write_words=red["ofm"] * layer.ofm_volume,
        ofm_read_words=(red["ofm"] - 1) * layer.ofm_volume,
        redundancy=red,
        histogram=dict(sorted(hist.items())),
    )


def tile_fetch_events(layer: ConvLayer, tile: TileConfig, order: Sequence[str]) -> Iterator[Tuple[str, int]]:
    """Walk the tiled loop nest and yield every DRAM transfer in program order.

    Each data type holds one resident tile.  A tile is loaded when the loop
    indices it depends on change; an evicted ofm tile is written back, and a
    previously written ofm tile is read back before accumulation resumes.
    Empty ifm tiles (entirely in padding) are skipped.
    """
    tile.check(layer)
    p_starts = list(range(0, layer.P, tile.Tp))
    q_starts = list(range(0, layer.Q, tile.Tq))
    spatial = [(p, q) for p in p_starts for q in q_starts]
    ranges = {
        "s": range(len(spatial)),
        "m": range(0, layer.M, tile.Tm),
        "c": range(0, layer.C, tile.Tc),
    }
    kernel = layer.R * layer.S

    def ifm_words(s, c):
        p, q = spatial[s]
        h = _row_extent(p, min(tile.Tp, layer.P - p), layer.stride, layer.R, layer.pad, layer.H)
        w = _row_extent(q, min(tile.Tq, layer.Q - q), layer.stride, layer.S, layer.pad, layer.W)
        return h * w * min(tile.Tc, layer.C - c)

    def ofm_words(s, m):
        p, q = spatial[s]
        return min(tile.Tp, layer.P - p) * min(tile.Tq, layer.Q - q) * min(tile.Tm, layer.M - m)

    resident = {"ifm": None, "wgh": None, "ofm": None}
    spilled = set()
    for idx in itertools.product(*(ranges[loop] for loop in order)):
        at = dict(zip(order, idx))
        s, m, c = at["s"], at["m"], at["c"]
        if resident["ifm"] != (s, c):
            resident["ifm"] = (s, c)
            words = ifm_words(s, c)
            if words:
                yield ("ifm", words)
        if resident["wgh"] != (m, c):
            resident["wgh"] = (m, c)
            yield ("wgh", kernel * min(tile.Tm, layer.M - m) * min(tile.Tc, layer.C - c))
        if resident["ofm"] != (s, m):
            if resident["ofm"] is not None:
                yield ("ofm_write", ofm_words(*resident["ofm"]))
                spilled.add(resident["ofm"])
            resident["ofm"] = (s, m)
            if (s, m) in spilled:
                yield ("ofm_read", ofm_words(s, m))
    yield ("ofm_write", ofm_words(*resident["ofm"]))


def adaptive_totals(layer: ConvLayer, buffers: BufferConfig, mode: str = "divisors") -> Dict[ScheduleScheme, int]:
    """Minimum total DRAM traffic reachable by each fixed scheme."""
    tilings = enumerate_tilings(layer, buffers, mode)
    return {
        scheme: min(fetch_counts(layer, t, scheme_to_loop_order(scheme)).total_words for t in tilings)
        for scheme in FIXED_SCHEMES
    }


def pick_min_traffic(totals: Dict[ScheduleScheme, int]) -> ScheduleScheme:
    # ties resolve in FIXED_SCHEMES order
    return min(FIXED_SCHEMES, key=lambda s: (totals[s], FIXED_SCHEMES.index(s)))


def adaptive_select(layer: ConvLayer, buffers: BufferConfig, mode: str = "divisors") -> ScheduleScheme:
    return pick_min_traffic(adaptive_totals(layer, buffers, mode))
