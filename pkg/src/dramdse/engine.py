"""Layer cost evaluation and the exhaustive min-EDP exploration."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import ceil
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .costs import CostTable, load_cost_table, tile_cycles, tile_energy
from .dram import AccessCounts, DramArch, DramGeometry, MappingPolicy, classify_tile_stream, get_policy
from .errors import ConfigError
from .workload import (
    BufferConfig,
    ConvLayer,
    FetchCounts,
    ScheduleScheme,
    TileConfig,
    adaptive_totals,
    enumerate_tilings,
    fetch_counts,
    pick_min_traffic,
    scheme_to_loop_order,
)

WORKERS_ENV = "DRAMDSE_WORKERS"

ALL_ARCHS = tuple(DramArch)
ALL_SCHEMES = tuple(ScheduleScheme)
ALL_MAPPINGS = (1, 2, 3, 4, 5, 6)


def words_to_bursts(words: int, elem_bytes: int, geom: DramGeometry) -> int:
    """DRAM column accesses needed to move ``words`` elements."""
    return ceil(words * elem_bytes / geom.burst_bytes)


def burst_histogram(fc: FetchCounts, layer: ConvLayer, geom: DramGeometry) -> Dict[int, int]:
    hist: Dict[int, int] = {}
    for (_, words), n in fc.histogram.items():
        bursts = words_to_bursts(words, layer.elem_bytes, geom)
        hist[bursts] = hist.get(bursts, 0) + n
    return hist


def fetch_access_counts(bursts_hist: Mapping[int, int], policy, geom: DramGeometry) -> AccessCounts:
    """Aggregate category counts of independently classified tile fetches."""
    total = AccessCounts()
    for bursts, n in sorted(bursts_hist.items()):
        total = total + classify_tile_stream(bursts, policy, geom).scaled(n)
    return total


@dataclass(frozen=True)
class CandidateResult:
    layer: str
    arch: DramArch
    scheme: ScheduleScheme
    resolved_scheme: ScheduleScheme
    mapping: int
    tile: TileConfig
    counts: AccessCounts
    cycles: int
    energy_pj: float
    latency_ns: float
    edp: float

    @classmethod
    def build(cls, layer, arch, scheme, resolved, mapping, tile, counts, table: CostTable):
        cycles = tile_cycles(counts, arch, table)
        energy = tile_energy(counts, arch, table)
        latency = cycles * table.clock_period_ns
        return cls(layer, DramArch(arch), ScheduleScheme(scheme), ScheduleScheme(resolved),
                   mapping, tile, counts, cycles, energy, latency, energy * latency)


def layer_cost(layer: ConvLayer, tile: TileConfig, order: Sequence[str], mapping, arch,
               geom: DramGeometry, table: CostTable,
               scheme: ScheduleScheme = None) -> CandidateResult:
    policy = get_policy(mapping)
    fc = fetch_counts(layer, tile, order)
    counts = fetch_access_counts(burst_histogram(fc, layer, geom), policy, geom)
    if scheme is None:
        scheme = _scheme_for_order(order)
    return CandidateResult.build(layer.name, arch, scheme, scheme, policy.id, tile, counts, table)


def _scheme_for_order(order) -> ScheduleScheme:
    for scheme in ScheduleScheme:
        if scheme is not ScheduleScheme.ADAPTIVE and scheme_to_loop_order(scheme) == tuple(order):
            return scheme
    raise ValueError(f"loop order {order} matches no fixed scheme")


@dataclass
class LayerOutcome:
    layer: str
    adaptive: ScheduleScheme
    traffic: Dict[ScheduleScheme, int]
    # (arch) -> best over tilings x schemes x mappings
    best: Dict[DramArch, CandidateResult]
    # (arch, scheme, mapping) -> best over tilings
    group_best: Dict[Tuple[DramArch, ScheduleScheme, int], CandidateResult]
    n_tilings: int
    candidates: Optional[List[CandidateResult]] = None


@dataclass
class DseOutput:
    layers: List[LayerOutcome]
    archs: Tuple[DramArch, ...]
    schemes: Tuple[ScheduleScheme, ...]
    mappings: Tuple[int, ...]

    def best(self, layer: str, arch) -> CandidateResult:
        return self._layer(layer).best[DramArch(arch)]

    def group(self, layer: str, arch, scheme, mapping) -> CandidateResult:
        return self._layer(layer).group_best[(DramArch(arch), ScheduleScheme(scheme), mapping)]

    def _layer(self, name):
        for outcome in self.layers:
            if outcome.layer == name:
                return outcome
        raise KeyError(name)

    def network_edp(self, arch) -> float:
        return sum(o.best[DramArch(arch)].edp for o in self.layers)


def _keep(incumbent: Optional[CandidateResult], candidate: CandidateResult) -> CandidateResult:
    # a later candidate equal to the incumbent replaces it
    if incumbent is None or candidate.edp <= incumbent.edp:
        return candidate
    return incumbent


def explore_layer(layer: ConvLayer, geom: DramGeometry, buffers: BufferConfig,
                  archs: Sequence[DramArch], schemes: Sequence[ScheduleScheme],
                  mappings: Sequence[int], table: CostTable, mode: str = "divisors",
                  log_candidates: bool = False) -> LayerOutcome:
    tilings = enumerate_tilings(layer, buffers, mode)
    traffic = adaptive_totals(layer, buffers, mode)
    adaptive = pick_min_traffic(traffic)
    policies: List[MappingPolicy] = [get_policy(m) for m in mappings]

    best: Dict[DramArch, CandidateResult] = {}
    group: Dict[Tuple[DramArch, ScheduleScheme, int], CandidateResult] = {}
    log: Optional[List[CandidateResult]] = [] if log_candidates else None

    for tile in tilings:
        for scheme in schemes:
            resolved = adaptive if scheme is ScheduleScheme.ADAPTIVE else scheme
            fc = fetch_counts(layer, tile, scheme_to_loop_order(resolved))
            hist = burst_histogram(fc, layer, geom)
            for policy in policies:
                counts = fetch_access_counts(hist, policy, geom)
                for arch in archs:
                    result = CandidateResult.build(layer.name, arch, scheme, resolved,
                                                   policy.id, tile, counts, table)
                    best[arch] = _keep(best.get(arch), result)
                    key = (arch, scheme, policy.id)
                    group[key] = _keep(group.get(key), result)
                    if log is not None:
                        log.append(result)

    ordered = {(a, s, p.id): group[(a, s, p.id)] for a in archs for s in schemes for p in policies}
    return LayerOutcome(layer.name, adaptive, traffic, {a: best[a] for a in archs}, ordered,
                        len(tilings), log)


def _explore_job(args):
    return explore_layer(*args)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def dse(network: Iterable[ConvLayer], geom: DramGeometry, buffers: BufferConfig,
        archs: Sequence = ALL_ARCHS, schemes: Sequence = ALL_SCHEMES,
        mappings: Sequence[int] = ALL_MAPPINGS, table: CostTable = None,
        mode: str = "divisors", log_candidates: bool = False,
        workers: int = None) -> DseOutput:
    """Exhaustively evaluate tilings x schemes x mappings for every layer and arch.

    Layers are independent and may be spread over worker processes; every
    layer's reduction runs in enumeration order, so results do not depend on
    the worker count.
    """
    network = list(network)
    if not network:
        raise ConfigError("network has no layers")
    archs = tuple(DramArch(a) for a in archs)
    schemes = tuple(ScheduleScheme(s) for s in schemes)
    mappings = tuple(get_policy(m).id for m in mappings)
    if not archs or not schemes or not mappings:
        raise ConfigError("architecture, scheme and mapping lists must be non-empty")
    table = table if table is not None else load_cost_table()
    for arch in archs:
        if arch not in table.entries:
            raise ConfigError(f"cost table has no entries for {arch.value}")

    jobs = [(layer, geom, buffers, archs, schemes, mappings, table, mode, log_candidates)
            for layer in network]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outcomes = list(pool.map(_explore_job, jobs))
    else:
        outcomes = [_explore_job(job) for job in jobs]
    return DseOutput(outcomes, archs, schemes, mappings)
