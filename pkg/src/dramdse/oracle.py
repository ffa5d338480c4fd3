"""Brute-force replay of DRAM access streams.

Every word of a tile is decoded to a coordinate and classified by comparing
it with the previous access, with no floor arithmetic.  This checks the
closed-form counts in :mod:`dramdse.dram` and the aggregated layer costs in
:mod:`dramdse.engine`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

from .costs import CostTable
from .dram import (
    LEVEL_CATEGORY,
    AccessCategory,
    AccessCounts,
    DramArch,
    DramCoord,
    DramGeometry,
    MappingPolicy,
    get_policy,
    linear_to_coord,
)
from .engine import words_to_bursts
from .workload import ConvLayer, TileConfig, tile_fetch_events

TRACE_COLUMNS = ("word_index", "channel", "rank", "chip", "bank", "subarray", "row", "column", "category")


@dataclass
class ReplayReport:
    counts: AccessCounts
    trace: Optional[List[Tuple[int, DramCoord, AccessCategory]]] = None
    bank_return_hits: int = 0


def _boundary_category(prev: DramCoord, cur: DramCoord, policy: MappingPolicy,
                       geom: DramGeometry) -> AccessCategory:
    """Category of a step between consecutive linear addresses.

    Exactly one level must advance by one while every level inside it wraps
    to zero and every level outside it is unchanged.
    """
    levels = policy.levels(geom)
    for k, (level, _) in enumerate(levels):
        if cur.digit(level) != prev.digit(level) + 1:
            continue
        inner_wrapped = all(cur.digit(lv) == 0 and prev.digit(lv) == radix - 1
                            for lv, radix in levels[:k])
        outer_same = all(cur.digit(lv) == prev.digit(lv) for lv, _ in levels[k + 1:])
        if inner_wrapped and outer_same:
            return LEVEL_CATEGORY[level]
    raise AssertionError(f"{prev} -> {cur} is not a single mixed-radix increment")


def _outermost_difference(prev: DramCoord, cur: DramCoord, policy: MappingPolicy,
                          geom: DramGeometry) -> AccessCategory:
    """Transition category for arbitrary coordinate pairs."""
    for level, _ in reversed(policy.levels(geom)):
        if cur.digit(level) != prev.digit(level):
            return LEVEL_CATEGORY[level]
    return AccessCategory.SAME_ROW


def _tally(categories: Iterable[AccessCategory]) -> AccessCounts:
    counts = {cat: 0 for cat in AccessCategory}
    for cat in categories:
        counts[cat] += 1
    return AccessCounts.from_mapping(counts)


def replay_tile(tile_words: int, policy, geom: DramGeometry, keep_trace: bool = False) -> ReplayReport:
    policy = get_policy(policy)
    if tile_words < 1:
        raise ValueError(f"tile_words must be >= 1, got {tile_words}")
    categories = []
    trace = [] if keep_trace else None
    prev = None
    for i in range(tile_words):
        coord = linear_to_coord(i, policy, geom)
        if prev is None:
            cat = AccessCategory.DIF_ROW
        else:
            cat = _boundary_category(prev, coord, policy, geom)
        categories.append(cat)
        if trace is not None:
            trace.append((i, coord, cat))
        prev = coord
    return ReplayReport(_tally(categories), trace)


@lru_cache(maxsize=4096)
def _replay_counts(tile_words: int, policy: MappingPolicy, geom: DramGeometry) -> AccessCounts:
    return replay_tile(tile_words, policy, geom).counts


def replay_coords(coords: Sequence[DramCoord], policy, geom: DramGeometry, arch) -> ReplayReport:
    """Open-row state machine over an explicit coordinate stream.

    SALP variants keep one open row per subarray; DDR3 keeps one per bank, so
    touching another subarray closes the bank's open row.  A hit is served
    from the tracked open row; any other access takes its transition category.
    ``bank_return_hits`` counts accesses the state machine serves as hits but
    the transition model does not.
    """
    policy = get_policy(policy)
    arch = DramArch(arch)
    open_rows = {}
    categories = []
    trace = []
    returns = 0
    prev = None
    for i, coord in enumerate(coords):
        bank = (coord.channel, coord.rank, coord.chip, coord.bank)
        unit = bank + (coord.subarray,) if arch.has_subarray_parallelism else bank
        row_id = (coord.subarray, coord.row)
        if prev is None:
            transition = AccessCategory.DIF_ROW
        else:
            transition = _outermost_difference(prev, coord, policy, geom)
        if open_rows.get(unit) == row_id:
            cat = AccessCategory.SAME_ROW
            if transition is not AccessCategory.SAME_ROW:
                returns += 1
        else:
            cat = transition
        open_rows[unit] = row_id
        categories.append(cat)
        trace.append((i, coord, cat))
        prev = coord
    return ReplayReport(_tally(categories), trace, returns)


def replay_state_machine(tile_words: int, policy, geom: DramGeometry, arch) -> ReplayReport:
    policy = get_policy(policy)
    if tile_words < 1:
        raise ValueError(f"tile_words must be >= 1, got {tile_words}")
    coords = [linear_to_coord(i, policy, geom) for i in range(tile_words)]
    return replay_coords(coords, policy, geom, arch)


def replay_layer(layer: ConvLayer, tile: TileConfig, order: Sequence[str], mapping,
                 geom: DramGeometry, table: CostTable, arch) -> Tuple[int, float, AccessCounts]:
    """Replay every transfer of the loop nest; returns (cycles, energy_pj, counts)."""
    policy = get_policy(mapping)
    arch = DramArch(arch)
    per_cat = {cat: table.cost(arch, cat) for cat in AccessCategory}
    cycles = 0
    total = AccessCounts()
    for _, words in tile_fetch_events(layer, tile, order):
        counts = _replay_counts(words_to_bursts(words, layer.elem_bytes, geom), policy, geom)
        cycles += sum(counts.get(cat) * per_cat[cat].cycles for cat in AccessCategory)
        total = total + counts
    energy = sum(total.get(cat) * per_cat[cat].energy_pj for cat in AccessCategory)
    return cycles, energy, total


def write_trace_csv(report: ReplayReport, path):
    if report.trace is None:
        raise ValueError("replay was run without keep_trace")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for i, c, cat in report.trace:
            writer.writerow([i, c.channel, c.rank, c.chip, c.bank, c.subarray, c.row, c.column, cat.value])
