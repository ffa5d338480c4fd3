"""DRAM geometry, mapping policies and closed-form access classification.

A mapping policy is a loop order over the levels of one chip (column, bank,
subarray, row), listed inner-most first.  A linear word address is decoded as
a mixed-radix number whose least-significant digit is the inner-most level.
Device levels (chip, rank, channel) sit beyond the row digit, in that order.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Dict, Tuple

from .errors import BoundsError, CapacityError, ConfigError


class Level(str, enum.Enum):
    COLUMN = "column"
    BANK = "bank"
    SUBARRAY = "subarray"
    ROW = "row"
    CHIP = "chip"
    RANK = "rank"
    CHANNEL = "channel"


class DramArch(str, enum.Enum):
    DDR3 = "ddr3"
    SALP1 = "salp1"
    SALP2 = "salp2"
    SALP_MASA = "salpmasa"

    @property
    def has_subarray_parallelism(self) -> bool:
        return self is not DramArch.DDR3


class AccessCategory(str, enum.Enum):
    SAME_ROW = "same_row"
    DIF_BANK = "dif_bank"
    DIF_SUBARRAY = "dif_subarray"
    DIF_ROW = "dif_row"


# Chip/rank/channel crossings land on an idle device, which costs the same as
# opening a row in an idle bank.
LEVEL_CATEGORY = {
    Level.COLUMN: AccessCategory.SAME_ROW,
    Level.BANK: AccessCategory.DIF_BANK,
    Level.SUBARRAY: AccessCategory.DIF_SUBARRAY,
    Level.ROW: AccessCategory.DIF_ROW,
    Level.CHIP: AccessCategory.DIF_BANK,
    Level.RANK: AccessCategory.DIF_BANK,
    Level.CHANNEL: AccessCategory.DIF_BANK,
}

DEVICE_LEVELS = (Level.CHIP, Level.RANK, Level.CHANNEL)


@dataclass(frozen=True)
class DramGeometry:
    channels: int = 1
    ranks_per_channel: int = 1
    chips_per_rank: int = 1
    banks_per_chip: int = 8
    subarrays_per_bank: int = 8
    rows_per_subarray: int = 4096
    columns_per_row: int = 128
    burst_bytes: int = 8

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"geometry field {f.name} must be a positive integer, got {value!r}")

    def radix(self, level: Level) -> int:
        return {
            Level.COLUMN: self.columns_per_row,
            Level.BANK: self.banks_per_chip,
            Level.SUBARRAY: self.subarrays_per_bank,
            Level.ROW: self.rows_per_subarray,
            Level.CHIP: self.chips_per_rank,
            Level.RANK: self.ranks_per_channel,
            Level.CHANNEL: self.channels,
        }[level]

    @property
    def chip_words(self) -> int:
        return (self.banks_per_chip * self.subarrays_per_bank
                * self.rows_per_subarray * self.columns_per_row)

    @property
    def total_words(self) -> int:
        return self.chip_words * self.chips_per_rank * self.ranks_per_channel * self.channels

    @property
    def capacity_bytes(self) -> int:
        return self.total_words * self.burst_bytes

    @classmethod
    def from_dict(cls, data: dict) -> "DramGeometry":
        expected = {f.name for f in fields(cls)}
        missing = expected - set(data)
        unknown = set(data) - expected
        if missing or unknown:
            raise ConfigError(f"geometry keys: missing {sorted(missing)}, unknown {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_geometry(path) -> DramGeometry:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read geometry file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"geometry file {path} must hold a JSON object")
    return DramGeometry.from_dict(data)


@dataclass(frozen=True)
class MappingPolicy:
    id: int
    loop_order: Tuple[Level, ...]

    def __post_init__(self):
        if sorted(self.loop_order) != sorted((Level.COLUMN, Level.BANK, Level.SUBARRAY, Level.ROW)):
            raise ConfigError(f"mapping {self.id}: loop order must permute column/bank/subarray/row")
        if self.loop_order[-1] is not Level.ROW:
            raise ConfigError(f"mapping {self.id}: row must be the outer-most loop")

    def levels(self, geom: DramGeometry) -> Tuple[Tuple[Level, int], ...]:
        """(level, radix) pairs inner-most first, device levels included."""
        order = self.loop_order + DEVICE_LEVELS
        return tuple((lvl, geom.radix(lvl)) for lvl in order)

    def __str__(self):
        return f"{self.id}:" + ",".join(lvl.value for lvl in self.loop_order)


_C, _B, _S, _R = Level.COLUMN, Level.BANK, Level.SUBARRAY, Level.ROW

POLICIES: Dict[int, MappingPolicy] = {
    1: MappingPolicy(1, (_C, _S, _B, _R)),
    2: MappingPolicy(2, (_S, _C, _B, _R)),
    3: MappingPolicy(3, (_C, _B, _S, _R)),
    4: MappingPolicy(4, (_B, _C, _S, _R)),
    5: MappingPolicy(5, (_S, _B, _C, _R)),
    6: MappingPolicy(6, (_B, _S, _C, _R)),
}


def get_policy(policy) -> MappingPolicy:
    if isinstance(policy, MappingPolicy):
        return policy
    try:
        return POLICIES[int(policy)]
    except (KeyError, ValueError):
        raise ConfigError(f"unknown mapping policy {policy!r}; valid ids are 1..6") from None


@dataclass(frozen=True)
class DramCoord:
    channel: int = 0
    rank: int = 0
    chip: int = 0
    bank: int = 0
    subarray: int = 0
    row: int = 0
    column: int = 0

    def digit(self, level: Level) -> int:
        return getattr(self, level.value)


@dataclass(frozen=True)
class AccessCounts:
    n_same_row: int = 0
    n_dif_bank: int = 0
    n_dif_subarray: int = 0
    n_dif_row: int = 0

    @property
    def total(self) -> int:
        return self.n_same_row + self.n_dif_bank + self.n_dif_subarray + self.n_dif_row

    def get(self, category: AccessCategory) -> int:
        return getattr(self, "n_" + category.value)

    def as_dict(self) -> Dict[AccessCategory, int]:
        return {cat: self.get(cat) for cat in AccessCategory}

    @classmethod
    def from_mapping(cls, counts) -> "AccessCounts":
        return cls(**{"n_" + AccessCategory(cat).value: int(n) for cat, n in counts.items()})

    def __add__(self, other: "AccessCounts") -> "AccessCounts":
        return AccessCounts(
            self.n_same_row + other.n_same_row,
            self.n_dif_bank + other.n_dif_bank,
            self.n_dif_subarray + other.n_dif_subarray,
            self.n_dif_row + other.n_dif_row,
        )

    def scaled(self, k: int) -> "AccessCounts":
        return AccessCounts(self.n_same_row * k, self.n_dif_bank * k,
                            self.n_dif_subarray * k, self.n_dif_row * k)


def linear_to_coord(index: int, policy, geom: DramGeometry) -> DramCoord:
    policy = get_policy(policy)
    if index < 0 or index >= geom.total_words:
        raise CapacityError(f"word address {index} outside capacity of {geom.total_words} words")
    digits = {}
    rest = index
    for level, radix in policy.levels(geom):
        rest, digits[level.value] = divmod(rest, radix)
    return DramCoord(**digits)


def coord_to_linear(coord: DramCoord, policy, geom: DramGeometry) -> int:
    policy = get_policy(policy)
    index = 0
    stride = 1
    for level, radix in policy.levels(geom):
        digit = coord.digit(level)
        if not 0 <= digit < radix:
            raise BoundsError(f"{level.value} index {digit} outside [0, {radix})")
        index += digit * stride
        stride *= radix
    return index


@lru_cache(maxsize=65536)
def _classify(tile_words: int, policy: MappingPolicy, geom: DramGeometry) -> AccessCounts:
    # Access i (i >= 1) is charged to the outer-most level whose digit
    # increments between i-1 and i.  Level k increments floor((n-1)/stride_k)
    # times; subtracting the next-outer level's count leaves the crossings
    # that stop exactly at level k.
    last = tile_words - 1
    levels = policy.levels(geom)
    changes = []
    stride = 1
    for _, radix in levels:
        changes.append(last // stride)
        stride *= radix
    counts = {cat: 0 for cat in AccessCategory}
    for k, (level, _) in enumerate(levels):
        outer = changes[k + 1] if k + 1 < len(levels) else 0
        counts[LEVEL_CATEGORY[level]] += changes[k] - outer
    counts[AccessCategory.DIF_ROW] += 1
    return AccessCounts.from_mapping(counts)


def classify_tile_stream(tile_words: int, policy, geom: DramGeometry) -> AccessCounts:
    """Split a tile's consecutive word stream into the four access categories.

    The tile occupies linear addresses ``0 .. tile_words-1``; its first access
    always opens a row.
    """
    policy = get_policy(policy)
    if tile_words < 1:
        raise ValueError(f"tile_words must be >= 1, got {tile_words}")
    if tile_words > geom.total_words:
        raise CapacityError(f"tile of {tile_words} words exceeds capacity of {geom.total_words} words")
    return _classify(tile_words, policy, geom)
