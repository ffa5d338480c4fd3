"""Per-access cycle and energy costs, and the linear tile cost model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Mapping

from .dram import AccessCategory, AccessCounts, DramArch
from .errors import ConfigError

_ORDER = (AccessCategory.SAME_ROW, AccessCategory.DIF_BANK,
          AccessCategory.DIF_SUBARRAY, AccessCategory.DIF_ROW)


@dataclass(frozen=True)
class Cost:
    cycles: int
    energy_pj: float


@dataclass(frozen=True)
class CostTable:
    entries: Mapping[DramArch, Mapping[AccessCategory, Cost]]
    clock_period_ns: float

    def cost(self, arch, category) -> Cost:
        try:
            return self.entries[DramArch(arch)][AccessCategory(category)]
        except (KeyError, ValueError):
            raise ConfigError(f"cost table has no entry for {arch}/{category}") from None

    def scaled(self, energy_factor: float = 1.0, cycle_factor: int = 1) -> "CostTable":
        return CostTable(
            {arch: {cat: Cost(c.cycles * cycle_factor, c.energy_pj * energy_factor)
                    for cat, c in row.items()}
             for arch, row in self.entries.items()},
            self.clock_period_ns,
        )

    def with_entry(self, arch, category, cycles=None, energy_pj=None) -> "CostTable":
        entries = {a: dict(row) for a, row in self.entries.items()}
        old = entries[DramArch(arch)][AccessCategory(category)]
        entries[DramArch(arch)][AccessCategory(category)] = Cost(
            old.cycles if cycles is None else cycles,
            old.energy_pj if energy_pj is None else energy_pj,
        )
        return CostTable(entries, self.clock_period_ns)

    def validate(self) -> "CostTable":
        if not self.clock_period_ns > 0:
            raise ConfigError("clock_period_ns must be positive")
        for arch in self.entries:
            row = self.entries[arch]
            for cat in _ORDER:
                if cat not in row:
                    raise ConfigError(f"cost table: {arch.value} lacks {cat.value}")
                c = row[cat]
                if not isinstance(c.cycles, int) or c.cycles <= 0 or not c.energy_pj > 0:
                    raise ConfigError(f"cost table: {arch.value}/{cat.value} must be positive (integer cycles)")
            for attr in ("cycles", "energy_pj"):
                values = [getattr(row[cat], attr) for cat in _ORDER]
                if any(a > b for a, b in zip(values, values[1:])):
                    raise ConfigError(
                        f"cost table: {arch.value} {attr} must be non-decreasing "
                        f"same_row <= dif_bank <= dif_subarray <= dif_row, got {values}")
            if arch is DramArch.DDR3:
                if row[AccessCategory.DIF_SUBARRAY] != row[AccessCategory.DIF_ROW]:
                    raise ConfigError("cost table: ddr3 dif_subarray must equal dif_row (no subarray parallelism)")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "CostTable":
        try:
            clock = float(data["clock_period_ns"])
            archs = data["architectures"]
            entries = {}
            for arch_name, row in archs.items():
                arch = DramArch(arch_name)
                entries[arch] = {
                    AccessCategory(cat): Cost(int(v["cycles"]), float(v["energy_pj"]))
                    for cat, v in row.items()
                }
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed cost table: {exc!r}") from exc
        return cls(entries, clock).validate()

    def to_dict(self) -> dict:
        return {
            "clock_period_ns": self.clock_period_ns,
            "architectures": {
                arch.value: {cat.value: {"cycles": c.cycles, "energy_pj": c.energy_pj}
                             for cat, c in sorted(row.items(), key=lambda kv: _ORDER.index(kv[0]))}
                for arch, row in self.entries.items()
            },
        }


def load_cost_table(path=None) -> CostTable:
    """Load and validate a cost-table file; ``None`` gives the shipped default."""
    try:
        if path is None:
            text = resources.files("dramdse.data").joinpath("default_costs.json").read_text()
        else:
            text = Path(path).read_text()
        data = json.loads(text)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read cost table {path}: {exc}") from exc
    return CostTable.from_dict(data)


def tile_cycles(counts: AccessCounts, arch, table: CostTable) -> int:
    return sum(counts.get(cat) * table.cost(arch, cat).cycles for cat in _ORDER)


def tile_energy(counts: AccessCounts, arch, table: CostTable) -> float:
    return sum(counts.get(cat) * table.cost(arch, cat).energy_pj for cat in _ORDER)


# DDR3-1600 11-11-11, 2Gb x8.  Timings in clock cycles at tCK = 1.25 ns.
DDR3_1600 = {
    "tCK_ns": 1.25,
    "CL": 11,
    "tRCD": 11,
    "tRP": 11,
    "tRAS": 28,
    "BL": 8,
}

# Representative IDD currents (mA) and supply voltage for a 2Gb x8 DDR3-1600 part.
DDR3_IDD = {
    "VDD": 1.5,
    "IDD0": 65.0,
    "IDD2N": 32.0,
    "IDD3N": 38.0,
    "IDD4R": 157.0,
}

# Fraction of tRP still exposed when the next access opens another subarray
# of the same bank.  SALP-1 overlaps precharge with activation, SALP-2 also
# hides write recovery, MASA keeps several subarrays activated and only pays
# subarray selection.
SALP_TRP_EXPOSED = {
    DramArch.SALP1: 0.5,
    DramArch.SALP2: 0.25,
    DramArch.SALP_MASA: 0.0,
}
SUBARRAY_SELECT_CYCLES = 1


def derive_default_table(timing: Dict = DDR3_1600, idd: Dict = DDR3_IDD) -> CostTable:
    """Build the per-access cost table from JEDEC-style timings and IDD currents.

    Cycles: a row hit costs CL + BL/2; opening a row in an idle bank adds
    tRCD; a row conflict also pays tRP.  Energy (pJ, mA * ns * V): every
    access pays a read burst plus active-standby background for its cycles.
    Opening a row in an idle bank pays an activation; closing another row
    first adds a precharge, which subarray-parallel designs overlap in time
    but still perform.
    """
    tck = timing["tCK_ns"]
    burst = timing["BL"] // 2
    hit = timing["CL"] + burst
    miss = timing["tRCD"] + hit
    conflict = timing["tRP"] + miss

    vdd = idd["VDD"]
    e_burst = vdd * (idd["IDD4R"] - idd["IDD3N"]) * burst * tck
    # IDD0 spans one ACT/PRE pair over tRC; split it at the tRAS/tRP boundary
    e_act = vdd * (idd["IDD0"] - idd["IDD3N"]) * timing["tRAS"] * tck
    e_pre = vdd * (idd["IDD0"] - idd["IDD2N"]) * timing["tRP"] * tck

    def cost(cycles, row_ops):
        background = vdd * idd["IDD3N"] * cycles * tck
        return Cost(cycles, round(e_burst + background + row_ops, 3))

    entries = {}
    for arch in DramArch:
        if arch is DramArch.DDR3:
            sub_cycles = conflict
        else:
            exposed = math.ceil(timing["tRP"] * SALP_TRP_EXPOSED[arch])
            sub_cycles = miss + max(exposed, SUBARRAY_SELECT_CYCLES)
        entries[arch] = {
            AccessCategory.SAME_ROW: cost(hit, 0.0),
            AccessCategory.DIF_BANK: cost(miss, e_act),
            AccessCategory.DIF_SUBARRAY: cost(sub_cycles, e_act + e_pre),
            AccessCategory.DIF_ROW: cost(conflict, e_act + e_pre),
        }
    return CostTable(entries, tck).validate()

