"""Result rows, CSV/JSON emitters and the end-to-end ``explore`` run."""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .costs import CostTable, load_cost_table
from .dram import DramArch, DramGeometry, load_geometry
from .engine import (
    ALL_ARCHS,
    ALL_MAPPINGS,
    ALL_SCHEMES,
    CandidateResult,
    DseOutput,
    dse,
    layer_cost,
)
from .errors import ConfigError, OracleMismatch
from .oracle import replay_layer
from .workload import (
    BufferConfig,
    ConvLayer,
    ScheduleScheme,
    enumerate_tilings,
    load_network,
    scheme_to_loop_order,
    trip_counts,
)

log = logging.getLogger(__name__)

DEFAULT_NETWORK = Path(__file__).parent / "data" / "alexnet.json"

# replaying a loop nest is linear in its iteration count; larger nests are
# left out of the oracle sample pool
ORACLE_MAX_ITERATIONS = 50_000
ORACLE_SEED = 0


def sig6(x: float) -> float:
    return float(f"{x:.6g}")


@dataclass(frozen=True)
class ReportRow:
    layer: str
    arch: str
    scheme: str
    mapping: int
    Tp: int
    Tq: int
    Tm: int
    Tc: int
    n_same_row: int
    n_dif_bank: int
    n_dif_subarray: int
    n_dif_row: int
    cycles: int
    energy_pj: float
    latency_ns: float
    edp: float
    is_best: bool

    @classmethod
    def from_result(cls, r: CandidateResult, is_best: bool = False) -> "ReportRow":
        return cls(r.layer, r.arch.value, r.scheme.value, r.mapping, *r.tile.as_tuple(),
                   r.counts.n_same_row, r.counts.n_dif_bank, r.counts.n_dif_subarray,
                   r.counts.n_dif_row, r.cycles, sig6(r.energy_pj), sig6(r.latency_ns),
                   sig6(r.edp), is_best)


COLUMNS = tuple(f.name for f in fields(ReportRow))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_rows(rows: Sequence[ReportRow], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in COLUMNS])


def read_rows(path) -> List[ReportRow]:
    types = {f.name: f.type for f in fields(ReportRow)}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ConfigError(f"{path}: unexpected header {reader.fieldnames}")
        for raw in reader:
            values = {}
            for name, text in raw.items():
                kind = types[name]
                if kind == "bool":
                    values[name] = text == "1"
                elif kind == "int":
                    values[name] = int(text)
                elif kind == "float":
                    values[name] = float(text)
                else:
                    values[name] = text
            rows.append(ReportRow(**values))
    return rows


def group_rows(output: DseOutput) -> List[ReportRow]:
    """One row per (layer, arch, scheme, mapping): the best tiling for that mapping.

    ``is_best`` marks the winning mapping of each (layer, arch, scheme) group,
    using the same later-wins tie rule as the exploration.
    """
    rows = []
    for outcome in output.layers:
        for arch in output.archs:
            for scheme in output.schemes:
                results = [outcome.group_best[(arch, scheme, m)] for m in output.mappings]
                winner = None
                for r in results:
                    if winner is None or r.edp <= winner.edp:
                        winner = r
                rows.extend(ReportRow.from_result(r, r is winner) for r in results)
    return rows


@dataclass(frozen=True)
class ComparisonRow:
    layer: str
    arch: str
    scheme: str
    mapping: int
    edp: float
    normalized_edp: Optional[float]
    improvement: Optional[float]
    vs_ddr3: Optional[float]


def emit_comparison(rows: Sequence[ReportRow]) -> List[ComparisonRow]:
    """Normalize each group's EDPs to its worst mapping and compare SALP with DDR3.

    ``improvement`` is 1 - EDP/max within (layer, arch, scheme); ``vs_ddr3`` is
    1 - EDP(arch)/EDP(ddr3) for the same (layer, scheme, mapping).
    """
    groups: Dict[Tuple[str, str, str], List[ReportRow]] = {}
    for row in rows:
        groups.setdefault((row.layer, row.arch, row.scheme), []).append(row)
    ddr3 = {(r.layer, r.scheme, r.mapping): r.edp for r in rows if r.arch == DramArch.DDR3.value}

    out = []
    for key, members in groups.items():
        worst = max(r.edp for r in members)
        single = len({r.mapping for r in members}) < 2
        if single:
            log.warning("group %s has a single mapping; improvement ratio omitted", "/".join(key))
        for r in members:
            base = ddr3.get((r.layer, r.scheme, r.mapping))
            out.append(ComparisonRow(
                r.layer, r.arch, r.scheme, r.mapping, r.edp,
                None if single else sig6(r.edp / worst),
                None if single else sig6(1.0 - r.edp / worst),
                None if base is None or r.arch == DramArch.DDR3.value else sig6(1.0 - r.edp / base),
            ))
    return out


def best_vs_worst(comparison: Sequence[ComparisonRow]) -> List[dict]:
    groups: Dict[Tuple[str, str, str], List[ComparisonRow]] = {}
    for c in comparison:
        groups.setdefault((c.layer, c.arch, c.scheme), []).append(c)
    out = []
    for (layer, arch, scheme), members in groups.items():
        if len(members) < 2:
            continue
        best = min(members, key=lambda c: c.edp)
        worst = max(members, key=lambda c: c.edp)
        out.append({"layer": layer, "arch": arch, "scheme": scheme,
                    "best_mapping": best.mapping, "worst_mapping": worst.mapping,
                    "improvement": sig6(1.0 - best.edp / worst.edp)})
    return out


def _row_json(r: CandidateResult) -> dict:
    row = asdict(ReportRow.from_result(r, True))
    row.pop("is_best")
    row["resolved_scheme"] = r.resolved_scheme.value
    return row


@dataclass
class RunConfig:
    network: Optional[Path] = None
    geometry: Optional[Path] = None
    costs: Optional[Path] = None
    buffers: BufferConfig = field(default_factory=BufferConfig)
    archs: Tuple[DramArch, ...] = ALL_ARCHS
    schemes: Tuple[ScheduleScheme, ...] = ALL_SCHEMES
    mappings: Tuple[int, ...] = ALL_MAPPINGS
    tiling: str = "divisors"
    out: Path = Path("results")
    oracle_check: int = 32
    log_candidates: bool = False

    def validate(self):
        for label, path in (("network", self.network), ("geometry", self.geometry), ("costs", self.costs)):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{label} file {path} does not exist")
        if not self.archs or not self.schemes or not self.mappings:
            raise ConfigError("architecture, scheme and mapping lists must be non-empty")
        if not set(self.mappings) <= set(ALL_MAPPINGS):
            raise ConfigError(f"mapping ids must be within 1..6, got {list(self.mappings)}")
        if self.oracle_check < 0:
            raise ConfigError("oracle-check sample count must be >= 0")
        return self

    def describe(self) -> dict:
        return {
            "network": str(self.network) if self.network else "builtin:alexnet",
            "geometry": str(self.geometry) if self.geometry else "builtin:ddr3-2Gb-x8",
            "costs": str(self.costs) if self.costs else "builtin:ddr3-1600-derived",
            "buffers": [self.buffers.iB, self.buffers.wB, self.buffers.oB],
            "archs": [a.value for a in self.archs],
            "schemes": [s.value for s in self.schemes],
            "mappings": list(self.mappings),
            "tiling": self.tiling,
            "oracle_check": self.oracle_check,
        }


def oracle_check(network: Sequence[ConvLayer], output: DseOutput, geom: DramGeometry,
                 buffers: BufferConfig, table: CostTable, mode: str, samples: int) -> int:
    """Replay randomly drawn candidates and compare with the closed-form costs.

    Returns the number of candidates checked; raises OracleMismatch on the
    first disagreement.
    """
    if samples == 0:
        return 0
    rng = random.Random(ORACLE_SEED)
    pool = []
    for layer, outcome in zip(network, output.layers):
        for tile in enumerate_tilings(layer, buffers, mode):
            trips = trip_counts(layer, tile)
            if trips["s"] * trips["m"] * trips["c"] <= ORACLE_MAX_ITERATIONS:
                pool.append((layer, outcome, tile))
    if not pool:
        return 0
    checked = 0
    for _ in range(samples):
        layer, outcome, tile = rng.choice(pool)
        scheme = rng.choice(output.schemes)
        mapping = rng.choice(output.mappings)
        arch = rng.choice(output.archs)
        resolved = outcome.adaptive if scheme is ScheduleScheme.ADAPTIVE else scheme
        order = scheme_to_loop_order(resolved)
        model = layer_cost(layer, tile, order, mapping, arch, geom, table, scheme=resolved)
        cycles, energy, counts = replay_layer(layer, tile, order, mapping, geom, table, arch)
        if (cycles, counts) != (model.cycles, model.counts) or energy != model.energy_pj:
            raise OracleMismatch(
                f"{layer.name} tile {tile.as_tuple()} {resolved.value} mapping {mapping} {arch.value}: "
                f"model {model.counts}/{model.cycles} cycles, replay {counts}/{cycles} cycles")
        checked += 1
    return checked


def run(config: RunConfig) -> dict:
    """Run the exploration and write results.csv, comparison.csv and summary.json."""
    config.validate()
    network = load_network(config.network or DEFAULT_NETWORK)
    geom = load_geometry(config.geometry) if config.geometry else DramGeometry()
    table = load_cost_table(config.costs)

    output = dse(network, geom, config.buffers, config.archs, config.schemes, config.mappings,
                 table, config.tiling, config.log_candidates)
    checked = oracle_check(network, output, geom, config.buffers, table, config.tiling,
                           config.oracle_check)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = group_rows(output)
    write_rows(rows, out / "results.csv")
    if config.log_candidates:
        cand = [ReportRow.from_result(r) for o in output.layers for r in o.candidates]
        write_rows(cand, out / "candidates.csv")
    comparison = emit_comparison(rows)
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        names = [f.name for f in fields(ComparisonRow)]
        writer.writerow(names)
        for c in comparison:
            writer.writerow(["" if getattr(c, n) is None else _fmt(getattr(c, n)) for n in names])

    summary = {
        "config": config.describe(),
        "geometry": geom.to_dict(),
        "layers": [
            {
                "layer": o.layer,
                "tilings": o.n_tilings,
                "adaptive_scheme": o.adaptive.value,
                "traffic_words": {s.value: n for s, n in o.traffic.items()},
                "best": {a.value: _row_json(o.best[a]) for a in output.archs},
            }
            for o in output.layers
        ],
        "network": {
            a.value: {
                "edp": sig6(output.network_edp(a)),
                "energy_pj": sig6(sum(o.best[a].energy_pj for o in output.layers)),
                "latency_ns": sig6(sum(o.best[a].latency_ns for o in output.layers)),
            }
            for a in output.archs
        },
        "best_vs_worst": best_vs_worst(comparison),
        "oracle": {"checked": checked, "mismatches": 0},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n")
    return summary
