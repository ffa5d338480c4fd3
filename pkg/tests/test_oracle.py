import csv

import pytest

from dramdse.dram import POLICIES, AccessCounts, DramArch, DramCoord, DramGeometry, classify_tile_stream
from dramdse.oracle import (
    TRACE_COLUMNS,
    replay_coords,
    replay_state_machine,
    replay_tile,
    write_trace_csv,
)

GEOM = DramGeometry()
SIZES = [1, 2, 7, 127, 128, 129, 1000, 1024, 8192, 16384]
SMALL = DramGeometry(banks_per_chip=2, subarrays_per_bank=3, rows_per_subarray=4, columns_per_row=5)


def test_replay_examples():
    assert replay_tile(2048, 3, GEOM).counts == AccessCounts(2032, 14, 1, 1)
    assert replay_tile(1, 5, GEOM).counts == AccessCounts(0, 0, 0, 1)
    assert replay_tile(128, 3, GEOM).counts == AccessCounts(127, 0, 0, 1)


@pytest.mark.parametrize("policy", list(POLICIES))
def test_small_geometry_matches_closed_form_everywhere(policy):
    # every wrap pattern, including full-chip streams that cross row boundaries
    for n in range(1, SMALL.total_words + 1):
        assert replay_tile(n, policy, SMALL).counts == classify_tile_stream(n, policy, SMALL)


def test_trace_is_complete_and_deterministic(tmp_path):
    a = replay_tile(300, 2, GEOM, keep_trace=True)
    b = replay_tile(300, 2, GEOM, keep_trace=True)
    assert len(a.trace) == 300 and a.counts.total == 300
    write_trace_csv(a, tmp_path / "a.csv")
    write_trace_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    with open(tmp_path / "a.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert rows[2] == ["1", "0", "0", "0", "0", "1", "0", "0", "dif_subarray"]


@pytest.mark.parametrize("arch", list(DramArch))
@pytest.mark.parametrize("policy", list(POLICIES))
def test_state_machine_single_row(policy, arch):
    n = GEOM.columns_per_row
    sm = replay_state_machine(n, policy, GEOM, arch)
    if policy in (1, 3):
        assert sm.counts == replay_tile(n, policy, GEOM).counts
    assert sm.counts.total == n


def test_state_machine_column_first_policies_identical_to_transition_model():
    for policy in (1, 3):
        for arch in DramArch:
            sm = replay_state_machine(GEOM.columns_per_row, policy, GEOM, arch)
            assert sm.bank_return_hits == 0


def test_state_machine_two_rows_policy3():
    sm = replay_state_machine(2 * GEOM.columns_per_row, 3, GEOM, DramArch.DDR3)
    assert sm.bank_return_hits == 0
    assert sm.counts == replay_tile(2 * GEOM.columns_per_row, 3, GEOM).counts


def test_handcrafted_bank_return_ddr3():
    stream = [DramCoord(bank=0), DramCoord(bank=1), DramCoord(bank=0)]
    sm = replay_coords(stream, 3, GEOM, DramArch.DDR3)
    assert sm.counts == AccessCounts(n_same_row=1, n_dif_bank=1, n_dif_subarray=0, n_dif_row=1)
    assert sm.bank_return_hits == 1


def test_ddr3_subarray_switch_closes_bank_row():
    # bank0/sub0 -> bank0/sub1 -> bank0/sub0: DDR3 lost sub0's row, SALP kept it
    stream = [DramCoord(subarray=0), DramCoord(subarray=1), DramCoord(subarray=0)]
    ddr3 = replay_coords(stream, 3, GEOM, DramArch.DDR3)
    salp = replay_coords(stream, 3, GEOM, DramArch.SALP_MASA)
    assert ddr3.bank_return_hits == 0
    assert salp.bank_return_hits == 1
