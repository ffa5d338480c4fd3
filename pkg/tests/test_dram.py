import json

import pytest
from hypothesis import given, strategies as st

from dramdse.dram import (
    POLICIES,
    AccessCounts,
    DramCoord,
    DramGeometry,
    Level,
    MappingPolicy,
    classify_tile_stream,
    coord_to_linear,
    linear_to_coord,
    load_geometry,
)
from dramdse.errors import BoundsError, CapacityError, ConfigError

GEOM = DramGeometry()
SMALL = DramGeometry(banks_per_chip=2, subarrays_per_bank=3, rows_per_subarray=5, columns_per_row=4)


def test_default_geometry_is_2gb_x8():
    assert GEOM.capacity_bytes * 8 == 2 * 2**30
    assert GEOM.columns_per_row * GEOM.burst_bytes == 1024


def test_geometry_rejects_non_positive():
    with pytest.raises(ConfigError):
        DramGeometry(banks_per_chip=0)


def test_geometry_file_round_trip(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(SMALL.to_dict()))
    assert load_geometry(path) == SMALL
    path.write_text(json.dumps({"banks_per_chip": 8}))
    with pytest.raises(ConfigError):
        load_geometry(path)


def test_policy_table():
    assert POLICIES[3].loop_order == (Level.COLUMN, Level.BANK, Level.SUBARRAY, Level.ROW)
    assert all(p.loop_order[-1] is Level.ROW for p in POLICIES.values())
    assert len({p.loop_order for p in POLICIES.values()}) == 6
    with pytest.raises(ConfigError):
        MappingPolicy(7, (Level.ROW, Level.COLUMN, Level.BANK, Level.SUBARRAY))


@pytest.mark.parametrize("policy", list(POLICIES))
def test_zero_decodes_to_origin(policy):
    assert linear_to_coord(0, policy, GEOM) == DramCoord()
    assert coord_to_linear(DramCoord(), policy, GEOM) == 0


def test_decode_examples():
    assert linear_to_coord(129, 3, GEOM) == DramCoord(column=1, bank=1)
    assert linear_to_coord(1024, 1, GEOM) == DramCoord(bank=1)
    assert coord_to_linear(DramCoord(column=1, bank=1), 3, GEOM) == 129
    assert coord_to_linear(DramCoord(row=1), 3, GEOM) == 128 * 8 * 8


def test_capacity_and_bounds():
    with pytest.raises(CapacityError):
        linear_to_coord(GEOM.total_words, 3, GEOM)
    with pytest.raises(BoundsError):
        coord_to_linear(DramCoord(bank=8), 3, GEOM)
    with pytest.raises(CapacityError):
        classify_tile_stream(SMALL.total_words + 1, 3, SMALL)


def test_device_levels_sit_beyond_row():
    g = DramGeometry(chips_per_rank=2, ranks_per_channel=2, channels=2,
                     banks_per_chip=2, subarrays_per_bank=2, rows_per_subarray=2, columns_per_row=2)
    assert linear_to_coord(16, 3, g) == DramCoord(chip=1)
    assert linear_to_coord(32, 3, g) == DramCoord(rank=1)
    assert linear_to_coord(64, 3, g) == DramCoord(channel=1)
    counts = classify_tile_stream(g.total_words, 3, g)
    assert counts.total == g.total_words


@pytest.mark.parametrize("policy", list(POLICIES))
@given(index=st.integers(0, GEOM.total_words - 1))
def test_round_trip(policy, index):
    assert coord_to_linear(linear_to_coord(index, policy, GEOM), policy, GEOM) == index


def test_bijective_on_small_chip():
    for policy in POLICIES:
        coords = {linear_to_coord(i, policy, SMALL) for i in range(SMALL.total_words)}
        assert len(coords) == SMALL.total_words


def test_classify_examples():
    assert classify_tile_stream(1, 4, GEOM) == AccessCounts(0, 0, 0, 1)
    assert classify_tile_stream(2048, 3, GEOM) == AccessCounts(2032, 14, 1, 1)
    assert classify_tile_stream(256, 1, GEOM) == AccessCounts(254, 0, 1, 1)


@pytest.mark.parametrize("policy", list(POLICIES))
def test_conservation_all_sizes(policy):
    for n in range(1, 10001):
        assert classify_tile_stream(n, policy, GEOM).total == n


@given(n=st.integers(1, 128 * 8 * 8))
def test_policy3_row_hits_dominate(n):
    assert classify_tile_stream(n, 3, GEOM).n_dif_row == 1
