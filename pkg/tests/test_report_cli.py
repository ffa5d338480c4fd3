import json
import logging

import pytest

from dramdse.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NETWORK, EXIT_OK, main
from dramdse.engine import dse
from dramdse.report import (
    ReportRow,
    emit_comparison,
    group_rows,
    read_rows,
    write_rows,
)
from dramdse.workload import BufferConfig, ConvLayer

SMALL_NET = [
    ConvLayer("a", 12, 12, 8, 3, 3, 16, pad=1).to_dict(),
    ConvLayer("b", 12, 12, 16, 3, 3, 8, stride=2).to_dict(),
]


def _row(layer="l", arch="ddr3", scheme="ifms", mapping=1, edp=1.0):
    return ReportRow(layer, arch, scheme, mapping, 1, 1, 1, 1, 1, 0, 0, 1, 52, 1.5, 65.0, edp, False)


def test_comparison_ratio():
    rows = [_row(mapping=1, edp=100.0), _row(mapping=2, edp=50.0)]
    comp = {c.mapping: c for c in emit_comparison(rows)}
    assert comp[2].improvement == 0.5
    assert comp[1].improvement == 0.0
    assert comp[2].normalized_edp == 0.5


def test_comparison_all_equal():
    comp = emit_comparison([_row(mapping=m, edp=7.0) for m in (1, 2, 3)])
    assert all(c.improvement == 0.0 for c in comp)


def test_comparison_single_mapping_warns(caplog):
    with caplog.at_level(logging.WARNING):
        comp = emit_comparison([_row(mapping=3)])
    assert comp[0].improvement is None
    assert "single mapping" in caplog.text


def test_comparison_vs_ddr3():
    rows = [_row(arch="ddr3", edp=10.0), _row(arch="salp1", edp=8.0)]
    comp = {c.arch: c for c in emit_comparison(rows)}
    assert comp["salp1"].vs_ddr3 == pytest.approx(0.2)
    assert comp["ddr3"].vs_ddr3 is None


def test_csv_round_trip(tmp_path, alexnet_dse):
    rows = group_rows(alexnet_dse)
    write_rows(rows, tmp_path / "r.csv")
    assert read_rows(tmp_path / "r.csv") == rows


def test_one_best_per_group(alexnet_dse):
    rows = group_rows(alexnet_dse)
    groups = {}
    for r in rows:
        groups.setdefault((r.layer, r.arch, r.scheme), []).append(r.is_best)
    assert all(flags.count(True) == 1 for flags in groups.values())


def test_ratios_in_range(alexnet_dse):
    for c in emit_comparison(group_rows(alexnet_dse)):
        assert 0.0 <= c.improvement < 1.0
        assert 0.0 < c.normalized_edp <= 1.0


def test_ddr3_adaptive_improvement_pinned(alexnet_dse):
    # values from the first verified run with the bundled cost table
    pinned = {"conv1": 0.844123, "conv2": 0.844149, "conv3": 0.844155, "conv4": 0.84414, "conv5": 0.844155}
    comp = emit_comparison(group_rows(alexnet_dse))
    got = {c.layer: c.improvement for c in comp
           if c.arch == "ddr3" and c.scheme == "adaptive" and c.mapping == 3}
    assert got == pinned


def test_singleton_mapping_axis_matches_full_run(alexnet, alexnet_dse, geom, table):
    only3 = dse(alexnet, geom, BufferConfig(), mappings=[3], table=table)
    for o_full, o3 in zip(alexnet_dse.layers, only3.layers):
        for key, r in o3.group_best.items():
            assert r == o_full.group_best[key]
    assert all(r.is_best for r in group_rows(only3))


@pytest.fixture
def small_net(tmp_path):
    path = tmp_path / "net.json"
    path.write_text(json.dumps(SMALL_NET))
    return path


def test_explore_writes_artifacts(tmp_path, small_net, capsys):
    out = tmp_path / "out"
    code = main(["explore", "--network", str(small_net), "--out", str(out), "--oracle-check", "8",
                 "--log-candidates"])
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["oracle"] == {"checked": 8, "mismatches": 0}
    assert [l["layer"] for l in summary["layers"]] == ["a", "b"]
    rows = read_rows(out / "results.csv")
    assert len(rows) == 2 * 4 * 4 * 6
    assert len(read_rows(out / "candidates.csv")) > len(rows)
    assert "network" in capsys.readouterr().out


def test_invalid_network_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([dict(SMALL_NET[0], P=99)]))
    assert main(["explore", "--network", str(path), "--out", str(tmp_path / "o")]) == EXIT_NETWORK


def test_infeasible_exit_code(tmp_path, small_net):
    assert main(["explore", "--network", str(small_net), "--buffers", "1,1,1",
                 "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


@pytest.mark.parametrize("argv", [
    ["--mappings", "3,7"],
    ["--arch", "ddr4"],
    ["--schemes", ""],
    ["--tiling", "step:0"],
    ["--geometry", "/nonexistent.json"],
    ["--buffers", "1,2"],
])
def test_config_errors(tmp_path, small_net, argv):
    assert main(["explore", "--network", str(small_net), "--out", str(tmp_path / "o")] + argv) == EXIT_CONFIG


def test_verify_command(capsys, tmp_path):
    assert main(["verify", "--policy", "3", "--words", "2048", "--arch", "ddr3",
                 "--trace", str(tmp_path / "t.csv")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "match" in out and "2032" in out
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 2049
