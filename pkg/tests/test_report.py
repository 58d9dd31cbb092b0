import csv
import io
import json
import math

import pytest

from hybridvod import report
from hybridvod.engine import SimConfig, run
from hybridvod.errors import ConfigError

SMALL = "levels=6\nproxy_count=2\nviewers_min=5\nviewers_max=8\nsim_time=40\ncatalog_size=4\n"


# --- config parsing ------------------------------------------------------------

def test_empty_text_gives_defaults():
    c = report.parse_config("")
    assert c == SimConfig()
    assert (c.ports_per_partition, c.partition_count, c.port_access_time, c.levels,
            c.peers_per_level, c.sim_time) == (10, 20, 120, 15, 4, 480)


def test_comments_blank_lines_and_types():
    c = report.parse_config("# header\n\nlevels = 7  # trailing\nburst=yes\narrival_rates=0.1, 0.2\n")
    assert c.levels == 7 and c.burst is True and c.arrival_rates == (0.1, 0.2)


def test_override_beats_file():
    c = report.parse_config("levels=7\nseed=3\n", ["levels=9"])
    assert c.levels == 9 and c.seed == 3


@pytest.mark.parametrize("text,line", [("seed=1\nadjacency_size=7\n", 2),
                                        ("levels=5\nbogus=1\n", 2),
                                        ("no equals here\n", 1),
                                        ("\n\nlevels=abc\n", 3)])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as err:
        report.parse_config(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_cross_field_error_reports_line():
    with pytest.raises(ConfigError) as err:
        report.parse_config("viewers_min=30\nviewers_max=10\n")
    assert err.value.line == 2


def test_bad_override_named():
    with pytest.raises(ConfigError, match="override"):
        report.parse_config("", ["adjacency_size=0"])


def test_config_text_round_trip():
    c = SimConfig(arrival_rates=(0.125, 0.3), burst=True, seed=9, holding="fixed")
    assert report.parse_config(report.config_text(c)) == c


# --- CSV output ---------------------------------------------------------------------

def read(path):
    return list(csv.reader(io.StringIO(path.read_text())))


def test_run_outputs_and_schema(tmp_path):
    cfg = report.parse_config(SMALL)
    rep, manifest = report.emit_run(cfg, tmp_path)
    for name in ("requests.csv", "throughput.csv", "blocking.csv", "hops.csv", "levels.csv"):
        rows = read(tmp_path / name)
        assert tuple(rows[0]) == report.SCHEMAS[name]
        assert all(len(r) == len(rows[0]) for r in rows)
    hops = read(tmp_path / "hops.csv")[1:]
    assert sum(int(r[2]) for r in hops) == rep.cache_misses
    req = read(tmp_path / "requests.csv")[1:]
    assert int(req[-1][1]) == rep.total_arrivals
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["seed"] == cfg.seed and doc["config"]["levels"] == 6
    assert len(doc["outputs"]) == 5 and doc["finished"]


def test_zero_rate_run_is_header_only(tmp_path):
    cfg = report.parse_config(SMALL + "arrival_rates=0,0\n")
    report.emit_run(cfg, tmp_path)
    for name in ("requests.csv", "throughput.csv", "blocking.csv", "hops.csv", "levels.csv"):
        assert (tmp_path / name).read_text() == ",".join(report.SCHEMAS[name]) + "\n"


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    cfg = report.parse_config(SMALL + "seed=5\n")
    report.emit_run(cfg, tmp_path / "a")
    again = report.RunManifest.load_config(tmp_path / "a" / "manifest.json")
    assert again == cfg
    report.emit_run(again, tmp_path / "b")
    for name in ("requests.csv", "throughput.csv", "blocking.csv", "hops.csv", "levels.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_float_formatting_is_locale_free():
    assert report.csv_text("levels.csv", [(1, 0.1), (2, 1e-20), (3, True)]) == \
        "level,received_kbit\n1,0.1\n2,1e-20\n3,true\n"


def test_blocking_rows_include_class_total(tmp_path):
    cfg = report.parse_config(SMALL)
    rows = report.report_rows(run(cfg), cfg)["blocking.csv"]
    assert len(rows) == 2 * (cfg.partition_count + 1)
    assert [r[1] for r in rows if r[0] == 0][-1] == "all"


# --- sweep helpers --------------------------------------------------------------------

def test_merge_is_order_independent():
    a = {1: {3: 2, 4: 1}, 2: {2: 5}}
    b = {1: {3: 1, 0: 2}}
    assert report.merge_histograms([a, b]) == report.merge_histograms([b, a]) == \
        {1: {0: 2, 3: 3, 4: 1}, 2: {2: 5}}


def test_sweep_rows_summary():
    hops, summary = report.sweep_rows({2: {0: 1, 1: 1, 3: 1}})
    assert hops == [(2, 0, 1), (2, 1, 1), (2, 3, 1)]
    assert summary == [(2, 3, 2, 2.0, 1.0)]


@pytest.mark.parametrize("hist,expected", [
    ({1: 5, 2: 40, 3: 90, 4: 50, 5: 4}, True),
    ({1: 90, 2: 40, 3: 10}, False),       # mode on the edge
    ({1: 5, 2: 90, 3: 5, 4: 90, 5: 5}, False),  # two clear peaks
    ({1: 10, 2: 400, 3: 1000, 4: 990, 5: 1010, 6: 300}, True),  # dip within noise
    ({0: 500, 1: 2, 2: 9, 3: 3}, True),  # not-found bin ignored
])
def test_is_unimodal(hist, expected):
    assert report.is_unimodal(hist) is expected


# --- validation ---------------------------------------------------------------------------

def test_validation_row_deviation():
    r = report.ValidationRow("x", 2.0, 2.1, 0.1)
    assert r.deviation == pytest.approx(0.05) and r.passed
    assert report.ValidationRow("z", 0.0, 1e-13, 0.0).deviation == pytest.approx(0.1)
    assert not report.ValidationRow("y", 1.0, 0.5, 0.1).passed


def test_validation_rows_small():
    cfg = SimConfig(levels=8)
    rows = report.run_validation(cfg, arrivals=5000, bfs_trials=100, samples=30)
    assert [r.quantity.split("(")[0] for r in rows] == [
        "erlang_b", "tier_volume_stream_equivalents", "bfs_oracle_agreement_rate",
        "khintchine_containment_rate"]
    assert rows[2].measured == 1.0 and rows[3].measured == 1.0
    assert all(math.isfinite(r.measured) for r in rows)
    text = report.format_rows(rows)
    assert text.count("\n") == 4
