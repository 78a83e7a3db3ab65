import csv

import pytest
import yaml

from builders import two_edge_scenario, year_clear_sky
from osmores.cli import main
from osmores.scenario import BUNDLED, ScenarioError, parse_scenario
from osmores.simulation import compare
from osmores.traces import load_trace


def test_bundled_paper_eval_parses():
    sc = parse_scenario("paper_eval")
    by_id = {dc.id: dc for dc in sc.datacenters}
    assert by_id["berlin"].location == (52.52, 13.40)
    assert by_id["paris"].location == (48.8, 2.30)
    assert by_id["dublin"].location == (53.35, -6.30)
    assert [by_id[k].res_utilization for k in ("berlin", "paris", "dublin")] == [0.6, 0.6, 0.4]
    cam = sc.devices[0]
    assert (cam.capacity_mah, cam.initial_mah, cam.voltage, cam.panel_w) == (3000, 2000, 3.7, 10)
    assert by_id["paris"].grid.low_carbon_fraction == 0.9 > by_id["berlin"].grid.low_carbon_fraction == 0.5


@pytest.mark.parametrize("name", BUNDLED)
def test_all_bundled_scenarios_validate(name):
    assert main(["validate", name]) == 0


def test_res_utilization_zero_rejected():
    data = two_edge_scenario()
    data["datacenters"][1]["res_utilization"] = 0
    with pytest.raises(ScenarioError, match=r"datacenters\[1\]\.res_utilization"):
        parse_scenario(data)


def test_unknown_mel_names_the_flow():
    data = two_edge_scenario()
    data["flows"][0]["chain"] = ["MEL_EDGE.*", "MEL_NOPE.*"]
    with pytest.raises(ScenarioError) as info:
        parse_scenario(data)
    assert "cam1_flow" in str(info.value) and "MEL_NOPE" in str(info.value)


def test_all_errors_reported_together():
    data = two_edge_scenario()
    data["datacenters"][0]["res_utilization"] = 0
    data["devices"][0]["transaction_period"] = -5
    data["algorithm"] = "ALG9"
    with pytest.raises(ScenarioError) as info:
        parse_scenario(data)
    assert len(info.value.errors) >= 3


def test_trace_must_cover_run(tmp_path):
    short = year_clear_sky()
    data = two_edge_scenario(start=short.end, duration=7200)
    with pytest.raises(ScenarioError, match="trace covers"):
        parse_scenario(data)


def write_yaml(tmp_path, data):
    path = tmp_path / "sc.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nsim: {}\n")
    assert main(["validate", str(bad)]) == 1
    assert "sim.start" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.yaml")]) in (1, 2)
    broken = tmp_path / "broken.yaml"
    broken.write_text("name: [unclosed\n")
    assert main(["validate", str(broken)]) == 1


def test_cli_runtime_error_exit_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "paper_eval", "--out", str(blocker / "out")]) == 2


def test_cli_simulate_writes_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "paper_eval", "--alg", "ALG1", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "metrics_summary.csv").open()))
    assert rows[0]["algorithm"] == "ALG1" and rows[0]["nearest_edge_ratio"] == "1.000000"
    assert "m_self=" in capsys.readouterr().out


def test_cli_compare_table(tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "paper_eval", "--algs", "ALG1,ALG2,ALG3,ALG4,ALG5", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "comparison.csv").open()))
    assert [r["algorithm"] for r in rows] == ["ALG1", "ALG2", "ALG3", "ALG4", "ALG5"]
    assert set(rows[0]) == {"algorithm", "m_self", "m_low", "nearest_edge_ratio", "n_completed", "n_dropped"}
    assert main(["compare", "paper_eval", "--algs", "ALG1,ALG7", "--out", str(out)]) == 1


def test_compare_is_isolated_under_permutation():
    sc = parse_scenario("paper_eval")
    forward = {r.algorithm: r.comparison_row() for r in compare(sc, ["ALG1", "ALG3", "ALG4", "ALG5"])}
    backward = {r.algorithm: r.comparison_row() for r in compare(sc, ["ALG5", "ALG4", "ALG3", "ALG1"])}
    assert forward == backward


def test_cli_synth_trace(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["synth-trace", "--out", str(out), "--days", "2", "--start", "2016-06-21T00:00:00Z"]) == 0
    trace = load_trace(out)
    assert len(trace) == 48 and trace.power[12] == pytest.approx(1000)
    assert main(["synth-trace", "--out", str(out), "--sunrise", "19", "--sunset", "5"]) == 1


def test_yaml_file_with_relative_trace(tmp_path):
    from osmores.traces import write_trace
    write_trace(year_clear_sky(), tmp_path / "clear.csv")
    data = two_edge_scenario("clear.csv", "clear.csv", "clear.csv", duration=3600)
    data["devices"][0]["trace"] = "clear.csv"
    data["sim"]["start"] = "2016-06-21T00:00:00Z"
    sc = parse_scenario(write_yaml(tmp_path, data))
    assert sc.name == "test" and sc.datacenters[0].trace is sc.datacenters[1].trace


def test_override_helpers():
    sc = parse_scenario("paper_eval")
    assert sc.with_seed(7).sim.seed == 7
    assert sc.with_cooperation("central").cooperation.value == "central"
    with pytest.raises(ScenarioError):
        sc.with_algorithm("ALG0")
