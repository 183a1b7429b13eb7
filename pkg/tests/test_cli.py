import csv
import io
import json

import pytest

from hybridqkd.cli import COLUMNS, main
from hybridqkd.config import ConfigError, distance_to_transmissivity, parse_config, preset

BASE = """
model:
  T: 0.1
  xi: 0.01
  eta: 0.6
  v_el: 0.015
  V: 10
finite: {n: 1e9, coherent_eps: 1e-42}
sweep: {variable: tau, start: 0, stop: 1, step: 0.5}
"""


@pytest.fixture
def cfg_file(tmp_path):
    def write(text=BASE, name="c.yaml"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sweep_csv_header_and_order(cfg_file, capsys):
    code, out, _ = run(["sweep", "--config", cfg_file()], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == COLUMNS
    keys = [(r[1], r[3], r[2]) for r in rows[1:]]
    assert len(keys) == 3 * 2 * 3
    assert keys[0] == ("0", "asymptotic", "individual")
    assert keys[-1] == ("1", "finite", "hybrid")


def test_csv_and_json_carry_the_same_values(cfg_file, capsys):
    path = cfg_file()
    _, out_csv, _ = run(["sweep", "--config", path], capsys)
    _, out_json, _ = run(["sweep", "--config", path, "--format", "json"], capsys)
    rows = list(csv.DictReader(io.StringIO(out_csv)))
    records = json.loads(out_json)
    assert len(rows) == len(records)
    for row, rec in zip(rows, records):
        for col in ("mu_star", "V_star", "I_ab", "eve_info", "rate", "ell", "delta"):
            if row[col] not in ("", "nan"):
                assert float(row[col]) == rec[col]


def test_output_is_byte_stable_and_worker_independent(cfg_file, tmp_path, capsys):
    path = cfg_file()
    outs = []
    for workers in ("1", "1", "3"):
        target = tmp_path / f"out{len(outs)}.csv"
        assert main(["sweep", "--config", path, "--workers", workers, "--out", str(target)]) == 0
        outs.append(target.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_worker_env_variable(cfg_file, capsys, monkeypatch):
    monkeypatch.setenv("HYBRIDQKD_WORKERS", "two")
    code, _, err = run(["sweep", "--config", cfg_file()], capsys)
    assert code == 2 and "HYBRIDQKD_WORKERS" in err


def test_missing_field_names_it(cfg_file, capsys):
    code, _, err = run(["evaluate", "--config", cfg_file(BASE.replace("  eta: 0.6\n", ""))], capsys)
    assert code == 2 and "model.eta" in err


def test_unknown_field_and_bad_values(cfg_file, capsys):
    code, _, err = run(["evaluate", "--config", cfg_file(BASE.replace("xi:", "xii:"))], capsys)
    assert code == 2 and "model.xii" in err
    code, _, err = run(["evaluate", "--config", cfg_file(), "--set", "model.T=abc"], capsys)
    assert code == 2 and "model.T" in err
    code, _, err = run(["evaluate", "--config", cfg_file(), "--set", "sweep.step=0"], capsys)
    assert code == 2 and "sweep.step" in err


def test_json_config_accepted(cfg_file, capsys):
    text = json.dumps({"model": {"T": 0.1, "xi": 0.01, "eta": 0.6, "v_el": 0.015, "V": 10},
                       "attacks": ["individual"], "regime": "asymptotic"})
    code, out, _ = run(["evaluate", "--config", cfg_file(text, "c.json")], capsys)
    assert code == 0
    assert json.loads(out)[0]["attack"] == "individual"


def test_direct_reconciliation_out_of_scope(cfg_file, capsys):
    code, _, err = run(["evaluate", "--config", cfg_file(), "--reconciliation", "direct"], capsys)
    assert code == 2 and "out of scope" in err


def test_evaluate_is_verbose_and_consistent(cfg_file, capsys):
    code, out, _ = run(["evaluate", "--config", cfg_file(), "--regime", "asymptotic",
                        "--set", "model.memory.tau=1"], capsys)
    assert code == 0
    recs = {r["attack"]: r for r in json.loads(out)}
    assert {"omega_E", "chi_collective", "shannon_individual", "chi_cross"} <= set(recs["hybrid"])
    assert recs["hybrid"]["rate"] == pytest.approx(recs["coherent"]["rate"], abs=1e-9)


def test_evaluate_fig2_individual_positive(capsys):
    code, out, _ = run(["evaluate", "--preset", "fig2", "--regime", "asymptotic", "--attack", "individual",
                        "--set", "model.memory.tau=0.1"], capsys)
    assert code == 0 and json.loads(out)[0]["rate"] > 0


def test_flagged_rows_keep_sweep_going(cfg_file, capsys):
    text = BASE.replace("  T: 0.1\n", "").replace(
        "sweep: {variable: tau, start: 0, stop: 1, step: 0.5}", "sweep: {variable: distance_km, start: 0, stop: 20, step: 10}")
    code, out, err = run(["sweep", "--config", cfg_file(text), "--regime", "asymptotic", "--attack", "individual"],
                         capsys)
    assert code == 0 and "warning" in err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[0]["error"] and not rows[1]["error"]


def test_total_failure_exit_code(cfg_file, capsys):
    text = BASE.replace("  T: 0.1\n", "  T: 1.0\n")
    code, _, _ = run(["sweep", "--config", cfg_file(text), "--regime", "asymptotic"], capsys)
    assert code == 3


def test_threshold_verb(capsys):
    code, out, _ = run(["threshold", "--preset", "fig2", "--regime", "asymptotic", "--boundary",
                        "individual-hybrid", "--tol", "0.02"], capsys)
    assert code == 0
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert abs(float(row["tau"]) - 0.17) < 0.03


def test_presets_parse():
    for name in ("fig2", "fig3", "figA1"):
        cfg = parse_config(preset(name))
        assert cfg.sweep is not None
    assert parse_config(preset("figA1")).T == 0.5
    assert parse_config(preset("fig3")).sweep.variable == "distance_km"
    with pytest.raises(ConfigError):
        preset("fig9")


def test_distance_mapping():
    assert distance_to_transmissivity(50) == pytest.approx(0.1)
    assert distance_to_transmissivity(0) == 1.0
