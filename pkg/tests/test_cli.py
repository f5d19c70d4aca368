import csv
import io
import json
import subprocess
import sys

import pytest

from mprdelay.cli import main
from mprdelay.config import ConfigError, load_config, read_config_text
from conftest import ACK_S, SIGMA_S

UNIT = ["--preset", "unit", "--set", "N=50"]
TABLE1 = ["--preset", "table1", "--set", f"phy.ack_s={ACK_S!r}", "--set", f"phy.idle_slot_s={SIGMA_S!r}",
          "--set", "PL=8000", "--set", "N=50"]


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def test_saturate(capsys):
    code, out, _ = run(["saturate", *UNIT], capsys)
    assert code == 0
    (row,) = rows_of(out)
    assert float(row["tau_s"]) == pytest.approx(0.0129668, rel=1e-5)
    assert float(row["S_s_pkts_per_s"]) == pytest.approx(0.34203, abs=1e-5)


def test_roots_and_delay(capsys):
    code, out, _ = run(["roots", *UNIT, "--set", "lam=0.002"], capsys)
    (row,) = rows_of(out)
    assert code == 0 and float(row["tau_l"]) < float(row["tau_s"])
    code, out, _ = run(["delay", *UNIT, "--set", "lam=0"], capsys)
    (row,) = rows_of(out)
    assert float(row["E_D"]) == pytest.approx(9.0)
    assert row["stable"] == "true" and row["scope"] == "large-N exact"


def test_delay_unstable_is_a_result_not_an_error(capsys):
    code, out, _ = run(["delay", *UNIT, "--set", "lam=0.01"], capsys)
    (row,) = rows_of(out)
    assert code == 0 and row["stable"] == "false" and row["E_D"] == "inf"


def test_capacity(capsys):
    code, out, _ = run(["capacity", *UNIT], capsys)
    (row,) = rows_of(out)
    assert code == 0 and row["scenario"] == "S1"
    assert float(row["S_bbmd"]) == pytest.approx(0.21952, abs=1e-5)
    code, out, _ = run(["capacity", *TABLE1, "--set", "mode=basic"], capsys)
    assert rows_of(out)[0]["scenario"] == "S4"


def test_table1_requires_unpublished_values(capsys):
    code, _, err = run(["saturate", "--preset", "table1", "--set", "N=50"], capsys)
    assert code == 1 and "phy.ack_s" in err
    code, out, _ = run(["saturate", *TABLE1, "--set", "mode=basic"], capsys)
    assert code == 0
    assert float(rows_of(out)[0]["S_s_pkts_per_s"]) == pytest.approx(483.2, rel=1e-3)


def test_optimize_scaling_monotone(capsys):
    code, out, _ = run(["optimize", *UNIT, "--m-values", "1..6"], capsys)
    rows = rows_of(out)
    assert code == 0 and [int(r["M"]) for r in rows] == list(range(1, 7))
    norm = [float(r["S_star_per_M"]) for r in rows]
    assert all(b > a for a, b in zip(norm, norm[1:]))
    assert float(rows[0]["r_star"]) == pytest.approx(1.3757, abs=2e-4)


def test_sweep_matches_optimize(capsys):
    code, out, _ = run(["sweep", *UNIT, "--axis", "M=1..6", "--what", "optimize"], capsys)
    swept = rows_of(out)
    _, out2, _ = run(["optimize", *UNIT, "--m-values", "1..6"], capsys)
    assert code == 0
    assert [r["r_star"] for r in swept] == [r["r_star"] for r in rows_of(out2)]


def test_sweep_cross_product_order(capsys):
    code, out, _ = run(["sweep", *UNIT, "--axis", "N=10,20", "--axis", "r=1.5,2.0"], capsys)
    rows = rows_of(out)
    assert code == 0
    assert [(r["N"], r["r"]) for r in rows] == [("10", "1.5"), ("10", "2.0"), ("20", "1.5"), ("20", "2.0")]


def test_row_error_exit_code(capsys):
    code, out, err = run(["optimize", *UNIT, "--m-values", "1", "--variant", "printed", "--set", "N=5"], capsys)
    assert code == 0  # falls back to exact binomials at M = 1
    code, out, err = run(["optimize", *UNIT, "--m-values", "1,2", "--set", "r=2", "--target", "SBMD",
                          "--variant", "exact", "--finite-n", "--set", "N=2"], capsys)
    rows = rows_of(out)
    assert code == 2 and rows[0]["error"] and "row failed" in err


def test_config_errors(capsys):
    assert run(["saturate", "--preset", "nope"], capsys)[0] == 1
    assert run(["saturate", *UNIT, "--set", "net.bogus=1"], capsys)[0] == 1
    assert run(["saturate", *UNIT, "--set", "N=abc"], capsys)[0] == 1
    assert run(["saturate", "--preset", "unit"], capsys)[0] == 1
    assert run(["simulate", *UNIT], capsys)[0] == 1


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_output_round_trip(fmt, tmp_path, capsys):
    first = tmp_path / f"a.{fmt}"
    second = tmp_path / f"b.{fmt}"
    assert main(["capacity", *UNIT, "--set", "lam=0.001", "--format", fmt, "--out", str(first)]) == 0
    assert main(["capacity", "--config", str(first), "--format", fmt, "--out", str(second)]) == 0
    assert first.read_text() == second.read_text()
    if fmt == "json":
        doc = json.loads(first.read_text())
        assert doc["config"]["net"]["n_stations"] == "50"


def test_reruns_byte_identical(tmp_path):
    outs = []
    for name in ("x.csv", "y.csv"):
        path = tmp_path / name
        assert main(["simulate", *UNIT, "--set", "lam=0.002", "--set", "sim.duration_s=2000",
                     "--set", "sim.runs=2", "--out", str(path)]) == 0
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    rows = rows_of(outs[0])
    assert [r["run"] for r in rows] == ["0", "1", "mean"]


def test_simulate_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code, out, _ = run(["simulate", *UNIT, "--set", "lam=0.002", "--set", "sim.duration_s=2000",
                        "--trace", str(trace), "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["rows"][0]["delivered"] > 0
    assert trace.read_text().startswith("arrival_s,hol_s,departure_s,retries")


def test_precedence_and_env_presets(tmp_path, monkeypatch):
    (tmp_path / "mine.ini").write_text("[net]\nn_stations = 7\nbackoff_factor = 3.0\n"
                                       "[phy]\nt_idle = 1\nt_coll = 1\nt_succ = 1\n")
    monkeypatch.setenv("MPRDELAY_PRESET_DIR", str(tmp_path))
    cfg_file = tmp_path / "run.ini"
    cfg_file.write_text("[preset]\nname = mine\n[net]\nbackoff_factor = 4.0\n")
    rc = load_config(cfg_file)
    assert rc.net.n_stations == 7 and rc.net.backoff_factor == 4.0 and rc.net.min_window == 16
    rc = load_config(cfg_file, ["r=5"])
    assert rc.net.backoff_factor == 5.0
    with pytest.raises(ConfigError):
        load_config(cfg_file, ["nodot=1"])


def test_read_config_text_forms():
    ini = "[net]\nn_stations = 3\n"
    assert read_config_text(ini)["net"]["n_stations"] == "3"
    assert read_config_text("# [net]\n# n_stations = 3\nN,M\n3,1\n")["net"]["n_stations"] == "3"
    assert read_config_text('{"config": {"net": {"n_stations": 3}}}')["net"]["n_stations"] == "3"
    with pytest.raises(ConfigError):
        read_config_text('{"rows": []}')


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mprdelay", "saturate", *UNIT, "--format", "json"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["rows"][0]["N"] == 50
