import csv
import json
import subprocess
import sys

import jsonschema
import pytest

from momlab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_combin_example(capsys):
    code, out, _ = run(capsys, "combin", "--s", "2", "--n", "2", "--class", "F")
    res = json.loads(out)
    assert code == 0
    assert (res["count"], res["formula_value"], res["match"]) == (2, 2, True)


def test_chars_example(capsys):
    code, out, _ = run(capsys, "chars", "--q", "12")
    res = json.loads(out)
    assert code == 0
    assert len(res["characters"]) == 4
    assert sorted(c["conductor"] for c in res["characters"]) == [1, 3, 4, 12]


def test_verify_quick(capsys):
    code, out, _ = run(capsys, "verify", "--level", "quick")
    res = json.loads(out)
    assert code == 0 and res["passed"]
    assert all(c["passed"] for c in res["checks"])


def test_validation_exit_code(capsys):
    code, _, err = run(capsys, "psi", "--q", "6", "--x", "10", "--a", "2")
    assert code == 1 and "coprime" in err
    code, _, _ = run(capsys, "chars", "--q", "5", "--eta", "expK:abc")
    assert code == 0  # eta unused by chars
    code, _, _ = run(capsys, "psi", "--q", "5", "--x", "10", "--eta", "expK:abc")
    assert code == 1


def test_budget_exit_code(capsys):
    code, _, err = run(capsys, "moments", "--q", "101", "--n", "6", "--x", "10", "--side", "character", "--budget", "1000", "--table", "10000")
    assert code == 2 and "budget" in err


def test_io_exit_code(capsys, tmp_path):
    code, _, _ = run(capsys, "zeros", "--q", "3", "--T", "10", "--file", str(tmp_path / "missing.tsv"))
    assert code == 3


def test_config_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# weights\neta = expK:2\ntable = 10000\n")
    _, out, _ = run(capsys, "psi", "--q", "5", "--x", "10", "--conrey", "2", "--config", str(cfg))
    assert json.loads(out)["eta"] == "expK:2"
    _, out, _ = run(capsys, "psi", "--q", "5", "--x", "10", "--conrey", "2", "--config", str(cfg), "--eta", "expK:3")
    assert json.loads(out)["eta"] == "expK:3"


def test_bad_config_line(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("eta expK:2\n")
    code, _, err = run(capsys, "chars", "--q", "5", "--config", str(cfg))
    assert code == 1 and ":1:" in err


def test_outputs_rerun_identical_and_csv_parses(capsys, tmp_path):
    args = ["moments", "--q", "7", "--n", "2", "--grid", "10,100,1000", "--table", "100000", "--out", str(tmp_path)]
    run(capsys, *args)
    files = sorted(p.name for p in tmp_path.iterdir())
    data = {p.name: p.read_bytes() for p in tmp_path.iterdir() if p.suffix in (".json", ".csv")}
    run(capsys, *args)
    for name, blob in data.items():
        assert (tmp_path / name).read_bytes() == blob
    assert sorted(p.name for p in tmp_path.iterdir()) == files
    (man,) = [p for p in tmp_path.iterdir() if p.name.startswith("manifest-")]
    lines = man.read_text().splitlines()
    assert len(lines) == 2  # append-only
    rec = json.loads(lines[0])
    jsonschema.validate(rec, cli.schema("manifest"))
    assert set(rec["files"]) <= {p.name for p in tmp_path.iterdir()}
    (csvf,) = [p for p in tmp_path.iterdir() if p.suffix == ".csv"]
    rows = list(csv.DictReader(csvf.open(newline="")))
    assert len(rows) == 3
    assert float(rows[0]["rel_diff"]) < 1e-9


@pytest.mark.parametrize(
    "argv",
    [
        ["chars", "--q", "9"],
        ["combin", "--s", "3", "--n", "2"],
        ["psi", "--q", "5", "--x", "100", "--a", "2", "--table", "100000"],
        ["moments", "--q", "5", "--n", "3", "--x", "1000", "--table", "100000"],
        ["histogram", "--q", "11", "--x", "50000", "--bins", "5", "--table", "100000"],
        ["omega-search", "--q", "11", "--grid", "100:50000:7", "--table", "100000"],
        ["omega-search", "--q", "11", "--grid", "100,1000", "--mode", "raw", "--c", "0.1", "--table", "100000"],
    ],
)
def test_outputs_match_schemas(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    jsonschema.validate(json.loads(out), cli.schema(argv[0]))


def test_zero_commands(capsys, cache_dir):
    code, out, _ = run(capsys, "zeros", "--q", "5", "--T", "40", "--cache-dir", str(cache_dir))
    res = json.loads(out)
    assert code == 0 and len(res["characters"]) == 3
    code, out, _ = run(capsys, "psi", "--q", "5", "--x", "20", "--conrey", "2", "--side", "zero", "--cache-dir", str(cache_dir), "--table", "100000")
    zs = json.loads(out)
    _, out, _ = run(capsys, "psi", "--q", "5", "--x", "20", "--conrey", "2", "--table", "100000")
    ps = json.loads(out)
    assert abs(zs["value"] - ps["value"]) <= zs["bound"] + ps["bound"]


def test_model_command(capsys, cache_dir, tmp_path):
    code, out, _ = run(capsys, "model", "--q", "5", "--n", "2", "--samples", "2000", "--boot", "10", "--cache-dir", str(cache_dir), "--dump", "--out", str(tmp_path))
    res = json.loads(out)
    assert code == 0
    assert res["imag_residue"] < 1e-9
    assert abs(res["mean"] - res["exact_mean"]) <= 4 * res["stderr"] + res["exact_mean_tail"]
    (csvf,) = tmp_path.glob("*.csv")
    assert len(list(csv.DictReader(csvf.open(newline="")))) == 2000


def test_parse_grid():
    assert list(cli.parse_grid("1,2,3")) == [1.0, 2.0, 3.0]
    g = cli.parse_grid("10:1000:3")
    assert g[1] == pytest.approx(100.0)


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "momlab.cli", "combin", "--s", "3", "--n", "2"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["count"] == 8
