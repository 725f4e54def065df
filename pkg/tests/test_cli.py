import csv
import io
import json
import shutil
import subprocess
import sys

import pytest

from padicwalk.cli import main, parse_rational
from padicwalk.emit import to_json


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_step_law_tables(capsys):
    code, out, _ = run(capsys, "step-law", "--p", "2", "--m", "2")
    assert code == 0
    law_text, phi_text = out.split("\n\n")
    law = rows(law_text)
    assert [float(r["circleProb"]) for r in law] == pytest.approx([2 / 3, 1 / 3], abs=1e-15)
    assert [float(r["pmfPerElement"]) for r in law] == pytest.approx([2 / 3, 1 / 6], abs=1e-15)
    phi = rows(phi_text)
    assert list(phi[0]) == ["dualNormExp", "phiClosed", "phiOracle", "absDiff"]
    assert all(float(r["absDiff"]) <= 1e-12 for r in phi)
    assert [float(r["phiClosed"]) for r in phi] == pytest.approx([1, 1 / 3, -2 / 3], abs=1e-15)
    code2, out2, _ = run(capsys, "step-law", "--p", "2", "--m", "2")
    assert out2 == out


def test_step_law_oracle_column_on_grid(capsys):
    for p, b, m in [("3", "1/2", "4"), ("5", "2", "3")]:
        code, out, _ = run(capsys, "step-law", "--p", p, "--b", b, "--m", m)
        assert code == 0
        assert all(float(r["absDiff"]) <= 1e-12 for r in rows(out.split("\n\n")[1]))


def test_pmf_matches_step_law(capsys):
    _, law_out, _ = run(capsys, "step-law", "--p", "3", "--m", "3", "--b", "1/2")
    _, pmf_out, _ = run(capsys, "pmf", "--p", "3", "--m", "3", "--b", "1/2", "--steps", "1")
    law = {int(r["ell"]): float(r["pmfPerElement"]) for r in rows(law_out.split("\n\n")[0])}
    pmf = {int(r["ell"]): float(r["pmfPerElement"]) for r in rows(pmf_out)}
    assert set(pmf) == {0} | set(law)
    assert pmf[0] == pytest.approx(0, abs=1e-12)
    for ell, v in law.items():
        assert pmf[ell] == pytest.approx(v, abs=1e-12)


def test_kernel_table(capsys):
    code, out, _ = run(capsys, "kernel", "--m", "5", "--time", "1")
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["j", "density", "ballMass", "tailBound"]
    assert float(table[0]["ballMass"]) == 1
    assert len(table) == 6


def test_moments_precondition_record(capsys):
    code, out, err = run(capsys, "moments", "--m", "3")
    assert code == 2
    assert out == ""
    rec = json.loads(err.strip().splitlines()[-1])
    assert rec["error"] == "PreconditionError"
    assert rec["threshold"] == "M(p,b)" and rec["value"] == 3 and rec["m"] == 3


def test_moments_table_and_exit(capsys):
    code, out, _ = run(capsys, "moments", "--m", "4", "--r", "1/2", "--steps", "1,2,3")
    table = rows(out)
    assert list(table[0]) == ["n", "r", "exactMoment", "bound", "pass"]
    # the printed constants fail at n = 1
    assert table[0]["pass"] == "false"
    assert code == 1
    code, out, _ = run(capsys, "moments", "--m", "4", "--bound", "repaired")
    assert code == 0
    assert len(rows(out)) == 64


def test_walk_reproducible(capsys, tmp_path):
    target = tmp_path / "path.csv"
    assert main(["walk", "--m", "4", "--time", "2", "--seed", "9", "--out", str(target)]) == 0
    first = target.read_bytes()
    assert main(["walk", "--m", "4", "--time", "2", "--seed", "9", "--out", str(target)]) == 0
    assert target.read_bytes() == first
    table = rows(first.decode())
    assert list(table[0]) == ["stepIndex", "time", "residue", "digitString"]
    assert table[0]["residue"] == "0"
    # lambda = (2/3) 2^4 = 32/3, so floor(2 lambda) = 21 steps
    assert len(table) == 22
    assert main(["walk", "--m", "4", "--time", "2", "--seed", "10", "--out", str(target)]) == 0
    assert target.read_bytes() != first


def test_multi_table_outputs(tmp_path):
    target = tmp_path / "law.csv"
    assert main(["step-law", "--m", "3", "--out", str(target)]) == 0
    assert target.exists() and (tmp_path / "law-phi.csv").exists()


def test_json_format(capsys):
    code, out, _ = run(capsys, "step-law", "--m", "2", "--format", "json")
    doc = json.loads(out)
    assert doc["c_m"] == "4/3"
    assert doc["config"]["seed"] == 20240601
    assert doc["tables"]["step_law"][0]["circleProb"] == pytest.approx(2 / 3, abs=1e-16)
    assert "0.66666666666666663" in out  # 17 significant digits


def test_to_json_digits():
    assert to_json(0.1) == "0.10000000000000001"
    assert json.loads(to_json({"a": [1, 2.5, None, True], "b": "x"})) == {"a": [1, 2.5, None, True], "b": "x"}


def test_converge_report(capsys):
    code, out, _ = run(capsys, "converge", "--samples", "20000")
    assert code == 0
    rep = json.loads(out)
    assert rep["seed"] == 20240601
    assert rep["grid"]["mRange"] == [3, 4, 5, 6, 7, 8]
    assert rep["grid"]["times"] == ["1/2", "1", "2"]
    assert set(rep) >= {"params", "grid", "seed", "perM", "fdd", "moments", "mc"}
    assert set(rep["perM"][0]) >= {"m", "t", "epsL1", "tailBound", "supGap"}
    assert set(rep["fdd"][0]) >= {"history", "m", "discrete", "limit", "gap"}
    code2, out2, _ = run(capsys, "converge", "--samples", "20000", "--workers", "3")
    assert out2 == out


def test_converge_literal_and_grid(capsys):
    code, out, _ = run(capsys, "converge", "--m-range", "3..6", "--time", "1,3/2", "--samples", "20000",
                       "--literal-symbol", "--seed", "77")
    assert code == 0
    rep = json.loads(out)
    assert rep["seed"] == 77
    assert rep["grid"]["times"] == ["1", "3/2"]
    decay = [a for a in rep["assertions"] if a["name"].startswith("eps_decay")]
    assert all(a["skipped"] for a in decay)
    assert decay[0]["zeroClassOffset"] > 0


def test_selftest_exit_codes(capsys):
    assert main(["selftest"]) == 0
    assert main(["selftest", "--inject-fault", "phi-sign"]) != 0
    capsys.readouterr()


@pytest.mark.parametrize(
    "args",
    [
        ["step-law", "--p", "4", "--m", "2"],
        ["step-law"],
        ["converge", "--m-range", "5..3"],
        ["converge", "--m-range", "3-5"],
        ["kernel", "--time", "0"],
        ["kernel", "--time", "abc"],
        ["pmf", "--m", "2", "--steps", "-1"],
        ["step-law", "--m", "2", "--format", "xml"],
        ["bogus"],
        ["step-law", "--m", "2", "--samples", "0"],
    ],
)
def test_config_errors(capsys, args):
    assert main(args) == 2
    capsys.readouterr()


def test_decimal_time_warning(capsys):
    code, _, err = run(capsys, "kernel", "--m", "2", "--time", "0.5")
    assert code == 0
    assert "warning" in err and "1/2" in err
    assert parse_rational("3/2", "t") == parse_rational("1.5", "t")


@pytest.mark.skipif(shutil.which("padicwalk") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["padicwalk", "kernel", "--m", "1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("j,density,ballMass,tailBound")
    proc = subprocess.run([sys.executable, "-m", "padicwalk.cli", "moments", "--m", "2"], capture_output=True)
    assert proc.returncode == 2
