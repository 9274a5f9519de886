import json
import subprocess
import sys

import pytest

from obstruction_walks import cli
from obstruction_walks.errors import NumericalError


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_profile(capsys):
    code, out, _ = _run(capsys, "profile", "--point", "1/3")
    assert code == 0
    assert json.loads(out) == {"point": "1/3", "c": 3, "obstructing": [2, 3]}


def test_laws_arcsine(capsys):
    code, out, _ = _run(capsys, "laws", "--law", "arcsine", "--grid", "0,0.25,0.5")
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert [float(v) for _, v in rows] == pytest.approx([0.0, 1 / 3, 0.5])


def test_sigma_csv(capsys):
    code, out, _ = _run(capsys, "sigma", "--pmax", "20")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "p,sigma_p,S"
    assert [int(line.split(",")[0]) for line in lines[1:]] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert float(lines[1].split(",")[1]) == pytest.approx(2 / 3)


def test_paths_csv(capsys):
    code, out, _ = _run(capsys, "paths", "--point", "1/3", "--B", "100", "--m", "3")
    assert code == 0
    last = out.splitlines()[-1].split(",")
    assert float(last[0]) == 1.0 and round(float(last[1]), 4) == 0.3826


@pytest.mark.parametrize("argv,code", [
    (["bogus"], 2),
    (["profile", "--point", "0/1"], 2),
    (["profile", "--point", "0/0"], 2),
    (["experiment", "--kind", "clt", "--B", "10"], 2),
    (["experiment", "--kind", "clt", "--B", "1e4", "--n", "500", "--param", "bogus=1"], 2),
    (["sigma", "--pmax", "1e11"], 3),
    (["experiment", "--kind", "klapaklapa", "--B", "1e4", "--n", "1000",
      "--param", "N_max=22"], 3),
])
def test_exit_codes(capsys, argv, code):
    assert _run(capsys, *argv)[0] == code


def test_numerical_failure_exit_code(capsys, monkeypatch):
    def boom(args):
        raise NumericalError("did not converge")
    monkeypatch.setitem(cli.COMMANDS, "laws", boom)
    code, _, err = _run(capsys, "laws", "--law", "tau2")
    assert code == 4 and "NumericalError" in err


def test_outputs_byte_identical(capsys, tmp_path):
    argv = ["experiment", "--kind", "moments", "--B", "1e4", "--n", "1000", "--seed", "3"]
    a = _run(capsys, *argv)[1]
    from obstruction_walks.experiments import nt_ensemble
    nt_ensemble.cache_clear()
    b = _run(capsys, *argv)[1]
    assert a == b and a
    _run(capsys, *argv, "--out", str(tmp_path))
    assert (tmp_path / "moments.json").exists()


def test_seed_environment_override(capsys, monkeypatch):
    argv = ["experiment", "--kind", "moments", "--B", "1e4", "--n", "1000"]
    monkeypatch.setenv(cli.SEED_ENV, "7")
    a = json.loads(_run(capsys, *argv, "--seed", "1")[1])
    b = json.loads(_run(capsys, *argv, "--seed", "7")[1])
    assert a["seed"] == 7 and a == b
    monkeypatch.setenv(cli.SEED_ENV, "x")
    assert _run(capsys, *argv)[0] == 2


def test_out_file(capsys, tmp_path):
    target = tmp_path / "s.csv"
    code, out, _ = _run(capsys, "sigma", "--pmax", "30", "--out", str(target))
    assert code == 0 and out == ""
    assert target.read_text().startswith("p,sigma_p,S\n2,")


def test_console_script_module():
    res = subprocess.run([sys.executable, "-m", "obstruction_walks.cli", "laws", "--law",
                          "gaussian", "--grid", "0"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[1] == "0.0,0.5"


def test_sigma_cut_at_pmax_with_larger_cached_table(capsys):
    from obstruction_walks.experiments import workspace
    from obstruction_walks.fibration import parse_family
    workspace().sigma(parse_family("s,t"), 10**5)
    code, out, _ = _run(capsys, "sigma", "--pmax", "20")
    assert code == 0 and out.splitlines()[-1].startswith("19,")
