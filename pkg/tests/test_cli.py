import subprocess
import sys

import pytest

from hpfrac.cli import main, parse_layers, read_config_file
from hpfrac.experiments import CSV_HEADER


def test_parse_layers():
    assert parse_layers("1..4") == [1, 2, 3, 4]
    assert parse_layers("3") == [3]
    assert parse_layers("3..2") == []


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "out.csv"
    cfg.write_text("# sweep\ndim = 1\ns = 0.5\nsigma = 0.5\nlayers = 1..3\n"
                   f"out = {out}\ndeterministic = yes\n")
    vals = read_config_file(cfg)
    assert vals["layers"] == [1, 2, 3] and vals["deterministic"] is True
    assert main(["--config", str(cfg), "--layers", "1..2"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_empty_range_writes_header(capsys):
    assert main(["--dim", "1", "--layers", "2..1"]) == 0
    assert capsys.readouterr().out == ",".join(CSV_HEADER) + "\n"


def test_invalid_parameter_exit_code(capsys):
    assert main(["--dim", "1", "--s", "1.5", "--layers", "1"]) == 2
    assert "error" in capsys.readouterr().err


def test_mesh_subcommand(tmp_path):
    out = tmp_path / "mesh.txt"
    assert main(["mesh", "--dim", "2", "--layers", "1", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 17


def test_module_entry_point(tmp_path):
    out = tmp_path / "o.csv"
    res = subprocess.run([sys.executable, "-m", "hpfrac", "--dim", "1", "--layers", "1..3",
                          "--deterministic", "--out", str(out)],
                         capture_output=True, text=True, check=True)
    assert "a_inf" in res.stdout
    assert len(out.read_text().splitlines()) == 4
