import json

import numpy as np
import pytest

from core.file_manager import SHELL_HEADER, FileManager
from core.report import ExperimentReport
from core.sphere_lattice import enumerate_shell


def make_report():
    return ExperimentReport(
        "demo",
        {"seed": np.int64(3), "ps": (2, 4)},
        [{"q": 5, "value": complex(1.5, -0.5), "x": [0.1, 0.2]}, {"q": 7, "extra": np.float64(2.0)}],
        {"passed": np.bool_(True), "worst": np.float64(0.25)},
    )


def test_report_to_dict_is_json_ready():
    data = make_report().to_dict()
    assert data["params"] == {"seed": 3, "ps": [2, 4]}
    assert data["rows"][0]["value"] == {"re": 1.5, "im": -0.5}
    assert data["summary"]["passed"] is True
    json.dumps(data)


def test_flat_rows_split_complex_and_lists():
    rows = make_report().flat_rows()
    assert rows[0] == {"q": 5, "value_re": 1.5, "value_im": -0.5, "x_0": 0.1, "x_1": 0.2}
    assert rows[1] == {"q": 7, "extra": 2.0}


def test_json_report_is_deterministic(tmp_path):
    path = tmp_path / "out" / "report.json"
    assert FileManager.write_report(make_report(), str(path), "json")
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert text == FileManager.json_text(make_report().to_dict())
    assert json.loads(text)["name"] == "demo"


def test_csv_report_uses_union_of_columns(tmp_path):
    path = tmp_path / "report.csv"
    assert FileManager.write_report(make_report(), str(path), "csv")
    lines = path.read_bytes().decode("utf-8").split("\n")
    assert lines[0] == "q,value_re,value_im,x_0,x_1,extra"
    assert lines[1] == "5,1.5,-0.5,0.1,0.2,"
    assert lines[2] == "7,,,,,2.0"
    assert b"\r" not in path.read_bytes()


def test_write_failure_returns_false(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert not FileManager.save_text_file("data", str(blocker / "child.txt"))
    assert not FileManager.ensure_directory_exists(str(blocker / "sub"))


def test_shell_binary_round_trip(tmp_path):
    shell = enumerate_shell(4, 4)
    path = str(tmp_path / "shell.shel")
    assert FileManager.write_shell_binary(shell, path)
    with open(path, "rb") as f:
        data = f.read()
    assert len(data) == SHELL_HEADER.size + 2 * 4 * 24
    assert data[:4] == b"SHEL"
    loaded = FileManager.read_shell_binary(path)
    assert (loaded.n, loaded.lam) == (4, 4)
    assert np.array_equal(loaded.points, shell.points)


def test_shell_binary_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.shel"
    path.write_bytes(b"SHE")
    with pytest.raises(ValueError):
        FileManager.read_shell_binary(str(path))
    path.write_bytes(SHELL_HEADER.pack(b"NOPE", 2, 25, 0))
    with pytest.raises(ValueError):
        FileManager.read_shell_binary(str(path))
    path.write_bytes(SHELL_HEADER.pack(b"SHEL", 2, 25, 12) + b"\x00" * 10)
    with pytest.raises(ValueError):
        FileManager.read_shell_binary(str(path))


def test_shell_csv(tmp_path, shell_2_25):
    path = tmp_path / "shell.csv"
    assert FileManager.write_shell_csv(shell_2_25, str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x1,x2"
    assert len(lines) == 13
    assert lines[1] == "-5,0"
