import subprocess

import install


class Completed:
    def __init__(self, returncode):
        self.returncode = returncode


def test_python_version_check(capsys):
    assert install.check_python_version((3, 11, 0))
    assert not install.check_python_version((3, 8, 10))
    assert "requires Python 3.9" in capsys.readouterr().out


def test_dependency_install_reports_failure(monkeypatch, capsys):
    calls = []
    monkeypatch.setattr(subprocess, "run", lambda cmd: calls.append(cmd) or Completed(1))
    assert not install.install_dependencies()
    assert calls[0][1:4] == ["-m", "pip", "install"]
    assert calls[0][-1].endswith("requirements.txt")
    assert "pip install -r requirements.txt" in capsys.readouterr().out


def test_selftest_runs_main(monkeypatch):
    calls = []
    monkeypatch.setattr(subprocess, "run", lambda cmd: calls.append(cmd) or Completed(0))
    assert install.run_selftest()
    assert calls[0][1].endswith("main.py")
    assert calls[0][2] == "selftest"
