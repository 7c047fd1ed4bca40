import json

import pytest

from cli import commands
from cli.commands import EXIT_ACCEPTANCE, EXIT_OK, EXIT_USAGE, build_parser, run_command
from cli.progress import ProgressBar
from core.report import ExperimentReport


def run(tmp_path, *argv):
    return run_command(list(argv) + ["--output", str(tmp_path / "report.json"), "--quiet"])


def test_shell_count_of_obstructed_lambda(tmp_path, capsys):
    assert run(tmp_path, "shell", "--n", "3", "--lambda", "7", "--count") == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "0"
    data = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert data["summary"]["count"] == 0


def test_salie_explicit_check_prints_both_values(tmp_path, capsys):
    code = run(tmp_path, "sums", "salie", "--a", "1", "--b", "1", "--q", "5", "--check-explicit")
    assert code == EXIT_OK
    line = capsys.readouterr().out.splitlines()[0]
    assert "direct = -3.6180" in line
    assert "explicit = -3.6180" in line


def test_multiplicativity_passes_when_sigma_vanishes(tmp_path):
    code = run(tmp_path, "sums", "multiplicativity", "--m-vec", "1,2,3", "--lambda", "7", "--s1", "3", "--s2", "5")
    assert code == EXIT_OK
    data = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert data["rows"][0]["twisted_abs_error"] <= 1e-12


def test_shell_report_compares_size_with_envelope(tmp_path):
    assert run(tmp_path, "shell", "--n", "4", "--lambda", "4") == EXIT_OK
    data = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert data["summary"]["size_envelope"] == 9
    assert abs(data["summary"]["size_ratio"] - 24 / 9) <= 1e-12


def test_dyadic_supnorm_mode(tmp_path):
    code = run(tmp_path, "kernel", "supnorm", "--variant", "sec7", "--n", "2", "--lambda", "121",
               "--major-cut", "4", "--samples", "1000", "--seed", "1")
    assert code == EXIT_OK
    data = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert data["name"] == "dyadic_supnorm"
    assert {row["piece"] for row in data["rows"]} == {"Kminor", "KQs", "K1"}


def test_missing_parameter_is_a_usage_error(tmp_path):
    assert run(tmp_path, "sums", "kloosterman", "--a", "1", "--q", "5") == EXIT_USAGE


def test_randomized_command_needs_a_seed(tmp_path):
    assert run(tmp_path, "weyl", "poisson-check", "--N", "30", "--cases", "2") == EXIT_USAGE


def test_unknown_flag_and_action(tmp_path):
    assert run(tmp_path, "shell", "--n", "3", "--lambda", "7", "--colour", "red") == EXIT_USAGE
    assert run(tmp_path, "sums", "riemann") == EXIT_USAGE
    assert run_command([]) == EXIT_USAGE


def test_failed_verdict_exits_with_two(tmp_path, monkeypatch):
    def failing(config, options, progress):
        return ExperimentReport("always_fails", {}, [], {"passed": False})

    monkeypatch.setitem(commands.HANDLERS, "shell", failing)
    assert run(tmp_path, "shell", "--n", "3", "--lambda", "9") == EXIT_ACCEPTANCE
    assert (tmp_path / "report.json").exists()


def test_config_file_values_are_overridden_by_flags(tmp_path, capsys):
    cfg = tmp_path / "shell.cfg"
    cfg.write_text("n = 3\nlambda = 9\n", encoding="utf-8")
    assert run(tmp_path, "shell", "--config", str(cfg), "--count") == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "30"
    assert run(tmp_path, "shell", "--config", str(cfg), "--lambda", "7", "--count") == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "0"


def test_bad_config_file_is_a_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n = 3\nnonsense\n", encoding="utf-8")
    assert run(tmp_path, "shell", "--config", str(cfg), "--count") == EXIT_USAGE


def test_csv_format(tmp_path):
    path = tmp_path / "sweep.csv"
    code = run_command(["sums", "bounds", "--kind", "kloosterman", "--q-max", "5", "--format", "csv",
                        "--output", str(path), "--quiet"])
    assert code == EXIT_OK
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("q,a,b,value_re")
    assert len(lines) == 22


def test_results_do_not_depend_on_threads(tmp_path):
    outputs = []
    for threads in ("1", "3"):
        path = tmp_path / f"norms-{threads}.json"
        code = run_command(["restrict", "norms", "--n", "4", "--lambda", "4", "--samples", "9000",
                            "--seed", "1", "--threads", threads, "--output", str(path), "--quiet"])
        assert code == EXIT_OK
        outputs.append(path.read_text(encoding="utf-8"))
    assert outputs[0] == outputs[1]


def test_shell_export_writes_binary(tmp_path):
    path = tmp_path / "shell.shel"
    code = run_command(["shell", "--n", "4", "--lambda", "4", "--export", "bin", "--output", str(path), "--quiet"])
    assert code == EXIT_OK
    assert path.read_bytes()[:4] == b"SHEL"


def test_every_action_is_registered():
    parser = build_parser()
    for command, actions in commands.ACTIONS.items():
        for action in actions:
            args = parser.parse_args([command, action])
            assert (args.command, args.action) == (command, action)


def test_progress_bar_disabled_is_silent():
    progress = ProgressBar(enabled=False)
    progress.start_operation("quiet")
    progress.set_progress(50, "half")
    progress.set_status("busy")
    assert progress.status == "busy"
    progress.finish_operation()
    assert progress.status == "Ready"


def test_progress_bar_writes_to_stream(tmp_path):
    with open(tmp_path / "progress.txt", "w", encoding="utf-8") as stream:
        progress = ProgressBar(stream=stream)
        progress.start_operation("sweep")
        progress.set_progress(40, "lambda 2")
        assert progress.bar.n == 40
        progress.set_progress(140)
        assert progress.bar.n == 100
        progress.finish_operation()
    assert progress.bar is None
    assert "sweep" in (tmp_path / "progress.txt").read_text(encoding="utf-8")


@pytest.mark.parametrize("argv", [["--help"], ["restrict", "--help"]])
def test_help_exits_cleanly(argv, capsys):
    assert run_command(argv) == EXIT_OK
    assert "usage" in capsys.readouterr().out
