import logging

import pytest

from cli.config import ExperimentConfig, load_config, parse_int_list
from core.errors import ParseError, UsageError


def write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_int_lists_and_dyadic_ranges():
    assert parse_int_list("1, 2,3") == [1, 2, 3]
    assert parse_int_list("16:128:dyadic") == [16, 32, 64, 128]
    assert parse_int_list("5:5:dyadic") == [5]
    with pytest.raises(ValueError):
        parse_int_list("1:10:linear")
    with pytest.raises(ValueError):
        parse_int_list("10:1:dyadic")


def test_load_config_types_and_aliases(tmp_path):
    path = write(tmp_path, "# experiment\n\nn = 4\nlambda = 100\np = 8\nlambdas = 16:64:dyadic\n"
                           "alphas = 0.5, 1.5\nkind = random_signs\nm-vec = 1,2,3\n")
    config = load_config(path)
    assert config.n == 4
    assert config.lam == 100
    assert config.p == 8.0
    assert config.lambdas == [16, 32, 64]
    assert config.alphas == [0.5, 1.5]
    assert config.kind == "random_signs"
    assert config.m_vec == [1, 2, 3]
    assert config.sources["lam"] == path
    assert config.format == "json"


def test_parse_errors_carry_line_numbers(tmp_path):
    with pytest.raises(ParseError) as info:
        load_config(write(tmp_path, "n = 4\nlambda 100\n"))
    assert info.value.line == 2
    with pytest.raises(ParseError) as info:
        load_config(write(tmp_path, "n = 4\n\ncolour = red\n"))
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        load_config(write(tmp_path, "n = four\n"))
    assert info.value.line == 1


def test_repeated_key_keeps_last_value(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        config = load_config(write(tmp_path, "n = 3\nn = 5\n"))
    assert config.n == 5
    assert "overrides line 1" in caplog.text


def test_flags_override_file_values(tmp_path):
    config = load_config(write(tmp_path, "n = 3\nseed = 1\n"))
    config.merge({"n": 5, "seed": None}, "flags")
    assert config.n == 5
    assert config.seed == 1
    assert config.sources["n"] == "flags"


def test_validation_names_the_flag():
    with pytest.raises(UsageError, match="--lambda"):
        ExperimentConfig(lam=0).validate()
    with pytest.raises(UsageError, match="--q-max"):
        ExperimentConfig(q_max=-1).validate()
    with pytest.raises(UsageError):
        ExperimentConfig(format="xml").validate()
    with pytest.raises(UsageError):
        ExperimentConfig(seed=1 << 64).validate()
    with pytest.raises(UsageError):
        ExperimentConfig(alphas=[2.0, 1.0]).validate()
    assert ExperimentConfig(n=4, lam=4, seed=0).validate().n == 4


def test_require_reports_missing_parameter():
    config = ExperimentConfig(command="sums", action="kloosterman", a=1)
    with pytest.raises(UsageError, match="--b is required for 'sums kloosterman'"):
        config.require("a", "b", "q")


def test_threads_fall_back_to_environment(monkeypatch):
    monkeypatch.delenv("RESTLAB_THREADS", raising=False)
    assert ExperimentConfig().resolved_threads() == 1
    monkeypatch.setenv("RESTLAB_THREADS", "3")
    assert ExperimentConfig().resolved_threads() == 3
    assert ExperimentConfig(threads=2).resolved_threads() == 2
    monkeypatch.setenv("RESTLAB_THREADS", "many")
    with pytest.raises(UsageError):
        ExperimentConfig().resolved_threads()
    monkeypatch.setenv("RESTLAB_THREADS", "0")
    with pytest.raises(UsageError):
        ExperimentConfig().validate()
