from __future__ import annotations

from pathlib import Path

import pytest

from rclab.config import THREADS_ENV, default_threads, read_config_file, resolve_config
from rclab.exceptions import ConfigError
from rclab.models.config import ExperimentConfig


class TestExperimentConfig:
    def test_values_are_coerced(self) -> None:
        cfg = ExperimentConfig("traps qn", {"d": "5", "gamma": "0.1", "plant": "yes", "grid": "1, 2,4"})
        assert cfg.get("d") == 5
        assert cfg.get("gamma") == 0.1
        assert cfg.get("plant") is True
        assert cfg.get("grid") == [1, 2, 4]

    def test_none_values_are_dropped(self) -> None:
        cfg = ExperimentConfig("traps qn", {"d": 2, "gamma": None})
        assert not cfg.has("gamma")
        assert cfg.get("gamma", 3.0) == 3.0

    def test_empty_command_raises(self) -> None:
        with pytest.raises(ConfigError, match="Command cannot be empty"):
            ExperimentConfig("", {})

    def test_unknown_key_raises(self) -> None:
        with pytest.raises(ConfigError, match="Unknown configuration keys: colour"):
            ExperimentConfig("env sample", {"colour": "red"})

    def test_invalid_value_raises(self) -> None:
        with pytest.raises(ConfigError, match="Invalid value 'five' for 'd'"):
            ExperimentConfig("env sample", {"d": "five"})
        with pytest.raises(ConfigError):
            ExperimentConfig("env sample", {"plant": "maybe"})

    @pytest.mark.parametrize("raw", ["-1", str(2 ** 64)])
    def test_seed_out_of_range_raises(self, raw: str) -> None:
        with pytest.raises(ConfigError, match=f"Invalid value '{raw}' for 'seed'"):
            ExperimentConfig("env sample", {"seed": raw})

    def test_largest_seed(self) -> None:
        assert ExperimentConfig("env sample", {"seed": str(2 ** 64 - 1)}).get("seed") == 2 ** 64 - 1

    def test_unknown_format_raises(self) -> None:
        with pytest.raises(ConfigError, match="Unknown format 'xml'"):
            ExperimentConfig("env sample", {"format": "xml"})

    def test_require(self) -> None:
        cfg = ExperimentConfig("kernel return", {})
        with pytest.raises(ConfigError, match="'kernel return' needs --n_max"):
            cfg.require("n_max")

    def test_defaults(self) -> None:
        cfg = ExperimentConfig("kernel return", {})
        assert cfg.output_format == "json"
        assert cfg.out is None

    def test_as_dict_puts_command_first(self) -> None:
        cfg = ExperimentConfig("env sample", {"seed": 3, "d": 2})
        assert list(cfg.as_dict()) == ["command", "d", "seed"]


class TestReadConfigFile:
    def test_plain_key_value_file(self, tmp_path: Path) -> None:
        path = tmp_path / "run.cfg"
        path.write_text("d = 2\ngamma = 0.5  # heavy tail\n", encoding="utf-8")
        assert read_config_file(path) == {"d": "2", "gamma": "0.5"}

    def test_ini_file(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        path.write_text("[rclab]\nN = 10\nseed = 4 ; fixed\n", encoding="utf-8")
        assert read_config_file(path) == {"N": "10", "seed": "4"}

    def test_missing_section(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        path.write_text("[other]\nd = 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match=r"missing \[rclab\] section"):
            read_config_file(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError, match="Cannot read configuration file"):
            read_config_file(tmp_path / "absent.cfg")

    def test_invalid_format(self, tmp_path: Path) -> None:
        path = tmp_path / "run.cfg"
        path.write_text("just some words\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="Invalid configuration format"):
            read_config_file(path)


class TestDefaultThreads:
    def test_unset(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert default_threads() is None

    def test_set(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(THREADS_ENV, "4")
        assert default_threads() == 4

    @pytest.mark.parametrize("raw", ["four", "0"])
    def test_invalid(self, monkeypatch: pytest.MonkeyPatch, raw: str) -> None:
        monkeypatch.setenv(THREADS_ENV, raw)
        with pytest.raises(ConfigError, match=THREADS_ENV):
            default_threads()


class TestResolveConfig:
    def test_flags_override_file_override_environment(
        self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        monkeypatch.setenv(THREADS_ENV, "2")
        path = tmp_path / "run.cfg"
        path.write_text("d = 3\nseed = 7\nthreads = 3\n", encoding="utf-8")
        cfg = resolve_config("env sample", {"d": "4", "seed": None}, path)
        assert cfg.get("d") == 4
        assert cfg.get("seed") == 7
        assert cfg.get("threads") == 3

    def test_environment_threads_without_file(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(THREADS_ENV, "2")
        assert resolve_config("env sample", {}).get("threads") == 2
