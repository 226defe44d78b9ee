import pytest

from src.errors import ConfigError
from src.settings import Settings, load_settings, parse_settings


class TestParseSettings:
    def test_empty_file_gives_defaults(self):
        settings = parse_settings("")
        assert settings == Settings()
        assert settings.ppo.clip == 0.2
        assert settings.rewards.weights.outcome == 1.0

    def test_nested_values(self):
        settings = parse_settings("seed: 7\nppo:\n  clip: 0.1\n  epochs: 2\nevaluation:\n  seeds: [1, 2]\n")
        assert settings.seed == 7
        assert settings.ppo.clip == 0.1
        assert settings.ppo.epochs == 2
        assert settings.evaluation.seeds == (1, 2)

    def test_json_is_accepted(self):
        settings = parse_settings('{"training": {"iterations": 3, "workers": 2}}')
        assert settings.training.iterations == 3
        assert settings.training.workers == 2

    def test_unknown_key_names_field_and_line(self):
        with pytest.raises(ConfigError) as info:
            parse_settings("seed: 0\nppo:\n  bogus: 1\n")
        assert info.value.field == "ppo.bogus"
        assert info.value.line == 3

    def test_bad_type(self):
        with pytest.raises(ConfigError) as info:
            parse_settings("training:\n  iterations: many\n")
        assert info.value.field == "training.iterations"
        assert info.value.line == 2

    def test_range_check_gets_line(self):
        with pytest.raises(ConfigError) as info:
            parse_settings("ppo:\n  clip: 1.5\n")
        assert info.value.field == "ppo.clip"
        assert info.value.line == 2

    def test_bool_is_not_an_integer(self):
        with pytest.raises(ConfigError):
            parse_settings("seed: true\n")

    def test_yaml_syntax_error(self):
        with pytest.raises(ConfigError) as info:
            parse_settings("ppo:\n  clip: [0.1\n")
        assert info.value.line is not None

    def test_top_level_must_be_mapping(self):
        with pytest.raises(ConfigError):
            parse_settings("- 1\n- 2\n")

    def test_negative_reward_weight(self):
        with pytest.raises(ConfigError) as info:
            parse_settings("rewards:\n  weights:\n    social: -1\n")
        assert info.value.field == "rewards.weights"

    def test_curriculum_build(self):
        curriculum = parse_settings("curriculum:\n  start_stage: 2\n").curriculum.build()
        assert curriculum.stage == 2


class TestLoadSettings:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(tmp_path / "absent.yaml")

    def test_file_and_env_overrides(self, tmp_path, monkeypatch):
        path = tmp_path / "run.yaml"
        path.write_text("output_dir: from-file\ntraining:\n  workers: 1\n")
        monkeypatch.setenv("DIPLOMAT_OUT", "from-env")
        monkeypatch.setenv("DIPLOMAT_WORKERS", "3")
        monkeypatch.setenv("DIPLOMAT_LOG_LEVEL", "debug")
        settings = load_settings(path)
        assert settings.output_dir == "from-env"
        assert settings.training.workers == 3
        assert settings.logging.level == "DEBUG"

    def test_invalid_worker_override(self, monkeypatch):
        monkeypatch.setenv("DIPLOMAT_WORKERS", "0")
        with pytest.raises(ConfigError) as info:
            load_settings()
        assert info.value.field == "DIPLOMAT_WORKERS"

    def test_defaults_without_file(self, monkeypatch):
        for name in ("DIPLOMAT_OUT", "DIPLOMAT_WORKERS", "DIPLOMAT_LOG_LEVEL"):
            monkeypatch.delenv(name, raising=False)
        assert load_settings() == Settings()
