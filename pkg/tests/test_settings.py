"""Test the experiment config, its file formats and its digest."""

# pylint: disable=protected-access,redefined-outer-name
from pathlib import Path

import pytest
from pydantic import ValidationError

from pairplan.const import LOG_STD_FLOOR
from pairplan.exceptions import ConfigurationError, PairPlanIOError
from pairplan.settings import ExperimentConfig, GrpoConfig

REFERENCE = Path(__file__).parent.parent / "config" / "reference.toml"


def test_defaults() -> None:
    """Test a few defaults the rest of the package relies on."""
    config = ExperimentConfig()
    assert config.simulator.horizon == 8
    assert config.simulator.dt == 0.5
    assert config.grpo.group_size == 15
    assert config.grpo.clip_eps == 0.2
    assert config.sampler.intentions == ["Keep", "Left", "Right", "Accelerate", "Decelerate"]
    assert config.sampler.keep_k is None
    assert config.eval.best_of_n == 6


def test_reference_file_matches_defaults() -> None:
    """Test that the shipped reference config spells out the defaults."""
    loaded = ExperimentConfig.from_file(REFERENCE)
    assert loaded.sampler.log_std_floor == pytest.approx(LOG_STD_FLOOR)
    defaults = ExperimentConfig().model_dump()
    dumped = loaded.model_dump()
    for data in (defaults, dumped):
        data["sampler"].pop("log_std_floor")
    assert dumped == defaults


def test_json_round_trip(tmp_path: Path) -> None:
    """Test that a dumped config loads back unchanged."""
    config = ExperimentConfig(seed=7, grpo=GrpoConfig(group_size=6))
    path = tmp_path / "config.json"
    path.write_text(config.model_dump_json(), encoding="utf-8")
    assert ExperimentConfig.from_file(path) == config


def test_invalid_files(tmp_path: Path) -> None:
    """Test the suffix, missing file and validation errors."""
    yaml = tmp_path / "config.yaml"
    yaml.write_text("seed: 1\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(yaml)
    with pytest.raises(PairPlanIOError):
        ExperimentConfig.from_file(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[grpo]\nclip_eps = 1.5\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(bad)
    broken = tmp_path / "broken.toml"
    broken.write_text("[grpo\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(broken)
    truncated = tmp_path / "truncated.json"
    truncated.write_text('{"seed": ', encoding="utf-8")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(truncated)


def test_beta_clamp_must_be_ordered(tmp_path: Path) -> None:
    """Test that an inverted beta clamp is rejected in code and in files."""
    with pytest.raises(ValidationError):
        GrpoConfig(beta_min=1.0, beta_max=0.5)
    with pytest.raises(ValidationError):
        GrpoConfig(beta_min=0.5, beta_max=0.5)
    inverted = tmp_path / "inverted.toml"
    inverted.write_text("[grpo]\nbeta_min = 2.0\nbeta_max = 1.0\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(inverted)


def test_digest() -> None:
    """Test that the digest is stable and follows every setting."""
    config = ExperimentConfig()
    assert config.digest() == ExperimentConfig().digest()
    assert len(config.digest()) == 64
    assert config.model_copy(update={"seed": 1}).digest() != config.digest()
