import json
import logging

import pytest

from fock_toeplitz.config import (
    ConfigManager,
    ExperimentConfig,
    config_hash,
    env_threads,
    load_experiment,
)
from fock_toeplitz.errors import ConfigError


@pytest.fixture
def manager(tmp_path):
    return ConfigManager(config_dir=tmp_path / "user")


def test_missing_user_config_gives_defaults(manager):
    assert not manager.exists()
    config = manager.load()
    assert config == manager.defaults()
    cfg = ExperimentConfig.from_dict(config)
    assert cfg.degree == 40
    assert cfg.symbols is None
    assert len(cfg.annuli) == 6


def test_save_then_load_merges_over_defaults(manager, tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"degree": 30, "grids": {"z_radius": 1.0}}))
    config = manager.load(path)
    assert config["degree"] == 30
    assert config["grids"]["z_radius"] == 1.0
    assert config["grids"]["z_per_axis"] == 11
    assert config["base_dir"] == str(tmp_path.resolve())

    manager.save(config)
    assert manager.exists()
    assert manager.load()["degree"] == 30


def test_explicit_missing_path_is_an_error(manager, tmp_path):
    with pytest.raises(ConfigError):
        manager.load(tmp_path / "nope.json")


@pytest.mark.parametrize("document", ["[1, 2]", '{"schema_version": 2}', "{not json"])
def test_unreadable_documents(manager, tmp_path, document):
    path = tmp_path / "bad.json"
    path.write_text(document)
    with pytest.raises(ConfigError):
        manager.load(path)


def test_reset_writes_defaults(manager):
    path = manager.reset()
    assert json.loads(path.read_text())["degree"] == 40


def test_manager_logs_through_the_module_logger(manager, caplog):
    assert not hasattr(manager, "logger")
    with caplog.at_level(logging.DEBUG, logger="fock_toeplitz.config"):
        manager.load()
        path = manager.save(manager.defaults())
    assert {r.name for r in caplog.records} == {"fock_toeplitz.config"}
    assert str(path) in caplog.text


@pytest.mark.parametrize("key, value", [
    ("degree", 0),
    ("r", -0.1),
    ("scales", [1.0, 0.0]),
    ("kernel_exponents", [0.5]),
    ("threads", -2),
])
def test_validation_errors(small_config, key, value):
    small_config[key] = value
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(small_config)


def test_malformed_and_missing_references(small_config):
    broken = dict(small_config)
    del broken["grids"]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(broken)
    small_config["symbols"] = [{"kind": "atomic", "path": "atoms.csv"}]
    small_config["base_dir"] = "/nonexistent-dir"
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(small_config)


def test_hash_ignores_base_dir(small_config):
    moved = dict(small_config, base_dir="/elsewhere")
    assert config_hash(small_config) == config_hash(moved)
    assert config_hash(small_config) != config_hash(dict(small_config, seed=1))


def test_with_overrides(small_cfg, tmp_path):
    changed = small_cfg.with_overrides(seed=7, threads=2, output_dir=tmp_path / "out")
    assert (changed.seed, changed.threads) == (7, 2)
    assert changed.output_dir == tmp_path / "out"
    assert changed.hash != small_cfg.hash
    assert small_cfg.seed == 0


def test_z_grid_is_clipped_to_disk(small_cfg, small_config):
    assert small_cfg.z_grid.size == 13
    small_config["grids"]["z_points"] = [[0.0, 0.0], [0.5, -0.5]]
    assert ExperimentConfig.from_dict(small_config).z_grid.tolist() == [0j, 0.5 - 0.5j]


def test_env_threads(monkeypatch, small_config):
    monkeypatch.setenv("FOCK_TOEPLITZ_THREADS", "3")
    assert env_threads() == 3
    small_config["threads"] = None
    assert ExperimentConfig.from_dict(small_config).threads == 3
    monkeypatch.setenv("FOCK_TOEPLITZ_THREADS", "many")
    with pytest.raises(ConfigError):
        env_threads()
    monkeypatch.delenv("FOCK_TOEPLITZ_THREADS")
    assert env_threads() is None


def test_load_experiment(tmp_path, small_config):
    path = ConfigManager(tmp_path).save(small_config, tmp_path / "small.json")
    cfg = load_experiment(path, config_dir=tmp_path / "user")
    assert cfg.r == 0.4
    assert cfg.lattice_radii == (0.4,)
