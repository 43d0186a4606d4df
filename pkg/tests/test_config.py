from dataclasses import replace

import pytest
import yaml

from multipick.config import DEFAULT_CONFIG_PATH, config_from_dict, config_to_dict, dump_config, load_config
from multipick.errors import ConfigError
from multipick.executor import RunConfig


def test_bundled_defaults_match_dataclasses():
    assert load_config() == replace(RunConfig(), reference_phase_total=41.68)
    assert load_config(DEFAULT_CONFIG_PATH) == load_config()


def test_dump_and_reload(tmp_path):
    cfg = replace(load_config(), master_seed=7, jobs=3)
    dump_config(cfg, tmp_path / "c.yaml")
    assert load_config(tmp_path / "c.yaml") == cfg
    assert config_to_dict(load_config(tmp_path / "c.yaml")) == config_to_dict(cfg)


def test_partial_file_keeps_defaults(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("master_seed: 5\ntiming:\n  dt: 0.005\n")
    cfg = load_config(p)
    assert cfg.master_seed == 5 and cfg.timing.dt == 0.005
    assert cfg.gripper == RunConfig().gripper


@pytest.mark.parametrize("data, where", [
    ({"gripper": {"linkage": {"crank_lenght": 0.01}}}, "gripper.linkage"),
    ({"jobs": "two"}, "jobs"),
    ({"timing": {"record_traces": 1}}, "timing.record_traces"),
    ({"jobs": 0}, "<root>"),
    ({"matrix": {"angles": [45]}}, "matrix"),
    ({"sensor": {"bias": {"force": [1, 2]}}}, "sensor.bias.force"),
    ({"gripper": {"pair_gap": 1.0}}, "gripper"),
])
def test_invalid_configs(data, where):
    with pytest.raises(ConfigError, match=where.replace(".", r"\.").replace("<", "<")):
        config_from_dict(data)


def test_unreadable_or_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    p = tmp_path / "bad.yaml"
    p.write_text("gripper: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_default_yaml_has_every_section():
    data = yaml.safe_load(DEFAULT_CONFIG_PATH.read_text())
    assert set(data) == set(config_to_dict(RunConfig()))
