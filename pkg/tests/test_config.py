import json

import pytest

from halluscan.config import Config, load_config
from halluscan.errors import ConfigError


def test_defaults_validate():
    cfg = load_config()
    assert cfg == Config()
    assert cfg.m == 4
    assert cfg.tau_c == 0.5
    assert (cfg.alpha, cfg.beta, cfg.gamma) == (2.0, 4.0, 4.0)
    assert cfg.agg_mode == "max"
    assert cfg.ablation == "full"


def test_file_values_override_defaults(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"m": 2, "tau_d": 0.5, "backend": "record",
                                "fixture_dir": "fx"}))
    cfg = load_config(str(path))
    assert cfg.m == 2
    assert cfg.tau_d == 0.5
    assert cfg.backend == "record"
    assert cfg.stride == 5


def test_overrides_beat_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"m": 2, "kernel": "cutoff"}))
    cfg = load_config(str(path), {"m": 7})
    assert cfg.m == 7
    assert cfg.kernel == "cutoff"


def test_none_overrides_are_unset(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"m": 2}))
    cfg = load_config(str(path), {"m": None, "stride": None})
    assert cfg.m == 2
    assert cfg.stride == 5


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"frames": 10}))
    with pytest.raises(ConfigError) as excinfo:
        load_config(str(path))
    assert "frames" in str(excinfo.value)
    with pytest.raises(ConfigError):
        load_config(None, {"not_a_key": 1})


def test_unreadable_or_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(listy))


@pytest.mark.parametrize(
    "field,value",
    [
        ("stride", 0),
        ("m", 0),
        ("dc_fraction", 0.0),
        ("dc_fraction", 1.0),
        ("kernel", "box"),
        ("metric", "manhattan"),
        ("extractor", "clip"),
        ("backend", "cache"),
        ("agg_mode", "mean"),
        ("ablation", "no_gateway"),
        ("tau_d", -0.1),
        ("tau_c", 1.5),
        ("workers", 0),
        ("max_retries", -1),
        ("per_call_usd", -0.01),
        ("max_image_edge", 0),
        ("alpha", -1.0),
        ("synthetic_fps", 0.0),
    ],
)
def test_validate_rejects_bad_values(field, value):
    with pytest.raises(ConfigError):
        load_config(None, {field: value})


def test_to_dict_round_trip():
    cfg = Config(m=3, severity_weights={"a": 0.5})
    data = cfg.to_dict()
    assert data["m"] == 3
    assert Config(**data) == cfg
