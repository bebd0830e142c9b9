import pytest

from anchorref.config import RunConfig, apply_overrides, default_config_text, load_config
from anchorref.core import ConfigError


def test_defaults_cover_shipped_operating_point():
    cfg = RunConfig()
    assert cfg.anchor_k == 64
    assert cfg.anchor_t0 == 60
    assert cfg.anchor_tau == 10.0
    assert cfg.assoc_lambda == 0.6
    assert cfg.assoc_theta == 0.4
    assert cfg.prior_beta == 0.8
    assert cfg.gate_gamma == 0.5
    cfg.validate()


def test_override_parsing():
    cfg = apply_overrides(RunConfig(), {"assoc.lambda": "0.5", "gate.q_max": "4",
                                        "pipeline.use_reid_gate": "false",
                                        "assoc.refiner": "trace"})
    assert cfg.assoc_lambda == 0.5
    assert cfg.gate_q_max == 4
    assert cfg.use_reid_gate is False
    assert cfg.assoc_refiner == "trace"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_overrides(RunConfig(), {"assoc.nope": "1"})


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {"assoc.lambda": "1.5"})
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {"gate.q_max": "zero"})
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), {"pipeline.use_reid_gate": "maybe"})


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(default_config_text())
    assert load_config(path) == RunConfig()

    path.write_text("# comment\nassoc.theta = 0.25\n\nprior.sigma = 2.5\n")
    cfg = load_config(path)
    assert cfg.assoc_theta == 0.25
    assert cfg.prior_sigma == 2.5


def test_cli_overrides_beat_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("assoc.theta = 0.25\n")
    cfg = load_config(path, {"assoc.theta": "0.35"})
    assert cfg.assoc_theta == 0.35


def test_malformed_file_line(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("assoc.theta 0.25\n")
    with pytest.raises(ConfigError, match="expected key = value"):
        load_config(path)
