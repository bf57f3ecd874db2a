from pathlib import Path

import pytest

from finecology.config import ConfigError, SimConfig, apply_overrides, load_config

BASE = Path(__file__).resolve().parents[1] / "configs" / "base.toml"


def test_base_file_matches_defaults():
    assert load_config(BASE).to_dict() == SimConfig().to_dict()


def test_defaults_hold_model_constants():
    cfg = SimConfig()
    assert (cfg.t_inv, cfg.m, cfg.CL, cfg.TT) == (48, 24, 0.10, 0.10)
    assert (cfg.pr, cfg.vol, cfg.rec, cfg.Spr) == (0.03, 0.20, 0.40, 0.01)
    assert cfg.match_probabilities == [0.80, 0.20, 0.10]
    assert (cfg.n_clusters, cfg.n_appetite_groups) == (41, 11)
    assert (cfg.evolution.a, cfg.evolution.b, cfg.evolution.benchmark_centile) == (0.02891, -0.2168, 0.40)


def test_overrides_nested_and_typed():
    cfg = load_config(BASE, ["evolution.enabled=false", "n_banks=12", "tcr_range=[0.1, 0.3]"])
    assert cfg.evolution.enabled is False
    assert cfg.n_banks == 12
    assert cfg.tcr_range == (0.1, 0.3)


def test_round_trip_through_dict():
    cfg = load_config(None, ["start=\"1980-01\"", "evolution.donor_window=6"])
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("override", [
    "n_banks=-1", "CL=0.3", "t_inv=50", "bogus=1", "evolution.bogus=1", "tcr_range=[0.1]",
    "bn_range=[0, 1]", "evolution.benchmark_centile=1.5", "no_equals_sign",
])
def test_bad_values_are_config_errors(override):
    with pytest.raises(ConfigError):
        load_config(None, [override])


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("n_banks = [\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_apply_overrides_leaves_input_untouched():
    data = {"a": {"b": 1}}
    out = apply_overrides(data, ["a.b=2", "a.c=x"])
    assert data == {"a": {"b": 1}}
    assert out == {"a": {"b": 2, "c": "x"}}
