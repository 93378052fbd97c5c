import pytest

from twotimescale.config import ConfigError, SimConfig, load_config, parse_config, default_config


def test_preset_defaults():
    cfg = default_config()
    assert (cfg.N, cfg.K, cfg.T, cfg.M, cfg.T0) == (5, 12, 5, 200, 1.0)
    assert cfg.chi == [0.1, 0.15, 0.2, 0.25, 0.3]
    assert (cfg.V, cfg.beta, cfg.R_max, cfg.q) == (100.0, 5000.0, 20.0, 3)
    assert (cfg.g_max, cfg.E_max, cfg.E_init, cfg.Q_init) == (2.5, 5.0, 2.0, 3.0)
    assert cfg.d_star == 1e-5
    assert cfg.horizon == 1000


def test_override_validates():
    assert default_config(q=1).q == 1
    with pytest.raises(ConfigError):
        default_config(E_max=-1.0)


def test_unknown_key_reports_line():
    text = "sim.N = 5\n\n# comment\ncontrol.Vee = 3\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text, source="x.cfg")
    assert err.value.line == 4
    assert "x.cfg:4" in str(err.value)


def test_wrong_section_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("energy.N = 3")
    assert err.value.line == 1


def test_bad_value_type_reports_line():
    with pytest.raises(ConfigError) as err:
        parse_config("sim.N = 5\nsim.K = twelve\n")
    assert err.value.line == 2


def test_semantic_error_points_at_line():
    with pytest.raises(ConfigError) as err:
        parse_config("sim.N = 5\nenergy.E_max = -5\n", source="bad.cfg")
    assert err.value.line == 2


def test_chi_length_must_match_N():
    with pytest.raises(ConfigError):
        parse_config("sim.N = 3")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        parse_config("sim.N = 5\nsim.N = 6")


def test_text_round_trip(tmp_path):
    cfg = default_config(seed=9, V=250.0)
    path = tmp_path / "c.cfg"
    path.write_text(cfg.to_text())
    again = load_config(path)
    assert again.as_dict() == cfg.as_dict()


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_kappa_at_or_above_grid_price_warns():
    with pytest.warns(RuntimeWarning):
        SimConfig(kappa=2.0).validate()


def test_block_split_default():
    assert default_config().block_split == 2
    assert default_config(l_r=3).block_split == 3
