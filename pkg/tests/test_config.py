import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockaxis.config import (CONFIG_ENV, ConfigError, RunConfig, default_config_path,
                              resolve_config)
from shockaxis.cost import CostConfig
from shockaxis.growth import GrowthConfig
from shockaxis.shock import ShockConfig


def test_defaults_audit():
    cfg = RunConfig()
    assert cfg.alpha_c == 0.75 and cfg.l_max == 10 and cfg.alpha_end == 0.85
    assert cfg.directions == 16 and cfg.relax_factor == 2.0 and cfg.scale_step == 1
    assert cfg.rmin == 2 and cfg.r_max == 41
    assert RunConfig(resolution="full").r_max == 82
    assert cfg.scale_weight == 1e-4
    assert RunConfig(cost="hist").scale_weight == 2e-8
    assert cfg.bins == 10 and cfg.tile_size == 6
    assert cfg.tolerance == 0.01
    assert cfg.delta_r == 0.0 and cfg.epsilon_r == 1
    assert (cfg.smooth_lambda, cfg.smooth_kappa, cfg.smooth_beta_max) == (2e-2, 2.0, 1e5)
    assert cfg.ligature_horizon == 3


def test_defaults_agree_with_module_configs():
    cfg = RunConfig()
    assert cfg.growth_config() == GrowthConfig()
    assert cfg.shock_config() == ShockConfig()
    cc = cfg.cost_config()
    assert cc.r_min == 2 and cc.r_max == 41 and cc.kind == "color"
    assert cc.bins == CostConfig().bins and cc.tile_size == CostConfig().tile_size


def test_tolerance_px():
    assert RunConfig().tolerance_px((300, 400)) == pytest.approx(5.0)


def test_dump_has_fixed_key_order():
    lines = RunConfig().dumps().splitlines()
    assert lines[0] == "cost = color"
    assert "w_s = auto" in lines and "rmax = auto" in lines
    assert "allow_union = true" in lines
    assert len(lines) == len(RunConfig().as_dict())


def test_round_trip_byte_identical(tmp_path):
    cfg = RunConfig(cost="hist", w_s=3e-8, rmax=30, smooth=False, fold_angle=80.5)
    text = cfg.dumps()
    again = RunConfig.loads(text)
    assert again == cfg and again.dumps() == text
    cfg.save(tmp_path / "run.cfg")
    assert (tmp_path / "run.cfg").read_text() == text
    assert RunConfig.load(tmp_path / "run.cfg") == cfg


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-12, 1.0), st.integers(3, 60), st.booleans(),
       st.floats(0.0, 0.05, allow_nan=False), st.sampled_from(["standard", "single"]))
def test_round_trip_property(ws, rmax, smooth, tol, proto):
    cfg = RunConfig(w_s=ws, rmax=rmax, smooth=smooth, tolerance=tol, protocol=proto)
    text = cfg.dumps()
    assert RunConfig.loads(text).dumps() == text


def test_resolved_fills_auto():
    d = RunConfig(cost="hist").resolved()
    assert d["w_s"] == 2e-8 and d["rmax"] == 41


def test_loads_comments_and_partial():
    cfg = RunConfig.loads("# tuned\n\ncost = hist   # cheaper\nl_max = 8\n")
    assert cfg.cost == "hist" and cfg.l_max == 8 and cfg.alpha_c == 0.75


@pytest.mark.parametrize("text", ["nokey\n", "l_max = 3\nl_max = 4\n", "bogus = 1\n",
                                  "l_max = ten\n", "smooth = maybe\n", "cost = sift\n",
                                  "alpha_c = -1\n", "protocol = both\n", "tolerance = -0.1\n"])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        RunConfig.loads(text)


def test_updated_accepts_dashes_and_typed_values():
    cfg = RunConfig().updated({"relax-factor": "1.5", "l_max": 7})
    assert cfg.relax_factor == 1.5 and cfg.l_max == 7


def test_env_var_and_overrides(tmp_path, monkeypatch):
    p = tmp_path / "env.cfg"
    p.write_text("cost = hist\nl_max = 6\n")
    monkeypatch.setenv(CONFIG_ENV, str(p))
    assert default_config_path() == p
    cfg = resolve_config(overrides={"l_max": "9"})
    assert cfg.cost == "hist" and cfg.l_max == 9
    other = tmp_path / "other.cfg"
    other.write_text("alpha_c = 0.5\n")
    cfg = resolve_config(other)
    assert cfg.alpha_c == 0.5 and cfg.cost == "color"


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "none.cfg")
