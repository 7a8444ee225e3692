import pytest

from botsieve.config import ConfigError, load_config


def test_defaults():
    cfg = load_config(env={})
    assert cfg.service.port == 8053 and cfg.service.host == "127.0.0.1"
    assert cfg.rate_config().delta_f == 0.05 and cfg.rate_config().k == 20
    assert (cfg.thresholds().lower, cfg.thresholds().upper) == (0.1, 0.9)
    assert cfg.dga.timeout_ms == 200 and not cfg.feedback.enabled and not cfg.feedback.allow_whitelist


def test_toml_and_env(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[rate]\ndelta_f = 0.2\nk = 5\n[feedback]\nenabled = true\n[dga]\nremote_url = "http://x"\n')
    cfg = load_config(p, env={"MONDEO_RATE_K": "7", "MONDEO_FEEDBACK_ALLOW_WHITELIST": "yes"})
    assert cfg.rate.delta_f == 0.2 and cfg.rate.k == 7
    assert cfg.feedback.enabled and cfg.feedback.allow_whitelist
    assert cfg.dga.remote_url == "http://x"


@pytest.mark.parametrize("text", [
    "[nope]\nx = 1\n",
    "[rate]\nbogus = 1\n",
    "[rate]\nk = 1\n",
    "[rate]\nk = 2.5\n",
    "[dga]\nlower = 0.95\n",
    "[service]\nport = 70000\n",
    "[feedback]\nenabled = 'maybe'\n",
    "not toml = = =",
])
def test_rejects(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p, env={})


def test_bad_env_value():
    with pytest.raises(ConfigError):
        load_config(env={"MONDEO_RATE_DELTA_F": "fast"})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml", env={})
