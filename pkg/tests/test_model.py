import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from forkwork.model import (
    ChannelParams,
    ConfigError,
    LatencyModel,
    config_digest,
    config_text,
    default_config,
    derive,
    mean_snr,
    noise_power_w,
    parse_config_text,
    validate,
)


def test_noise_power_unit_conversion():
    # dBm/Hz to W oracle: 10^((psd + 10 log10 B - 30) / 10)
    expected = 10.0 ** ((-174.0 + 10.0 * math.log10(180e3) - 30.0) / 10.0)
    got = noise_power_w(-174.0, 180e3)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(7.167e-16, rel=1e-3)


def test_free_space_gain_hand_value():
    cfg = default_config()
    d = derive(cfg.channel, cfg.miner)
    # (lambda / (4 pi d))^2 at 2.4 GHz, 50 m, evaluated by hand
    assert d.path_gain == pytest.approx(3.958e-8, rel=1e-3)


def test_compute_rate_from_power_scaling():
    cfg = default_config()
    d = derive(cfg.channel, cfg.miner)
    assert d.compute_rate == pytest.approx(0.32, rel=1e-12)


def test_move_time_half_wavelength():
    cfg = default_config()
    d = derive(cfg.channel, cfg.miner)
    # (c/f)/2 / v = 0.125/2/10
    assert d.move_time_s == pytest.approx(6.25e-3, rel=1e-12)


def test_derive_is_pure():
    cfg = default_config()
    a = derive(cfg.channel, cfg.miner)
    b = derive(cfg.channel, cfg.miner)
    assert a == b


def test_doubling_distance_quarters_gain():
    cfg = default_config()
    near = derive(cfg.channel, cfg.miner)
    far = derive(replace(cfg.channel, distance_m=2 * cfg.channel.distance_m), cfg.miner)
    assert far.path_gain == pytest.approx(near.path_gain / 4.0, rel=1e-12)
    assert far.noise_power_w == near.noise_power_w
    assert far.compute_rate == near.compute_rate


@given(st.floats(min_value=1.0, max_value=1e4))
def test_gain_scaling_property(distance):
    ch = replace(default_config().channel, distance_m=distance)
    ch2 = replace(ch, distance_m=2 * distance)
    cfg = default_config()
    g1 = derive(ch, cfg.miner).path_gain
    g2 = derive(ch2, cfg.miner).path_gain
    assert g2 == pytest.approx(g1 / 4.0, rel=1e-9)


def test_mean_snr_matches_derived_rate():
    ch = default_config().channel
    d = derive(ch, default_config().miner)
    assert mean_snr(ch) == pytest.approx(1.0 / d.snr_rate, rel=1e-12)


def test_default_threshold_sits_at_mean_snr():
    cfg = default_config()
    d = derive(cfg.channel, cfg.miner)
    assert d.success_prob == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_validate_default_ok():
    assert validate(default_config()) == []


def test_validate_zero_miners():
    errors = validate(replace(default_config(), num_miners=0))
    assert any("num_miners" in e for e in errors)


def test_validate_negative_threshold():
    cfg = default_config()
    bad = replace(cfg, channel=replace(cfg.channel, snr_threshold=-1.0))
    assert any(e == "snr_threshold must be positive" for e in validate(bad))


def test_validate_zero_threshold_rejected():
    # threshold 0 would make the max uplink latency infinite
    cfg = default_config()
    bad = replace(cfg, channel=replace(cfg.channel, snr_threshold=0.0))
    assert validate(bad)


def test_validate_aggregates_everything():
    cfg = default_config()
    bad = replace(
        cfg,
        num_miners=0,
        channel=replace(cfg.channel, snr_threshold=-1.0, tx_power_w=-2.0),
    )
    errors = validate(bad)
    assert len(errors) >= 3


def test_validate_tolerances():
    cfg = default_config()
    assert validate(replace(cfg, quadrature_tol=0.5))
    assert validate(replace(cfg, mixture_truncation=0.0))
    assert validate(replace(cfg, rng_seed=-1))


def test_derive_rejects_near_field():
    ch = replace(default_config().channel, distance_m=1e-4)
    with pytest.raises(ValueError):
        derive(ch, default_config().miner)


def test_config_round_trip():
    cfg = default_config(num_miners=7)
    back = parse_config_text(config_text(cfg))
    # snr_threshold passes through a dB conversion, everything else is exact
    assert back.channel.snr_threshold == pytest.approx(cfg.channel.snr_threshold, rel=1e-12)
    assert replace(back, channel=replace(back.channel, snr_threshold=0.1)) == replace(
        cfg, channel=replace(cfg.channel, snr_threshold=0.1)
    )


def test_parse_missing_key_names_it():
    text = config_text(default_config())
    text = "\n".join(l for l in text.splitlines() if not l.startswith("bandwidth_hz"))
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert any("missing key: bandwidth_hz" in e for e in exc.value.errors)


def test_parse_unknown_key_rejected():
    text = config_text(default_config()) + "mystery_knob = 3\n"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert any("unknown key: mystery_knob" in e for e in exc.value.errors)


def test_parse_duplicate_key_rejected():
    text = config_text(default_config()) + "num_miners = 4\n"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert any("duplicate key" in e for e in exc.value.errors)


def test_parse_bad_number_rejected():
    text = config_text(default_config()).replace("distance_m = 50.0", "distance_m = fifty")
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert any("distance_m" in e for e in exc.value.errors)


def test_parse_latency_model_values():
    text = config_text(default_config())
    assert parse_config_text(text).latency_model is LatencyModel.TOTAL
    text2 = text.replace("latency_model = total", "latency_model = wireless_only")
    assert parse_config_text(text2).latency_model is LatencyModel.WIRELESS_ONLY
    text3 = text.replace("latency_model = total", "latency_model = sometimes")
    with pytest.raises(ConfigError):
        parse_config_text(text3)


def test_parse_config_validates():
    text = config_text(default_config()).replace("num_miners = 10", "num_miners = 0")
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert any("num_miners" in e for e in exc.value.errors)


def test_config_digest_stability():
    a = config_digest(default_config())
    b = config_digest(default_config())
    c = config_digest(default_config(num_miners=11))
    assert a == b
    assert a != c
    assert len(a) == 12


def test_channel_params_frozen():
    ch = default_config().channel
    with pytest.raises(Exception):
        ch.tx_power_w = 5.0
    assert isinstance(ch, ChannelParams)
