import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from forkwork.channel import (
    DiscreteLatency,
    LatencyDistribution,
    exponential_inverse,
    sample_compute_latency,
    sample_num_movements,
    sample_snr_conditional,
    substream,
    uplink_latency,
)
from forkwork.model import ConfigError, LatencyModel, default_config, derive

RATE = 0.32  # default compute rate


def _dist(**overrides) -> LatencyDistribution:
    cfg = default_config()
    base = LatencyDistribution.from_config(cfg)
    if overrides:
        from dataclasses import asdict

        fields = asdict(base)
        fields.update(overrides)
        return LatencyDistribution.from_params(
            snr_rate=fields["snr_rate"],
            snr_threshold=fields["snr_threshold"],
            ack_bits=fields["ack_bits"],
            bandwidth_hz=fields["bandwidth_hz"],
            move_time=fields["move_time"],
            compute_rate=fields["compute_rate"],
            variant=fields["variant"],
            truncation=fields["truncation"],
            success_prob=overrides.get("success_prob"),
        )
    return base


# --- inverse transforms -----------------------------------------------------


def test_exponential_inverse_boundary():
    assert exponential_inverse(1.0, RATE) == 0.0


def test_compute_latency_mean():
    rng = substream(2024, 0)
    s = sample_compute_latency(rng, RATE, 1_000_000)
    assert s.min() >= 0.0
    assert s.mean() == pytest.approx(1.0 / RATE, rel=0.01)


def test_compute_latency_tail():
    # P(S > 1/rate) = 1/e for the exponential law
    rng = substream(2024, 1)
    s = sample_compute_latency(rng, RATE, 1_000_000)
    assert np.mean(s > 3.125) == pytest.approx(math.exp(-1.0), abs=0.002)


def test_compute_latency_ks():
    rng = substream(2024, 2)
    s = sample_compute_latency(rng, RATE, 100_000)
    res = stats.kstest(s, "expon", args=(0.0, 1.0 / RATE))
    assert res.pvalue > 0.01


def test_movements_certain_success():
    rng = substream(2024, 3)
    assert np.all(sample_num_movements(rng, 1.0, 1000) == 0)


def test_movements_mean():
    rng = substream(2024, 4)
    p = math.exp(-1.0)
    n = sample_num_movements(rng, p, 1_000_000)
    assert n.mean() == pytest.approx(math.e - 1.0, rel=0.01)


def test_movements_pmf_point():
    rng = substream(2024, 5)
    n = sample_num_movements(rng, 0.5, 1_000_000)
    assert np.mean(n == 2) == pytest.approx(0.125, abs=0.003)


def test_movements_chi_square():
    rng = substream(2024, 6)
    p = 0.4
    n = sample_num_movements(rng, p, 100_000)
    k = 12
    observed = np.array([np.sum(n == i) for i in range(k)] + [np.sum(n >= k)])
    pmf = p * (1 - p) ** np.arange(k)
    expected = len(n) * np.append(pmf, (1 - p) ** k)
    res = stats.chisquare(observed, expected)
    assert res.pvalue > 0.01


def test_single_location_success_fraction_matches_derived():
    cfg = default_config()
    d = derive(cfg.channel, cfg.miner)
    rng = substream(2024, 7)
    trials = 100_000
    n = sample_num_movements(rng, d.success_prob, trials)
    frac = np.mean(n == 0)
    se = math.sqrt(d.success_prob * (1 - d.success_prob) / trials)
    assert abs(frac - d.success_prob) <= 3 * se


def test_snr_conditional_support_and_mean():
    rng = substream(2024, 8)
    k0, g0 = 2.0e-7, 5.0e6
    snr = sample_snr_conditional(rng, k0, g0, 200_000)
    assert np.all(snr > g0)
    assert snr.mean() == pytest.approx(g0 + 1.0 / k0, rel=0.01)


def test_snr_unconditional_matches_raw_law():
    # with threshold 0 the draw is the raw fading SNR
    rng = substream(2024, 9)
    k0 = 2.0e-7
    snr = sample_snr_conditional(rng, k0, 0.0, 100_000)
    res = stats.kstest(snr, "expon", args=(0.0, 1.0 / k0))
    assert res.pvalue > 0.01


def test_uplink_latency_value():
    # hand evaluation of K / (B log2(1 + snr))
    assert uplink_latency(5.522e6, 1e6, 1.8e5) == pytest.approx(0.248052, rel=1e-4)


def test_uplink_latency_unit_snr():
    assert uplink_latency(1.0, 1e6, 1.8e5) == pytest.approx(1e6 / 1.8e5, rel=1e-12)


@given(st.floats(min_value=1e-3, max_value=1e9), st.floats(min_value=1.01, max_value=100.0))
def test_uplink_latency_monotone(snr, factor):
    assert uplink_latency(snr * factor, 1e6, 1.8e5) < uplink_latency(snr, 1e6, 1.8e5)


# --- uplink distribution ----------------------------------------------------


def test_uplink_cdf_edges():
    d = _dist()
    assert d.uplink_cdf(-1.0) == 0.0
    assert d.uplink_cdf(0.0) == 0.0
    assert d.uplink_cdf(d.max_uplink) == 1.0
    assert d.uplink_cdf(d.max_uplink * 2) == 1.0
    assert d.uplink_ccdf(0.0) == 1.0
    assert d.uplink_ccdf(-1.0) == 1.0
    assert d.uplink_ccdf(d.max_uplink) == 0.0


def test_uplink_cdf_monotone():
    d = _dist()
    grid = np.linspace(-0.01, d.max_uplink * 1.05, 500)
    vals = d.uplink_cdf(grid)
    assert np.all(np.diff(vals) >= -1e-15)
    assert np.all((vals >= 0.0) & (vals <= 1.0))


def test_uplink_pdf_outside_support():
    d = _dist()
    assert d.uplink_pdf(-0.1) == 0.0
    assert d.uplink_pdf(0.0) == 0.0
    assert d.uplink_pdf(d.max_uplink * 1.0001) == 0.0
    assert d.uplink_pdf(d.max_uplink * 1e-6) == 0.0  # deep underflow region


def test_uplink_pdf_matches_cdf_derivative():
    d = _dist()
    for frac in (0.85, 0.9, 0.95, 0.99):
        t = frac * d.max_uplink
        h = d.max_uplink * 1e-7
        numeric = (d.uplink_cdf(t + h) - d.uplink_cdf(t - h)) / (2 * h)
        assert d.uplink_pdf(t) == pytest.approx(numeric, rel=1e-4)


def test_uplink_pdf_normalizes():
    from forkwork.analytic import integrate_adaptive

    d = _dist()
    total, err = integrate_adaptive(
        d.uplink_pdf, d.max_uplink * 1e-12, d.max_uplink, rel_tol=1e-9
    )
    assert total == pytest.approx(1.0, abs=1e-6)


def test_uplink_sampler_matches_cdf():
    d = _dist()
    rng = substream(2024, 10)
    s = d.sample_uplink(rng, 100_000)
    assert np.all((s > 0) & (s <= d.max_uplink))
    res = stats.kstest(s, lambda z: np.asarray(d.uplink_cdf(z)))
    assert res.pvalue > 0.01


# --- total latency mixture ----------------------------------------------------


def test_mixture_tail_mass_bound():
    d = _dist()
    p = d.success_prob
    assert (1 - p) ** (d.n_max + 1) <= d.truncation
    assert d.mixture_weights().sum() >= 1 - d.truncation


def test_mixture_depth_cap():
    with pytest.raises(ConfigError):
        _dist(success_prob=1e-9)


def test_total_cdf_reduces_to_uplink_when_no_moves():
    d = _dist(success_prob=1.0)
    grid = np.linspace(0.0, d.max_uplink, 64)
    assert np.allclose(d.total_cdf(grid), d.uplink_cdf(grid), atol=1e-15)


def test_total_cdf_support():
    d = _dist()
    assert d.total_cdf(-0.5) == 0.0
    assert d.total_cdf(0.0) == 0.0
    top = d.n_max * d.move_time + d.max_uplink
    assert d.total_cdf(top) >= 1 - d.truncation


def test_total_cdf_monotone():
    d = _dist()
    grid = np.linspace(0.0, d.n_max * d.move_time + d.max_uplink, 400)
    vals = d.total_cdf(grid)
    assert np.all(np.diff(vals) >= -1e-12)


def test_total_cdf_against_sampler():
    d = _dist()
    rng = substream(2024, 11)
    samples = np.sort(d.sample_total(rng, 1_000_000))
    grid = np.linspace(0.0, samples[-1] * 1.02, 200)
    empirical = np.searchsorted(samples, grid, side="right") / len(samples)
    sup = np.max(np.abs(empirical - d.total_cdf(grid)))
    assert sup < 0.005


def test_sampled_total_stays_in_support():
    d = _dist()
    rng = substream(2024, 12)
    n, t_up = d.sample_components(rng, 50_000)
    t = d.total_from_components(n, t_up)
    assert np.all((t_up > 0) & (t_up <= d.max_uplink))
    assert np.all(t <= n * d.move_time + d.max_uplink)
    assert np.all(t >= t_up)


def test_wireless_only_variant_drops_moves_from_total():
    cfg = default_config(latency_model=LatencyModel.WIRELESS_ONLY)
    d = LatencyDistribution.from_config(cfg)
    rng = substream(2024, 13)
    n, t_up = d.sample_components(rng, 1000)
    t = d.total_from_components(n, t_up)
    assert np.array_equal(t, t_up)
    assert n.max() > 0  # relocations still sampled (they cost energy)


# --- determinism ------------------------------------------------------------


def test_substreams_are_reproducible():
    a = substream(99, 0, 7).random(16)
    b = substream(99, 0, 7).random(16)
    c = substream(99, 0, 8).random(16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampler_sequences_reproducible():
    d = _dist()
    s1 = d.sample_total(substream(5, 1), 1000)
    s2 = d.sample_total(substream(5, 1), 1000)
    assert np.array_equal(s1, s2)


# --- discrete hook ----------------------------------------------------------


def test_discrete_latency_constant():
    d = DiscreteLatency.constant(0.25)
    rng = substream(2024, 14)
    n, t = d.sample_components(rng, 100)
    assert np.all(t == 0.25)
    assert np.all(n == 0)


def test_discrete_latency_cdf():
    d = DiscreteLatency(atoms=(0.1, 0.4), weights=(0.25, 0.75))
    assert d.total_cdf(0.05) == 0.0
    assert d.total_cdf(0.1) == pytest.approx(0.25)
    assert d.total_cdf(0.39) == pytest.approx(0.25)
    assert d.total_cdf(0.4) == pytest.approx(1.0)


def test_discrete_latency_validation():
    with pytest.raises(ValueError):
        DiscreteLatency(atoms=(0.1,), weights=(0.5,))
    with pytest.raises(ValueError):
        DiscreteLatency(atoms=(), weights=())
    with pytest.raises(ValueError):
        DiscreteLatency(atoms=(-0.1,), weights=(1.0,))
