"""Binomial uncertainty, NFE accounting, and iteration histograms."""

import math

import pytest
from conftest import make_trajectory
from hypothesis import given
from hypothesis import strategies as st

from clvr import (
    BinomialSummary,
    IterationHistogram,
    NfeConfig,
    binomial_summary,
    histogram,
    nfe,
    normal_ci,
    se_binomial,
    se_mean,
    speedup,
    wilson_interval,
)
from clvr.stats import z_score


# ----------------------------------------------------------------- z scores


def test_z_table_values():
    assert z_score(0.90) == 1.644854
    assert z_score(0.95) == 1.959964
    assert z_score(0.99) == 2.575829


def test_z_score_falls_back_to_exact_quantile():
    assert z_score(0.5) == pytest.approx(0.674490, abs=1e-6)
    assert z_score(0.95) == pytest.approx(z_score(0.9500001), abs=1e-5)


def test_z_score_validation():
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            z_score(bad)


# ----------------------------------------------------------------- binomial


def test_wilson_interval_benchmark_value():
    low, high = wilson_interval(0.8645, 553)
    assert low == pytest.approx(0.833447, abs=1e-6)
    assert high == pytest.approx(0.890524, abs=1e-6)


def test_se_binomial_benchmark_value():
    assert se_binomial(0.8645, 553) == pytest.approx(0.014554, abs=1e-6)


def test_wilson_zero_successes_still_informative():
    low, high = wilson_interval(0.0, 10)
    assert low == 0.0
    assert high == pytest.approx(0.277533, abs=1e-6)


def test_wilson_symmetry():
    low, high = wilson_interval(0.3, 100)
    low_c, high_c = wilson_interval(0.7, 100)
    assert low == pytest.approx(1.0 - high_c, abs=1e-12)
    assert high == pytest.approx(1.0 - low_c, abs=1e-12)


@given(
    p=st.floats(min_value=0.0, max_value=1.0),
    n=st.integers(min_value=1, max_value=10**6),
)
def test_wilson_contains_the_estimate(p, n):
    low, high = wilson_interval(p, n)
    assert 0.0 <= low <= p <= high <= 1.0


def test_binomial_validation():
    with pytest.raises(ValueError, match="n must be"):
        wilson_interval(0.5, 0)
    with pytest.raises(ValueError, match="p_hat"):
        se_binomial(1.2, 10)


def test_binomial_summary_bundles_everything():
    s = binomial_summary(0.8645, 553)
    assert s == BinomialSummary(
        0.8645, 553, se_binomial(0.8645, 553), *wilson_interval(0.8645, 553)
    )
    assert s.confidence == 0.95


# --------------------------------------------------------------------- mean


def test_se_mean_matches_hand_computation():
    values = (1.0, 2.0, 3.0, 4.0)
    # sample std of 1..4 is sqrt(5/3)
    assert se_mean(values) == pytest.approx(math.sqrt(5.0 / 3.0) / 2.0, rel=1e-12)
    with pytest.raises(ValueError, match="at least 2"):
        se_mean([1.0])


def test_normal_ci_benchmark_value():
    low, high = normal_ci(0.7405, 0.0093)
    assert low == pytest.approx(0.722272, abs=1e-6)
    assert high == pytest.approx(0.758728, abs=1e-6)


def test_normal_ci_width_scales_with_se():
    low1, high1 = normal_ci(0.0, 1.0)
    low2, high2 = normal_ci(0.0, 2.0)
    assert high2 - low2 == pytest.approx(2.0 * (high1 - low1), rel=1e-12)
    with pytest.raises(ValueError, match="se"):
        normal_ci(0.0, -1.0)


# ---------------------------------------------------------------------- nfe


def test_nfe_cfg_doubles_evaluations():
    assert nfe(NfeConfig(sampling_steps=28, cfg_enabled=True)) == 56
    assert nfe(NfeConfig(sampling_steps=4, cfg_enabled=False)) == 4


def test_nfe_scales_with_iterations():
    assert nfe(NfeConfig(sampling_steps=28, cfg_enabled=True, iterations=3)) == 168


def test_nfe_validation():
    with pytest.raises(ValueError, match="sampling_steps"):
        NfeConfig(sampling_steps=0, cfg_enabled=True)
    with pytest.raises(ValueError, match="iterations"):
        NfeConfig(sampling_steps=4, cfg_enabled=False, iterations=0)


def test_speedup_benchmark_value():
    assert speedup(287.0, 25.5) == pytest.approx(11.254902, abs=1e-6)
    with pytest.raises(ValueError, match="fast_seconds"):
        speedup(1.0, 0.0)


# --------------------------------------------------------------- histograms


def test_histogram_counts_image_iterations():
    trajs = [make_trajectory(1), make_trajectory(1), make_trajectory(3)]
    h = histogram(trajs)
    assert h.counts == {1: 2, 3: 1}
    assert h.total == 3


def test_histogram_dict_uses_sorted_string_keys():
    h = IterationHistogram({3: 1, 1: 2})
    assert list(h.to_dict()) == ["1", "3"]
    assert h.to_dict() == {"1": 2, "3": 1}


def test_histogram_of_empty_dataset():
    h = histogram([])
    assert h.counts == {}
    assert h.total == 0
