import logging

import numpy as np
import pytest

from asp_snn.encoding import RateImage, RngStream, image_to_rates, intensity_to_rate, sample_spikes, spike_probabilities
from asp_snn.exceptions import ConfigurationError


def test_full_intensity_maps_to_63_75_hz():
    assert intensity_to_rate(255) == 63.75
    assert intensity_to_rate(0) == 0.0


def test_image_is_flattened_row_major():
    image = np.zeros((28, 28), dtype=np.uint8)
    image[0, 1] = 100
    rates = image_to_rates(image)
    assert rates.rates.shape == (784,)
    assert rates.rates[1] == 25.0


def test_boost_reaches_every_input():
    rates = RateImage(np.array([0.0, 10.0, 63.75]), boost=32.0)
    np.testing.assert_allclose(rates.effective(), [32.0, 42.0, 95.75])
    np.testing.assert_array_equal(RateImage(np.array([0.0, 10.0])).effective(), [0.0, 10.0])


def test_spike_probability_per_step():
    p = spike_probabilities(RateImage(np.array([100.0])), dt=0.5)
    assert p[0] == 0.05


def test_saturating_rates_are_reported(caplog):
    with caplog.at_level(logging.WARNING):
        spike_probabilities(RateImage(np.array([3000.0])), dt=0.5)
    assert "saturating" in caplog.text


def test_empirical_rate_matches_probability():
    rng = RngStream(5).generator()
    rates = RateImage(np.full(1000, 40.0))
    total = sum(sample_spikes(rates, 0.5, rng).sum() for _ in range(200))
    # 1000 inputs * 200 steps * 0.02
    assert abs(total / 200_000 - 0.02) < 0.002


def test_streams_are_keyed():
    a = RngStream(7, (1, 2)).generator().random(5)
    b = RngStream(7, (1, 2)).generator().random(5)
    c = RngStream(7, (1, 3)).generator().random(5)
    d = RngStream(8, (1, 2)).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert RngStream(7, (1,)).child(2) == RngStream(7, (1, 2))


def test_silent_image_never_spikes():
    rng = RngStream(1).generator()
    rates = image_to_rates(np.zeros((28, 28), dtype=np.uint8))
    assert not any(sample_spikes(rates, 0.5, rng).any() for _ in range(100))


def test_negative_or_non_finite_rates_are_configuration_errors():
    for bad in ([-1.0, 2.0], [np.nan, 0.0], [np.inf]):
        with pytest.raises(ConfigurationError):
            RateImage(np.array(bad))
