"""Rate coding of pixel images into Poisson spike trains."""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .defaults import Defaults
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class RngStream:
    """A reproducible random stream identified by a run seed and a substream key.

    Streams with the same seed and key always draw the same numbers; different keys
    give statistically independent streams, so presentations can run in any order.
    """
    seed: int
    key: Tuple[int, ...] = ()

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    def generator(self) -> np.random.Generator:
        entropy = [self.seed, *self.key]
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass
class RateImage:
    rates: np.ndarray
    boost: float = 0.0

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=np.float64).reshape(-1)
        if np.any(self.rates < 0) or not np.all(np.isfinite(self.rates)):
            raise ConfigurationError("rates must be finite and non-negative")

    def effective(self) -> np.ndarray:
        """Rates with the retry boost added to every input."""
        if self.boost == 0:
            return self.rates
        return self.rates + self.boost


def intensity_to_rate(intensity, scale: float = Defaults.INTENSITY_SCALE):
    """Firing rate in Hz for a pixel intensity in 0..255."""
    return np.asarray(intensity, dtype=np.float64) * scale


def image_to_rates(image: np.ndarray, scale: float = Defaults.INTENSITY_SCALE) -> RateImage:
    return RateImage(intensity_to_rate(np.asarray(image).reshape(-1), scale))


def spike_probabilities(rates: RateImage, dt: float) -> np.ndarray:
    p = rates.effective() * dt / 1000.0
    if np.any(p >= 1.0):
        logger.warning(f"Per-step spike probability reached {p.max():.3f} at dt={dt} ms; rates are saturating")
    return p


def draw_spikes(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return rng.random(p.shape[0]) < p


def sample_spikes(rates: RateImage, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One step of input spikes: each input fires independently with probability rate*dt/1000."""
    return draw_spikes(spike_probabilities(rates, dt), rng)
