"""Clock-driven leaky integrate-and-fire engine for the two-layer excitatory/inhibitory network."""
import copy
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .classes import LifParams, NetworkParams, PresentationParams, PresentationResult, SimClock, StepResult
from .defaults import Defaults
from .encoding import RateImage, draw_spikes, spike_probabilities
from .exceptions import ConfigurationError, NumericalFaultError

logger = logging.getLogger(__name__)

StepHook = Callable[["NetworkState", StepResult, float], None]


@lru_cache(maxsize=None)
def decay_factor(dt: float, tau: float) -> float:
    return math.exp(-dt / tau)


@dataclass
class NeuronState:
    """State of a neuron population, one array entry per neuron."""
    v_mem: np.ndarray
    i_syn: np.ndarray
    refractory_until: np.ndarray
    theta: np.ndarray
    spike_count: np.ndarray

    @classmethod
    def resting(cls, n: int, params: LifParams) -> "NeuronState":
        return cls(
            v_mem=np.full(n, params.v_rest, dtype=np.float64),
            i_syn=np.zeros(n, dtype=np.float64),
            refractory_until=np.full(n, -np.inf),
            theta=np.zeros(n, dtype=np.float64),
            spike_count=np.zeros(n, dtype=np.int64),
        )

    def __len__(self):
        return len(self.v_mem)

    def reset_dynamics(self, params: LifParams):
        self.v_mem.fill(params.v_rest)
        self.i_syn.fill(0.0)
        self.refractory_until.fill(-np.inf)


@dataclass
class NetworkState:
    weights: np.ndarray
    exc: NeuronState
    inh: NeuronState
    exc_params: LifParams = field(default_factory=LifParams)
    inh_params: LifParams = field(default_factory=LifParams.inhibitory)
    w_inh: float = Defaults.W_INH
    w_exc_to_inh: float = Defaults.W_EXC_TO_INH
    theta_plus: float = Defaults.THETA_PLUS
    tau_theta: float = Defaults.TAU_THETA
    w_max: float = Defaults.W_MAX
    # spikes of the previous step, delivered one step late
    pending_exc: Optional[np.ndarray] = None
    pending_inh: Optional[np.ndarray] = None

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ConfigurationError(f"weights must be a matrix, got shape {self.weights.shape}")
        n_exc = self.weights.shape[0]
        if len(self.exc) != n_exc or len(self.inh) != n_exc:
            raise ConfigurationError(
                f"{n_exc} weight rows but {len(self.exc)} excitatory and {len(self.inh)} inhibitory neurons")
        if np.any(self.weights < 0) or np.any(self.weights > self.w_max):
            raise ConfigurationError(f"weights must lie in [0, {self.w_max}]")
        if self.pending_exc is None:
            self.pending_exc = np.zeros(n_exc, dtype=bool)
        if self.pending_inh is None:
            self.pending_inh = np.zeros(n_exc, dtype=bool)

    @classmethod
    def build(cls, weights: np.ndarray, network: NetworkParams, exc_params: LifParams,
              inh_params: LifParams, w_max: float = Defaults.W_MAX) -> "NetworkState":
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (network.n_exc, network.n_input):
            raise ConfigurationError(
                f"weights have shape {weights.shape}, expected ({network.n_exc}, {network.n_input})")
        n_exc = network.n_exc
        return cls(
            weights=weights,
            exc=NeuronState.resting(n_exc, exc_params),
            inh=NeuronState.resting(n_exc, inh_params),
            exc_params=exc_params,
            inh_params=inh_params,
            w_inh=network.w_inh,
            w_exc_to_inh=network.w_exc_to_inh,
            theta_plus=network.theta_plus,
            tau_theta=network.tau_theta,
            w_max=w_max,
        )

    @property
    def n_input(self) -> int:
        return self.weights.shape[1]

    @property
    def n_exc(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "NetworkState":
        return copy.deepcopy(self)

    def reset_dynamics(self):
        """Return membranes and currents to rest. Weights and thresholds are kept."""
        self.exc.reset_dynamics(self.exc_params)
        self.inh.reset_dynamics(self.inh_params)
        self.pending_exc.fill(False)
        self.pending_inh.fill(False)


def integrate_synaptic_current(state: NetworkState, input_spikes: np.ndarray, inh_spikes: np.ndarray, dt: float):
    """Exponential-Euler step of the excitatory synaptic currents.

    Each active input adds its weight; each active inhibitor adds -w_inh to every
    excitatory neuron except its own partner.
    """
    if input_spikes.shape != (state.n_input,):
        raise ConfigurationError(f"input spike vector has shape {input_spikes.shape}, expected ({state.n_input},)")
    if inh_spikes.shape != (state.n_exc,):
        raise ConfigurationError(f"inhibitory spike vector has shape {inh_spikes.shape}, expected ({state.n_exc},)")

    i_syn = state.exc.i_syn
    i_syn *= decay_factor(dt, state.exc_params.tau_post_current)
    active = np.flatnonzero(input_spikes)
    if active.size:
        i_syn += state.weights[:, active].sum(axis=1)
    n_inh = int(np.count_nonzero(inh_spikes))
    if n_inh:
        i_syn -= state.w_inh * (n_inh - inh_spikes.astype(np.float64))
    return i_syn


def update_membrane(neuron: NeuronState, params: LifParams, dt: float, now: float):
    """Advance membranes by one step in place. Returns (neuron, spiked mask)."""
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    refractory = now < neuron.refractory_until
    v_inf = params.v_rest + params.r_mem * neuron.i_syn
    v = v_inf + (neuron.v_mem - v_inf) * decay_factor(dt, params.tau_mem)
    v[refractory] = params.v_reset
    if not np.all(np.isfinite(v)):
        bad = np.flatnonzero(~np.isfinite(v))
        raise NumericalFaultError(f"membrane potential became non-finite for neurons {bad.tolist()} at t={now} ms")

    spiked = ~refractory & (v >= params.v_thresh + neuron.theta)
    v[spiked] = params.v_reset
    neuron.v_mem = v
    neuron.refractory_until[spiked] = now + params.refractory
    neuron.spike_count += spiked
    return neuron, spiked


def apply_homeostasis(neuron: NeuronState, spiked: np.ndarray, dt: float, theta_plus: float, tau_theta: float):
    theta = neuron.theta
    theta *= decay_factor(dt, tau_theta)
    theta += theta_plus * spiked
    np.maximum(theta, 0.0, out=theta)
    return theta


def advance_timestep(state: NetworkState, input_spikes: np.ndarray, clock: SimClock,
                     homeostasis: bool = True) -> StepResult:
    """Advance the whole network by one clock step.

    Excitatory spikes reach their paired inhibitory neuron on the next step, and
    inhibitory spikes reach the excitatory layer one step after that.
    """
    dt, now = clock.dt, clock.now
    integrate_synaptic_current(state, input_spikes, state.pending_inh, dt)
    _, exc_spiked = update_membrane(state.exc, state.exc_params, dt, now)
    if homeostasis:
        apply_homeostasis(state.exc, exc_spiked, dt, state.theta_plus, state.tau_theta)

    inh_current = state.inh.i_syn
    inh_current *= decay_factor(dt, state.inh_params.tau_post_current)
    inh_current += state.w_exc_to_inh * state.pending_exc
    _, inh_spiked = update_membrane(state.inh, state.inh_params, dt, now)

    state.pending_exc = exc_spiked
    state.pending_inh = inh_spiked
    clock.tick()
    return StepResult(
        exc_spikes=np.flatnonzero(exc_spiked),
        inh_spikes=np.flatnonzero(inh_spiked),
        input_spikes=input_spikes,
    )


def _run_attempt(state: NetworkState, p: np.ndarray, stimulus_steps: int, rest_steps: int,
                 rng: np.random.Generator, clock: SimClock, hook: Optional[StepHook], homeostasis: bool):
    counts = np.zeros(state.n_exc, dtype=np.int64)
    spike_log = []
    silent = np.zeros(state.n_input, dtype=bool)
    driven = bool(np.any(p > 0))

    for step in range(stimulus_steps + rest_steps):
        stimulus = step < stimulus_steps
        input_spikes = draw_spikes(p, rng) if stimulus and driven else silent
        result = advance_timestep(state, input_spikes, clock, homeostasis=homeostasis)
        if hook is not None:
            hook(state, result, clock.dt)
        if stimulus and result.exc_spikes.size:
            counts[result.exc_spikes] += 1
            spike_log.extend((step, int(j)) for j in result.exc_spikes)
    return counts, spike_log


def run_presentation(state: NetworkState, rates: RateImage, params: PresentationParams,
                     rng: np.random.Generator, clock: Optional[SimClock] = None,
                     hook: Optional[StepHook] = None, homeostasis: bool = True) -> PresentationResult:
    """Show one image for `params.duration` ms followed by `params.rest` ms of silence.

    Spikes are counted over the stimulus window only. When fewer than `min_spikes`
    excitatory spikes occur, the stimulus is boosted by `rate_boost` Hz and shown again,
    at most `max_retries` times.
    """
    clock = clock or SimClock(dt=params.dt)
    stimulus_steps = clock.steps_for(params.duration)
    rest_steps = clock.steps_for(params.rest)

    boosted = RateImage(rates.rates, rates.boost)
    steps = 0
    for attempt in range(params.max_retries + 1):
        p = spike_probabilities(boosted, clock.dt)
        counts, spike_log = _run_attempt(state, p, stimulus_steps, rest_steps, rng, clock, hook, homeostasis)
        steps += stimulus_steps + rest_steps
        if counts.sum() >= params.min_spikes:
            return PresentationResult(counts, spike_log, retries=attempt, steps=steps)
        if attempt < params.max_retries:
            boosted.boost += params.rate_boost
            logger.debug(f"Only {counts.sum()} spikes, retrying with +{boosted.boost:.1f} Hz boost")

    logger.warning(
        f"Presentation degenerate: {counts.sum()} spikes after {params.max_retries} retries "
        f"(boost {boosted.boost:.1f} Hz)")
    return PresentationResult(counts, spike_log, retries=params.max_retries, degenerate=True, steps=steps)
