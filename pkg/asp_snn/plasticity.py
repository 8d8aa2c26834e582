"""Weight-update rules: synaptic traces, ASP recovery and decay, power-law STDP and isolated decay."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classes import PlasticityConfig, Rule, StepResult
from .defaults import Defaults
from .exceptions import ConfigurationError
from .simulation import NetworkState, decay_factor


@dataclass
class TraceState:
    pre_rec: np.ndarray
    pre_acc: np.ndarray
    post: np.ndarray
    # presynaptic trace of the isolated-decay rule, kept apart from the ASP traces
    pre_iso: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, n_input: int, n_exc: int) -> "TraceState":
        return cls(
            pre_rec=np.zeros(n_input),
            pre_acc=np.zeros(n_input),
            post=np.zeros(n_exc),
            pre_iso=np.zeros(n_input),
        )

    def copy(self) -> "TraceState":
        return TraceState(self.pre_rec.copy(), self.pre_acc.copy(), self.post.copy(),
                          None if self.pre_iso is None else self.pre_iso.copy())


@dataclass
class WeightDelta:
    row: int
    delta: np.ndarray


def decay_traces(traces: TraceState, dt: float, cfg: PlasticityConfig) -> TraceState:
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    traces.pre_rec *= decay_factor(dt, cfg.tau_rec)
    traces.pre_acc *= decay_factor(dt, cfg.tau_acc)
    traces.post *= decay_factor(dt, cfg.tau_post_trace)
    return traces


def bump_traces(traces: TraceState, input_spikes: np.ndarray, exc_spikes: np.ndarray) -> TraceState:
    """Register this step's spikes. The recent trace is set to 1, the others accumulate."""
    traces.pre_rec[input_spikes] = 1.0
    traces.pre_acc[input_spikes] += 1.0
    traces.post[exc_spikes] += 1.0
    return traces


def asp_recovery_update(row: int, traces: TraceState, cfg: PlasticityConfig) -> WeightDelta:
    eta = cfg.k1_const / (traces.post[row] + 1.0)
    delta = eta * ((traces.pre_rec - cfg.offset) - cfg.k_const / np.exp2(traces.pre_acc))
    return WeightDelta(row, delta)


def stdp_powerlaw_update(weights: np.ndarray, row: int, traces: TraceState, cfg: PlasticityConfig) -> WeightDelta:
    delta = cfg.eta_stdp * (traces.pre_rec - cfg.offset) * (cfg.w_max - weights[row]) ** cfg.mu_stdp
    return WeightDelta(row, delta)


def clamp_weights(weights: np.ndarray, w_max: float) -> np.ndarray:
    return np.clip(weights, 0.0, w_max, out=weights)


def apply_delta(weights: np.ndarray, update: WeightDelta, w_max: float) -> np.ndarray:
    row = weights[update.row]
    row += update.delta
    clamp_weights(row, w_max)
    return weights


def compute_tau_leak(post, theta, cfg: PlasticityConfig):
    """Leak time constant in ms; grows with the post trace and with the homeostatic threshold."""
    exponent = np.minimum(np.asarray(theta, dtype=np.float64) / cfg.theta_norm, Defaults.THETA_EXPONENT_CAP)
    return cfg.k2_const * (np.asarray(post, dtype=np.float64) + 1.0) * np.exp2(exponent)


def asp_decay_step(weights: np.ndarray, traces: TraceState, thetas: np.ndarray, dt: float,
                   cfg: PlasticityConfig, mode: Rule = Rule.ASP_EXPONENTIAL) -> np.ndarray:
    """Leak every weight toward 0 with one time constant per excitatory row."""
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    tau_leak = compute_tau_leak(traces.post, thetas, cfg)
    if mode == Rule.ASP_EXPONENTIAL:
        weights *= np.exp(-cfg.alpha * dt / tau_leak)[:, None]
    elif mode == Rule.ASP_LINEAR:
        weights -= (cfg.alpha_lin * dt / tau_leak)[:, None]
        np.maximum(weights, 0.0, out=weights)
    else:
        raise ConfigurationError(f"{mode.value} has no decay phase")
    return weights


def isolated_decay_update(weights: np.ndarray, pre_trace_iso: np.ndarray, input_spikes: np.ndarray,
                          dt: float, cfg: PlasticityConfig) -> np.ndarray:
    """Presynaptic-only weight dynamics: exponential leak plus a trace-sized jump on each input spike.

    Every row receives the same update, so there is no competition between neurons.
    """
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    pre_trace_iso *= decay_factor(dt, cfg.tau_trace_iso)
    pre_trace_iso[input_spikes] += 1.0
    weights *= decay_factor(cfg.alpha_iso * dt, cfg.tau_leak_iso)
    active = np.flatnonzero(input_spikes)
    if active.size:
        weights[:, active] += (dt / cfg.tau_leak_iso) * pre_trace_iso[active]
    clamp_weights(weights, cfg.w_max)
    return weights


class PlasticityHook:
    """Per-step learning driven by `run_presentation`.

    Order within a step: traces decay then register this step's spikes, every excitatory
    neuron that spiked gets its recovery update (reading the bumped traces), weights are
    clamped, and finally the decay phase leaks all weights (ASP rules only).
    """

    def __init__(self, cfg: PlasticityConfig, traces: TraceState):
        self.cfg = cfg
        self.traces = traces

    @classmethod
    def for_network(cls, cfg: PlasticityConfig, state: NetworkState) -> "PlasticityHook":
        return cls(cfg, TraceState.zeros(state.n_input, state.n_exc))

    def __call__(self, state: NetworkState, step: StepResult, dt: float):
        cfg = self.cfg
        if cfg.rule == Rule.NONE:
            return
        weights = state.weights

        if cfg.rule == Rule.ISOLATED_DECAY:
            isolated_decay_update(weights, self.traces.pre_iso, step.input_spikes, dt, cfg)
            return

        decay_traces(self.traces, dt, cfg)
        bump_traces(self.traces, step.input_spikes, step.exc_spikes)
        for j in step.exc_spikes:
            if cfg.rule == Rule.STDP_POWERLAW:
                update = stdp_powerlaw_update(weights, int(j), self.traces, cfg)
            else:
                update = asp_recovery_update(int(j), self.traces, cfg)
            apply_delta(weights, update, cfg.w_max)

        if cfg.rule.is_asp:
            asp_decay_step(weights, self.traces, state.exc.theta, dt, cfg, mode=cfg.rule)
