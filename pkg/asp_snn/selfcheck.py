"""Release gate: the vectorized engine checked against an independent scalar reimplementation."""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional

import numpy as np

from .classes import LifParams, NetworkParams, PlasticityConfig, Rule, SimClock
from .defaults import Defaults
from .encoding import RngStream
from .plasticity import PlasticityHook, TraceState, asp_recovery_update, compute_tau_leak, decay_traces
from .simulation import NetworkState, advance_timestep

logger = logging.getLogger(__name__)

ORACLE_STEPS = 10_000
ORACLE_TOLERANCE = 1e-9
TRACE_TOLERANCE = 1e-12
# strong enough that a single input drives the lone neuron to spike
ORACLE_R_MEM = 40.0
ORACLE_INITIAL_WEIGHT = 0.5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def scripted_inputs(steps: int = ORACLE_STEPS, seed: int = 0) -> np.ndarray:
    """Alternating bursts (p=0.4) and quiet stretches (p=0.02), 250 ms each."""
    block = int(250 / Defaults.DT_MS)
    p = np.where((np.arange(steps) // block) % 2 == 0, 0.4, 0.02)
    return RngStream(seed, (0x5C,)).generator().random(steps) < p


class ScalarOracle:
    """One input, one excitatory and one inhibitory neuron, written out with plain floats."""

    def __init__(self, exc: LifParams, inh: LifParams, net: NetworkParams, cfg: PlasticityConfig, w: float, dt: float):
        self.exc, self.inh, self.net, self.cfg, self.dt = exc, inh, net, cfg, dt
        self.w = w
        self.v, self.i, self.ref_until, self.theta = exc.v_rest, 0.0, -math.inf, 0.0
        self.v_i, self.i_i, self.ref_until_i = inh.v_rest, 0.0, -math.inf
        self.pending_exc = False
        self.pre_rec = self.pre_acc = self.post = 0.0

    @staticmethod
    def _membrane(v, i, ref_until, p: LifParams, threshold, dt, now):
        refractory = now < ref_until
        v_inf = p.v_rest + p.r_mem * i
        v = v_inf + (v - v_inf) * math.exp(-dt / p.tau_mem)
        if refractory:
            v = p.v_reset
        spiked = (not refractory) and v >= threshold
        if spiked:
            v = p.v_reset
            ref_until = now + p.refractory
        return v, ref_until, spiked

    def step(self, now: float, pre: bool):
        dt, cfg = self.dt, self.cfg
        # a lone excitatory neuron has no other inhibitor to hear
        self.i = self.i * math.exp(-dt / self.exc.tau_post_current) + (self.w if pre else 0.0)
        self.v, self.ref_until, spiked = self._membrane(
            self.v, self.i, self.ref_until, self.exc, self.exc.v_thresh + self.theta, dt, now)
        self.theta = max(0.0, self.theta * math.exp(-dt / self.net.tau_theta) + (self.net.theta_plus if spiked else 0.0))

        self.i_i = self.i_i * math.exp(-dt / self.inh.tau_post_current) + (self.net.w_exc_to_inh if self.pending_exc else 0.0)
        self.v_i, self.ref_until_i, _ = self._membrane(
            self.v_i, self.i_i, self.ref_until_i, self.inh, self.inh.v_thresh, dt, now)
        self.pending_exc = spiked

        self.pre_rec *= math.exp(-dt / cfg.tau_rec)
        self.pre_acc *= math.exp(-dt / cfg.tau_acc)
        self.post *= math.exp(-dt / cfg.tau_post_trace)
        if pre:
            self.pre_rec = 1.0
            self.pre_acc += 1.0
        if spiked:
            self.post += 1.0
            eta = cfg.k1_const / (self.post + 1.0)
            self.w += eta * ((self.pre_rec - cfg.offset) - cfg.k_const / 2.0 ** self.pre_acc)
            self.w = min(max(self.w, 0.0), cfg.w_max)
        tau_leak = cfg.k2_const * (self.post + 1.0) * 2.0 ** min(self.theta / cfg.theta_norm, Defaults.THETA_EXPONENT_CAP)
        self.w *= math.exp(-cfg.alpha * dt / tau_leak)
        return spiked


def check_scalar_oracle(cfg: PlasticityConfig, steps: int = ORACLE_STEPS) -> CheckResult:
    cfg = replace(cfg, rule=Rule.ASP_EXPONENTIAL)
    exc = LifParams(r_mem=ORACLE_R_MEM)
    inh = LifParams.inhibitory()
    net = NetworkParams(n_input=1, n_exc=1)
    state = NetworkState.build(np.array([[ORACLE_INITIAL_WEIGHT]]), net, exc, inh, w_max=cfg.w_max)
    hook = PlasticityHook.for_network(cfg, state)
    clock = SimClock()
    oracle = ScalarOracle(exc, inh, net, cfg, ORACLE_INITIAL_WEIGHT, clock.dt)

    post_spikes = 0
    worst = 0.0
    for step, pre in enumerate(scripted_inputs(steps)):
        spiked = oracle.step(clock.now, bool(pre))
        result = advance_timestep(state, np.array([pre]), clock)
        hook(state, result, clock.dt)
        post_spikes += spiked
        traces = hook.traces
        pairs = {
            "v_mem": (state.exc.v_mem[0], oracle.v),
            "i_syn": (state.exc.i_syn[0], oracle.i),
            "theta": (state.exc.theta[0], oracle.theta),
            "pre_rec": (traces.pre_rec[0], oracle.pre_rec),
            "pre_acc": (traces.pre_acc[0], oracle.pre_acc),
            "post": (traces.post[0], oracle.post),
            "w": (state.weights[0, 0], oracle.w),
        }
        if bool(result.exc_spikes.size) != spiked:
            return CheckResult("scalar_oracle", False, f"spike mismatch at step {step}")
        for name, (engine, scalar) in pairs.items():
            error = abs(float(engine) - scalar)
            worst = max(worst, error)
            if not error <= ORACLE_TOLERANCE:
                return CheckResult("scalar_oracle", False,
                                   f"{name} differs by {error:.3e} at step {step} ({engine!r} vs {scalar!r})")
    if post_spikes == 0:
        return CheckResult("scalar_oracle", False, "scripted input never made the neuron spike")
    return CheckResult("scalar_oracle", True, f"{steps} steps, {post_spikes} post spikes, max error {worst:.1e}")


def check_trace_partition(cfg: PlasticityConfig) -> CheckResult:
    """Many small decay steps must equal one exponential over the whole span."""
    dt = Defaults.DT_MS
    for steps in (1, 7, 80, 400):
        traces = TraceState(np.ones(1), np.ones(1), np.ones(1))
        for _ in range(steps):
            decay_traces(traces, dt, cfg)
        expected = {
            "pre_rec": math.exp(-steps * dt / cfg.tau_rec),
            "pre_acc": math.exp(-steps * dt / cfg.tau_acc),
            "post": math.exp(-steps * dt / cfg.tau_post_trace),
        }
        for name, value in expected.items():
            got = float(getattr(traces, name)[0])
            if abs(got - value) > TRACE_TOLERANCE * value:
                return CheckResult("trace_partition", False, f"{name} after {steps} steps: {got!r} vs {value!r}")
    return CheckResult("trace_partition", True)


def check_trace_timescales(cfg: PlasticityConfig) -> CheckResult:
    """Traces decayed for 40 ms must land on the values implied by the reference time constants (4, 40, 80 ms)."""
    dt = Defaults.DT_MS
    traces = TraceState(np.ones(1), np.ones(1), np.ones(1))
    for _ in range(int(40 / dt)):
        decay_traces(traces, dt, cfg)
    expected = {"pre_rec": math.exp(-10.0), "pre_acc": math.exp(-1.0), "post": math.exp(-0.5)}
    failed = [name for name, value in expected.items()
              if abs(float(getattr(traces, name)[0]) - value) > 1e-9 * max(value, 1e-300)]
    if failed:
        return CheckResult("trace_timescales", False, f"wrong decay for {', '.join(failed)} "
                                                      f"(tau_rec={cfg.tau_rec}, tau_acc={cfg.tau_acc}, "
                                                      f"tau_post_trace={cfg.tau_post_trace})")
    return CheckResult("trace_timescales", True)


def check_trace_ratios(cfg: PlasticityConfig) -> CheckResult:
    if cfg.trace_ratios_hold():
        return CheckResult("trace_ratios", True)
    return CheckResult("trace_ratios", False, f"tau_acc/tau_rec={cfg.tau_acc / cfg.tau_rec:g}, "
                                              f"tau_post_trace/tau_acc={cfg.tau_post_trace / cfg.tau_acc:g}")


def check_recovery_spot_values(cfg: PlasticityConfig) -> CheckResult:
    cases = [
        # (pre_rec, pre_acc, post, expected delta)
        (1.0, 0.0, 0.0, 0.0079),
        (0.0, 1.0, 1.0, -0.001025),
        (1.0, 3.0, 3.0, 0.0025 * (0.8 - 0.01 / 8.0)),
    ]
    for pre_rec, pre_acc, post, expected in cases:
        traces = TraceState(np.array([pre_rec]), np.array([pre_acc]), np.array([post]))
        got = float(asp_recovery_update(0, traces, cfg).delta[0])
        if abs(got - expected) > 1e-12:
            return CheckResult("recovery_spot_values", False,
                               f"pre_rec={pre_rec} pre_acc={pre_acc} post={post}: {got!r} vs {expected!r}")
    return CheckResult("recovery_spot_values", True)


def check_leak_spot_values(cfg: PlasticityConfig) -> CheckResult:
    cases = [
        # (post, theta, expected tau_leak in ms)
        (0.0, 0.0, 100.0),
        (1.0, 1.0, 400.0),
        (3.0, 2.5, 400.0 * 2.0 ** 2.5),
        (0.0, 1000.0, 100.0 * 2.0 ** 64),
    ]
    for post, theta, expected in cases:
        got = float(compute_tau_leak(post, theta, cfg))
        if abs(got - expected) > 1e-12 * expected:
            return CheckResult("leak_spot_values", False, f"post={post} theta={theta}: {got!r} vs {expected!r}")
    return CheckResult("leak_spot_values", True)


CHECKS: List[Callable[[PlasticityConfig], CheckResult]] = [
    check_scalar_oracle,
    check_trace_partition,
    check_trace_timescales,
    check_trace_ratios,
    check_recovery_spot_values,
    check_leak_spot_values,
]


def run_selfcheck(cfg: Optional[PlasticityConfig] = None) -> List[CheckResult]:
    cfg = cfg or PlasticityConfig()
    results = []
    for check in CHECKS:
        try:
            result = check(cfg)
        except Exception as e:
            logger.error(f"{check.__name__} raised {type(e).__name__}: {e}")
            result = CheckResult(check.__name__.removeprefix("check_"), False, f"{type(e).__name__}: {e}")
        results.append(result)
    return results
