import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from .defaults import Defaults
from .exceptions import ConfigurationError


class Rule(str, Enum):
    ASP_EXPONENTIAL = "asp_exponential"
    ASP_LINEAR = "asp_linear"
    STDP_POWERLAW = "stdp_powerlaw"
    ISOLATED_DECAY = "isolated_decay"
    NONE = "none"

    @property
    def is_asp(self) -> bool:
        return self in (Rule.ASP_EXPONENTIAL, Rule.ASP_LINEAR)


class ScheduleMode(str, Enum):
    SEQUENTIAL = "sequential"
    INTERMIXED = "intermixed"
    CUSTOM = "custom"


class SchedulePreset(str, Enum):
    NONE = "none"
    DECREASING = "decreasing"
    DIGITS_210 = "digits_210"
    DIGITS_5041 = "digits_5041"
    REINFORCED_THEN_NEW = "reinforced_then_new"


class NoiseKind(str, Enum):
    AWGN = "awgn"
    AWGN_REDUCED_CONTRAST = "awgn_reduced_contrast"


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigurationError(message)


@dataclass
class SimClock:
    """Fixed-step simulation clock. Time is kept as a step count so `now` is always an exact multiple of dt."""
    dt: float = Defaults.DT_MS
    step: int = 0

    def __post_init__(self):
        _require(self.dt > 0, f"dt must be positive, got {self.dt}")

    @property
    def now(self) -> float:
        return self.step * self.dt

    def tick(self):
        self.step += 1

    def steps_for(self, duration_ms: float) -> int:
        steps = duration_ms / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigurationError(f"duration {duration_ms} ms is not a multiple of dt={self.dt} ms")
        return int(round(steps))


@dataclass
class LifParams:
    tau_mem: float = Defaults.EXC_TAU_MEM
    v_rest: float = Defaults.EXC_V_REST
    v_reset: float = Defaults.EXC_V_RESET
    v_thresh: float = Defaults.EXC_V_THRESH
    refractory: float = Defaults.EXC_REFRACTORY
    tau_post_current: float = Defaults.EXC_TAU_POST_CURRENT
    # mV of steady-state depolarization per unit of synaptic current
    r_mem: float = Defaults.EXC_R_MEM

    def __post_init__(self):
        _require(self.tau_mem > 0, f"tau_mem must be positive, got {self.tau_mem}")
        _require(self.tau_post_current > 0, f"tau_post_current must be positive, got {self.tau_post_current}")
        _require(self.v_reset <= self.v_thresh, f"v_reset ({self.v_reset}) must not exceed v_thresh ({self.v_thresh})")
        _require(self.refractory >= 0, f"refractory must be non-negative, got {self.refractory}")

    @classmethod
    def inhibitory(cls) -> "LifParams":
        return cls(
            tau_mem=Defaults.INH_TAU_MEM,
            v_rest=Defaults.INH_V_REST,
            v_reset=Defaults.INH_V_RESET,
            v_thresh=Defaults.INH_V_THRESH,
            refractory=Defaults.INH_REFRACTORY,
            tau_post_current=Defaults.INH_TAU_POST_CURRENT,
            r_mem=Defaults.INH_R_MEM,
        )


@dataclass
class NetworkParams:
    n_input: int = Defaults.N_INPUT
    n_exc: int = Defaults.N_EXC
    w_inh: float = Defaults.W_INH
    w_exc_to_inh: float = Defaults.W_EXC_TO_INH
    init_weight_fraction: float = Defaults.INIT_WEIGHT_FRACTION
    theta_plus: float = Defaults.THETA_PLUS
    tau_theta: float = Defaults.TAU_THETA

    def __post_init__(self):
        _require(self.n_input >= 1, f"n_input must be at least 1, got {self.n_input}")
        _require(self.n_exc >= 1, f"n_exc must be at least 1, got {self.n_exc}")
        _require(self.w_inh >= 0 and self.w_exc_to_inh >= 0, "inhibitory strengths must be non-negative")
        _require(0 <= self.init_weight_fraction <= 1, "init_weight_fraction must lie in [0, 1]")
        _require(self.theta_plus > 0, f"theta_plus must be positive, got {self.theta_plus}")
        _require(self.tau_theta > 0, f"tau_theta must be positive, got {self.tau_theta}")


@dataclass
class PresentationParams:
    dt: float = Defaults.DT_MS
    duration: float = Defaults.PRESENTATION_MS
    rest: float = Defaults.REST_MS
    min_spikes: int = Defaults.MIN_SPIKES
    rate_boost: float = Defaults.RATE_BOOST_HZ
    max_retries: int = Defaults.MAX_RETRIES
    intensity_scale: float = Defaults.INTENSITY_SCALE

    def __post_init__(self):
        _require(self.dt > 0, f"dt must be positive, got {self.dt}")
        _require(self.duration > 0, f"duration must be positive, got {self.duration}")
        _require(self.rest >= 0, f"rest must be non-negative, got {self.rest}")
        _require(self.min_spikes >= 0 and self.max_retries >= 0, "min_spikes and max_retries must be non-negative")
        _require(self.rate_boost >= 0 and self.intensity_scale >= 0, "rates must be non-negative")


@dataclass
class PlasticityConfig:
    rule: Rule = Rule.ASP_EXPONENTIAL
    tau_rec: float = Defaults.TAU_REC
    tau_acc: float = Defaults.TAU_ACC
    tau_post_trace: float = Defaults.TAU_POST_TRACE
    offset: float = Defaults.OFFSET
    k_const: float = Defaults.K_CONST
    k1_const: float = Defaults.K1_CONST
    k2_const: float = Defaults.K2_CONST
    alpha: float = Defaults.ALPHA_WEAK
    # names the preset alpha came from; an explicit alpha in the same config layer wins
    alpha_preset: str = Defaults.ALPHA_PRESET
    alpha_lin: float = Defaults.ALPHA_LIN
    w_max: float = Defaults.W_MAX
    theta_norm: float = Defaults.THETA_NORM
    tau_leak_iso: float = Defaults.TAU_LEAK_ISO
    alpha_iso: float = Defaults.ALPHA_ISO
    tau_trace_iso: float = Defaults.TAU_TRACE_ISO
    eta_stdp: float = Defaults.ETA_STDP
    mu_stdp: float = Defaults.MU_STDP

    ALPHA_PRESETS = {
        "strong_decay": Defaults.ALPHA_STRONG,
        "weak_decay": Defaults.ALPHA_WEAK,
    }

    def __post_init__(self):
        self.rule = Rule(self.rule)
        for name in ("tau_rec", "tau_acc", "tau_post_trace", "k2_const", "theta_norm",
                     "tau_leak_iso", "tau_trace_iso"):
            _require(getattr(self, name) > 0, f"plasticity.{name} must be positive, got {getattr(self, name)}")
        _require(0 <= self.offset < 1, f"plasticity.offset must lie in [0, 1), got {self.offset}")
        _require(self.w_max > 0, f"plasticity.w_max must be positive, got {self.w_max}")
        _require(self.alpha_preset in self.ALPHA_PRESETS,
                 f"unknown alpha preset '{self.alpha_preset}', known presets: {', '.join(self.ALPHA_PRESETS)}")

    @classmethod
    def preset(cls, name: str, **overrides) -> "PlasticityConfig":
        """Build a config whose alpha comes from a named preset ('strong_decay' or 'weak_decay')."""
        if name not in cls.ALPHA_PRESETS:
            raise ConfigurationError(f"Unknown alpha preset '{name}'. Known presets: {', '.join(cls.ALPHA_PRESETS)}")
        overrides.setdefault("alpha", cls.ALPHA_PRESETS[name])
        return cls(alpha_preset=name, **overrides)

    def trace_ratios_hold(self) -> bool:
        return (math.isclose(self.tau_acc, 10 * self.tau_rec)
                and math.isclose(self.tau_post_trace, 2 * self.tau_acc))


@dataclass
class ScheduleSpec:
    mode: ScheduleMode = ScheduleMode.INTERMIXED
    preset: SchedulePreset = SchedulePreset.NONE
    # ordered; custom mode presents class blocks in exactly this order
    classes: List[int] = field(default_factory=lambda: list(range(Defaults.N_CLASSES)))
    per_class_count: int = Defaults.PER_CLASS_COUNT
    # explicit per-class counts override per_class_count and presets
    counts: Dict[int, int] = field(default_factory=dict)
    decreasing_base: int = Defaults.DECREASING_BASE
    decreasing_step: int = Defaults.DECREASING_STEP

    def __post_init__(self):
        self.mode = ScheduleMode(self.mode)
        self.preset = SchedulePreset(self.preset)
        _require(len(self.classes) > 0, "schedule.classes must not be empty")
        _require(len(set(self.classes)) == len(self.classes), "schedule.classes must not repeat a class")
        _require(all(0 <= c < Defaults.N_CLASSES for c in self.classes), "schedule.classes must be digits 0-9")
        _require(self.per_class_count >= 0, "schedule.per_class_count must be non-negative")
        _require(all(v >= 0 for v in self.counts.values()), "schedule.counts must be non-negative")


@dataclass
class DataConfig:
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    # pixels background in >= background_fraction of these images form the background mask
    mask_images: str = ""
    label_count: int = Defaults.LABEL_COUNT
    test_count: int = Defaults.TEST_COUNT
    background_fraction: float = Defaults.BACKGROUND_FRACTION

    def __post_init__(self):
        _require(self.label_count >= 1, "data.label_count must be at least 1")
        _require(self.test_count >= 1, "data.test_count must be at least 1")
        _require(0 < self.background_fraction <= 1, "data.background_fraction must lie in (0, 1]")


@dataclass
class RunConfig:
    seed: int = 1
    snapshot_every: int = Defaults.SNAPSHOT_EVERY
    snapshot_at_block_end: bool = True
    log_wallclock: bool = False
    output_dir: str = "runs/out"
    network: NetworkParams = field(default_factory=NetworkParams)
    exc: LifParams = field(default_factory=LifParams)
    inh: LifParams = field(default_factory=LifParams.inhibitory)
    presentation: PresentationParams = field(default_factory=PresentationParams)
    plasticity: PlasticityConfig = field(default_factory=PlasticityConfig)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self):
        _require(self.snapshot_every >= 1, f"snapshot_every must be at least 1, got {self.snapshot_every}")
        _require(0 <= self.seed < 2 ** 64, "seed must be a 64-bit unsigned integer")


@dataclass
class StepResult:
    exc_spikes: np.ndarray
    inh_spikes: np.ndarray
    input_spikes: np.ndarray


@dataclass
class PresentationResult:
    spike_counts: np.ndarray
    # (step within the final attempt, excitatory neuron index)
    spike_log: List[tuple]
    retries: int = 0
    degenerate: bool = False
    # simulation steps across all attempts, stimulus and rest
    steps: int = 0

    @property
    def total_spikes(self) -> int:
        return int(self.spike_counts.sum())


@dataclass
class ImageSet:
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.images.ndim != 3 or self.images.shape[1:] != (Defaults.IMAGE_SIDE, Defaults.IMAGE_SIDE):
            raise ConfigurationError(f"images must have shape (n, 28, 28), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ConfigurationError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def subset(self, indices) -> "ImageSet":
        indices = np.asarray(indices, dtype=np.int64)
        return ImageSet(self.images[indices], self.labels[indices])


@dataclass
class Schedule:
    image_indices: np.ndarray
    classes: np.ndarray
    mode: ScheduleMode
    per_class_counts: Dict[int, int]
    # last position of each block; an intermixed phase is one block
    phase_ends: Optional[List[int]] = None

    def __post_init__(self):
        if self.phase_ends is None:
            self.phase_ends = self._class_change_ends() if self.mode != ScheduleMode.INTERMIXED else (
                [len(self.classes) - 1] if len(self.classes) else [])

    def __len__(self):
        return len(self.image_indices)

    @property
    def entries(self) -> List[tuple]:
        return list(zip(self.image_indices.tolist(), self.classes.tolist()))

    def _class_change_ends(self) -> List[int]:
        if len(self.classes) == 0:
            return []
        changes = np.flatnonzero(self.classes[1:] != self.classes[:-1])
        return changes.tolist() + [len(self.classes) - 1]

    def block_ends(self) -> List[int]:
        """Last position of every class block (the last position is always included)."""
        return list(self.phase_ends)


@dataclass
class NoiseSpec:
    kind: NoiseKind = NoiseKind.AWGN
    snr_db: float = Defaults.AWGN_SNR_DB
    contrast_factor: float = 1.0
    variance_floor: float = Defaults.NOISE_VARIANCE_FLOOR

    def __post_init__(self):
        self.kind = NoiseKind(self.kind)
        _require(math.isfinite(self.snr_db), f"snr_db must be finite, got {self.snr_db}")
        _require(0 < self.contrast_factor <= 1, f"contrast_factor must lie in (0, 1], got {self.contrast_factor}")

    @classmethod
    def combined(cls) -> "NoiseSpec":
        return cls(NoiseKind.AWGN_REDUCED_CONTRAST, Defaults.COMBINED_SNR_DB, Defaults.CONTRAST_FACTOR)


UNASSIGNED = -1


@dataclass
class LabelMap:
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        assigned = self.labels[self.labels != UNASSIGNED]
        if np.any((assigned < 0) | (assigned >= Defaults.N_CLASSES)):
            raise ConfigurationError("assigned labels must be class ids 0-9")

    @property
    def assigned(self) -> np.ndarray:
        return self.labels != UNASSIGNED

    def most_populous(self) -> int:
        counts = np.bincount(self.labels[self.assigned], minlength=Defaults.N_CLASSES)
        return int(np.argmax(counts))


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: Dict[int, float]
    confusion: np.ndarray
    presentations: int
    degenerate: int = 0
    # accuracy over the first k test instances, k = 1..presentations
    accuracy_curve: Optional[np.ndarray] = None


@dataclass
class OverlapResult:
    score: float
    excluded: int


@dataclass
class ForgettingDiagnostics:
    overlap: List[float]
    retention: Dict[int, List[float]]
    background_variance: Optional[float] = None


@dataclass
class Snapshot:
    weights: np.ndarray
    theta: np.ndarray
    presentation_index: int
    seed: int
