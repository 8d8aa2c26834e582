from .__version__ import __version__

from .classes import (RunConfig, NetworkParams, LifParams, PresentationParams, PlasticityConfig, ScheduleSpec,
                      DataConfig, Rule, ScheduleMode, SchedulePreset, NoiseKind, NoiseSpec, ImageSet, Schedule,
                      LabelMap, EvalReport, Snapshot)
from .defaults import Defaults
from .simulation import NetworkState, NeuronState, advance_timestep, run_presentation
from .plasticity import PlasticityHook, TraceState
from .encoding import RngStream, image_to_rates
from .dataio import load_idx, write_idx, build_schedule, schedule_from_spec, make_noisy_set
from .trainer import (init_network, train, label_neurons, classify, evaluate, overlap_metric, background_variance,
                      forgetting_diagnostics, load_run_data, run_experiment)
from .processors import run_seeds
from .modules.config_file import load_config, dump_config
from .modules.snapshots import read_snapshot, write_snapshot
from .modules.mnist_fetch import fetch_mnist

__all__ = [
    "RunConfig",
    "NetworkParams",
    "LifParams",
    "PresentationParams",
    "PlasticityConfig",
    "ScheduleSpec",
    "DataConfig",
    "Rule",
    "ScheduleMode",
    "SchedulePreset",
    "NoiseKind",
    "NoiseSpec",
    "ImageSet",
    "Schedule",
    "LabelMap",
    "EvalReport",
    "Snapshot",
    "Defaults",
    "NetworkState",
    "NeuronState",
    "advance_timestep",
    "run_presentation",
    "PlasticityHook",
    "TraceState",
    "RngStream",
    "image_to_rates",
    "load_idx",
    "write_idx",
    "build_schedule",
    "schedule_from_spec",
    "make_noisy_set",
    "init_network",
    "train",
    "label_neurons",
    "classify",
    "evaluate",
    "overlap_metric",
    "background_variance",
    "forgetting_diagnostics",
    "load_run_data",
    "run_experiment",
    "run_seeds",
    "load_config",
    "dump_config",
    "read_snapshot",
    "write_snapshot",
    "fetch_mnist",
]
