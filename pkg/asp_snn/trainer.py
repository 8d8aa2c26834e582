"""Training runs, neuron labeling, inference, evaluation and forgetting diagnostics."""
import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .classes import (UNASSIGNED, EvalReport, ForgettingDiagnostics, ImageSet, LabelMap, OverlapResult,
                      PresentationResult, RunConfig, Schedule, SimClock, Snapshot)
from .dataio import class_subset, load_idx, schedule_from_spec, spec_classes
from .defaults import Defaults
from .encoding import RngStream, image_to_rates
from .exceptions import ConfigurationError, DimensionMismatchError, InsufficientDataError, NumericalFaultError
from .modules.snapshots import write_snapshot
from .modules.utils import format_grid
from .plasticity import PlasticityHook, TraceState
from .processors import map_ordered
from .simulation import NetworkState, NeuronState, run_presentation

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["presentation_index", "class", "exc_spike_total", "retries", "mean_theta", "mean_weight",
               "wallclock_ms"]

# substream tags for the run seed
INIT_STREAM = 1
TRAIN_STREAM = 2
LABEL_STREAM = 3
TEST_STREAM = 4


@dataclass
class TrainResult:
    network: NetworkState
    traces: TraceState
    log_rows: List[dict] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)
    degenerate: int = 0


@dataclass
class RunData:
    train: ImageSet
    schedule: Schedule
    label_set: ImageSet
    test_set: ImageSet
    mask_set: Optional[ImageSet] = None


def init_network(config: RunConfig) -> NetworkState:
    """Fresh network with weights uniform in [0, init_weight_fraction * w_max]."""
    rng = RngStream(config.seed, (INIT_STREAM,)).generator()
    net = config.network
    high = net.init_weight_fraction * config.plasticity.w_max
    weights = rng.uniform(0.0, high, size=(net.n_exc, net.n_input))
    return NetworkState.build(weights, net, config.exc, config.inh, w_max=config.plasticity.w_max)


def network_from_snapshot(snapshot: Snapshot, config: RunConfig) -> NetworkState:
    expected = (config.network.n_exc, config.network.n_input)
    if snapshot.weights.shape != expected:
        raise DimensionMismatchError(
            f"snapshot holds {snapshot.weights.shape[0]}x{snapshot.weights.shape[1]} weights "
            f"but the config expects {expected[0]}x{expected[1]}")
    net = NetworkState.build(snapshot.weights, config.network, config.exc, config.inh,
                             w_max=config.plasticity.w_max)
    net.exc.theta[:] = snapshot.theta
    return net


def take_snapshot(net: NetworkState, presentation_index: int, seed: int) -> Snapshot:
    return Snapshot(net.weights.copy(), net.exc.theta.copy(), presentation_index, seed)


class RunLogWriter:
    """CSV run log, one row per presentation."""

    def __init__(self, path: Optional[Path]):
        self.path = path
        self._file = None
        self._writer = None

    def __enter__(self):
        if self.path is not None:
            self._file = open(self.path, "w", newline="", encoding="utf-8")
            self._writer = csv.writer(self._file)
            self._writer.writerow(LOG_COLUMNS)
        return self

    def write(self, row: dict):
        if self._writer is not None:
            self._writer.writerow([row[c] for c in LOG_COLUMNS])

    def __exit__(self, *exc):
        if self._file is not None:
            self._file.close()
        return False


def train(config: RunConfig, data: ImageSet, schedule: Optional[Schedule] = None,
          network: Optional[NetworkState] = None, output_dir: Optional[Path] = None) -> TrainResult:
    """
    Present every scheduled image once, learning with the configured rule.

    Args:
        config: Run configuration
        data: Images the schedule indexes into
        schedule: Presentation order; built from `config.schedule` when omitted
        network: Network to continue training; a fresh one from `config.seed` when omitted
        output_dir: When given, receives the run log and snapshot files as they are produced

    Returns:
        TrainResult: trained network, traces, log rows and in-memory snapshots

    Raises:
        NumericalFaultError: If the simulation diverges; snapshots written so far are kept
    """
    schedule = schedule if schedule is not None else schedule_from_spec(data, config.schedule, config.seed)
    net = network if network is not None else init_network(config)
    hook = PlasticityHook.for_network(config.plasticity, net)
    clock = SimClock(dt=config.presentation.dt)
    result = TrainResult(network=net, traces=hook.traces)
    block_ends = set(schedule.block_ends()) if config.snapshot_at_block_end else set()

    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)

    def record_snapshot(index: int):
        snapshot = take_snapshot(net, index, config.seed)
        result.snapshots.append(snapshot)
        if output_dir is not None:
            write_snapshot(output_dir / f"snapshot_{index:07d}.bin", snapshot)

    record_snapshot(0)
    logger.info(f"Training {net.n_exc} neurons on {len(schedule)} presentations with {config.plasticity.rule.value}")
    with RunLogWriter(output_dir / "run_log.csv" if output_dir is not None else None) as run_log:
        for position, (image_index, cls) in enumerate(schedule.entries):
            started = time.perf_counter()
            rng = RngStream(config.seed, (TRAIN_STREAM, position)).generator()
            rates = image_to_rates(data.images[image_index], config.presentation.intensity_scale)
            try:
                presentation = run_presentation(net, rates, config.presentation, rng, clock, hook=hook)
            except NumericalFaultError as e:
                logger.error(f"Numerical fault at presentation {position}: {e}. "
                             f"Last snapshot is presentation {result.snapshots[-1].presentation_index}")
                raise

            result.degenerate += presentation.degenerate
            row = {
                "presentation_index": position,
                "class": cls,
                "exc_spike_total": presentation.total_spikes,
                "retries": presentation.retries,
                "mean_theta": repr(float(net.exc.theta.mean())),
                "mean_weight": repr(float(net.weights.mean())),
                "wallclock_ms": round((time.perf_counter() - started) * 1000.0, 3) if config.log_wallclock else 0,
            }
            result.log_rows.append(row)
            run_log.write(row)

            done = position + 1
            if done % config.snapshot_every == 0 or position in block_ends:
                record_snapshot(done)

    if result.snapshots[-1].presentation_index != len(schedule):
        record_snapshot(len(schedule))
    if result.degenerate:
        logger.warning(f"{result.degenerate} presentations stayed degenerate after retries")
    return result


def inference_state(net: NetworkState) -> NetworkState:
    """A resting copy of the network's neurons that shares (and never writes) its weights."""
    exc = NeuronState.resting(net.n_exc, net.exc_params)
    exc.theta[:] = net.exc.theta
    return NetworkState(
        weights=net.weights,
        exc=exc,
        inh=NeuronState.resting(net.n_exc, net.inh_params),
        exc_params=net.exc_params,
        inh_params=net.inh_params,
        w_inh=net.w_inh,
        w_exc_to_inh=net.w_exc_to_inh,
        theta_plus=net.theta_plus,
        tau_theta=net.tau_theta,
        w_max=net.w_max,
    )


def present_frozen(net: NetworkState, image: np.ndarray, config: RunConfig, stream: RngStream) -> PresentationResult:
    """Present an image with plasticity and homeostasis off; `net` is left untouched."""
    state = inference_state(net)
    rates = image_to_rates(image, config.presentation.intensity_scale)
    return run_presentation(state, rates, config.presentation, stream.generator(),
                            SimClock(dt=config.presentation.dt), hook=None, homeostasis=False)


def _responses(net: NetworkState, images: np.ndarray, config: RunConfig, tag: int,
               workers: Optional[int]) -> List[PresentationResult]:
    def respond(i: int) -> PresentationResult:
        return present_frozen(net, images[i], config, RngStream(config.seed, (tag, i)))

    return map_ordered(respond, range(len(images)), workers)


def labels_from_counts(mean_counts: np.ndarray) -> LabelMap:
    """mean_counts has shape (n_classes, n_exc). Ties go to the lower class; silent neurons stay unassigned."""
    labels = np.argmax(mean_counts, axis=0)
    labels[mean_counts.max(axis=0) <= 0] = UNASSIGNED
    return LabelMap(labels)


def label_neurons(net: NetworkState, labeled: ImageSet, config: RunConfig,
                  workers: Optional[int] = None) -> LabelMap:
    """Assign each neuron the class with its highest mean spike count over `labeled`."""
    if len(labeled) == 0:
        raise InsufficientDataError("labeling set is empty")
    responses = _responses(net, labeled.images, config, LABEL_STREAM, workers)
    sums = np.zeros((Defaults.N_CLASSES, net.n_exc))
    seen = np.zeros(Defaults.N_CLASSES)
    for cls, response in zip(labeled.labels, responses):
        sums[cls] += response.spike_counts
        seen[cls] += 1
    means = np.divide(sums, seen[:, None], out=np.zeros_like(sums), where=seen[:, None] > 0)
    label_map = labels_from_counts(means)
    logger.info(f"Labeled {int(label_map.assigned.sum())} of {net.n_exc} neurons")
    return label_map


def predict_from_counts(counts: np.ndarray, labels: LabelMap) -> Tuple[int, bool]:
    """Class with the highest mean spike count among its neurons, and whether the response was silent."""
    if counts.sum() == 0 or not labels.assigned.any():
        return labels.most_populous(), True
    means = np.full(Defaults.N_CLASSES, -np.inf)
    for cls in range(Defaults.N_CLASSES):
        members = labels.labels == cls
        if members.any():
            means[cls] = counts[members].mean()
    return int(np.argmax(means)), False


def classify(net: NetworkState, image: np.ndarray, labels: LabelMap, config: RunConfig,
             stream: Optional[RngStream] = None) -> Tuple[int, bool]:
    """Predicted class for one image, and whether the prediction is degenerate.

    A response that stayed degenerate after its retries, or that no labeled neuron answered,
    falls back to the most populous label.
    """
    stream = stream or RngStream(config.seed, (TEST_STREAM, 0))
    response = present_frozen(net, image, config, stream)
    cls, silent = predict_from_counts(response.spike_counts, labels)
    return cls, response.degenerate or silent


def report_from_predictions(truth: np.ndarray, predicted: np.ndarray, degenerate: int = 0) -> EvalReport:
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    confusion = np.zeros((Defaults.N_CLASSES, Defaults.N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    correct = truth == predicted
    per_class = {int(c): float(confusion[c, c] / confusion[c].sum())
                 for c in range(Defaults.N_CLASSES) if confusion[c].sum() > 0}
    curve = np.cumsum(correct) / np.arange(1, len(correct) + 1) if len(correct) else np.zeros(0)
    return EvalReport(
        accuracy=float(np.trace(confusion) / max(len(truth), 1)),
        per_class_accuracy=per_class,
        confusion=confusion,
        presentations=len(truth),
        degenerate=degenerate,
        accuracy_curve=curve,
    )


def evaluate(net: NetworkState, test: ImageSet, labels: LabelMap, config: RunConfig,
             workers: Optional[int] = None) -> EvalReport:
    if not labels.assigned.any():
        logger.warning("No neuron carries a label; every prediction falls back to class 0")

    def classify_one(i: int) -> Tuple[int, bool]:
        return classify(net, test.images[i], labels, config, RngStream(config.seed, (TEST_STREAM, i)))

    outcomes = map_ordered(classify_one, range(len(test)), workers)
    predicted = [cls for cls, _ in outcomes]
    degenerate = sum(flag for _, flag in outcomes)
    report = report_from_predictions(test.labels, predicted, degenerate)
    logger.info(f"Accuracy {report.accuracy:.4f} on {report.presentations} images ({degenerate} degenerate)")
    return report


def report_text(report: EvalReport, per_class: bool = False) -> str:
    lines = [
        f"accuracy={report.accuracy!r}",
        f"presentations={report.presentations}",
        f"degenerate={report.degenerate}",
    ]
    if per_class:
        lines += [f"class_{c}_accuracy={acc!r}" for c, acc in sorted(report.per_class_accuracy.items())]
    lines.append("confusion=")
    lines.append(format_grid(report.confusion))
    return "\n".join(lines) + "\n"


def class_templates(image_set: ImageSet) -> np.ndarray:
    """Mean image of every class as a (10, 784) matrix; absent classes give zero rows."""
    flat = image_set.images.reshape(len(image_set), -1).astype(np.float64)
    templates = np.zeros((Defaults.N_CLASSES, flat.shape[1]))
    for cls in range(Defaults.N_CLASSES):
        members = image_set.labels == cls
        if members.any():
            templates[cls] = flat[members].mean(axis=0)
    return templates


def _centered_unit_rows(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    centered = matrix - matrix.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    valid = norms > 1e-12
    return centered[valid] / norms[valid, None], valid


def overlap_metric(weights: np.ndarray, templates: np.ndarray) -> OverlapResult:
    """Mean over neurons of the best correlation between a receptive field and any class template.

    1 means every field is a pure single-class pattern; blended fields score lower.
    Rows with no variance are excluded and counted.
    """
    if weights.shape[1] != templates.shape[1]:
        raise ConfigurationError(f"weights have {weights.shape[1]} inputs but templates have {templates.shape[1]}")
    fields_unit, valid = _centered_unit_rows(np.asarray(weights, dtype=np.float64))
    templates_unit, _ = _centered_unit_rows(np.asarray(templates, dtype=np.float64))
    excluded = int((~valid).sum())
    if fields_unit.shape[0] == 0 or templates_unit.shape[0] == 0:
        return OverlapResult(0.0, excluded)
    best = np.clip((fields_unit @ templates_unit.T).max(axis=1), 0.0, 1.0)
    return OverlapResult(float(best.mean()), excluded)


def overlap_baseline(weights: np.ndarray, templates: np.ndarray, rng: np.random.Generator,
                     n_perm: int = 20) -> float:
    """Overlap score against templates whose pixels were shuffled, averaged over `n_perm` shuffles."""
    scores = []
    for _ in range(n_perm):
        shuffled = templates[:, rng.permutation(templates.shape[1])]
        scores.append(overlap_metric(weights, shuffled).score)
    return float(np.mean(scores))


def background_mask(image_set: ImageSet, fraction: float = Defaults.BACKGROUND_FRACTION,
                    level: int = 0) -> np.ndarray:
    flat = image_set.images.reshape(len(image_set), -1)
    return (flat <= level).mean(axis=0) >= fraction


def background_variance(weights: np.ndarray, mask: np.ndarray) -> float:
    """Variance of each neuron's weights over background pixels, averaged over neurons."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ConfigurationError("background mask is empty")
    return float(np.var(weights[:, mask], axis=1).mean())


def forgetting_diagnostics(snapshots: List[Snapshot], templates: np.ndarray, label_set: ImageSet,
                           test_set: ImageSet, config: RunConfig, mask: Optional[np.ndarray] = None,
                           workers: Optional[int] = None) -> ForgettingDiagnostics:
    """Overlap and per-class retention after each snapshot, plus background variance of the last one."""
    overlap = []
    retention: Dict[int, List[float]] = {int(c): [] for c in np.unique(test_set.labels)}
    for snapshot in snapshots:
        net = network_from_snapshot(snapshot, config)
        overlap.append(overlap_metric(net.weights, templates).score)
        labels = label_neurons(net, label_set, config, workers)
        per_class = evaluate(net, test_set, labels, config, workers).per_class_accuracy
        for cls in retention:
            retention[cls].append(per_class.get(cls, 0.0))
    variance = background_variance(snapshots[-1].weights, mask) if mask is not None and snapshots else None
    return ForgettingDiagnostics(overlap, retention, variance)


def load_run_data(config: RunConfig) -> RunData:
    """Load the configured IDX files and split them for one run.

    The last `label_count` training images of the scheduled classes are held out for labeling,
    the schedule draws from the rest, and the test split is the first `test_count` test images
    of those classes.
    """
    data = config.data
    for path in (data.train_images, data.train_labels, data.test_images, data.test_labels):
        if not path or not Path(path).exists():
            raise ConfigurationError(f"dataset file not found: '{path}'")
    train_set = load_idx(data.train_images, data.train_labels)
    test_full = load_idx(data.test_images, data.test_labels)

    classes = spec_classes(config.schedule)
    candidates = np.flatnonzero(np.isin(train_set.labels, classes))
    if len(candidates) < data.label_count:
        raise InsufficientDataError(f"{data.label_count} labeling images requested, only {len(candidates)} available")
    held_out = candidates[-data.label_count:]
    schedule = schedule_from_spec(train_set, config.schedule, config.seed, exclude=held_out)

    test_set = class_subset(test_full, classes)
    test_set = test_set.subset(np.arange(min(data.test_count, len(test_set))))

    mask_set = None
    if data.mask_images:
        mask_set = ImageSet(load_idx(data.mask_images, data.train_labels).images, train_set.labels)
    return RunData(train_set, schedule, train_set.subset(held_out), test_set, mask_set)


def run_experiment(config: RunConfig, run_data: RunData, output_dir: Optional[Path] = None,
                   workers: Optional[int] = None) -> Tuple[TrainResult, LabelMap, EvalReport]:
    """Train, label on the held-out images, and evaluate on the test split."""
    result = train(config, run_data.train, run_data.schedule, output_dir=output_dir)
    labels = label_neurons(result.network, run_data.label_set, config, workers)
    report = evaluate(result.network, run_data.test_set, labels, config, workers)
    return result, labels, report
