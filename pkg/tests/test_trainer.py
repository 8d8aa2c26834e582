import csv

import numpy as np
import pytest

from asp_snn.classes import (UNASSIGNED, ImageSet, LabelMap, NetworkParams, PlasticityConfig, Rule, RunConfig,
                             ScheduleMode, SchedulePreset, ScheduleSpec, Snapshot)
from asp_snn.dataio import schedule_from_spec
from asp_snn.exceptions import ConfigurationError, DimensionMismatchError, InsufficientDataError
from asp_snn.modules.snapshots import read_snapshot
from asp_snn.plasticity import TraceState, asp_decay_step, compute_tau_leak
from asp_snn.trainer import (LOG_COLUMNS, background_mask, background_variance, class_templates, classify,
                             evaluate, forgetting_diagnostics, init_network, label_neurons, labels_from_counts,
                             load_run_data, network_from_snapshot, overlap_baseline, overlap_metric,
                             predict_from_counts, report_from_predictions, report_text, run_experiment, train)

from conftest import fast_config, make_digit_set


def test_initial_weights_are_seeded_and_bounded():
    config = RunConfig(network=NetworkParams(n_exc=5))
    first = init_network(config)
    second = init_network(config)
    np.testing.assert_array_equal(first.weights, second.weights)
    assert first.weights.shape == (5, 784)
    assert first.weights.min() >= 0.0
    assert first.weights.max() <= 0.3
    assert not first.exc.theta.any()


def test_training_logs_every_presentation(small_config, tmp_path):
    data = load_run_data(small_config)
    out = tmp_path / "train"
    result = train(small_config, data.train, data.schedule, output_dir=out)

    assert len(result.log_rows) == len(data.schedule) == 9
    assert [row["class"] for row in result.log_rows] == data.schedule.classes.tolist()
    assert all(row["wallclock_ms"] == 0 for row in result.log_rows)
    assert result.network.weights.min() >= 0.0
    assert result.network.weights.max() <= small_config.plasticity.w_max

    with open(out / "run_log.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == LOG_COLUMNS
    assert len(rows) == 10

    # one intermixed phase: the periodic cadence plus the final presentation
    assert [s.presentation_index for s in result.snapshots] == [0, 4, 8, 9]
    final = read_snapshot(out / "snapshot_0000009.bin")
    np.testing.assert_array_equal(final.weights, result.network.weights)
    np.testing.assert_array_equal(final.theta, result.network.exc.theta)


def test_training_changes_weights(small_config):
    data = load_run_data(small_config)
    before = init_network(small_config).weights
    result = train(small_config, data.train, data.schedule)
    assert not np.array_equal(before, result.network.weights)
    assert result.network.exc.theta.sum() > 0


def test_sequential_training_snapshots_every_class_block(mnist_like_files):
    config = fast_config(**mnist_like_files)
    config.schedule = ScheduleSpec(mode=ScheduleMode.SEQUENTIAL, classes=[0, 1, 2], per_class_count=3)
    data = load_run_data(config)
    result = train(config, data.train, data.schedule)
    assert [s.presentation_index for s in result.snapshots] == [0, 3, 4, 6, 8, 9]


def test_rule_none_leaves_weights_untouched(small_config):
    small_config.plasticity = PlasticityConfig(rule=Rule.NONE)
    data = load_run_data(small_config)
    result = train(small_config, data.train, data.schedule)
    np.testing.assert_array_equal(result.network.weights, init_network(small_config).weights)
    assert result.network.exc.theta.sum() > 0


def test_digits_210_schedule_learns_every_class():
    config = fast_config()
    config.network = NetworkParams(n_exc=9)
    config.plasticity = PlasticityConfig(k1_const=1.0)
    config.schedule = ScheduleSpec(preset=SchedulePreset.DIGITS_210, per_class_count=4)
    images = make_digit_set(per_class=6, classes=[0, 1, 2])
    schedule = schedule_from_spec(images, config.schedule, config.seed)
    assert schedule.classes.tolist() == [2] * 4 + [1] * 4 + [0] * 4

    net = train(config, images, schedule).network
    labels = label_neurons(net, make_digit_set(per_class=4, classes=[0, 1, 2], seed=9), config)
    assert {0, 1, 2} <= set(labels.labels.tolist())


def test_training_is_reproducible(small_config, tmp_path):
    data = load_run_data(small_config)
    train(small_config, data.train, data.schedule, output_dir=tmp_path / "a")
    train(small_config, data.train, data.schedule, output_dir=tmp_path / "b")
    for name in ("run_log.csv", "snapshot_0000009.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_held_out_images_stay_out_of_the_schedule(small_config):
    data = load_run_data(small_config)
    assert len(data.label_set) == 6
    assert set(data.label_set.labels.tolist()) <= {0, 1, 2}
    assert set(data.test_set.labels.tolist()) <= {0, 1, 2}
    assert len(data.test_set) == 6
    candidates = np.flatnonzero(np.isin(data.train.labels, [0, 1, 2]))
    np.testing.assert_array_equal(data.label_set.images, data.train.images[candidates[-6:]])
    assert not set(data.schedule.image_indices.tolist()) & set(candidates[-6:].tolist())


def test_missing_dataset_names_the_path(tmp_path):
    config = fast_config(train_images=tmp_path / "nope", train_labels=tmp_path / "nope2",
                         test_images=tmp_path / "nope3", test_labels=tmp_path / "nope4")
    with pytest.raises(ConfigurationError) as excinfo:
        load_run_data(config)
    assert "nope" in str(excinfo.value)


def test_labels_follow_the_highest_mean_response():
    means = np.zeros((10, 4))
    means[3, 0] = 2.0
    means[5, 0] = 1.0
    means[1, 1] = 0.5
    means[2, 1] = 0.5
    labels = labels_from_counts(means)
    assert labels.labels.tolist() == [3, 1, UNASSIGNED, UNASSIGNED]


def test_prediction_averages_over_class_members():
    labels = LabelMap(np.array([0, 0, 1, UNASSIGNED]))
    assert predict_from_counts(np.array([1, 1, 3, 9]), labels) == (1, False)
    assert predict_from_counts(np.array([4, 0, 1, 0]), labels) == (0, False)


def test_silent_response_falls_back_to_most_populous_class():
    labels = LabelMap(np.array([2, 7, 7, UNASSIGNED]))
    assert predict_from_counts(np.zeros(4), labels) == (7, True)


def test_prediction_without_labels_is_degenerate():
    assert predict_from_counts(np.ones(3), LabelMap(np.full(3, UNASSIGNED))) == (0, True)


def test_report_from_predictions():
    report = report_from_predictions(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 1]), degenerate=1)
    assert report.accuracy == 0.75
    assert report.per_class_accuracy == {0: 0.5, 1: 1.0}
    assert report.confusion[0, 1] == 1
    assert report.confusion.sum() == 4
    np.testing.assert_allclose(report.accuracy_curve, [1.0, 0.5, 2 / 3, 0.75])
    text = report_text(report, per_class=True)
    assert text.startswith("accuracy=0.75\n")
    assert "class_1_accuracy=1.0" in text
    assert "degenerate=1" in text


def test_labeling_and_evaluation_leave_the_network_untouched(small_config):
    data = load_run_data(small_config)
    net = train(small_config, data.train, data.schedule).network
    weights, theta = net.weights.copy(), net.exc.theta.copy()
    labels = label_neurons(net, data.label_set, small_config, workers=2)
    report = evaluate(net, data.test_set, labels, small_config, workers=2)
    np.testing.assert_array_equal(net.weights, weights)
    np.testing.assert_array_equal(net.exc.theta, theta)
    assert report.presentations == 6
    assert 0.0 <= report.accuracy <= 1.0
    assert len(report.accuracy_curve) == 6


def test_evaluation_does_not_depend_on_worker_count(small_config):
    data = load_run_data(small_config)
    net = train(small_config, data.train, data.schedule).network
    labels = label_neurons(net, data.label_set, small_config)
    serial = evaluate(net, data.test_set, labels, small_config, workers=1)
    threaded = evaluate(net, data.test_set, labels, small_config, workers=3)
    np.testing.assert_array_equal(serial.confusion, threaded.confusion)


def test_classify_reports_class_and_degeneracy(small_config):
    data = load_run_data(small_config)
    net = train(small_config, data.train, data.schedule).network
    labels = label_neurons(net, data.label_set, small_config)
    cls, degenerate = classify(net, data.test_set.images[0], labels, small_config)
    assert 0 <= cls < 10
    assert isinstance(degenerate, bool)


def test_silent_network_classifies_as_degenerate(small_config):
    data = load_run_data(small_config)
    net = init_network(small_config)
    net.weights[:] = 0.0
    labels = LabelMap(np.array([1, 1, 0, UNASSIGNED]))
    assert classify(net, data.test_set.images[0], labels, small_config) == (1, True)
    report = evaluate(net, data.test_set, labels, small_config)
    assert report.degenerate == len(data.test_set)


def test_empty_labeling_set_is_rejected(small_config):
    net = init_network(small_config)
    empty = ImageSet(np.zeros((0, 28, 28), dtype=np.uint8), np.zeros(0, dtype=np.uint8))
    with pytest.raises(InsufficientDataError):
        label_neurons(net, empty, small_config)


def test_snapshot_size_must_match_config(small_config):
    snapshot = Snapshot(np.zeros((100, 784)), np.zeros(100), 0, 1)
    with pytest.raises(DimensionMismatchError):
        network_from_snapshot(snapshot, small_config)


def test_snapshot_restores_thresholds(small_config):
    snapshot = Snapshot(np.full((4, 784), 0.2), np.arange(4.0), 12, 3)
    net = network_from_snapshot(snapshot, small_config)
    np.testing.assert_array_equal(net.exc.theta, [0.0, 1.0, 2.0, 3.0])


def test_overlap_is_one_for_pure_templates():
    templates = class_templates(make_digit_set(per_class=3))
    result = overlap_metric(templates[[0, 4, 9]], templates)
    assert result.score == pytest.approx(1.0)
    assert result.excluded == 0


def test_overlap_drops_for_blended_fields():
    templates = class_templates(make_digit_set(per_class=3))
    blended = (templates[0] + templates[1] + templates[2]) / 3.0
    assert overlap_metric(blended[None, :], templates).score < 0.8


def test_flat_fields_are_excluded_from_overlap():
    templates = class_templates(make_digit_set(per_class=3))
    fields = np.vstack([templates[2], np.full(784, 0.3)])
    result = overlap_metric(fields, templates)
    assert result.excluded == 1
    assert result.score == pytest.approx(1.0)


def test_shuffled_baseline_sits_below_true_overlap():
    templates = class_templates(make_digit_set(per_class=3))
    baseline = overlap_baseline(templates, templates, np.random.default_rng(0), n_perm=5)
    assert baseline < 0.5


def test_background_mask_and_variance():
    images = make_digit_set(per_class=3)
    mask = background_mask(images)
    assert mask.shape == (784,)
    assert not mask.reshape(28, 28)[2:7, 1:6].any()
    assert mask.sum() > 500
    weights = np.zeros((2, 784))
    weights[1, mask] = np.linspace(0.0, 1.0, int(mask.sum()))
    assert background_variance(weights, mask) > 0.0
    assert background_variance(np.zeros((2, 784)), mask) == 0.0
    with pytest.raises(ConfigurationError):
        background_variance(weights, np.zeros(784, dtype=bool))


def test_forgetting_diagnostics_track_every_snapshot(small_config):
    data = load_run_data(small_config)
    result = train(small_config, data.train, data.schedule)
    templates = class_templates(data.train)
    mask = background_mask(data.train)
    diagnostics = forgetting_diagnostics(result.snapshots, templates, data.label_set, data.test_set, small_config,
                                         mask=mask)
    assert len(diagnostics.overlap) == len(result.snapshots)
    assert set(diagnostics.retention) == {0, 1, 2}
    assert all(len(v) == len(result.snapshots) for v in diagnostics.retention.values())
    assert diagnostics.background_variance is not None


def test_most_recent_class_is_retained_best(mnist_like_files):
    config = fast_config(**mnist_like_files)
    config.network = NetworkParams(n_exc=12)
    config.plasticity = PlasticityConfig(k1_const=1.0)
    config.schedule = ScheduleSpec(mode=ScheduleMode.SEQUENTIAL, classes=[0, 1, 2], per_class_count=3)
    config.snapshot_every = 1000
    data = load_run_data(config)
    result = train(config, data.train, data.schedule)
    block_snapshots = result.snapshots[1:]
    assert [s.presentation_index for s in block_snapshots] == [3, 6, 9]

    diagnostics = forgetting_diagnostics(block_snapshots, class_templates(data.train), data.label_set,
                                         data.test_set, config)
    for block, cls in enumerate([0, 1, 2]):
        best = max(accuracies[block] for accuracies in diagnostics.retention.values())
        assert diagnostics.retention[cls][block] == best


def test_high_threshold_neurons_forget_more_slowly(small_config):
    data = load_run_data(small_config)
    net = train(small_config, data.train, data.schedule).network
    cfg = PlasticityConfig.preset("strong_decay")
    thetas = net.exc.theta + np.arange(net.n_exc)
    weights = net.weights.copy()
    traces = TraceState.zeros(net.n_input, net.n_exc)
    steps, dt = 1000, 0.5
    for _ in range(steps):
        asp_decay_step(weights, traces, thetas, dt, cfg)

    kept = weights.sum(axis=1) / net.weights.sum(axis=1)
    expected = np.exp(-cfg.alpha * steps * dt / compute_tau_leak(traces.post, thetas, cfg))
    np.testing.assert_allclose(kept, expected, rtol=1e-9)
    higher = thetas[:, None] > thetas[None, :]
    assert higher.any()
    assert np.all(kept[:, None] > kept[None, :], where=higher)


def test_run_experiment_end_to_end(small_config):
    data = load_run_data(small_config)
    result, labels, report = run_experiment(small_config, data)
    assert len(labels.labels) == 4
    assert report.presentations == len(data.test_set)
    assert result.degenerate >= 0
