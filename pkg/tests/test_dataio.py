import logging
import struct

import numpy as np
import pytest

from asp_snn.classes import ImageSet, NoiseKind, NoiseSpec, ScheduleMode, SchedulePreset, ScheduleSpec
from asp_snn.dataio import (add_awgn, apply_noise, build_schedule, class_subset, concat_schedules, decreasing_counts,
                            load_idx, make_noisy_set, read_idx_images, read_idx_labels, reduce_contrast,
                            schedule_from_spec, write_idx, write_noise_sidecar)
from asp_snn.exceptions import ConfigurationError, IdxFormatError, InsufficientDataError

from conftest import make_digit_set


def test_idx_files_load_back(tmp_path, digit_set):
    write_idx(digit_set, tmp_path / "img", tmp_path / "lbl")
    loaded = load_idx(tmp_path / "img", tmp_path / "lbl")
    np.testing.assert_array_equal(loaded.images, digit_set.images)
    np.testing.assert_array_equal(loaded.labels, digit_set.labels)
    header = (tmp_path / "img").read_bytes()[:16]
    assert struct.unpack(">4I", header) == (2051, len(digit_set), 28, 28)


def test_bad_magic_reports_offset_zero(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(struct.pack(">4I", 2049, 1, 28, 28) + bytes(784))
    with pytest.raises(IdxFormatError) as excinfo:
        read_idx_images(path)
    assert excinfo.value.offset == 0
    assert "bad magic" in str(excinfo.value)


def test_truncated_payload_is_rejected(tmp_path):
    path = tmp_path / "short"
    path.write_bytes(struct.pack(">4I", 2051, 2, 28, 28) + bytes(784))
    with pytest.raises(IdxFormatError) as excinfo:
        read_idx_images(path)
    assert excinfo.value.offset == 16 + 784
    assert "truncated" in str(excinfo.value)


def test_trailing_bytes_are_not_called_truncation(tmp_path):
    path = tmp_path / "long"
    path.write_bytes(struct.pack(">2I", 2049, 3) + bytes(5))
    with pytest.raises(IdxFormatError) as excinfo:
        read_idx_labels(path)
    assert excinfo.value.offset == 8 + 3
    assert "2 unexpected trailing bytes" in str(excinfo.value)
    assert "truncated" not in str(excinfo.value)


def test_image_and_label_counts_must_agree(tmp_path, digit_set):
    write_idx(digit_set, tmp_path / "img", tmp_path / "lbl")
    write_idx(digit_set.subset(range(3)), tmp_path / "img3", tmp_path / "lbl3")
    with pytest.raises(IdxFormatError):
        load_idx(tmp_path / "img", tmp_path / "lbl3")


def test_contrast_reduction_rounds_down_about_mid_gray():
    image = np.array([[0, 128, 255, 100]], dtype=np.uint8)
    assert reduce_contrast(image, 0.5).tolist() == [[64, 128, 191, 114]]


def test_contrast_factor_must_be_in_range():
    with pytest.raises(ConfigurationError):
        reduce_contrast(np.zeros((2, 2), dtype=np.uint8), 0.0)


def test_awgn_is_deterministic_and_stays_uint8(digit_set):
    image = digit_set.images[0]
    a = add_awgn(image, 9.5, np.random.default_rng(3))
    b = add_awgn(image, 9.5, np.random.default_rng(3))
    assert a.dtype == np.uint8
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, image)


def test_awgn_noise_power_follows_snr():
    image = np.full((28, 28), 128, dtype=np.uint8)
    noisy = add_awgn(image, 10.0, np.random.default_rng(0)).astype(float) / 255.0
    signal_power = (128 / 255) ** 2
    # mid-gray leaves about three standard deviations before clipping
    assert np.var(noisy) == pytest.approx(signal_power / 10.0, rel=0.15)


def test_all_zero_image_uses_variance_floor(caplog):
    with caplog.at_level(logging.WARNING):
        noisy = add_awgn(np.zeros((28, 28), dtype=np.uint8), 9.5, np.random.default_rng(0))
    assert "variance floor" in caplog.text
    assert noisy.max() > 0


def test_combined_noise_applies_contrast_first(digit_set):
    image = digit_set.images[0]
    spec = NoiseSpec(NoiseKind.AWGN_REDUCED_CONTRAST, snr_db=300.0, contrast_factor=0.5)
    np.testing.assert_array_equal(apply_noise(image, spec, np.random.default_rng(0)), reduce_contrast(image, 0.5))


def test_noisy_sets_are_reproducible(tmp_path, digit_set):
    spec = NoiseSpec.combined()
    first = make_noisy_set(digit_set, spec, seed=7)
    second = make_noisy_set(digit_set, spec, seed=7)
    other = make_noisy_set(digit_set, spec, seed=8)
    np.testing.assert_array_equal(first.images, second.images)
    assert not np.array_equal(first.images, other.images)
    np.testing.assert_array_equal(first.labels, digit_set.labels)

    write_noise_sidecar(tmp_path / "noise.cfg", spec, 7)
    sidecar = (tmp_path / "noise.cfg").read_text()
    assert "kind=awgn_reduced_contrast" in sidecar
    assert "snr_db=12.0" in sidecar
    assert "seed=7" in sidecar


def test_decreasing_preset_counts():
    assert decreasing_counts(range(5)) == {0: 900, 1: 850, 2: 800, 3: 750, 4: 700}
    with pytest.raises(ConfigurationError):
        decreasing_counts(range(3), base=50, step=-50)


def test_sequential_schedule_presents_class_blocks_in_order(digit_set):
    schedule = build_schedule(digit_set, ScheduleMode.SEQUENTIAL, {2: 3, 0: 2, 1: 1})
    assert schedule.classes.tolist() == [0, 0, 1, 2, 2, 2]
    assert all(digit_set.labels[i] == c for i, c in schedule.entries)
    assert schedule.block_ends() == [1, 2, 5]


def test_custom_schedule_keeps_given_order(digit_set):
    schedule = build_schedule(digit_set, ScheduleMode.CUSTOM, {2: 2, 1: 2, 0: 2})
    assert schedule.classes.tolist() == [2, 2, 1, 1, 0, 0]


def test_schedule_picks_first_images_of_each_class(digit_set):
    schedule = build_schedule(digit_set, ScheduleMode.SEQUENTIAL, {3: 2})
    assert schedule.image_indices.tolist() == np.flatnonzero(digit_set.labels == 3)[:2].tolist()


def test_intermixed_schedule_is_a_seeded_shuffle(digit_set):
    counts = {0: 4, 1: 4, 2: 4}
    a = build_schedule(digit_set, ScheduleMode.INTERMIXED, counts, seed=1)
    b = build_schedule(digit_set, ScheduleMode.INTERMIXED, counts, seed=1)
    c = build_schedule(digit_set, ScheduleMode.INTERMIXED, counts, seed=2)
    sequential = build_schedule(digit_set, ScheduleMode.SEQUENTIAL, counts)
    np.testing.assert_array_equal(a.image_indices, b.image_indices)
    assert not np.array_equal(a.image_indices, c.image_indices)
    assert sorted(a.image_indices.tolist()) == sorted(sequential.image_indices.tolist())
    assert a.block_ends() == [11]


def test_schedule_shortfall_names_class(digit_set):
    with pytest.raises(InsufficientDataError) as excinfo:
        build_schedule(digit_set, ScheduleMode.SEQUENTIAL, {4: 50})
    assert "class 4" in str(excinfo.value)
    assert "short by 38" in str(excinfo.value)


def test_excluded_images_are_never_scheduled(digit_set):
    held_out = np.flatnonzero(digit_set.labels == 1)[:5]
    spec = ScheduleSpec(mode=ScheduleMode.SEQUENTIAL, classes=[1], per_class_count=7)
    schedule = schedule_from_spec(digit_set, spec, seed=0, exclude=held_out)
    assert not set(schedule.image_indices.tolist()) & set(held_out.tolist())
    assert all(digit_set.labels[i] == 1 for i in schedule.image_indices)
    assert len(schedule) == 7


def test_named_presets():
    images = make_digit_set(per_class=20)
    digits_210 = schedule_from_spec(images, ScheduleSpec(preset=SchedulePreset.DIGITS_210, per_class_count=2), 0)
    assert digits_210.classes.tolist() == [2, 2, 1, 1, 0, 0]

    spec = ScheduleSpec(preset=SchedulePreset.DECREASING, classes=[0, 1], decreasing_base=10, decreasing_step=-5)
    decreasing = schedule_from_spec(images, spec, 0)
    assert decreasing.per_class_counts == {0: 10, 1: 5}

    spec = ScheduleSpec(preset=SchedulePreset.REINFORCED_THEN_NEW, classes=[0, 1, 2], per_class_count=3)
    phased = schedule_from_spec(images, spec, 0)
    assert sorted(phased.classes[:6].tolist()) == [0, 0, 0, 1, 1, 1]
    assert phased.classes[6:].tolist() == [2, 2, 2]
    assert phased.block_ends() == [5, 8]


def test_concat_schedules_adds_counts(digit_set):
    first = build_schedule(digit_set, ScheduleMode.SEQUENTIAL, {0: 2})
    second = build_schedule(digit_set, ScheduleMode.SEQUENTIAL, {0: 1, 5: 2})
    joined = concat_schedules(first, second)
    assert len(joined) == 5
    assert joined.per_class_counts == {0: 3, 5: 2}
    assert joined.block_ends() == [1, 2, 4]


def test_class_subset(digit_set):
    subset = class_subset(digit_set, [3, 7])
    assert set(subset.labels.tolist()) == {3, 7}
    assert len(subset) == 24


def test_image_set_rejects_wrong_shape():
    with pytest.raises(ConfigurationError):
        ImageSet(np.zeros((2, 27, 28)), np.zeros(2))
