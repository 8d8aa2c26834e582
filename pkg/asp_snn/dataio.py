"""MNIST IDX ingestion, noisy-MNIST synthesis and presentation schedules."""
import logging
import struct
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np

from .classes import (ImageSet, NoiseKind, NoiseSpec, Schedule, ScheduleMode, SchedulePreset,
                      ScheduleSpec)
from .defaults import Defaults
from .encoding import RngStream
from .exceptions import ConfigurationError, IdxFormatError, InsufficientDataError

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

# substream tags, so noise and shuffles never share random numbers
NOISE_STREAM = 0x4E
SHUFFLE_STREAM = 0x53

PathLike = Union[str, Path]


def _read_header(data: bytes, path: PathLike, magic: int, n_dims: int):
    # Data format (big endian):
    # i32 | Magic
    # i32 | Item count
    # i32 | Row count      (images only)
    # i32 | Column count   (images only)
    # u8[] | Payload
    header_len = 4 * (1 + n_dims)
    if len(data) < header_len:
        raise IdxFormatError(f"{path}: truncated header, expected {header_len} bytes but file has {len(data)}",
                             offset=len(data))
    found, *dims = struct.unpack(f">{1 + n_dims}I", data[:header_len])
    if found != magic:
        raise IdxFormatError(f"{path}: bad magic {found}, expected {magic}", offset=0)
    expected = header_len + int(np.prod(dims))
    if len(data) < expected:
        raise IdxFormatError(f"{path}: truncated file, expected {expected} bytes but found {len(data)}",
                             offset=len(data))
    if len(data) > expected:
        raise IdxFormatError(f"{path}: {len(data) - expected} unexpected trailing bytes after the "
                             f"{expected}-byte file", offset=expected)
    return dims, header_len


def read_idx_images(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    (count, rows, cols), start = _read_header(data, path, IDX_IMAGE_MAGIC, 3)
    return np.frombuffer(data, dtype=np.uint8, offset=start).reshape(count, rows, cols).copy()


def read_idx_labels(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    (count,), start = _read_header(data, path, IDX_LABEL_MAGIC, 1)
    return np.frombuffer(data, dtype=np.uint8, offset=start).copy()


def load_idx(images_path: PathLike, labels_path: PathLike) -> ImageSet:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise IdxFormatError(f"{images_path} holds {len(images)} images but {labels_path} holds {len(labels)} labels",
                             offset=4)
    if images.shape[1:] != (Defaults.IMAGE_SIDE, Defaults.IMAGE_SIDE):
        raise IdxFormatError(f"{images_path}: images are {images.shape[1]}x{images.shape[2]}, expected 28x28",
                             offset=8)
    logger.info(f"Loaded {len(labels)} images from {images_path}")
    return ImageSet(images, labels)


def write_idx(image_set: ImageSet, images_path: PathLike, labels_path: PathLike):
    images = image_set.images
    Path(images_path).write_bytes(struct.pack(">4I", IDX_IMAGE_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABEL_MAGIC, len(image_set)) + image_set.labels.tobytes())


def class_subset(image_set: ImageSet, classes: Iterable[int]) -> ImageSet:
    return image_set.subset(np.flatnonzero(np.isin(image_set.labels, list(classes))))


def add_awgn(image: np.ndarray, snr_db: float, rng: np.random.Generator,
             variance_floor: float = Defaults.NOISE_VARIANCE_FLOOR) -> np.ndarray:
    """Add white Gaussian noise at `snr_db`, with signal power measured on this image in [0, 1] units."""
    if not np.isfinite(snr_db):
        raise ConfigurationError(f"snr_db must be finite, got {snr_db}")
    x = np.asarray(image, dtype=np.float64) / 255.0
    signal_power = float(np.mean(x ** 2))
    if signal_power == 0.0:
        logger.warning(f"All-zero image: using noise variance floor {variance_floor}")
        noise_var = variance_floor
    else:
        noise_var = signal_power / 10.0 ** (snr_db / 10.0)
    noisy = x + rng.normal(0.0, np.sqrt(noise_var), size=x.shape)
    return np.clip(np.rint(noisy * 255.0), 0, 255).astype(np.uint8)


def reduce_contrast(image: np.ndarray, contrast_factor: float) -> np.ndarray:
    """Scale intensities about mid-gray (128), rounding down."""
    if not 0 < contrast_factor <= 1:
        raise ConfigurationError(f"contrast_factor must lie in (0, 1], got {contrast_factor}")
    out = 128.0 + contrast_factor * (np.asarray(image, dtype=np.float64) - 128.0)
    return np.clip(np.floor(out), 0, 255).astype(np.uint8)


def apply_noise(image: np.ndarray, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == NoiseKind.AWGN_REDUCED_CONTRAST:
        image = reduce_contrast(image, spec.contrast_factor)
    return add_awgn(image, spec.snr_db, rng, spec.variance_floor)


def make_noisy_set(image_set: ImageSet, spec: NoiseSpec, seed: int) -> ImageSet:
    stream = RngStream(seed, (NOISE_STREAM,))
    noisy = np.empty_like(image_set.images)
    for i, image in enumerate(image_set.images):
        noisy[i] = apply_noise(image, spec, stream.child(i).generator())
    return ImageSet(noisy, image_set.labels.copy())


def write_noise_sidecar(path: PathLike, spec: NoiseSpec, seed: int):
    lines = [
        f"kind={spec.kind.value}",
        f"snr_db={spec.snr_db!r}",
        f"contrast_factor={spec.contrast_factor!r}",
        f"variance_floor={spec.variance_floor!r}",
        f"seed={seed}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def decreasing_counts(classes: Iterable[int], base: int = Defaults.DECREASING_BASE,
                      step: int = Defaults.DECREASING_STEP) -> Dict[int, int]:
    counts = {c: base + step * rank for rank, c in enumerate(classes)}
    if any(n < 0 for n in counts.values()):
        raise ConfigurationError(f"decreasing preset with base {base} and step {step} gives negative counts")
    return counts


def build_schedule(image_set: ImageSet, mode: ScheduleMode, per_class_counts: Dict[int, int],
                   seed: int = 0) -> Schedule:
    """Pick the first `count` images of each class and order them.

    sequential: class blocks in ascending class order.
    custom: class blocks in the order of `per_class_counts`.
    intermixed: the whole multiset shuffled with `seed`.
    """
    mode = ScheduleMode(mode)
    picked = {}
    for cls, count in per_class_counts.items():
        available = np.flatnonzero(image_set.labels == cls)
        if count > len(available):
            raise InsufficientDataError(
                f"class {cls}: {count} images requested but only {len(available)} available "
                f"(short by {count - len(available)})")
        picked[cls] = available[:count]

    order = sorted(picked) if mode == ScheduleMode.SEQUENTIAL else list(picked)
    indices = np.concatenate([picked[c] for c in order]) if order else np.zeros(0, dtype=np.int64)
    classes = np.concatenate([np.full(len(picked[c]), c) for c in order]) if order else np.zeros(0, dtype=np.int64)

    if mode == ScheduleMode.INTERMIXED:
        permutation = RngStream(seed, (SHUFFLE_STREAM,)).generator().permutation(len(indices))
        indices, classes = indices[permutation], classes[permutation]

    return Schedule(indices.astype(np.int64), classes.astype(np.int64), mode, dict(per_class_counts))


def concat_schedules(first: Schedule, second: Schedule) -> Schedule:
    counts = dict(first.per_class_counts)
    for cls, n in second.per_class_counts.items():
        counts[cls] = counts.get(cls, 0) + n
    return Schedule(
        np.concatenate([first.image_indices, second.image_indices]),
        np.concatenate([first.classes, second.classes]),
        ScheduleMode.CUSTOM,
        counts,
        phase_ends=first.block_ends() + [end + len(first) for end in second.block_ends()],
    )


def _counts_for(spec: ScheduleSpec, classes) -> Dict[int, int]:
    counts = {c: spec.per_class_count for c in classes}
    counts.update({c: n for c, n in spec.counts.items() if c in counts})
    return counts


def schedule_from_spec(image_set: ImageSet, spec: ScheduleSpec, seed: int,
                       exclude: Optional[np.ndarray] = None) -> Schedule:
    """Resolve a `ScheduleSpec`, including its named preset, against an image set.

    `exclude` holds image indices that must never be scheduled (the held-out labeling images).
    Schedule indices always refer to `image_set`.
    """
    pool_indices = np.arange(len(image_set))
    if exclude is not None and len(exclude):
        pool_indices = np.setdiff1d(pool_indices, exclude)
    pool = image_set.subset(pool_indices)

    preset = spec.preset
    if preset == SchedulePreset.DECREASING:
        counts = decreasing_counts(spec.classes, spec.decreasing_base, spec.decreasing_step)
        counts.update({c: n for c, n in spec.counts.items() if c in counts})
        schedule = build_schedule(pool, spec.mode, counts, seed)
    elif preset in (SchedulePreset.DIGITS_210, SchedulePreset.DIGITS_5041):
        order = [2, 1, 0] if preset == SchedulePreset.DIGITS_210 else [5, 0, 4, 1]
        schedule = build_schedule(pool, ScheduleMode.CUSTOM, _counts_for(spec, order), seed)
    elif preset == SchedulePreset.REINFORCED_THEN_NEW:
        if len(spec.classes) < 2:
            raise ConfigurationError("reinforced_then_new needs at least two classes")
        *old, new = spec.classes
        reinforced = build_schedule(pool, ScheduleMode.INTERMIXED, _counts_for(spec, old), seed)
        schedule = concat_schedules(reinforced, build_schedule(pool, ScheduleMode.CUSTOM, _counts_for(spec, [new])))
    else:
        schedule = build_schedule(pool, spec.mode, _counts_for(spec, spec.classes), seed)

    schedule.image_indices = pool_indices[schedule.image_indices]
    return schedule


def spec_classes(spec: ScheduleSpec) -> list:
    """Classes a schedule spec will present, in ascending order."""
    if spec.preset == SchedulePreset.DIGITS_210:
        return [0, 1, 2]
    if spec.preset == SchedulePreset.DIGITS_5041:
        return [0, 1, 4, 5]
    return sorted(spec.classes)
