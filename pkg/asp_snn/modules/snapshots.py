import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..classes import Snapshot
from ..exceptions import SnapshotFormatError

# Layout (little endian):
# 4s  | magic b"ASPW"
# u32 | format version
# u32 | excitatory neuron count
# u32 | input count
# u64 | presentation index
# u64 | run seed
# f64[n_exc * n_input] | weights, row-major
# f64[n_exc]           | homeostatic thresholds
MAGIC = b"ASPW"
VERSION = 1
HEADER = struct.Struct("<4sIIIQQ")


def snapshot_bytes(snapshot: Snapshot) -> bytes:
    n_exc, n_input = snapshot.weights.shape
    header = HEADER.pack(MAGIC, VERSION, n_exc, n_input, snapshot.presentation_index, snapshot.seed)
    return (header
            + np.ascontiguousarray(snapshot.weights, dtype="<f8").tobytes()
            + np.ascontiguousarray(snapshot.theta, dtype="<f8").tobytes())


def write_snapshot(path: Union[str, Path], snapshot: Snapshot):
    Path(path).write_bytes(snapshot_bytes(snapshot))


def read_snapshot(path: Union[str, Path]) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise SnapshotFormatError(f"{path}: file too short for a snapshot header ({len(data)} bytes)")
    magic, version, n_exc, n_input, index, seed = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported snapshot version {version}")
    expected = HEADER.size + 8 * (n_exc * n_input + n_exc)
    if len(data) != expected:
        raise SnapshotFormatError(f"{path}: expected {expected} bytes but found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size).astype(np.float64)
    return Snapshot(
        weights=values[:n_exc * n_input].reshape(n_exc, n_input).copy(),
        theta=values[n_exc * n_input:].copy(),
        presentation_index=index,
        seed=seed,
    )
