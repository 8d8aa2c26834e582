from pathlib import Path
from typing import Union

import numpy as np

from ..defaults import Defaults

SEPARATOR_VALUE = 255


def _normalize(weights: np.ndarray, global_norm: bool) -> np.ndarray:
    if global_norm:
        lo = np.full((weights.shape[0], 1), weights.min())
        hi = np.full((weights.shape[0], 1), weights.max())
    else:
        lo = weights.min(axis=1, keepdims=True)
        hi = weights.max(axis=1, keepdims=True)
    span = hi - lo
    scaled = np.divide(weights - lo, span, out=np.zeros_like(weights, dtype=np.float64), where=span > 0)
    return np.rint(scaled * 255.0).astype(np.uint8)


def tile_weights(weights: np.ndarray, grid_cols: int, global_norm: bool = False,
                 side: int = Defaults.IMAGE_SIDE) -> np.ndarray:
    """Lay receptive fields out row-major by neuron index, one pixel of separator between tiles."""
    n_exc = weights.shape[0]
    grid_cols = max(1, min(grid_cols, n_exc))
    grid_rows = -(-n_exc // grid_cols)
    tiles = _normalize(np.asarray(weights, dtype=np.float64), global_norm).reshape(n_exc, side, side)

    height = (side + 1) * grid_rows - 1
    width = (side + 1) * grid_cols - 1
    canvas = np.full((height, width), SEPARATOR_VALUE, dtype=np.uint8)
    for j, tile in enumerate(tiles):
        r, c = divmod(j, grid_cols)
        canvas[r * (side + 1):r * (side + 1) + side, c * (side + 1):c * (side + 1) + side] = tile
    return canvas


def pgm_bytes(canvas: np.ndarray) -> bytes:
    height, width = canvas.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + canvas.astype(np.uint8).tobytes()


def write_pgm(path: Union[str, Path], canvas: np.ndarray):
    Path(path).write_bytes(pgm_bytes(canvas))
