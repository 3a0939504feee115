"""Radix-2 conversions, most significant bit first."""
import numpy as np


def to_int(bits) -> int:
    value = 0
    for b in np.asarray(bits, dtype=np.int64).ravel():
        value = (value << 1) | int(b)
    return value


def to_bits(value: int, width: int) -> np.ndarray:
    return rows_to_bits(np.array([value], dtype=np.int64), width)[0]


def rows_to_int(rows: np.ndarray) -> np.ndarray:
    """Integer value of every row of a 0/1 matrix (width <= 62)."""
    rows = np.asarray(rows, dtype=np.int64)
    width = rows.shape[-1]
    weights = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
    return rows @ weights if width else np.zeros(rows.shape[:-1], dtype=np.int64)


def rows_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)
