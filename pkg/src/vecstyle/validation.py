"""Input validation helpers shared across the public API."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

__all__ = ["check_image", "check_positive_int", "check_fraction", "check_non_negative"]


def check_image(x, name: str = "image", channels: tuple[int, ...] = (3,)) -> np.ndarray:
    """Validate an (H, W, C) float image with values in [0, 1].

    Accepts anything array-like; returns a contiguous float64 array.  uint8
    input is rescaled by 1/255.  Raises :class:`DimensionError` on wrong
    rank, channel count, non-finite values, or out-of-range values.
    """
    arr = np.asarray(x)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64, copy=False)
    if arr.ndim != 3 or arr.shape[2] not in channels:
        raise DimensionError(
            f"{name} must have shape (H, W, C) with C in {channels}, got {np.asarray(x).shape}"
        )
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have positive height and width, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise DimensionError(
            f"{name} values must lie in [0, 1], got range [{arr.min()}, {arr.max()}]"
        )
    return np.ascontiguousarray(arr)


def check_positive_int(value, name: str) -> int:
    v = int(value)
    if v != value or v <= 0:
        raise DimensionError(f"{name} must be a positive integer, got {value!r}")
    return v


def check_non_negative(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v < 0.0:
        raise DimensionError(f"{name} must be finite and >= 0, got {value!r}")
    return v


def check_fraction(value, name: str) -> float:
    v = float(value)
    if not (0.0 < v <= 1.0):
        raise DimensionError(f"{name} must lie in (0, 1], got {value!r}")
    return v
