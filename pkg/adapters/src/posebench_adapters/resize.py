"""Working-resolution policy and the exact coordinate mapping back to native.

Matchers that bound the longer image side work in a downscaled frame; their
keypoints must be reported in native pixels. With pixel centers at integer
coordinates, a point at working coordinate u corresponds to native
coordinate (u + 0.5) / s - 0.5 where s = working / native. The mapping is
exact for geometric features (cell boundaries, corners), unlike plain
coordinate scaling which is off by half a pixel whenever s != 1.
"""

from __future__ import annotations

import numpy as np


def working_size(width: int, height: int, long_side: int | None) -> tuple[int, int]:
    """Dimensions after bounding the longer side; aspect ratio preserved."""
    if long_side is None or max(width, height) <= long_side:
        return width, height
    s = long_side / max(width, height)
    return max(1, round(width * s)), max(1, round(height * s))


def downsample_nn(image: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Nearest-neighbor resample of a 2D image to the working size."""
    h, w = image.shape[:2]
    if (w, h) == (target_w, target_h):
        return image
    xs = np.clip(np.round((np.arange(target_w) + 0.5) * (w / target_w) - 0.5), 0, w - 1)
    ys = np.clip(np.round((np.arange(target_h) + 0.5) * (h / target_h) - 0.5), 0, h - 1)
    return image[ys.astype(int)[:, None], xs.astype(int)[None, :]]


def to_native(kps: np.ndarray, working_wh: tuple[int, int], native_wh: tuple[int, int]) -> np.ndarray:
    """Map working-resolution keypoints to native pixels (half-pixel centers)."""
    kps = np.asarray(kps, dtype=np.float64).reshape(-1, 2)
    sx = working_wh[0] / native_wh[0]
    sy = working_wh[1] / native_wh[1]
    out = np.empty_like(kps)
    out[:, 0] = (kps[:, 0] + 0.5) / sx - 0.5
    out[:, 1] = (kps[:, 1] + 0.5) / sy - 0.5
    return out
