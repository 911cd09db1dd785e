"""Writers for the engine's wire formats.

The adapters talk to the benchmarking engine exclusively through files, so
the formats are implemented here independently:

  * grayscale PFM ("Pf", width/height, scale line with endianness sign,
    float32 rows stored bottom-up);
  * the binary match container: magic "D2PM", u16 version 1, u32 count,
    count*(x1, y1, x2, y2) float32 little-endian, then either count float32
    confidences or a single u32 0xFFFFFFFF sentinel when absent.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MATCH_MAGIC = b"D2PM"
MATCH_VERSION = 1
NO_CONFIDENCE_SENTINEL = 0xFFFFFFFF


def write_pfm(path: str | Path, values: np.ndarray, little_endian: bool = True) -> None:
    """Write a 2D float grid as grayscale PFM, NaNs and infinities untouched."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError("PFM payload must be a 2D grid")
    h, w = values.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scale = -1.0 if little_endian else 1.0
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n{scale:g}\n".encode("ascii"))
        fh.write(values[::-1].astype("<f4" if little_endian else ">f4").tobytes())


def write_d2pm(
    path: str | Path,
    kps1: np.ndarray,
    kps2: np.ndarray,
    confidence: np.ndarray | None = None,
) -> None:
    kps1 = np.asarray(kps1, dtype=np.float64).reshape(-1, 2)
    kps2 = np.asarray(kps2, dtype=np.float64).reshape(-1, 2)
    if kps1.shape != kps2.shape:
        raise ValueError("keypoint arrays must have equal length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = kps1.shape[0]
    with open(path, "wb") as fh:
        fh.write(MATCH_MAGIC)
        fh.write(struct.pack("<H", MATCH_VERSION))
        fh.write(struct.pack("<I", n))
        block = np.empty((n, 4), dtype="<f4")
        block[:, 0:2] = kps1
        block[:, 2:4] = kps2
        fh.write(block.tobytes())
        if confidence is None:
            fh.write(struct.pack("<I", NO_CONFIDENCE_SENTINEL))
        else:
            conf = np.asarray(confidence, dtype="<f4").reshape(-1)
            if conf.shape[0] != n:
                raise ValueError("confidence length must match keypoint count")
            fh.write(conf.tobytes())
