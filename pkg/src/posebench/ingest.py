"""Wire formats and depth sampling for the evaluation pipeline.

Depth maps travel as grayscale PFM; matches travel in a small binary
container (magic ``D2PM``) or an equivalent JSON form. Depth values are
looked up by nearest-neighbor sampling with round-half-away-from-zero and
clamping, with keypoint coordinates rescaled when the map resolution differs
from the image resolution. Invalid depths (non-finite or <= 0) survive
sampling untouched and are removed by filter_and_cap, which also enforces
the per-pair correspondence cap.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, VersionError
from .geometry import CameraIntrinsics, Correspondence

MATCH_MAGIC = b"D2PM"
MATCH_VERSION = 1
_NO_CONF_SENTINEL = 0xFFFFFFFF
DEFAULT_MATCH_CAP = 2048


@dataclass
class DepthMap:
    width: int
    height: int
    values: np.ndarray  # (height, width) float32, top-down rows

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.shape != (self.height, self.width):
            raise ValueError("value grid does not match declared size")


@dataclass
class ProvenanceTag:
    mde: str
    backbone: str = ""
    intrinsics_at_inference: bool = False

    @property
    def label(self) -> str:
        parts = [self.mde]
        if self.backbone:
            parts.append(self.backbone)
        parts.append("K" if self.intrinsics_at_inference else "noK")
        return "-".join(parts)


@dataclass
class DepthSampleSet:
    values: np.ndarray  # per-keypoint raw depth, aligned with a MatchFile
    provenance: ProvenanceTag | str


@dataclass
class MatchFile:
    kps1: np.ndarray  # (N, 2)
    kps2: np.ndarray  # (N, 2)
    confidence: np.ndarray | None = None
    name1: str | None = None
    name2: str | None = None

    def __post_init__(self):
        self.kps1 = np.asarray(self.kps1, dtype=np.float64).reshape(-1, 2)
        self.kps2 = np.asarray(self.kps2, dtype=np.float64).reshape(-1, 2)
        if self.kps1.shape != self.kps2.shape:
            raise ValueError("keypoint arrays must have equal length")
        if self.confidence is not None:
            self.confidence = np.asarray(self.confidence, dtype=np.float64).reshape(-1)
            if self.confidence.shape[0] != self.kps1.shape[0]:
                raise ValueError("confidence length must match keypoint count")

    def __len__(self) -> int:
        return self.kps1.shape[0]

    def out_of_bounds(self, K1: CameraIntrinsics, K2: CameraIntrinsics) -> np.ndarray:
        """Flag matches whose coordinates leave either image."""

        def oob(kps, K):
            return (
                (kps[:, 0] < 0)
                | (kps[:, 0] >= K.width)
                | (kps[:, 1] < 0)
                | (kps[:, 1] >= K.height)
            )

        return oob(self.kps1, K1) | oob(self.kps2, K2)


# --- PFM -------------------------------------------------------------------------

def read_pfm(path: str | Path) -> DepthMap:
    """Grayscale PFM reader; returns rows top-down regardless of file order."""
    path = Path(path)
    data = path.read_bytes()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path.name}: truncated header at byte {pos}")
        tokens.append(data[start:pos])
    pos += 1  # exactly one whitespace byte separates header and payload
    magic, w_tok, h_tok, scale_tok = tokens
    if magic == b"PF":
        raise FormatError(f"{path.name}: color PFM not supported")
    if magic != b"Pf":
        raise FormatError(f"{path.name}: bad magic {magic!r}")
    try:
        width, height = int(w_tok), int(h_tok)
        scale = float(scale_tok)
    except ValueError as exc:
        raise FormatError(f"{path.name}: bad header fields: {exc}") from exc
    if width <= 0 or height <= 0 or scale == 0:
        raise FormatError(f"{path.name}: invalid dimensions or scale")
    need = width * height * 4
    if len(data) - pos < need:
        raise FormatError(
            f"{path.name}: payload truncated at byte {len(data)} (need {pos + need})"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    values = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    grid = values.reshape(height, width)[::-1].astype(np.float32)  # PFM rows are bottom-up
    return DepthMap(width, height, grid)


def write_pfm(path: str | Path, values: np.ndarray, little_endian: bool = True) -> None:
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError("PFM writer expects a 2D grid")
    h, w = values.shape
    scale = -1.0 if little_endian else 1.0
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n{scale:g}\n".encode("ascii"))
        body = values[::-1].astype("<f4" if little_endian else ">f4")
        fh.write(body.tobytes())


# --- match container ---------------------------------------------------------------

def _pair_key_from_stem(stem: str) -> tuple[str | None, str | None]:
    if "__" in stem:
        a, b = stem.split("__", 1)
        return a, b
    return None, None


def read_matches(path: str | Path) -> MatchFile:
    """Read a binary ``D2PM`` or JSON match file; pair key comes from the filename."""
    path = Path(path)
    name1, name2 = _pair_key_from_stem(path.stem)
    if path.suffix == ".json":
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path.name}: invalid JSON: {exc}") from exc
        pairs = doc.get("pairs")
        if not isinstance(pairs, list):
            raise FormatError(f"{path.name}: missing 'pairs' list")
        kps1, kps2, confs = [], [], []
        for i, p in enumerate(pairs):
            try:
                kps1.append((p["x1"], p["y1"]))
                kps2.append((p["x2"], p["y2"]))
            except (KeyError, TypeError) as exc:
                raise FormatError(f"{path.name}: pair {i} malformed: {exc}") from exc
            if "conf" in p:
                confs.append(p["conf"])
        if confs and len(confs) != len(pairs):
            raise FormatError(f"{path.name}: confidence present on only some pairs")
        conf = np.array(confs, dtype=np.float64) if confs else None
        return MatchFile(
            np.array(kps1, dtype=np.float64).reshape(-1, 2),
            np.array(kps2, dtype=np.float64).reshape(-1, 2),
            conf,
            name1,
            name2,
        )

    data = path.read_bytes()
    if len(data) < 10:
        raise FormatError(f"{path.name}: file too short ({len(data)} bytes)")
    if data[:4] != MATCH_MAGIC:
        raise FormatError(f"{path.name}: bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != MATCH_VERSION:
        raise VersionError(f"{path.name}: unsupported version {version}")
    (count,) = struct.unpack_from("<I", data, 6)
    pos = 10
    need = count * 16
    if len(data) - pos < need:
        raise FormatError(f"{path.name}: coordinate block truncated at byte {len(data)}")
    coords = np.frombuffer(data, dtype="<f4", count=count * 4, offset=pos).reshape(count, 4)
    pos += need
    remaining = len(data) - pos
    conf = None
    if remaining == 4 and count != 1:
        (sentinel,) = struct.unpack_from("<I", data, pos)
        if sentinel != _NO_CONF_SENTINEL:
            raise FormatError(f"{path.name}: bad confidence sentinel 0x{sentinel:08X}")
    elif remaining == 4 and count == 1:
        (as_u32,) = struct.unpack_from("<I", data, pos)
        if as_u32 != _NO_CONF_SENTINEL:
            conf = np.frombuffer(data, dtype="<f4", count=1, offset=pos).astype(np.float64)
    elif remaining == count * 4:
        conf = np.frombuffer(data, dtype="<f4", count=count, offset=pos).astype(np.float64)
    elif remaining == 0 and count == 0:
        pass
    else:
        raise FormatError(
            f"{path.name}: unexpected {remaining} bytes after coordinates (count={count})"
        )
    return MatchFile(
        coords[:, 0:2].astype(np.float64),
        coords[:, 2:4].astype(np.float64),
        conf,
        name1,
        name2,
    )


def write_matches(
    path: str | Path,
    kps1: np.ndarray,
    kps2: np.ndarray,
    confidence: np.ndarray | None = None,
) -> None:
    """Write matches as binary ``.d2pm`` or ``.json`` depending on the extension."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kps1 = np.asarray(kps1, dtype=np.float64).reshape(-1, 2)
    kps2 = np.asarray(kps2, dtype=np.float64).reshape(-1, 2)
    if kps1.shape != kps2.shape:
        raise ValueError("keypoint arrays must have equal length")
    n = kps1.shape[0]
    if path.suffix == ".json":
        pairs = []
        for i in range(n):
            rec = {
                "x1": float(np.float32(kps1[i, 0])),
                "y1": float(np.float32(kps1[i, 1])),
                "x2": float(np.float32(kps2[i, 0])),
                "y2": float(np.float32(kps2[i, 1])),
            }
            if confidence is not None:
                rec["conf"] = float(np.float32(confidence[i]))
            pairs.append(rec)
        path.write_text(json.dumps({"pairs": pairs}))
        return
    with open(path, "wb") as fh:
        fh.write(MATCH_MAGIC)
        fh.write(struct.pack("<H", MATCH_VERSION))
        fh.write(struct.pack("<I", n))
        block = np.empty((n, 4), dtype="<f4")
        block[:, 0:2] = kps1
        block[:, 2:4] = kps2
        fh.write(block.tobytes())
        if confidence is None:
            fh.write(struct.pack("<I", _NO_CONF_SENTINEL))
        else:
            fh.write(np.asarray(confidence, dtype="<f4").tobytes())


# --- depth sampling and filtering ---------------------------------------------------

def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def sample_depth_nn(
    depth: DepthMap,
    keypoints: np.ndarray,
    image_width: int | None = None,
    image_height: int | None = None,
) -> np.ndarray:
    """Nearest-neighbor depth lookup; raw values, invalid entries included.

    At matching resolutions a keypoint (x, y) reads pixel
    (clamp(round(x)), clamp(round(y))) with round half away from zero. When
    the map resolution differs from the image resolution, coordinates move to
    the map grid with half-pixel-center alignment, u = (x + 0.5) * s - 0.5;
    this reduces to plain scaling at s = 1 and makes the lookup exactly
    equivalent to nearest-neighbor upsampling of the map (pixel replication
    commutes with sampling).
    """
    kps = np.asarray(keypoints, dtype=np.float64).reshape(-1, 2)
    sx = 1.0 if image_width is None else depth.width / image_width
    sy = 1.0 if image_height is None else depth.height / image_height
    u = (kps[:, 0] + 0.5) * sx - 0.5
    v = (kps[:, 1] + 0.5) * sy - 0.5
    px = np.clip(_round_half_away(u), 0, depth.width - 1).astype(np.int64)
    py = np.clip(_round_half_away(v), 0, depth.height - 1).astype(np.int64)
    return depth.values[py, px].astype(np.float64)


def filter_and_cap(
    matches: MatchFile,
    d1: np.ndarray,
    d2: np.ndarray,
    cap: int = DEFAULT_MATCH_CAP,
) -> list[Correspondence]:
    """Drop matches with invalid depth, then cap by confidence (or file order).

    Ties in confidence keep the lower original index; survivors are emitted
    in original file order either way.
    """
    d1 = np.asarray(d1, dtype=np.float64).reshape(-1)
    d2 = np.asarray(d2, dtype=np.float64).reshape(-1)
    if len(d1) != len(matches) or len(d2) != len(matches):
        raise ValueError("depth arrays must align with the match file")
    valid = np.isfinite(d1) & (d1 > 0) & np.isfinite(d2) & (d2 > 0)
    idx = np.flatnonzero(valid)
    if idx.size > cap:
        if matches.confidence is not None:
            order = np.lexsort((idx, -matches.confidence[idx]))
            idx = np.sort(idx[order[:cap]])
        else:
            idx = idx[:cap]
    return [
        Correspondence(matches.kps1[i], matches.kps2[i], float(d1[i]), float(d2[i]))
        for i in idx
    ]
