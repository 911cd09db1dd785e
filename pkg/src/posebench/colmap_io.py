"""COLMAP reconstruction parsing, covisibility, and evaluation-pair sampling.

Reads the standard text and binary model layouts (cameras / images / points3D)
with little-endian binary encoding and 64-bit counts, exposes ground-truth
relative poses under the world-to-camera convention, and samples image pairs
by covisibility overlap with a portable seeded PRNG. Matching writers exist
so synthetic scenes can be emitted as full models and so round-trip tests
can compare the two parsers field for field.
"""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    MissingImage,
    NoValidPairs,
    UnsupportedCameraModel,
)
from .geometry import CameraIntrinsics, Pose, quat_to_rotation, rotation_to_quat
from .prng import Rng

# model name -> number of parameters; only pinhole-family models are accepted,
# the radial distortion coefficient is parsed and then ignored
_CAMERA_MODELS = {
    "SIMPLE_PINHOLE": (0, 3),
    "PINHOLE": (1, 4),
    "SIMPLE_RADIAL": (2, 4),
}
_MODEL_BY_ID = {mid: (name, nparams) for name, (mid, nparams) in _CAMERA_MODELS.items()}
_INVALID_POINT3D = 2**64 - 1


@dataclass
class SfmImage:
    name: str
    pose: Pose  # world -> camera
    camera_id: int
    xys: np.ndarray  # (N, 2) keypoint coordinates
    point3d_ids: np.ndarray  # (N,) int64; -1 marks features without a 3D point

    @property
    def observed_points(self) -> np.ndarray:
        ids = self.point3d_ids
        return np.unique(ids[ids >= 0])


@dataclass
class SfmPoint3D:
    xyz: np.ndarray
    rgb: np.ndarray
    error: float
    track: list[tuple[int, int]]  # (image_id, point2d_idx)


@dataclass
class SfmModel:
    cameras: dict[int, CameraIntrinsics] = field(default_factory=dict)
    images: dict[int, SfmImage] = field(default_factory=dict)
    points3d: dict[int, SfmPoint3D] = field(default_factory=dict)

    def validate(self) -> None:
        for iid, img in self.images.items():
            if img.camera_id not in self.cameras:
                raise FormatError(f"image {iid} references missing camera {img.camera_id}")
            for pid in img.observed_points:
                if int(pid) not in self.points3d:
                    raise FormatError(f"image {iid} observes missing 3D point {pid}")
        for pid, pt in self.points3d.items():
            for img_id, idx in pt.track:
                if img_id not in self.images:
                    raise FormatError(f"point {pid} track references missing image {img_id}")
                ids = self.images[img_id].point3d_ids
                if idx >= len(ids) or ids[idx] != pid:
                    raise FormatError(
                        f"point {pid} track entry ({img_id}, {idx}) inconsistent with image"
                    )


@dataclass
class ImagePair:
    id1: int
    id2: int
    overlap: float
    gt_relative_pose: Pose

    def __post_init__(self):
        if self.id1 >= self.id2:
            raise ValueError("pair ids must be canonical (id1 < id2)")


def _intrinsics_from_params(model_name: str, width: int, height: int, params) -> CameraIntrinsics:
    if model_name == "SIMPLE_PINHOLE":
        f, cx, cy = params
        return CameraIntrinsics(f, f, cx, cy, int(width), int(height), model=model_name)
    if model_name == "PINHOLE":
        fx, fy, cx, cy = params
        return CameraIntrinsics(fx, fy, cx, cy, int(width), int(height), model=model_name)
    if model_name == "SIMPLE_RADIAL":
        f, cx, cy, k = params
        warnings.warn(
            f"SIMPLE_RADIAL camera: radial distortion k={k} is ignored; "
            "evaluation assumes undistorted images",
            stacklevel=3,
        )
        return CameraIntrinsics(f, f, cx, cy, int(width), int(height), model=model_name)
    raise UnsupportedCameraModel(f"camera model {model_name!r} is not supported")


def _camera_params(cam: CameraIntrinsics) -> list[float]:
    if cam.model == "PINHOLE":
        return [cam.fx, cam.fy, cam.cx, cam.cy]
    if cam.model == "SIMPLE_PINHOLE":
        return [cam.fx, cam.cx, cam.cy]
    if cam.model == "SIMPLE_RADIAL":
        return [cam.fx, cam.cx, cam.cy, 0.0]
    raise UnsupportedCameraModel(cam.model)


# --- text parsers --------------------------------------------------------------

def _data_lines(path: Path):
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                yield lineno, stripped


def _read_cameras_text(path: Path) -> dict[int, CameraIntrinsics]:
    cameras = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        try:
            cam_id = int(parts[0])
            model_name = parts[1]
            width, height = int(parts[2]), int(parts[3])
            params = [float(p) for p in parts[4:]]
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path.name}:{lineno}: bad camera line: {exc}") from exc
        if model_name not in _CAMERA_MODELS:
            raise UnsupportedCameraModel(f"{path.name}:{lineno}: model {model_name!r}")
        if len(params) != _CAMERA_MODELS[model_name][1]:
            raise FormatError(f"{path.name}:{lineno}: wrong parameter count for {model_name}")
        cameras[cam_id] = _intrinsics_from_params(model_name, width, height, params)
    return cameras


def _read_images_text(path: Path) -> dict[int, SfmImage]:
    images = {}
    pending = None
    for lineno, line in _data_lines(path):
        parts = line.split()
        if pending is None:
            try:
                img_id = int(parts[0])
                q = np.array([float(v) for v in parts[1:5]])
                t = np.array([float(v) for v in parts[5:8]])
                cam_id = int(parts[8])
                name = parts[9]
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path.name}:{lineno}: bad image header: {exc}") from exc
            pending = (img_id, q, t, cam_id, name)
        else:
            img_id, q, t, cam_id, name = pending
            if len(parts) % 3 != 0:
                raise FormatError(f"{path.name}:{lineno}: observations not in triplets")
            try:
                vals = [float(v) for v in parts]
            except ValueError as exc:
                raise FormatError(f"{path.name}:{lineno}: bad observation: {exc}") from exc
            n = len(parts) // 3
            xys = np.array(vals, dtype=np.float64).reshape(n, 3)[:, :2] if n else np.zeros((0, 2))
            pids = np.array([int(parts[3 * i + 2]) for i in range(n)], dtype=np.int64)
            images[img_id] = SfmImage(name, Pose(quat_to_rotation(q), t), cam_id, xys, pids)
            pending = None
    if pending is not None:
        raise FormatError(f"{path.name}: truncated image block for image {pending[0]}")
    return images


def _read_points_text(path: Path) -> dict[int, SfmPoint3D]:
    points = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        try:
            pid = int(parts[0])
            xyz = np.array([float(v) for v in parts[1:4]])
            rgb = np.array([int(v) for v in parts[4:7]], dtype=np.uint8)
            error = float(parts[7])
            rest = parts[8:]
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path.name}:{lineno}: bad 3D point: {exc}") from exc
        if len(rest) % 2 != 0:
            raise FormatError(f"{path.name}:{lineno}: track not in (image, idx) pairs")
        track = [(int(rest[2 * i]), int(rest[2 * i + 1])) for i in range(len(rest) // 2)]
        points[pid] = SfmPoint3D(xyz, rgb, error, track)
    return points


# --- binary parsers ------------------------------------------------------------

class _BinReader:
    def __init__(self, path: Path):
        self.path = path
        self.data = path.read_bytes()
        self.pos = 0

    def unpack(self, fmt: str):
        size = struct.calcsize("<" + fmt)
        if self.pos + size > len(self.data):
            raise FormatError(
                f"{self.path.name}: truncated at byte offset {self.pos} "
                f"(needed {size} more bytes)"
            )
        out = struct.unpack_from("<" + fmt, self.data, self.pos)
        self.pos += size
        return out

    def read_cstring(self) -> str:
        end = self.data.find(b"\x00", self.pos)
        if end < 0:
            raise FormatError(f"{self.path.name}: unterminated string at offset {self.pos}")
        s = self.data[self.pos:end].decode("utf-8")
        self.pos = end + 1
        return s

    def expect_eof(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.path.name}: {len(self.data) - self.pos} trailing bytes at offset {self.pos}"
            )


def _read_cameras_binary(path: Path) -> dict[int, CameraIntrinsics]:
    r = _BinReader(path)
    (num,) = r.unpack("Q")
    cameras = {}
    for _ in range(num):
        cam_id, model_id, width, height = r.unpack("iiQQ")
        if model_id not in _MODEL_BY_ID:
            raise UnsupportedCameraModel(f"{path.name}: camera model id {model_id}")
        name, nparams = _MODEL_BY_ID[model_id]
        params = r.unpack("d" * nparams)
        cameras[cam_id] = _intrinsics_from_params(name, width, height, params)
    r.expect_eof()
    return cameras


def _read_images_binary(path: Path) -> dict[int, SfmImage]:
    r = _BinReader(path)
    (num,) = r.unpack("Q")
    images = {}
    for _ in range(num):
        (img_id,) = r.unpack("I")
        q = np.array(r.unpack("dddd"))
        t = np.array(r.unpack("ddd"))
        (cam_id,) = r.unpack("I")
        name = r.read_cstring()
        (n_obs,) = r.unpack("Q")
        xys = np.empty((n_obs, 2))
        pids = np.empty(n_obs, dtype=np.int64)
        for i in range(n_obs):
            x, y = r.unpack("dd")
            (pid,) = r.unpack("Q")
            xys[i] = (x, y)
            pids[i] = -1 if pid == _INVALID_POINT3D else pid
        images[img_id] = SfmImage(name, Pose(quat_to_rotation(q), t), cam_id, xys, pids)
    r.expect_eof()
    return images


def _read_points_binary(path: Path) -> dict[int, SfmPoint3D]:
    r = _BinReader(path)
    (num,) = r.unpack("Q")
    points = {}
    for _ in range(num):
        (pid,) = r.unpack("Q")
        xyz = np.array(r.unpack("ddd"))
        rgb = np.array(r.unpack("BBB"), dtype=np.uint8)
        (error,) = r.unpack("d")
        (track_len,) = r.unpack("Q")
        track = []
        for _ in range(track_len):
            img_id, p2d = r.unpack("II")
            track.append((img_id, p2d))
        points[pid] = SfmPoint3D(xyz, rgb, error, track)
    r.expect_eof()
    return points


def parse_model(path: str | Path, format: str = "auto") -> SfmModel:
    """Parse a COLMAP model directory in text or binary form."""
    path = Path(path)
    if format == "auto":
        if all((path / f"{n}.bin").exists() for n in ("cameras", "images", "points3D")):
            format = "binary"
        elif all((path / f"{n}.txt").exists() for n in ("cameras", "images", "points3D")):
            format = "text"
        else:
            raise FormatError(f"{path}: no complete cameras/images/points3D model found")
    if format == "binary":
        model = SfmModel(
            _read_cameras_binary(path / "cameras.bin"),
            _read_images_binary(path / "images.bin"),
            _read_points_binary(path / "points3D.bin"),
        )
    elif format == "text":
        model = SfmModel(
            _read_cameras_text(path / "cameras.txt"),
            _read_images_text(path / "images.txt"),
            _read_points_text(path / "points3D.txt"),
        )
    else:
        raise ValueError(f"unknown format {format!r}")
    model.validate()
    return model


# --- writers --------------------------------------------------------------------

def write_model_text(model: SfmModel, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "cameras.txt", "w") as fh:
        fh.write("# Camera list: CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n")
        for cid in sorted(model.cameras):
            cam = model.cameras[cid]
            params = " ".join(format(p, ".17g") for p in _camera_params(cam))
            fh.write(f"{cid} {cam.model} {cam.width} {cam.height} {params}\n")
    with open(path / "images.txt", "w") as fh:
        fh.write("# Image list: IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n")
        fh.write("#   POINTS2D[] as (X Y POINT3D_ID)\n")
        for iid in sorted(model.images):
            img = model.images[iid]
            q = rotation_to_quat(img.pose.R)
            vals = " ".join(format(v, ".17g") for v in (*q, *img.pose.t))
            fh.write(f"{iid} {vals} {img.camera_id} {img.name}\n")
            obs = " ".join(
                f"{format(x, '.17g')} {format(y, '.17g')} {pid}"
                for (x, y), pid in zip(img.xys, img.point3d_ids)
            )
            fh.write(obs + "\n")
    with open(path / "points3D.txt", "w") as fh:
        fh.write("# 3D point list: POINT3D_ID X Y Z R G B ERROR TRACK[] as (IMAGE_ID POINT2D_IDX)\n")
        for pid in sorted(model.points3d):
            pt = model.points3d[pid]
            xyz = " ".join(format(v, ".17g") for v in pt.xyz)
            rgb = " ".join(str(int(v)) for v in pt.rgb)
            track = " ".join(f"{i} {j}" for i, j in pt.track)
            fh.write(f"{pid} {xyz} {rgb} {format(pt.error, '.17g')} {track}\n")


def write_model_binary(model: SfmModel, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "cameras.bin", "wb") as fh:
        fh.write(struct.pack("<Q", len(model.cameras)))
        for cid in sorted(model.cameras):
            cam = model.cameras[cid]
            model_id = _CAMERA_MODELS[cam.model][0]
            fh.write(struct.pack("<iiQQ", cid, model_id, cam.width, cam.height))
            for p in _camera_params(cam):
                fh.write(struct.pack("<d", p))
    with open(path / "images.bin", "wb") as fh:
        fh.write(struct.pack("<Q", len(model.images)))
        for iid in sorted(model.images):
            img = model.images[iid]
            q = rotation_to_quat(img.pose.R)
            fh.write(struct.pack("<I", iid))
            fh.write(struct.pack("<dddd", *q))
            fh.write(struct.pack("<ddd", *img.pose.t))
            fh.write(struct.pack("<I", img.camera_id))
            fh.write(img.name.encode("utf-8") + b"\x00")
            fh.write(struct.pack("<Q", len(img.point3d_ids)))
            for (x, y), pid in zip(img.xys, img.point3d_ids):
                raw = _INVALID_POINT3D if pid < 0 else int(pid)
                fh.write(struct.pack("<ddQ", x, y, raw))
    with open(path / "points3D.bin", "wb") as fh:
        fh.write(struct.pack("<Q", len(model.points3d)))
        for pid in sorted(model.points3d):
            pt = model.points3d[pid]
            fh.write(struct.pack("<Q", pid))
            fh.write(struct.pack("<ddd", *pt.xyz))
            fh.write(struct.pack("<BBB", *(int(v) for v in pt.rgb)))
            fh.write(struct.pack("<d", pt.error))
            fh.write(struct.pack("<Q", len(pt.track)))
            for img_id, p2d in pt.track:
                fh.write(struct.pack("<II", img_id, p2d))


# --- relative poses, covisibility, pair sampling ---------------------------------

def gt_relative_pose(model: SfmModel, id1: int, id2: int) -> Pose:
    """Relative pose mapping camera-id1 coordinates into camera-id2 coordinates."""
    for iid in (id1, id2):
        if iid not in model.images:
            raise MissingImage(f"image id {iid} not in model")
    p1, p2 = model.images[id1].pose, model.images[id2].pose
    R_rel = p2.R @ p1.R.T
    t_rel = p2.t - R_rel @ p1.t
    return Pose(R_rel, t_rel)


def covisibility(model: SfmModel) -> dict[tuple[int, int], float]:
    """Pairwise overlap: shared 3D points over the smaller observation count."""
    counts = {iid: len(img.observed_points) for iid, img in model.images.items()}
    shared: dict[tuple[int, int], int] = {}
    for pt in model.points3d.values():
        imgs = sorted({img_id for img_id, _ in pt.track})
        for a in range(len(imgs)):
            for b in range(a + 1, len(imgs)):
                key = (imgs[a], imgs[b])
                shared[key] = shared.get(key, 0) + 1
    overlaps = {}
    for (i, j), s in shared.items():
        denom = min(counts[i], counts[j])
        if denom > 0 and s > 0:
            overlaps[(i, j)] = s / denom
    return overlaps


def sample_pairs(
    model: SfmModel,
    min_overlap: float = 0.1,
    n: int = 250,
    seed: int = 0,
) -> list[ImagePair]:
    """Draw up to n covisible pairs uniformly without replacement (seeded)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    overlaps = covisibility(model)
    eligible = sorted(k for k, v in overlaps.items() if v >= min_overlap)
    if not eligible:
        raise NoValidPairs(f"no pair reaches overlap {min_overlap}")
    rng = Rng(seed)
    take = min(n, len(eligible))
    order = rng.sample_indices(len(eligible), take)
    pairs = []
    for idx in order:
        i, j = eligible[idx]
        pairs.append(ImagePair(i, j, overlaps[(i, j)], gt_relative_pose(model, i, j)))
    return pairs


PAIR_CSV_HEADER = ["id1", "id2", "name1", "name2", "overlap", "qw", "qx", "qy", "qz", "tx", "ty", "tz"]


def write_pairs_csv(pairs: list[ImagePair], model: SfmModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PAIR_CSV_HEADER)
        for p in pairs:
            q = rotation_to_quat(p.gt_relative_pose.R)
            writer.writerow(
                [
                    p.id1,
                    p.id2,
                    model.images[p.id1].name,
                    model.images[p.id2].name,
                    format(p.overlap, ".17g"),
                    *(format(v, ".17g") for v in q),
                    *(format(v, ".17g") for v in p.gt_relative_pose.t),
                ]
            )


@dataclass
class PairRow:
    id1: int
    id2: int
    name1: str
    name2: str
    overlap: float
    gt_relative_pose: Pose


def read_pairs_csv(path: str | Path) -> list[PairRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PAIR_CSV_HEADER:
            raise FormatError(f"{path}: unexpected pair CSV header {reader.fieldnames}")
        for rec in reader:
            q = np.array([float(rec[k]) for k in ("qw", "qx", "qy", "qz")])
            t = np.array([float(rec[k]) for k in ("tx", "ty", "tz")])
            rows.append(
                PairRow(
                    int(rec["id1"]),
                    int(rec["id2"]),
                    rec["name1"],
                    rec["name2"],
                    float(rec["overlap"]),
                    Pose(quat_to_rotation(q), t),
                )
            )
    return rows
