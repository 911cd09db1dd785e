"""Deterministic synthetic two-view scenes for oracles, property tests, and
the self-check.

Points are sampled inside the camera-1 frustum and kept only when visible in
both views, so every inlier is a genuine two-view observation. Keypoint
noise, uniform outlier replacement, and a configurable depth-noise model
corrupt the reported measurements while the ground truth stays exact. All
randomness comes from the portable PRNG, so a spec with the same seed always
produces the same pair bit for bit.

Scenes can also be emitted to disk in the full pipeline layout (COLMAP text
model + match container + per-view PFM depth), which is how the end-to-end
determinism checks drive the CLI without real data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .colmap_io import SfmImage, SfmModel, SfmPoint3D, write_model_text
from .errors import SpecError
from .geometry import (
    CameraIntrinsics,
    Correspondence,
    Pose,
    lift,
    normalize_point,
    project,
    so3_exp,
)
from .ingest import write_matches, write_pfm, _round_half_away
from .prng import Rng, derive_seed


@dataclass(frozen=True)
class DepthNoiseModel:
    kind: str = "none"  # none | lognormal | global-scale | affine
    sigma: float = 0.0  # lognormal: std of log depth, per view per point
    scale: float = 1.0  # global-scale: image-2 depth gauge factor
    gain: float = 1.0  # affine: image-2 depths -> gain * d + offset
    offset: float = 0.0

    @staticmethod
    def none() -> "DepthNoiseModel":
        return DepthNoiseModel()

    @staticmethod
    def lognormal(sigma: float) -> "DepthNoiseModel":
        return DepthNoiseModel("lognormal", sigma=sigma)

    @staticmethod
    def global_scale(scale: float) -> "DepthNoiseModel":
        return DepthNoiseModel("global-scale", scale=scale)

    @staticmethod
    def affine(gain: float, offset: float) -> "DepthNoiseModel":
        return DepthNoiseModel("affine", gain=gain, offset=offset)


@dataclass(frozen=True)
class SceneSpec:
    n_points: int = 200
    depth_range: tuple[float, float] = (4.0, 10.0)
    rotation_deg: float = 15.0
    baseline: float = 1.5
    pixel_noise: float = 0.0
    outlier_fraction: float = 0.0
    depth_noise: DepthNoiseModel = field(default_factory=DepthNoiseModel)
    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)
    )
    seed: int = 0

    def __post_init__(self):
        if not (self.depth_range[0] > 0 and self.depth_range[1] > self.depth_range[0]):
            raise ValueError("depth range must satisfy 0 < z_min < z_max")
        if not (0 <= self.outlier_fraction < 1):
            raise ValueError("outlier fraction must be in [0, 1)")
        if self.n_points < 1:
            raise ValueError("need at least one point")


@dataclass
class SyntheticPair:
    correspondences: list[Correspondence]
    gt_pose: Pose
    gt_d1: np.ndarray
    gt_d2: np.ndarray
    intrinsics: CameraIntrinsics
    outlier_mask: np.ndarray
    spec: SceneSpec


def generate(spec: SceneSpec) -> SyntheticPair:
    """Build one deterministic two-view pair from a SceneSpec."""
    rng = Rng(spec.seed)
    K = spec.intrinsics

    axis = np.array([rng.normal() for _ in range(3)])
    axis /= np.linalg.norm(axis)
    R = so3_exp(axis * math.radians(spec.rotation_deg))
    bdir = np.array([rng.normal() for _ in range(3)])
    bdir /= np.linalg.norm(bdir)
    center2 = bdir * spec.baseline
    t = -R @ center2
    pose = Pose(R, t)

    n = spec.n_points
    pts1 = np.empty((n, 3))
    x1 = np.empty((n, 2))
    x2 = np.empty((n, 2))
    found = 0
    attempts = 0
    max_attempts = 10 * n
    while found < n:
        if attempts >= max_attempts:
            raise SpecError(
                f"could not find {n} covisible points in {max_attempts} attempts"
            )
        attempts += 1
        px = np.array([rng.uniform(0, K.width), rng.uniform(0, K.height)])
        z = rng.uniform(*spec.depth_range)
        X = z * lift(normalize_point(px, K))
        X2 = R @ X + t
        if X2[2] <= spec.depth_range[0] * 0.05:
            continue
        px2 = project(K, X2)
        if not (0 <= px2[0] < K.width and 0 <= px2[1] < K.height):
            continue
        pts1[found] = X
        x1[found] = px
        x2[found] = px2
        found += 1

    gt_d1 = pts1[:, 2].copy()
    gt_d2 = (pts1 @ R.T + t)[:, 2].copy()

    n_out = int(round(spec.outlier_fraction * n))
    out_idx = rng.sample_indices(n, n_out) if n_out else []
    outlier_mask = np.zeros(n, dtype=bool)
    outlier_mask[out_idx] = True

    if spec.pixel_noise > 0:
        for i in range(n):
            x1[i, 0] += rng.normal(0.0, spec.pixel_noise)
            x1[i, 1] += rng.normal(0.0, spec.pixel_noise)
            x2[i, 0] += rng.normal(0.0, spec.pixel_noise)
            x2[i, 1] += rng.normal(0.0, spec.pixel_noise)

    d1 = gt_d1.copy()
    d2 = gt_d2.copy()
    for i in out_idx:
        x2[i] = (rng.uniform(0, K.width), rng.uniform(0, K.height))
        d2[i] = rng.uniform(*spec.depth_range)

    noise = spec.depth_noise
    if noise.kind == "lognormal":
        for i in range(n):
            d1[i] *= math.exp(rng.normal(0.0, noise.sigma))
            d2[i] *= math.exp(rng.normal(0.0, noise.sigma))
    elif noise.kind == "global-scale":
        d2 = d2 * noise.scale
    elif noise.kind == "affine":
        d2 = noise.gain * d2 + noise.offset
    elif noise.kind != "none":
        raise ValueError(f"unknown depth noise kind {noise.kind!r}")

    corrs = [
        Correspondence(x1[i], x2[i], float(d1[i]), float(d2[i])) for i in range(n)
    ]
    return SyntheticPair(corrs, pose, gt_d1, gt_d2, K, outlier_mask, spec)


# --- dataset emission ----------------------------------------------------------

def _drop_pixel_collisions(pair: SyntheticPair) -> list[int]:
    """Indices of matches whose rounded pixels are unique in both images.

    Nearest-neighbor sampling of the emitted depth maps is exact only when no
    two keypoints land on the same pixel, so colliding matches are dropped at
    emission time (first occupant wins).
    """
    keep = []
    seen1, seen2 = set(), set()
    for i, c in enumerate(pair.correspondences):
        p1 = tuple(int(v) for v in _round_half_away(c.x1))
        p2 = tuple(int(v) for v in _round_half_away(c.x2))
        if p1 in seen1 or p2 in seen2:
            continue
        seen1.add(p1)
        seen2.add(p2)
        keep.append(i)
    return keep


def emit_dataset(
    scene_name: str,
    specs: list[SceneSpec],
    out_dir: str | Path,
    provenance: str = "synthetic-mde",
) -> dict:
    """Write a full pipeline scene: COLMAP text model, matches, per-view PFMs.

    Each spec becomes one image pair (two images observing a private point
    cloud), so covisibility is 1 within a pair and 0 across pairs. Returns a
    manifest dict with the written paths.
    """
    out_dir = Path(out_dir)
    scene_dir = out_dir / scene_name
    model = SfmModel()
    K = specs[0].intrinsics
    model.cameras[1] = K
    next_point = 1
    match_files = []
    depth_dir = scene_dir / "depth" / provenance
    for p, spec in enumerate(specs):
        if spec.intrinsics != K:
            raise ValueError("all pairs of one emitted scene must share intrinsics")
        pair = generate(spec)
        keep = _drop_pixel_collisions(pair)
        name1, name2 = f"im{2 * p + 1:04d}", f"im{2 * p + 2:04d}"
        id1, id2 = 2 * p + 1, 2 * p + 2
        kps1 = np.array([pair.correspondences[i].x1 for i in keep])
        kps2 = np.array([pair.correspondences[i].x2 for i in keep])
        d1 = np.array([pair.correspondences[i].d1 for i in keep])
        d2 = np.array([pair.correspondences[i].d2 for i in keep])

        # world frame = camera-1 frame of this pair; image 2 carries the gt pose
        pids = np.arange(next_point, next_point + len(keep), dtype=np.int64)
        inlier = ~pair.outlier_mask[keep]
        xyz1 = pair.gt_d1[keep][:, None] * lift((kps1 - [K.cx, K.cy]) / [K.fx, K.fy])
        track_ids1 = np.where(inlier, pids, -1)
        model.images[id1] = SfmImage(
            name1, Pose(np.eye(3), np.zeros(3)), 1, kps1, track_ids1
        )
        model.images[id2] = SfmImage(name2, pair.gt_pose, 1, kps2, track_ids1.copy())
        for j, pid in enumerate(pids):
            if inlier[j]:
                model.points3d[int(pid)] = SfmPoint3D(
                    xyz1[j], np.array([128, 128, 128], dtype=np.uint8), 0.0,
                    [(id1, j), (id2, j)],
                )
        next_point += len(keep)

        mpath = scene_dir / "matches" / f"{name1}__{name2}.d2pm"
        write_matches(mpath, kps1, kps2)
        match_files.append(str(mpath))

        for name, kps, depths in ((name1, kps1, d1), (name2, kps2, d2)):
            grid = np.zeros((K.height, K.width), dtype=np.float32)
            px = np.clip(_round_half_away(kps[:, 0]), 0, K.width - 1).astype(int)
            py = np.clip(_round_half_away(kps[:, 1]), 0, K.height - 1).astype(int)
            grid[py, px] = depths
            write_pfm(depth_dir / f"{name}.pfm", grid)

    write_model_text(model, scene_dir / "model")
    return {
        "scene": scene_name,
        "model": str(scene_dir / "model"),
        "matches_dir": str(scene_dir / "matches"),
        "depth_dirs": {provenance: str(depth_dir)},
        "pairs": len(specs),
    }


def specs_for_grid(
    base_seed: int,
    n_pairs: int,
    **spec_kwargs,
) -> list[SceneSpec]:
    """n_pairs specs with per-pair seeds derived from the base seed."""
    return [
        SceneSpec(seed=derive_seed(base_seed, "pair", i), **spec_kwargs)
        for i in range(n_pairs)
    ]
