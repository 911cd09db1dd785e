"""Shared fixtures: independent synthetic two-view scenes and oracle helpers.

Everything here intentionally avoids the package's own PRNG and scene
generator so the tests cross-check the engine against an independent
construction path.
"""

import numpy as np

from posebench.geometry import CameraIntrinsics, Correspondence, Pose, lift, project

DEFAULT_K = CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)


def random_rotation(rng, max_angle_rad=0.8):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.05, max_angle_rad)
    K = np.array([
        [0, -axis[2], axis[1]],
        [axis[2], 0, -axis[0]],
        [-axis[1], axis[0], 0],
    ])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def random_pose(rng, baseline=1.5, max_angle_rad=0.6):
    R = random_rotation(rng, max_angle_rad)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return Pose(R, -R @ (direction * baseline))


def two_view_scene(
    rng,
    pose,
    K=DEFAULT_K,
    n=100,
    pixel_noise=0.0,
    outlier_fraction=0.0,
    depth_noise=0.0,
    depth_range=(4.0, 10.0),
):
    """Covisible scene with exact ground truth; returns (corrs, gt arrays)."""
    pts, x1s, x2s = [], [], []
    while len(pts) < n:
        px = np.array([rng.uniform(0, K.width), rng.uniform(0, K.height)])
        z = rng.uniform(*depth_range)
        X = z * np.array([(px[0] - K.cx) / K.fx, (px[1] - K.cy) / K.fy, 1.0])
        X2 = pose.R @ X + pose.t
        if X2[2] < 0.3:
            continue
        px2 = project(K, X2)
        if not (0 <= px2[0] < K.width and 0 <= px2[1] < K.height):
            continue
        pts.append((X, X2))
        x1s.append(px)
        x2s.append(px2)
    gt_d1 = np.array([p[0][2] for p in pts])
    gt_d2 = np.array([p[1][2] for p in pts])
    n_out = int(round(outlier_fraction * n))
    out_idx = set(rng.choice(n, n_out, replace=False).tolist()) if n_out else set()
    corrs = []
    for i in range(n):
        x1 = x1s[i] + rng.normal(0, pixel_noise, 2) if pixel_noise else x1s[i].copy()
        x2 = x2s[i] + rng.normal(0, pixel_noise, 2) if pixel_noise else x2s[i].copy()
        d1, d2 = gt_d1[i], gt_d2[i]
        if i in out_idx:
            x2 = np.array([rng.uniform(0, K.width), rng.uniform(0, K.height)])
            d2 = rng.uniform(*depth_range)
        if depth_noise:
            d1 = d1 * np.exp(rng.normal(0, depth_noise))
            d2 = d2 * np.exp(rng.normal(0, depth_noise))
        corrs.append(Correspondence(x1, x2, float(d1), float(d2)))
    outliers = np.zeros(n, dtype=bool)
    outliers[list(out_idx)] = True
    return corrs, pose, gt_d1, gt_d2, outliers


def normalized_corrs(corrs, K1=DEFAULT_K, K2=DEFAULT_K):
    out = []
    for c in corrs:
        x1n = (c.x1 - [K1.cx, K1.cy]) / [K1.fx, K1.fy]
        x2n = (c.x2 - [K2.cx, K2.cy]) / [K2.fx, K2.fy]
        out.append(Correspondence(x1n, x2n, c.d1, c.d2))
    return out


def quat_wxyz(R):
    """Quaternion via Shepperd's branch method (independent of the package)."""
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    return np.array([w, x, y, z])
