"""Camera models, pose representations, two-view residuals and pose errors.

Conventions (fixed for the whole engine):
  - a pose maps camera-1 coordinates into camera-2 coordinates,
    ``X2 = R @ X1 + t``;
  - normalized image coordinates live on the unit plane,
    ``x_norm = ((x - cx) / fx, (y - cy) / fy)``;
  - pixel thresholds for Sampson residuals are converted to the unit plane
    by dividing by the geometric mean focal length of image 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, NegativeDepth, UndefinedDirection, ZeroBaseline

_ROT_TOL = 1e-9


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def so3_exp(omega: np.ndarray) -> np.ndarray:
    """Rodrigues exponential map, safe near zero."""
    theta = float(np.linalg.norm(omega))
    K = skew(omega)
    if theta < 1e-10:
        # second-order Taylor keeps orthogonality to machine precision here
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def rotation_about_axis(axis: np.ndarray, degrees: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0:
        raise ValueError("rotation axis must be nonzero")
    return so3_exp(axis / n * np.deg2rad(degrees))


def rotation_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0, via the eigenvector method."""
    Rxx, Ryx, Rzx, Rxy, Ryy, Rzy, Rxz, Ryz, Rzz = R.flat
    K = np.array([
        [Rxx - Ryy - Rzz, 0, 0, 0],
        [Ryx + Rxy, Ryy - Rxx - Rzz, 0, 0],
        [Rzx + Rxz, Rzy + Ryz, Rzz - Rxx - Ryy, 0],
        [Ryz - Rzy, Rzx - Rxz, Rxy - Ryx, Rxx + Ryy + Rzz],
    ]) / 3.0
    eigvals, eigvecs = np.linalg.eigh(K)
    q = eigvecs[[3, 0, 1, 2], np.argmax(eigvals)]
    if q[0] < 0:
        q = -q
    return q


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    model: str = "PINHOLE"

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    @property
    def mean_focal(self) -> float:
        """Geometric mean focal length, used for pixel<->unit-plane threshold conversion."""
        return float(np.sqrt(self.fx * self.fy))


@dataclass
class Pose:
    """Rigid map from camera-1 coordinates to camera-2 coordinates."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if self.R.shape != (3, 3):
            raise ValueError("R must be 3x3")
        if np.abs(self.R.T @ self.R - np.eye(3)).max() > _ROT_TOL:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) > _ROT_TOL:
            raise ValueError("R is not a proper rotation")

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)

    def compose(self, first: "Pose") -> "Pose":
        """Pose applying `first` then self."""
        return Pose(self.R @ first.R, self.R @ first.t + self.t)


@dataclass
class Correspondence:
    """A matched keypoint pair, optionally carrying per-view depth."""

    x1: np.ndarray
    x2: np.ndarray
    d1: float | None = None
    d2: float | None = None

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=np.float64).reshape(2)
        self.x2 = np.asarray(self.x2, dtype=np.float64).reshape(2)


@dataclass
class ScaledPose:
    """Pose plus the multiplicative factor aligning image-2 depths to image-1 units."""

    pose: Pose
    sigma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be finite and positive")


@dataclass
class EssentialMatrix:
    E: np.ndarray

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=np.float64)
        if self.E.shape != (3, 3):
            raise ValueError("E must be 3x3")

    def constraint_residuals(self) -> tuple[float, float]:
        """(|det E|, ||2 E E^T E - tr(E E^T) E||_F) after Frobenius normalization."""
        E = self.E / np.linalg.norm(self.E)
        EEt = E @ E.T
        trace_c = 2.0 * EEt @ E - np.trace(EEt) * E
        return abs(float(np.linalg.det(E))), float(np.linalg.norm(trace_c))


# --- point plumbing ----------------------------------------------------------

def normalize_point(x: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.array([(x[0] - K.cx) / K.fx, (x[1] - K.cy) / K.fy])


def normalize_points(xs: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Vectorized normalize_point for an (N, 2) array."""
    xs = np.asarray(xs, dtype=np.float64)
    return (xs - [K.cx, K.cy]) / [K.fx, K.fy]


def lift(xn: np.ndarray) -> np.ndarray:
    """Unit-plane point(s) -> homogeneous 3-vector(s) (x, y, 1)."""
    xn = np.asarray(xn, dtype=np.float64)
    return np.concatenate([xn, np.ones(xn.shape[:-1] + (1,))], axis=-1)


def project(K: CameraIntrinsics, X: np.ndarray) -> np.ndarray:
    """Camera-frame 3D point(s) -> pixel coordinates. No cheirality check here."""
    X = np.asarray(X, dtype=np.float64)
    z = X[..., 2]
    return np.stack([K.fx * X[..., 0] / z + K.cx, K.fy * X[..., 1] / z + K.cy], axis=-1)


# --- two-view residuals ------------------------------------------------------

def essential_from_pose(pose: Pose) -> EssentialMatrix:
    """E = [t]x R, Frobenius-normalized."""
    tn = np.linalg.norm(pose.t)
    if tn < 1e-12:
        raise ZeroBaseline("translation norm below 1e-12; essential matrix undefined")
    E = skew(pose.t) @ pose.R
    return EssentialMatrix(E / np.linalg.norm(E))


def sampson_error_sq(E: EssentialMatrix | np.ndarray, x1n: np.ndarray, x2n: np.ndarray) -> float:
    """Squared Sampson distance on the unit plane for one correspondence."""
    Em = E.E if isinstance(E, EssentialMatrix) else np.asarray(E)
    m1 = lift(np.asarray(x1n, dtype=np.float64))
    m2 = lift(np.asarray(x2n, dtype=np.float64))
    Em1 = Em @ m1
    Etm2 = Em.T @ m2
    c = float(m2 @ Em1)
    denom = Em1[0] ** 2 + Em1[1] ** 2 + Etm2[0] ** 2 + Etm2[1] ** 2
    if denom < 1e-24:
        return float("inf")
    return c * c / float(denom)


def sym_reprojection_error(
    sp: ScaledPose,
    c: Correspondence,
    K1: CameraIntrinsics,
    K2: CameraIntrinsics,
) -> float:
    """max of forward/backward depth-lifted transfer errors, in pixels.

    Forward lifts the image-1 keypoint by d1 and projects into image 2;
    backward lifts the image-2 keypoint by sigma*d2 and projects into image 1.
    Returns +inf whenever a transferred point ends up behind a camera.
    """
    if c.d1 is None or c.d2 is None:
        raise ValueError("sym_reprojection_error requires both depths")
    R, t = sp.pose.R, sp.pose.t
    X1 = c.d1 * lift(normalize_point(c.x1, K1))
    X2_hat = R @ X1 + t
    if X2_hat[2] <= 1e-9:
        return float("inf")
    e_fwd = float(np.linalg.norm(c.x2 - project(K2, X2_hat)))
    X2 = sp.sigma * c.d2 * lift(normalize_point(c.x2, K2))
    X1_hat = R.T @ (X2 - t)
    if X1_hat[2] <= 1e-9:
        return float("inf")
    e_bwd = float(np.linalg.norm(c.x1 - project(K1, X1_hat)))
    return max(e_fwd, e_bwd)


def triangulate(pose: Pose, x1n: np.ndarray, x2n: np.ndarray) -> tuple[float, float]:
    """Two-view DLT triangulation; returns (depth in camera 1, depth in camera 2)."""
    tn = np.linalg.norm(pose.t)
    if tn < 1e-12:
        raise ZeroBaseline("cannot triangulate a pure-rotation pair")
    m1 = lift(np.asarray(x1n, dtype=np.float64))
    m2 = lift(np.asarray(x2n, dtype=np.float64))
    r1 = m1 / np.linalg.norm(m1)
    r2 = pose.R.T @ m2
    r2 = r2 / np.linalg.norm(r2)
    if np.linalg.norm(np.cross(r1, r2)) < 1e-9:
        raise Degenerate("viewing rays are parallel")
    d1, d2 = _triangulate_batch(pose.R, pose.t, m1[None, :], m2[None, :])
    d1, d2 = float(d1[0]), float(d2[0])
    if not (np.isfinite(d1) and np.isfinite(d2)):
        raise Degenerate("triangulated point at infinity")
    if d1 <= 0 or d2 <= 0:
        raise NegativeDepth(f"depths ({d1:.3g}, {d2:.3g}) not both positive")
    return d1, d2


def _triangulate_batch(
    R: np.ndarray, t: np.ndarray, m1: np.ndarray, m2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """DLT depths for (N, 3) homogeneous unit-plane points. No guards."""
    n = m1.shape[0]
    P2 = np.hstack([R, t.reshape(3, 1)])
    A = np.empty((n, 4, 4))
    # P1 = [I | 0]
    A[:, 0, :] = 0.0
    A[:, 0, 0] = -1.0
    A[:, 0, 2] = m1[:, 0]
    A[:, 1, :] = 0.0
    A[:, 1, 1] = -1.0
    A[:, 1, 2] = m1[:, 1]
    A[:, 2, :] = m2[:, 0, None] * P2[2] - P2[0]
    A[:, 3, :] = m2[:, 1, None] * P2[2] - P2[1]
    _, _, vt = np.linalg.svd(A)
    Xh = vt[:, -1, :]
    w = Xh[:, 3]
    scale = np.abs(Xh).max(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        X = Xh[:, :3] / w[:, None]
        d1 = X[:, 2]
        d2 = X @ R[2] + t[2]
    bad = np.abs(w) < 1e-12 * scale
    d1 = np.where(bad, np.inf, d1)
    d2 = np.where(bad, np.inf, d2)
    return d1, d2


# --- pose errors -------------------------------------------------------------

def rotation_error(R_est: np.ndarray, R_gt: np.ndarray) -> float:
    """Angle of the relative rotation, degrees in [0, 180].

    Same quantity as arccos((tr(R_est^T R_gt) - 1) / 2) with the argument
    clamped to [-1, 1], evaluated through atan2 so that angles near 0 and 180
    degrees do not lose half the available precision to arccos conditioning.
    """
    Q = np.asarray(R_est).T @ np.asarray(R_gt)
    s = 0.5 * np.sqrt(
        (Q[2, 1] - Q[1, 2]) ** 2 + (Q[0, 2] - Q[2, 0]) ** 2 + (Q[1, 0] - Q[0, 1]) ** 2
    )
    c = (np.trace(Q) - 1.0) / 2.0
    return float(np.degrees(np.arctan2(s, c)))


def translation_error(t_est: np.ndarray, t_gt: np.ndarray) -> float:
    """Angle between translation directions, degrees in [0, 180].

    Implements the benchmark formula literally: antipodal directions score
    180 (no folding of the sign ambiguity). Evaluated as
    atan2(||t_est x t_gt||, t_est . t_gt), which equals the clamped-arccos
    form but stays well conditioned at both ends and is exactly invariant to
    positive rescaling of either argument.
    """
    t_est = np.asarray(t_est, dtype=np.float64)
    t_gt = np.asarray(t_gt, dtype=np.float64)
    n1, n2 = np.linalg.norm(t_est), np.linalg.norm(t_gt)
    if n1 < 1e-12 or n2 < 1e-12:
        raise UndefinedDirection("translation direction undefined for zero vector")
    s = float(np.linalg.norm(np.cross(t_est, t_gt)))
    c = float(t_est @ t_gt)
    return float(np.degrees(np.arctan2(s, c)))


def pose_error(e_r: float, e_t: float) -> float:
    return max(e_r, e_t)
