"""LO-RANSAC relative pose engine.

One engine realizes every benchmark estimator through an EstimatorConfig:

  B     five-point solver, Sampson scoring, Sampson local optimization
  H     depth solver, Sampson scoring, Sampson+reprojection LO, Cauchy BA(100)
  R     depth solver, symmetric reprojection for scoring and LO
  GT-H / GT-R   H / R wiring fed with depths triangulated under the reference pose

Scoring is MSAC: per-point loss min(residual^2, tau^2), inliers strictly
below the threshold. Sampson residuals live on the unit plane with the pixel
threshold divided by image 1's geometric mean focal length; reprojection
residuals stay in pixels. The engine runs exactly max_iterations draws of a
portable seeded PRNG (no adaptive stopping), refines every strict new best
with Levenberg-Marquardt on the truncated LO objective, runs one more LO pass
at the end, and (config permitting) a final Cauchy-robustified refinement on
the surviving inliers. Identical inputs give bitwise identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    EstimationFailed,
    InsufficientMatches,
    NoCheiralSolution,
    ZeroBaseline,
)
from .geometry import (
    CameraIntrinsics,
    Correspondence,
    EssentialMatrix,
    Pose,
    ScaledPose,
    _triangulate_batch,
    lift,
    normalize_points,
    skew,
    so3_exp,
)
from .prng import Rng
from .solvers import decompose_essential, depth_3pt_batch, five_point_batch

_LM_MAX_ITERS = 25
_LM_LAMBDA0 = 1e-3
_LM_LAMBDA_MAX = 1e10

# test hook: when set, scoring residuals are deliberately mis-wired (transposed
# model matrices) so the selfcheck's negative control demonstrably fails
_NEGATIVE_CONTROL = False


@dataclass(frozen=True)
class RansacSeed:
    seed: int


@dataclass(frozen=True)
class EstimatorConfig:
    """Wiring of one estimator: solver, residual choices, thresholds."""

    id: str
    minimal_solver: str  # "essential-5pt" | "depth-3pt"
    scoring_residual: str  # "sampson" | "reprojection"
    lo_residual: str  # "sampson" | "reprojection" | "sampson-plus-reprojection"
    final_refinement_iters: int = 0  # 0 means no final robust refinement
    sampson_threshold_px: float = 2.0
    reproj_threshold_px: float = 16.0
    max_iterations: int = 1000
    uses_gt_depth: bool = False

    def __post_init__(self):
        if self.minimal_solver not in ("essential-5pt", "depth-3pt"):
            raise ValueError(f"unknown minimal solver {self.minimal_solver!r}")
        if self.scoring_residual not in ("sampson", "reprojection"):
            raise ValueError(f"unknown scoring residual {self.scoring_residual!r}")
        if self.lo_residual not in ("sampson", "reprojection", "sampson-plus-reprojection"):
            raise ValueError(f"unknown LO residual {self.lo_residual!r}")
        if not (self.sampson_threshold_px > 0 and self.reproj_threshold_px > 0):
            raise ValueError("thresholds must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.minimal_solver == "essential-5pt" and self.scoring_residual != "sampson":
            raise ValueError("the depth-free solver cannot score reprojection residuals")

    @property
    def minimal_size(self) -> int:
        return 5 if self.minimal_solver == "essential-5pt" else 3

    @property
    def needs_depth(self) -> bool:
        return self.minimal_solver == "depth-3pt"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "minimal_solver": self.minimal_solver,
            "scoring_residual": self.scoring_residual,
            "lo_residual": self.lo_residual,
            "final_refinement_iters": self.final_refinement_iters,
            "sampson_threshold_px": self.sampson_threshold_px,
            "reproj_threshold_px": self.reproj_threshold_px,
            "max_iterations": self.max_iterations,
            "uses_gt_depth": self.uses_gt_depth,
        }

    @staticmethod
    def from_dict(d: dict) -> "EstimatorConfig":
        return EstimatorConfig(**d)

    @staticmethod
    def preset(estimator_id: str, **overrides) -> "EstimatorConfig":
        base = _PRESETS.get(estimator_id)
        if base is None:
            raise ValueError(f"unknown estimator id {estimator_id!r}; known: {sorted(_PRESETS)}")
        return replace(base, **overrides)


_PRESETS = {
    "B": EstimatorConfig("B", "essential-5pt", "sampson", "sampson"),
    "H": EstimatorConfig(
        "H", "depth-3pt", "sampson", "sampson-plus-reprojection", final_refinement_iters=100
    ),
    "R": EstimatorConfig("R", "depth-3pt", "reprojection", "reprojection"),
    "GT-H": EstimatorConfig(
        "GT-H",
        "depth-3pt",
        "sampson",
        "sampson-plus-reprojection",
        final_refinement_iters=100,
        uses_gt_depth=True,
    ),
    "GT-R": EstimatorConfig("GT-R", "depth-3pt", "reprojection", "reprojection", uses_gt_depth=True),
}


@dataclass
class PoseEstimate:
    scaled_pose: ScaledPose
    inlier_mask: np.ndarray
    score: float
    iterations_run: int
    success: bool = True


# --- packed correspondence arrays ---------------------------------------------

class _Packed:
    """Array view of a correspondence list, normalized once."""

    __slots__ = ("x1", "x2", "m1", "m2", "d1", "d2", "K1", "K2", "n")

    def __init__(self, corrs, K1: CameraIntrinsics, K2: CameraIntrinsics, need_depth: bool):
        self.n = len(corrs)
        self.x1 = np.array([c.x1 for c in corrs], dtype=np.float64).reshape(self.n, 2)
        self.x2 = np.array([c.x2 for c in corrs], dtype=np.float64).reshape(self.n, 2)
        self.m1 = lift(normalize_points(self.x1, K1))
        self.m2 = lift(normalize_points(self.x2, K2))
        if need_depth:
            if any(c.d1 is None or c.d2 is None for c in corrs):
                raise ValueError("estimator requires depth on every correspondence")
            self.d1 = np.array([c.d1 for c in corrs], dtype=np.float64)
            self.d2 = np.array([c.d2 for c in corrs], dtype=np.float64)
        else:
            self.d1 = self.d2 = None
        self.K1, self.K2 = K1, K2

    def subset(self, mask: np.ndarray) -> "_Packed":
        sub = object.__new__(_Packed)
        sub.n = int(mask.sum())
        sub.x1, sub.x2 = self.x1[mask], self.x2[mask]
        sub.m1, sub.m2 = self.m1[mask], self.m2[mask]
        sub.d1 = None if self.d1 is None else self.d1[mask]
        sub.d2 = None if self.d2 is None else self.d2[mask]
        sub.K1, sub.K2 = self.K1, self.K2
        return sub


# --- batched residuals ---------------------------------------------------------

def _sampson_sq_many(E: np.ndarray, m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """Squared unit-plane Sampson residuals, E (B,3,3) against points (N,3) -> (B,N)."""
    Em1 = np.einsum("bij,nj->bni", E, m1)
    Etm2 = np.einsum("bji,nj->bni", E, m2)
    c = np.einsum("ni,bni->bn", m2, Em1)
    denom = Em1[..., 0] ** 2 + Em1[..., 1] ** 2 + Etm2[..., 0] ** 2 + Etm2[..., 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = c * c / denom
    r2 = np.where(denom < 1e-24, np.inf, r2)
    return np.where(np.isnan(r2), np.inf, r2)


def _reproj_sq_many(
    R: np.ndarray, t: np.ndarray, sigma: np.ndarray, packed: _Packed
) -> np.ndarray:
    """Squared symmetric (max fwd/bwd) reprojection residuals in px^2 -> (B,N)."""
    K1, K2 = packed.K1, packed.K2
    X1 = packed.d1[:, None] * packed.m1  # (N,3)
    Y = np.einsum("bij,nj->bni", R, X1) + t[:, None, :]
    z = Y[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        du = K2.fx * Y[..., 0] / z + K2.cx - packed.x2[:, 0]
        dv = K2.fy * Y[..., 1] / z + K2.cy - packed.x2[:, 1]
        fwd = du * du + dv * dv
    fwd = np.where(z <= 1e-9, np.inf, fwd)

    Z = packed.d2[:, None] * packed.m2  # (N,3)
    Zs = sigma[:, None, None] * Z[None, :, :] - t[:, None, :]
    Xb = np.einsum("bji,bnj->bni", R, Zs)
    zb = Xb[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        du = K1.fx * Xb[..., 0] / zb + K1.cx - packed.x1[:, 0]
        dv = K1.fy * Xb[..., 1] / zb + K1.cy - packed.x1[:, 1]
        bwd = du * du + dv * dv
    bwd = np.where(zb <= 1e-9, np.inf, bwd)
    r2 = np.maximum(fwd, bwd)
    return np.where(np.isnan(r2), np.inf, r2)


def _essential_many(R: np.ndarray, t: np.ndarray) -> np.ndarray:
    """[t]x R for stacked poses, unnormalized (Sampson is scale free in E)."""
    B = R.shape[0]
    T = np.zeros((B, 3, 3))
    T[:, 0, 1] = -t[:, 2]
    T[:, 0, 2] = t[:, 1]
    T[:, 1, 0] = t[:, 2]
    T[:, 1, 2] = -t[:, 0]
    T[:, 2, 0] = -t[:, 1]
    T[:, 2, 1] = t[:, 0]
    return T @ R


def _scoring_sq(
    cfg: EstimatorConfig,
    packed: _Packed,
    R: np.ndarray | None = None,
    t: np.ndarray | None = None,
    sigma: np.ndarray | None = None,
    E: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """(squared residuals (B,N), squared threshold) for the scoring residual."""
    if cfg.scoring_residual == "sampson":
        tau = cfg.sampson_threshold_px / packed.K1.mean_focal
        if E is None:
            E = _essential_many(R, t)
        if _NEGATIVE_CONTROL:
            E = np.transpose(E, (0, 2, 1))
        return _sampson_sq_many(E, packed.m1, packed.m2), tau * tau
    tau = cfg.reproj_threshold_px
    if _NEGATIVE_CONTROL:
        R = np.transpose(R, (0, 2, 1))
    return _reproj_sq_many(R, t, sigma, packed), tau * tau


def score_model(
    sp: ScaledPose,
    corrs,
    config: EstimatorConfig,
    K1: CameraIntrinsics,
    K2: CameraIntrinsics,
) -> tuple[float, np.ndarray]:
    """MSAC score and inlier mask of one model; degenerate residuals are outliers."""
    packed = corrs if isinstance(corrs, _Packed) else _Packed(
        corrs, K1, K2, need_depth=config.scoring_residual == "reprojection"
    )
    r2, tau2 = _scoring_sq(
        config,
        packed,
        R=sp.pose.R[None],
        t=sp.pose.t[None],
        sigma=np.array([sp.sigma]),
    )
    r2 = r2[0]
    return float(np.minimum(r2, tau2).sum()), r2 < tau2


# --- local optimization ----------------------------------------------------------

def _lo_terms(cfg: EstimatorConfig) -> tuple[bool, bool]:
    return (
        cfg.lo_residual in ("sampson", "sampson-plus-reprojection"),
        cfg.lo_residual in ("reprojection", "sampson-plus-reprojection"),
    )


def _residual_blocks(R, t, sigma, packed: _Packed, use_sampson, use_reproj):
    """Per-point residual vectors and Jacobians w.r.t. (omega, dt, dlogsigma).

    Sampson contributes one pixel-unit row per point, reprojection two rows
    (the worse transfer direction). Rows with non-finite residuals are
    returned as invalid. All derivatives are taken at the current state
    (omega = dt = dlogsigma = 0).
    """
    blocks = []
    f = packed.K1.mean_focal
    ex = np.eye(3)
    if use_sampson:
        E = skew(t) @ R
        dE = np.empty((6, 3, 3))
        for k in range(3):
            dE[k] = skew(t) @ (skew(ex[k]) @ R)
            dE[3 + k] = skew(ex[k]) @ R
        m1, m2 = packed.m1, packed.m2
        Em1 = m1 @ E.T
        Etm2 = m2 @ E
        c = np.einsum("ni,ni->n", m2, Em1)
        D = Em1[:, 0] ** 2 + Em1[:, 1] ** 2 + Etm2[:, 0] ** 2 + Etm2[:, 1] ** 2
        dEm1 = np.einsum("pij,nj->pni", dE, m1)
        dEtm2 = np.einsum("pji,nj->pni", dE, m2)
        dc = np.einsum("ni,pni->pn", m2, dEm1)
        dD = 2.0 * (
            Em1[:, 0] * dEm1[..., 0]
            + Em1[:, 1] * dEm1[..., 1]
            + Etm2[:, 0] * dEtm2[..., 0]
            + Etm2[:, 1] * dEtm2[..., 1]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            sqD = np.sqrt(D)
            r = f * c / sqD
            dr = f * (dc / sqD - c * dD / (2.0 * D * sqD))
        valid = D > 1e-24
        J = np.zeros((packed.n, 1, 7))
        J[:, 0, :6] = dr.T
        blocks.append(("sampson", r[:, None], J, valid))
    if use_reproj:
        K1, K2 = packed.K1, packed.K2
        X1 = packed.d1[:, None] * packed.m1
        Y = X1 @ R.T + t
        zf = Y[:, 2]
        valid_f = zf > 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            uf = np.stack([K2.fx * Y[:, 0] / zf + K2.cx, K2.fy * Y[:, 1] / zf + K2.cy], axis=1)
            rf = uf - packed.x2  # residual = u - x2; objective uses its norm
            dproj_f = np.zeros((packed.n, 2, 3))
            dproj_f[:, 0, 0] = K2.fx / zf
            dproj_f[:, 0, 2] = -K2.fx * Y[:, 0] / zf**2
            dproj_f[:, 1, 1] = K2.fy / zf
            dproj_f[:, 1, 2] = -K2.fy * Y[:, 1] / zf**2
        dY = np.zeros((packed.n, 3, 7))
        # d(exp(w) R X1)/dw = -[R X1]x ; Y - t = R X1
        RX1 = Y - t
        dY[:, 0, 1], dY[:, 0, 2] = RX1[:, 2], -RX1[:, 1]
        dY[:, 1, 0], dY[:, 1, 2] = -RX1[:, 2], RX1[:, 0]
        dY[:, 2, 0], dY[:, 2, 1] = RX1[:, 1], -RX1[:, 0]
        dY[:, 0, 3] = dY[:, 1, 4] = dY[:, 2, 5] = 1.0
        Jf = np.einsum("nij,njp->nip", dproj_f, dY)

        Z = sigma * packed.d2[:, None] * packed.m2
        Zt = Z - t
        Xb = Zt @ R
        zb = Xb[:, 2]
        valid_b = zb > 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            ub = np.stack([K1.fx * Xb[:, 0] / zb + K1.cx, K1.fy * Xb[:, 1] / zb + K1.cy], axis=1)
            rb = ub - packed.x1
            dproj_b = np.zeros((packed.n, 2, 3))
            dproj_b[:, 0, 0] = K1.fx / zb
            dproj_b[:, 0, 2] = -K1.fx * Xb[:, 0] / zb**2
            dproj_b[:, 1, 1] = K1.fy / zb
            dproj_b[:, 1, 2] = -K1.fy * Xb[:, 1] / zb**2
        dXb = np.zeros((packed.n, 3, 7))
        # X_b = R(w)^T (Z - t): d/dw = R^T [Zt]x, d/dt = -R^T, d/ds = R^T Z
        SZt = np.zeros((packed.n, 3, 3))
        SZt[:, 0, 1], SZt[:, 0, 2] = -Zt[:, 2], Zt[:, 1]
        SZt[:, 1, 0], SZt[:, 1, 2] = Zt[:, 2], -Zt[:, 0]
        SZt[:, 2, 0], SZt[:, 2, 1] = -Zt[:, 1], Zt[:, 0]
        dXb[:, :, :3] = np.einsum("ji,njk->nik", R, SZt)
        dXb[:, :, 3:6] = -R.T[None, :, :]
        dXb[:, :, 6] = Z @ R
        Jb = np.einsum("nij,njp->nip", dproj_b, dXb)

        ef = np.einsum("ni,ni->n", rf, rf)
        eb = np.einsum("ni,ni->n", rb, rb)
        ef = np.where(valid_f, ef, np.inf)
        eb = np.where(valid_b, eb, np.inf)
        fwd_worse = ef >= eb
        r = np.where(fwd_worse[:, None], rf, rb)
        J = np.where(fwd_worse[:, None, None], Jf, Jb)
        valid = np.where(fwd_worse, valid_f, valid_b)
        blocks.append(("reprojection", r, J, valid))
    return blocks


def lo_objective(
    R: np.ndarray,
    t: np.ndarray,
    sigma: float,
    packed: _Packed,
    cfg: EstimatorConfig,
) -> float:
    """Truncated LO objective: sum over configured terms of min(r^2, tau^2)."""
    use_s, use_r = _lo_terms(cfg)
    total = 0.0
    if use_s:
        E = (skew(t) @ R)[None]
        r2 = _sampson_sq_many(E, packed.m1, packed.m2)[0] * packed.K1.mean_focal**2
        tau2 = cfg.sampson_threshold_px**2
        total += float(np.minimum(r2, tau2).sum())
    if use_r:
        r2 = _reproj_sq_many(R[None], t[None], np.array([sigma]), packed)[0]
        total += float(np.minimum(r2, cfg.reproj_threshold_px**2).sum())
    return total


def lo_objective_params(
    params: np.ndarray,
    base: ScaledPose,
    packed: _Packed,
    cfg: EstimatorConfig,
) -> float:
    """Objective as a function of the 7-vector (omega, dt, dlogsigma) around base."""
    R = so3_exp(params[:3]) @ base.pose.R
    t = base.pose.t + params[3:6]
    sigma = base.sigma * float(np.exp(params[6]))
    return lo_objective(R, t, sigma, packed, cfg)


def lo_gradient(
    base: ScaledPose,
    packed: _Packed,
    cfg: EstimatorConfig,
) -> np.ndarray:
    """Analytic gradient of the truncated LO objective at params = 0."""
    use_s, use_r = _lo_terms(cfg)
    R, t, sigma = base.pose.R, base.pose.t, base.sigma
    g = np.zeros(7)
    taus = {"sampson": cfg.sampson_threshold_px, "reprojection": cfg.reproj_threshold_px}
    for name, r, J, valid in _residual_blocks(R, t, sigma, packed, use_s, use_r):
        e2 = np.einsum("ni,ni->n", r, r)
        active = valid & (e2 < taus[name] ** 2)
        if active.any():
            g += 2.0 * np.einsum("ni,nip->p", r[active], J[active])
    return g


def _lm_refine(
    sp: ScaledPose,
    packed: _Packed,
    cfg: EstimatorConfig,
    max_iters: int,
    cauchy: bool,
) -> tuple[ScaledPose, bool]:
    """LM over (local rotation, t, log sigma); returns (state, improved).

    With cauchy=False the objective is the truncated LO objective; with
    cauchy=True it is the Cauchy-robustified (untruncated) combined loss with
    scale equal to each term's inlier threshold.
    """
    use_s, use_r = _lo_terms(cfg)
    taus = {"sampson": cfg.sampson_threshold_px, "reprojection": cfg.reproj_threshold_px}

    def objective(R, t, sigma):
        if not cauchy:
            return lo_objective(R, t, sigma, packed, cfg)
        total = 0.0
        if use_s:
            E = (skew(t) @ R)[None]
            r2 = _sampson_sq_many(E, packed.m1, packed.m2)[0] * packed.K1.mean_focal**2
            c2 = taus["sampson"] ** 2
            total += float(np.sum(np.where(np.isfinite(r2), c2 * np.log1p(r2 / c2), np.inf)))
        if use_r:
            r2 = _reproj_sq_many(R[None], t[None], np.array([sigma]), packed)[0]
            c2 = taus["reprojection"] ** 2
            total += float(np.sum(np.where(np.isfinite(r2), c2 * np.log1p(r2 / c2), np.inf)))
        return total

    R, t, sigma = sp.pose.R.copy(), sp.pose.t.copy(), float(sp.sigma)
    obj = objective(R, t, sigma)
    if not np.isfinite(obj):
        return sp, False
    obj0 = obj
    lam = _LM_LAMBDA0
    for _ in range(max_iters):
        rows_r, rows_J = [], []
        for name, r, J, valid in _residual_blocks(R, t, sigma, packed, use_s, use_r):
            e2 = np.einsum("ni,ni->n", r, r)
            if cauchy:
                w = np.where(valid, 1.0 / (1.0 + e2 / taus[name] ** 2), 0.0)
            else:
                w = (valid & (e2 < taus[name] ** 2)).astype(np.float64)
            sw = np.sqrt(w)[:, None]
            rows_r.append((r * sw).reshape(-1))
            rows_J.append((J * sw[:, :, None]).reshape(-1, 7))
        rv = np.concatenate(rows_r)
        Jv = np.concatenate(rows_J)
        ok = np.isfinite(rv) & np.isfinite(Jv).all(axis=1)
        rv, Jv = rv[ok], Jv[ok]
        g = Jv.T @ rv
        H = Jv.T @ Jv
        if np.linalg.norm(g) < 1e-14:
            break
        diag = np.maximum(np.diag(H), 1e-12)
        try:
            step = np.linalg.solve(H + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            if lam > _LM_LAMBDA_MAX:
                break
            continue
        R_new = so3_exp(step[:3]) @ R
        t_new = t + step[3:6]
        sigma_new = sigma * float(np.exp(np.clip(step[6], -10, 10)))
        obj_new = objective(R_new, t_new, sigma_new)
        if obj_new < obj:
            R, t, sigma, obj = R_new, t_new, sigma_new, obj_new
            lam = max(lam / 3.0, 1e-12)
            if abs(np.linalg.norm(step)) < 1e-14:
                break
        else:
            lam *= 10.0
            if lam > _LM_LAMBDA_MAX:
                break
    if obj < obj0 and np.isfinite(sigma) and sigma > 0:
        return ScaledPose(Pose(R, t), sigma), True
    return sp, False


def local_optimize(
    initial: ScaledPose,
    inliers,
    config: EstimatorConfig,
    K1: CameraIntrinsics,
    K2: CameraIntrinsics,
) -> ScaledPose:
    """LM refinement of the truncated LO objective; never worse than the input.

    "Never worse" is enforced on the MSAC scoring objective: if the refined
    model scores above the input it is discarded and the input returned.
    """
    need_depth = config.needs_depth or config.lo_residual != "sampson"
    packed = inliers if isinstance(inliers, _Packed) else _Packed(inliers, K1, K2, need_depth)
    if packed.n < config.minimal_size:
        raise InsufficientMatches(
            f"local optimization needs >= {config.minimal_size} inliers, got {packed.n}"
        )
    refined, improved = _lm_refine(initial, packed, config, _LM_MAX_ITERS, cauchy=False)
    if not improved:
        return initial
    s_new, _ = score_model(refined, packed, config, K1, K2)
    s_old, _ = score_model(initial, packed, config, K1, K2)
    return refined if s_new <= s_old else initial


# --- the engine ------------------------------------------------------------------

def _draw_samples(rng: Rng, n: int, k: int, iterations: int) -> np.ndarray:
    out = np.empty((iterations, k), dtype=np.int64)
    for i in range(iterations):
        out[i] = rng.sample_indices(n, k)
    return out


def _distinct_mask(pts: np.ndarray) -> np.ndarray:
    """(B, k, 2) sampled image points -> mask of samples with pairwise distinct points."""
    k = pts.shape[1]
    ok = np.ones(pts.shape[0], dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            d = pts[:, i] - pts[:, j]
            ok &= (d * d).sum(axis=1) > 1e-18
    return ok


_SCORE_CHUNK = 512


def _score_candidates(cfg, packed, R=None, t=None, sigma=None, E=None):
    """Chunked MSAC scores and inlier counts for stacked candidate models."""
    count = E.shape[0] if E is not None else R.shape[0]
    scores = np.empty(count)
    inlier_counts = np.empty(count, dtype=np.int64)
    for lo in range(0, count, _SCORE_CHUNK):
        hi = min(lo + _SCORE_CHUNK, count)
        r2, tau2 = _scoring_sq(
            cfg,
            packed,
            R=None if R is None else R[lo:hi],
            t=None if t is None else t[lo:hi],
            sigma=None if sigma is None else sigma[lo:hi],
            E=None if E is None else E[lo:hi],
        )
        scores[lo:hi] = np.minimum(r2, tau2).sum(axis=1)
        inlier_counts[lo:hi] = (r2 < tau2).sum(axis=1)
    return scores, inlier_counts


def ransac_estimate(
    corrs,
    config: EstimatorConfig,
    K1: CameraIntrinsics,
    K2: CameraIntrinsics,
    seed: RansacSeed | int,
) -> PoseEstimate:
    """Run the configured LO-RANSAC estimator over the correspondences."""
    k = config.minimal_size
    n = len(corrs) if not isinstance(corrs, _Packed) else corrs.n
    if n < k:
        raise InsufficientMatches(f"need at least {k} correspondences, got {n}")
    packed = corrs if isinstance(corrs, _Packed) else _Packed(corrs, K1, K2, config.needs_depth)
    seed_val = seed.seed if isinstance(seed, RansacSeed) else int(seed)
    rng = Rng(seed_val)
    samples = _draw_samples(rng, n, k, config.max_iterations)
    iters = config.max_iterations

    # solve all minimal samples in one batch
    if config.needs_depth:
        A = packed.d1[samples][:, :, None] * packed.m1[samples]
        Bp = packed.d2[samples][:, :, None] * packed.m2[samples]
        Rb, tb, sigb, valid = depth_3pt_batch(A, Bp)
        valid &= _distinct_mask(packed.m1[samples][:, :, :2])
        valid &= _distinct_mask(packed.m2[samples][:, :, :2])
        if valid.any():
            sc, cnt = _score_candidates(
                config, packed, R=Rb[valid], t=tb[valid], sigma=sigb[valid]
            )
            iter_scores = np.full(iters, np.inf)
            iter_counts = np.zeros(iters, dtype=np.int64)
            vi = np.flatnonzero(valid)
            iter_scores[vi] = sc
            iter_counts[vi] = cnt
        else:
            iter_scores = np.full(iters, np.inf)
            iter_counts = np.zeros(iters, dtype=np.int64)

        def model_at(i) -> ScaledPose:
            return ScaledPose(Pose(Rb[i], tb[i]), float(sigb[i]))

    else:
        m1s, m2s = packed.m1[samples], packed.m2[samples]
        ok = _distinct_mask(m1s[:, :, :2]) & _distinct_mask(m2s[:, :, :2])
        E_all, cand_iter, degen = five_point_batch(m1s, m2s)
        if E_all.shape[0]:
            keep = ok[cand_iter]
            E_all, cand_iter = E_all[keep], cand_iter[keep]
        if E_all.shape[0]:
            sc, cnt = _score_candidates(config, packed, E=E_all)
            # best candidate per iteration (cand_iter ascends already)
            order = np.lexsort((sc, cand_iter))
            first = np.ones(order.size, dtype=bool)
            first[1:] = cand_iter[order][1:] != cand_iter[order][:-1]
            best_rows = order[first]
            iter_scores = np.full(iters, np.inf)
            iter_counts = np.zeros(iters, dtype=np.int64)
            iter_cand = np.full(iters, -1, dtype=np.int64)
            iter_scores[cand_iter[best_rows]] = sc[best_rows]
            iter_counts[cand_iter[best_rows]] = cnt[best_rows]
            iter_cand[cand_iter[best_rows]] = best_rows
            max_count_all = int(cnt.max()) if cnt.size else 0
        else:
            iter_scores = np.full(iters, np.inf)
            iter_counts = np.zeros(iters, dtype=np.int64)
            iter_cand = np.full(iters, -1, dtype=np.int64)
            max_count_all = 0

    if config.needs_depth:
        max_count_all = int(iter_counts.max()) if iters else 0

    if max_count_all < k:
        raise EstimationFailed(
            f"no candidate reached {k} inliers over {iters} iterations"
        )

    # strict prefix minima are the only possible new bests; LO can only lower
    # the bar further, so walking these indices reproduces the sequential loop
    running = np.minimum.accumulate(iter_scores)
    is_new_best = np.zeros(iters, dtype=bool)
    is_new_best[0] = np.isfinite(iter_scores[0])
    is_new_best[1:] = iter_scores[1:] < running[:-1]

    best_score = np.inf
    best_sp: ScaledPose | None = None

    def lo_pass(sp: ScaledPose, score: float) -> tuple[ScaledPose, float]:
        _, mask = score_model(sp, packed, config, K1, K2)
        if int(mask.sum()) < k:
            return sp, score
        refined = local_optimize(sp, packed.subset(mask), config, K1, K2)
        new_score, _ = score_model(refined, packed, config, K1, K2)
        if new_score < score:
            return refined, new_score
        return sp, score

    for i in np.flatnonzero(is_new_best):
        if iter_scores[i] >= best_score:
            continue
        if config.needs_depth:
            sp = model_at(i)
        else:
            row = int(iter_cand[i])
            _, mask_i = score_model_E(E_all[row], packed, config)
            try:
                pose = decompose_essential(
                    EssentialMatrix(E_all[row]),
                    _mask_corrs(packed, mask_i if mask_i.any() else None),
                )
            except NoCheiralSolution:
                continue
            sp = ScaledPose(pose, 1.0)
            # scored value of the decomposed pose equals the E score by construction
        best_sp, best_score = lo_pass(sp, float(iter_scores[i]))

    if best_sp is None:
        raise EstimationFailed("no usable candidate model")

    # final LO pass, then optional robust refinement, both score guarded
    best_sp, best_score = lo_pass(best_sp, best_score)
    if config.final_refinement_iters > 0:
        _, mask = score_model(best_sp, packed, config, K1, K2)
        if int(mask.sum()) >= k:
            refined, improved = _lm_refine(
                best_sp, packed.subset(mask), config, config.final_refinement_iters, cauchy=True
            )
            if improved:
                new_score, _ = score_model(refined, packed, config, K1, K2)
                if new_score <= best_score:
                    best_sp, best_score = refined, new_score

    final_score, final_mask = score_model(best_sp, packed, config, K1, K2)
    if int(final_mask.sum()) < k:
        raise EstimationFailed("final model lost its inlier support")
    return PoseEstimate(best_sp, final_mask, final_score, iters, True)


def score_model_E(E: np.ndarray, packed: _Packed, cfg: EstimatorConfig):
    """Sampson MSAC score/mask of a raw essential matrix (depth-free path)."""
    tau = cfg.sampson_threshold_px / packed.K1.mean_focal
    r2 = _sampson_sq_many(E[None], packed.m1, packed.m2)[0]
    return float(np.minimum(r2, tau * tau).sum()), r2 < tau * tau


def _mask_corrs(packed: _Packed, mask: np.ndarray | None) -> list[Correspondence]:
    idx = range(packed.n) if mask is None else np.flatnonzero(mask)
    return [
        Correspondence(packed.m1[i, :2], packed.m2[i, :2])
        for i in idx
    ]


def gt_depth_estimate(
    corrs,
    gt_pose: Pose,
    config: EstimatorConfig,
    K1: CameraIntrinsics,
    K2: CameraIntrinsics,
    seed: RansacSeed | int,
) -> PoseEstimate:
    """Oracle estimator: depths triangulated under the reference pose.

    Matches whose rays are parallel or triangulate behind a camera are
    dropped before running the configured depth estimator.
    """
    if not config.uses_gt_depth:
        raise ValueError("gt_depth_estimate needs a GT-H or GT-R config")
    if np.linalg.norm(gt_pose.t) < 1e-12:
        raise ZeroBaseline("reference pose has no baseline; cannot triangulate")
    base = [Correspondence(c.x1, c.x2) for c in corrs]
    x1 = np.array([c.x1 for c in base])
    x2 = np.array([c.x2 for c in base])
    m1 = lift(normalize_points(x1, K1))
    m2 = lift(normalize_points(x2, K2))
    r1 = m1 / np.linalg.norm(m1, axis=1, keepdims=True)
    r2 = (m2 @ gt_pose.R) / np.linalg.norm(m2, axis=1, keepdims=True)
    not_parallel = np.linalg.norm(np.cross(r1, r2), axis=1) >= 1e-9
    d1, d2 = _triangulate_batch(gt_pose.R, gt_pose.t, m1, m2)
    keep = not_parallel & np.isfinite(d1) & np.isfinite(d2) & (d1 > 0) & (d2 > 0)
    if int(keep.sum()) < config.minimal_size:
        raise InsufficientMatches(
            f"only {int(keep.sum())} matches survive reference triangulation"
        )
    injected = [
        Correspondence(base[i].x1, base[i].x2, float(d1[i]), float(d2[i]))
        for i in np.flatnonzero(keep)
    ]
    return ransac_estimate(injected, config, K1, K2, seed)
