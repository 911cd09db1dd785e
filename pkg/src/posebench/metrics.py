"""Pose-accuracy aggregation, depth metrics, correlation, and ranking.

mAA follows the image-matching-benchmark convention: the area under the
normalized cumulative pose-error distribution discretized at integer degree
sub-thresholds 1..T. Depth metrics come in raw, scale-aligned, and
affine-aligned flavors; alignment is least squares in depth space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlignmentDegenerate,
    DegenerateFit,
    DegenerateInput,
    EmptyGroup,
    EmptyInput,
    EmptyMask,
)

FAILURE_ERROR_DEG = 180.0  # failed estimates score as this so mAA penalizes them


@dataclass
class PairResult:
    pair_key: str
    estimator_id: str
    e_r: float
    e_t: float
    e_p: float
    inliers: int = 0
    runtime: float = 0.0

    def __post_init__(self):
        if abs(self.e_p - max(self.e_r, self.e_t)) > 1e-9:
            raise ValueError("e_p must equal max(e_r, e_t)")


@dataclass
class DepthEvalInput:
    z_est: np.ndarray
    z_gt: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.z_est = np.asarray(self.z_est, dtype=np.float64).reshape(-1)
        self.z_gt = np.asarray(self.z_gt, dtype=np.float64).reshape(-1)
        if self.z_est.shape != self.z_gt.shape:
            raise ValueError("z_est and z_gt must align")
        if self.mask is None:
            self.mask = np.ones(self.z_est.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)
            if self.mask.shape != self.z_est.shape:
                raise ValueError("mask must align with values")
        gt = self.z_gt[self.mask]
        if gt.size and not (np.isfinite(gt).all() and (gt > 0).all()):
            raise ValueError("masked-in ground-truth depths must be finite and positive")


@dataclass
class SceneSummary:
    scene_id: str
    values: dict[str, float] = field(default_factory=dict)  # metric name -> value
    pair_count: int = 0


def maa(errors, threshold: float = 10.0) -> float:
    """Mean fraction of errors strictly below each integer sub-threshold 1..T."""
    errors = np.asarray(errors, dtype=np.float64).reshape(-1)
    if errors.size == 0:
        raise EmptyInput("maa needs at least one error")
    errors = np.where(np.isfinite(errors), errors, np.inf)
    thresholds = np.arange(1, int(threshold) + 1, dtype=np.float64)
    return float(np.mean([(errors < th).mean() for th in thresholds]))


def abs_rel(inp: DepthEvalInput) -> float:
    if not inp.mask.any():
        raise EmptyMask("abs_rel over empty mask")
    ze, zg = inp.z_est[inp.mask], inp.z_gt[inp.mask]
    return float(np.mean(np.abs(zg - ze) / zg))


def delta1(inp: DepthEvalInput, ratio: float = 1.25) -> float:
    """Fraction with max(z_gt/z_est, z_est/z_gt) strictly below ratio.

    Non-positive predictions count as failures.
    """
    if not inp.mask.any():
        raise EmptyMask("delta1 over empty mask")
    ze, zg = inp.z_est[inp.mask], inp.z_gt[inp.mask]
    ok = np.isfinite(ze) & (ze > 0)
    r = np.full(ze.shape, np.inf)
    r[ok] = np.maximum(zg[ok] / ze[ok], ze[ok] / zg[ok])
    return float(np.mean(r < ratio))


def align_scale(inp: DepthEvalInput) -> DepthEvalInput:
    """Least-squares scale: s* = sum(z_est z_gt) / sum(z_est^2) over the mask."""
    if not inp.mask.any():
        raise EmptyMask("align_scale over empty mask")
    ze, zg = inp.z_est[inp.mask], inp.z_gt[inp.mask]
    denom = float(np.sum(ze * ze))
    if denom <= 0:
        raise AlignmentDegenerate("zero-norm predictions")
    s = float(np.sum(ze * zg)) / denom
    if not (np.isfinite(s) and s > 0):
        raise AlignmentDegenerate(f"non-positive scale {s}")
    return DepthEvalInput(inp.z_est * s, inp.z_gt, inp.mask.copy())


def align_affine(inp: DepthEvalInput) -> DepthEvalInput:
    """Least-squares (a, b) for a*z_est + b ~ z_gt; non-positive outputs get masked."""
    if not inp.mask.any():
        raise EmptyMask("align_affine over empty mask")
    ze, zg = inp.z_est[inp.mask], inp.z_gt[inp.mask]
    if ze.size < 2 or float(np.var(ze)) < 1e-24:
        raise DegenerateFit("constant predictions cannot be affinely aligned")
    n = ze.size
    sx, sy = ze.sum(), zg.sum()
    sxx, sxy = float(ze @ ze), float(ze @ zg)
    det = n * sxx - sx * sx
    a = (n * sxy - sx * sy) / det
    b = (sy * sxx - sx * sxy) / det
    corrected = a * inp.z_est + b
    new_mask = inp.mask & np.isfinite(corrected) & (corrected > 0)
    return DepthEvalInput(corrected, inp.z_gt, new_mask)


def pearson_and_fit(x, y) -> tuple[float, float, float]:
    """Pearson r and ordinary-least-squares (slope, intercept)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size:
        raise ValueError("x and y must align")
    if x.size < 2:
        raise DegenerateInput("need at least two samples")
    xm, ym = x - x.mean(), y - y.mean()
    var_x = float(xm @ xm)
    if var_x <= 0:
        raise DegenerateInput("constant x")
    cov = float(xm @ ym)
    var_y = float(ym @ ym)
    slope = cov / var_x
    intercept = float(y.mean() - slope * x.mean())
    r = 0.0 if var_y == 0 else cov / np.sqrt(var_x * var_y)
    return float(r), float(slope), intercept


@dataclass
class AggregateResult:
    group_means: dict[str, dict[str, float]]
    overall: dict[str, float]


def aggregate(
    per_scene: list[SceneSummary],
    grouping: dict[str, str] | None = None,
) -> AggregateResult:
    """Unweighted group means of per-scene values, then the unweighted mean of those.

    Scenes without a grouping entry form their own group.
    """
    if not per_scene:
        raise EmptyGroup("no scenes to aggregate")
    grouping = grouping or {}
    groups: dict[str, list[SceneSummary]] = {}
    for s in per_scene:
        groups.setdefault(grouping.get(s.scene_id, s.scene_id), []).append(s)
    metrics = sorted({k for s in per_scene for k in s.values})
    group_means: dict[str, dict[str, float]] = {}
    for g, scenes in sorted(groups.items()):
        if not scenes:
            raise EmptyGroup(f"group {g} is empty")
        gm = {}
        for m in metrics:
            vals = [s.values[m] for s in scenes if m in s.values]
            if vals:
                gm[m] = float(np.mean(vals))
        group_means[g] = gm
    overall = {}
    for m in metrics:
        vals = [gm[m] for gm in group_means.values() if m in gm]
        if vals:
            overall[m] = float(np.mean(vals))
    return AggregateResult(group_means, overall)


def rank_table(
    values: dict[str, dict[str, float]],
    higher_is_better: dict[str, bool] | None = None,
) -> dict[str, dict[str, int]]:
    """Per-column competition ranks; tied values share the better rank.

    Column direction defaults to higher-is-better except for columns whose
    name mentions abs_rel / absrel.
    """
    higher_is_better = higher_is_better or {}
    columns = sorted({c for per in values.values() for c in per})
    out: dict[str, dict[str, int]] = {}
    for col in columns:
        hib = higher_is_better.get(col, "absrel" not in col.lower().replace("_", ""))
        entries = [(m, per[col]) for m, per in values.items() if col in per]
        col_ranks = {}
        for m, v in entries:
            better = sum(1 for _, w in entries if ((w > v) if hib else (w < v)))
            col_ranks[m] = better + 1
        out[col] = col_ranks
    return out
