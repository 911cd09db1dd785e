"""Exporters: run a matcher / depth model and emit engine-readable files.

Matching optionally happens at a bounded working resolution; exported
keypoints are always native pixels (the manifest declares this). Depth grids
are written exactly as the model produced them (invalid values included;
filtering is the engine's job), at whatever resolution the model chose, with
the manifest recording it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .formats import write_d2pm, write_pfm
from .manifest import AdapterManifest
from .resize import downsample_nn, to_native, working_size

MATCH_CAP = 2048


def export_matches(
    image1: np.ndarray,
    name1: str,
    image2: np.ndarray,
    name2: str,
    matcher,
    out_dir: str | Path,
    manifest: AdapterManifest | None = None,
    cap: int = MATCH_CAP,
) -> Path | None:
    """Match a pair and write `<name1>__<name2>.d2pm`; None on matcher failure."""
    out_dir = Path(out_dir)
    long_side = getattr(matcher, "long_side", None)
    if manifest is None:
        manifest = AdapterManifest(
            tool=getattr(matcher, "name", type(matcher).__name__),
            tool_version=str(getattr(matcher, "version", "unknown")),
            resize_policy=f"long-side-{long_side}" if long_side else "none",
        )
    pair_key = f"{name1}__{name2}"
    h1, w1 = image1.shape[:2]
    h2, w2 = image2.shape[:2]
    ww1, wh1 = working_size(w1, h1, long_side)
    ww2, wh2 = working_size(w2, h2, long_side)
    try:
        work1 = downsample_nn(np.asarray(image1), ww1, wh1)
        work2 = downsample_nn(np.asarray(image2), ww2, wh2)
        kps1, kps2, conf = matcher(work1, work2)
    except Exception as exc:  # noqa: BLE001 - tool output is untrusted
        manifest.record_failure(pair_key, f"{type(exc).__name__}: {exc}")
        manifest.write(out_dir)
        return None
    kps1 = to_native(kps1, (ww1, wh1), (w1, h1))
    kps2 = to_native(kps2, (ww2, wh2), (w2, h2))
    if len(kps1) > cap:
        if conf is not None:
            order = np.argsort(-np.asarray(conf), kind="stable")[:cap]
            order = np.sort(order)
        else:
            order = np.arange(cap)
        kps1, kps2 = kps1[order], kps2[order]
        conf = None if conf is None else np.asarray(conf)[order]
    path = out_dir / f"{pair_key}.d2pm"
    write_d2pm(path, kps1, kps2, conf)
    manifest.record_file(path, pair=pair_key, count=int(len(kps1)))
    manifest.write(out_dir)
    return path


def export_depth(
    image: np.ndarray,
    name: str,
    mde,
    out_dir: str | Path,
    manifest: AdapterManifest | None = None,
    backbone: str = "",
    intrinsics: np.ndarray | None = None,
) -> Path | None:
    """Run one depth model on one image and write `<name>.pfm`; None on failure."""
    out_dir = Path(out_dir)
    long_side = getattr(mde, "long_side", None)
    if manifest is None:
        manifest = AdapterManifest(
            tool=getattr(mde, "name", type(mde).__name__),
            tool_version=str(getattr(mde, "version", "unknown")),
            model=getattr(mde, "name", ""),
            backbone=backbone,
            intrinsics_at_inference=intrinsics is not None,
            resize_policy=f"long-side-{long_side}" if long_side else "none",
        )
    try:
        if intrinsics is not None:
            depth = mde(image, intrinsics=intrinsics)
        else:
            depth = mde(image)
        depth = np.asarray(depth, dtype=np.float32)
        if depth.ndim != 2:
            raise ValueError(f"model returned shape {depth.shape}, expected 2D")
    except Exception as exc:  # noqa: BLE001
        manifest.record_failure(name, f"{type(exc).__name__}: {exc}")
        manifest.write(out_dir)
        return None
    path = out_dir / f"{Path(name).stem}.pfm"
    write_pfm(path, depth)
    manifest.record_file(
        path, image=name, width=int(depth.shape[1]), height=int(depth.shape[0])
    )
    manifest.write(out_dir)
    return path
