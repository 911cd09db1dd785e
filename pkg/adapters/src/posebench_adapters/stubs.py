"""Dependency-free stand-ins for matchers and depth models.

These exist so the export pipeline and its file contracts can be exercised
in CI without model weights. Real tools register alongside them under their
own names; the exporters only care about the call signatures:

  matcher(image1, image2) -> (kps1, kps2, confidence | None)   [working res]
  mde(image) -> depth grid (float32-ish 2D array)               [own res]
"""

from __future__ import annotations

import numpy as np

from .resize import downsample_nn, working_size


class StubCheckerboardMatcher:
    """Detects checkerboard cell corners and matches them in grid order.

    Corners are reported with exact sub-pixel boundary coordinates
    (transition between pixel c and c+1 lies at c + 0.5), so round-tripping
    through a resized working frame stays exact for divisible cell sizes.
    """

    name = "stub-checkerboard"
    version = "1"

    def __init__(self, long_side: int | None = 1024):
        self.long_side = long_side

    def _corners(self, image: np.ndarray) -> np.ndarray:
        binary = image > image.mean()
        cols = np.flatnonzero((binary[:, 1:] != binary[:, :-1]).any(axis=0))
        rows = np.flatnonzero((binary[1:, :] != binary[:-1, :]).any(axis=1))
        xs = cols + 0.5
        ys = rows + 0.5
        if xs.size == 0 or ys.size == 0:
            return np.zeros((0, 2))
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def __call__(self, image1: np.ndarray, image2: np.ndarray):
        c1 = self._corners(image1)
        c2 = self._corners(image2)
        n = min(len(c1), len(c2))
        return c1[:n], c2[:n], None


class StubGridMatcher:
    """Uniform keypoint grid, identity-matched; works on any image pair."""

    name = "stub-grid"
    version = "1"

    def __init__(self, step: int = 32, long_side: int | None = 1024):
        self.step = step
        self.long_side = long_side

    def __call__(self, image1: np.ndarray, image2: np.ndarray):
        h = min(image1.shape[0], image2.shape[0])
        w = min(image1.shape[1], image2.shape[1])
        xs = np.arange(self.step // 2, w, self.step, dtype=np.float64)
        ys = np.arange(self.step // 2, h, self.step, dtype=np.float64)
        gx, gy = np.meshgrid(xs, ys)
        kps = np.stack([gx.ravel(), gy.ravel()], axis=1)
        conf = np.linspace(1.0, 0.5, len(kps))
        return kps, kps.copy(), conf


class StubFailingMatcher:
    """Always fails; exercises the failure-recording path."""

    name = "stub-failing"
    version = "1"

    def __init__(self, long_side: int | None = None, **_):
        self.long_side = long_side

    def __call__(self, image1, image2):
        raise RuntimeError("matcher deliberately unavailable")


class StubConstantMde:
    """Constant depth everywhere, at native or bounded resolution."""

    name = "stub-constant"
    version = "1"

    def __init__(self, value: float = 5.0, long_side: int | None = None):
        self.value = value
        self.long_side = long_side

    def __call__(self, image: np.ndarray) -> np.ndarray:
        h, w = image.shape[:2]
        ww, wh = working_size(w, h, self.long_side)
        base = downsample_nn(np.asarray(image, dtype=np.float32), ww, wh)
        return np.full(base.shape[:2], self.value, dtype=np.float32)


class StubNanBandMde(StubConstantMde):
    """Constant depth with a horizontal NaN band; NaNs must survive export."""

    name = "stub-nan-band"
    version = "1"

    def __call__(self, image: np.ndarray) -> np.ndarray:
        grid = super().__call__(image)
        h = grid.shape[0]
        grid[h // 4 : h // 2, :] = np.nan
        return grid


class StubFailingMde:
    name = "stub-failing-mde"
    version = "1"

    def __init__(self, long_side: int | None = None, **_):
        self.long_side = long_side

    def __call__(self, image):
        raise RuntimeError("inference deliberately unavailable")


MATCHERS = {
    StubCheckerboardMatcher.name: StubCheckerboardMatcher,
    StubGridMatcher.name: StubGridMatcher,
    StubFailingMatcher.name: StubFailingMatcher,
}

MDES = {
    StubConstantMde.name: StubConstantMde,
    StubNanBandMde.name: StubNanBandMde,
    StubFailingMde.name: StubFailingMde,
}


def make_matcher(name: str, **kwargs):
    try:
        return MATCHERS[name](**kwargs)
    except KeyError:
        raise KeyError(
            f"unknown matcher {name!r}; stubs: {sorted(MATCHERS)}. Real matchers "
            "register here via posebench_adapters.stubs.MATCHERS once their "
            "tool is installed."
        ) from None


def make_mde(name: str, **kwargs):
    try:
        return MDES[name](**kwargs)
    except KeyError:
        raise KeyError(
            f"unknown depth model {name!r}; stubs: {sorted(MDES)}. Real models "
            "register here via posebench_adapters.stubs.MDES once their tool "
            "is installed."
        ) from None


def checkerboard(width: int, height: int, cell: int) -> np.ndarray:
    """Synthetic checkerboard fixture with cell-aligned corners."""
    ys, xs = np.mgrid[0:height, 0:width]
    return (((xs // cell) + (ys // cell)) % 2).astype(np.float32)
