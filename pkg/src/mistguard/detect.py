"""Human detectors: motion (A), quadrant region-of-interest (B) and their OR-fusion."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from mistguard import kernels
from mistguard.frame import HEIGHT, PIXELS, WIDTH, GrayFrame

QUADRANT_NAMES = ("top-left", "top-right", "bottom-left", "bottom-right")


class DetectError(ValueError):
    pass


@functools.lru_cache(maxsize=64)
def _exact(x):
    # decimal reading of a config float, e.g. 0.2 -> 1/5
    return Fraction(str(x))


@dataclass(frozen=True)
class MotionDetectorState:
    background: Optional[GrayFrame] = None
    pixel_diff_threshold: int = 25
    active_fraction_threshold: float = 0.05

    def __post_init__(self):
        if not 1 <= self.pixel_diff_threshold <= 255:
            raise ValueError(f"pixel_diff_threshold must be in [1, 255], got {self.pixel_diff_threshold}")
        if not 0 < self.active_fraction_threshold < 1:
            raise ValueError("active_fraction_threshold must be in (0, 1)")
        bg = self.background
        if bg is not None and (bg.width, bg.height) != (WIDTH, HEIGHT):
            raise ValueError(f"background must be {WIDTH}x{HEIGHT}")

    def min_active(self, total=PIXELS):
        """Active-pixel count needed for a positive: ceil(fraction * total)."""
        return math.ceil(_exact(self.active_fraction_threshold) * total)


@dataclass(frozen=True)
class MotionResult:
    positive: bool
    active_pixel_count: int
    background_updated: bool


@dataclass(frozen=True)
class RoiConfig:
    ratio_threshold: float = 0.20
    mean_floor: float = 1.0

    def __post_init__(self):
        if not self.ratio_threshold > 0:
            raise ValueError("ratio_threshold must be > 0")
        if self.mean_floor < 0:
            raise ValueError("mean_floor must be >= 0")

    @staticmethod
    def quadrants(width=WIDTH, height=HEIGHT):
        """(x0, y0, x1, y1) of each quadrant, ordered TL, TR, BL, BR."""
        hw, hh = width // 2, height // 2
        return ((0, 0, hw, hh), (hw, 0, width, hh), (0, hh, hw, height), (hw, hh, width, height))


@dataclass(frozen=True)
class RoiResult:
    positive: bool
    quadrant_flags: tuple
    frame_mean: float
    quadrant_means: tuple

    @property
    def flagged(self):
        return tuple(q for q, f in enumerate(self.quadrant_flags) if f)


@dataclass(frozen=True)
class Detection:
    positive: bool
    method_a: MotionResult
    method_b: RoiResult
    frame_seq: int = 0


def _check_dims(frame):
    if (frame.width, frame.height) != (WIDTH, HEIGHT):
        raise DetectError(f"frame is {frame.width}x{frame.height}, expected {WIDTH}x{HEIGHT}")


def method_a_step(state: MotionDetectorState, frame: GrayFrame):
    """Background differencing. Returns ``(MotionResult, new_state)``.

    The background is replaced by ``frame`` on every negative step and kept
    as-is on a positive one. The first frame only seeds the background.
    """
    _check_dims(frame)
    if state.background is None:
        return MotionResult(False, 0, True), replace(state, background=frame)
    count = kernels.count_active(frame.pixels, state.background.pixels,
                                 state.pixel_diff_threshold)
    if count >= state.min_active(frame.width * frame.height):
        return MotionResult(True, count, False), state
    return MotionResult(False, count, True), replace(state, background=frame)


def method_b(frame: GrayFrame, config: RoiConfig = RoiConfig()) -> RoiResult:
    _check_dims(frame)
    sums, total = kernels.block_sums(frame.pixels)
    n = frame.width * frame.height
    qn = n // 4
    frame_mean = total / n
    quadrant_means = tuple(s / qn for s in sums)
    # exact rational comparison: 4 * sum_q >= (1 + ratio) * sum_frame
    ratio = _exact(config.ratio_threshold)
    if total < _exact(config.mean_floor) * n:
        flags = (False,) * 4
    else:
        scale = 1 + ratio
        flags = tuple(4 * s * scale.denominator >= scale.numerator * total for s in sums)
    return RoiResult(any(flags), flags, frame_mean, quadrant_means)


@dataclass
class HybridDetector:
    """Stateful wrapper running both methods on every frame."""

    motion: MotionDetectorState = field(default_factory=MotionDetectorState)
    roi: RoiConfig = field(default_factory=RoiConfig)
    frame_seq: int = 0

    def step(self, frame: GrayFrame) -> Detection:
        self.frame_seq += 1
        det, self.motion = hybrid_step(self.motion, frame, self.roi, self.frame_seq)
        return det


def hybrid_step(state: MotionDetectorState, frame: GrayFrame, config: RoiConfig = RoiConfig(),
                frame_seq: int = 0):
    """B then A on the same frame; positive if either votes positive.

    Method A is stepped even when B is already positive so its background
    keeps adapting.
    """
    b = method_b(frame, config)
    a, state = method_a_step(state, frame)
    return Detection(a.positive or b.positive, a, b, frame_seq), state


@dataclass(frozen=True)
class DetectorConfig:
    """Every tunable of the preprocess + detect pipeline in one place."""

    kernel_size: int = 5
    kernel_sigma: float = 1.0
    pixel_diff_threshold: int = 25
    active_fraction_threshold: float = 0.05
    ratio_threshold: float = 0.20
    mean_floor: float = 1.0

    def kernel(self):
        from mistguard.frame import build_kernel
        return build_kernel(self.kernel_size, self.kernel_sigma)

    def motion_state(self):
        return MotionDetectorState(None, self.pixel_diff_threshold, self.active_fraction_threshold)

    def roi(self):
        return RoiConfig(self.ratio_threshold, self.mean_floor)
