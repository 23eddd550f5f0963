"""Frame types and the preprocessing pipeline (grayscale, Gaussian smoothing)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mistguard import kernels

WIDTH = 160
HEIGHT = 120
PIXELS = WIDTH * HEIGHT

DEFAULT_KERNEL_SIZE = 5
DEFAULT_SIGMA = 1.0


class FrameError(ValueError):
    """Invalid frame contents or dimensions."""


def _adopt(arr):
    # takes ownership of a freshly computed array; no copy
    arr.setflags(write=False)
    return arr


def _frozen_u8(a, ndim):
    arr = np.array(a, dtype=np.uint8, copy=True, order="C")
    if arr.ndim != ndim:
        raise FrameError(f"expected {ndim}-d pixel array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RawFrame:
    """RGB frame, ``pixels`` shaped (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if not (isinstance(px, np.ndarray) and px.dtype == np.uint8 and not px.flags.writeable
                and px.flags.c_contiguous):
            px = _frozen_u8(px, 3)
            object.__setattr__(self, "pixels", px)
        if px.ndim != 3 or px.shape[2] != 3:
            raise FrameError(f"RGB frame must be (h, w, 3), got {px.shape}")

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def data(self):
        """Row-major RGB bytes."""
        return self.pixels.tobytes()

    @classmethod
    def from_bytes(cls, data, width=WIDTH, height=HEIGHT):
        if len(data) != width * height * 3:
            raise FrameError(f"expected {width * height * 3} bytes, got {len(data)}")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3))

    @classmethod
    def filled(cls, rgb, width=WIDTH, height=HEIGHT):
        return cls(np.broadcast_to(np.asarray(rgb, dtype=np.uint8), (height, width, 3)))

    def __eq__(self, other):
        if not isinstance(other, RawFrame):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """Intensity frame, ``pixels`` shaped (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if not (isinstance(px, np.ndarray) and px.dtype == np.uint8 and not px.flags.writeable
                and px.flags.c_contiguous):
            px = _frozen_u8(px, 2)
            object.__setattr__(self, "pixels", px)
        if px.ndim != 2:
            raise FrameError(f"gray frame must be 2-d, got {px.shape}")

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def data(self):
        return self.pixels.tobytes()

    @classmethod
    def from_bytes(cls, data, width=WIDTH, height=HEIGHT):
        if len(data) != width * height:
            raise FrameError(f"expected {width * height} bytes, got {len(data)}")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width))

    @classmethod
    def filled(cls, value, width=WIDTH, height=HEIGHT):
        return cls(np.full((height, width), value, dtype=np.uint8))

    def __eq__(self, other):
        if not isinstance(other, GrayFrame):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class GaussianKernel:
    size: int
    sigma: float
    weights: np.ndarray = field(repr=False, compare=False)


def build_kernel(size=DEFAULT_KERNEL_SIZE, sigma=DEFAULT_SIGMA):
    """Normalized isotropic Gaussian of odd side ``size``.

    ``sigma=math.inf`` gives the uniform box filter (the large-sigma limit).
    """
    if isinstance(size, bool) or not isinstance(size, (int, np.integer)):
        raise ValueError(f"kernel size must be an integer, got {size!r}")
    if size < 3 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {size}")
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    c = (size - 1) / 2
    idx = np.arange(size, dtype=np.float64) - c
    d2 = idx[:, None] ** 2 + idx[None, :] ** 2
    if math.isinf(sigma):
        w = np.ones((size, size))
    else:
        w = np.exp(-d2 / (2.0 * sigma * sigma))
    w = w / w.sum()
    # average mirror images so float noise cannot break exact symmetry
    w = (w + w[::-1, :]) / 2
    w = (w + w[:, ::-1]) / 2
    w = (w + w.T) / 2
    w = np.ascontiguousarray(w)
    w.setflags(write=False)
    return GaussianKernel(int(size), sigma, w)


def to_grayscale(frame: RawFrame) -> GrayFrame:
    return GrayFrame(_adopt(kernels.rgb_to_gray(frame.pixels)))


def gaussian_smooth(frame: GrayFrame, kernel: GaussianKernel) -> GrayFrame:
    return GrayFrame(_adopt(kernels.smooth(frame.pixels, kernel.weights)))


def preprocess(frame: RawFrame, kernel: GaussianKernel) -> GrayFrame:
    """Grayscale then smooth; the input every detector expects."""
    return gaussian_smooth(to_grayscale(frame), kernel)
