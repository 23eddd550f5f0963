"""Numpy implementations of the per-frame kernels.

These define the reference arithmetic. The Cython module ``_ckernels``
reproduces them bit for bit (same accumulation order, same rounding).
"""
import numpy as np

NAME = "python"


def rgb_to_gray(rgb):
    """BT.601 luma in exact integer arithmetic, rounded half up."""
    rgb = rgb.astype(np.int32)
    acc = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500
    return (acc // 1000).astype(np.uint8)


def smooth(gray, weights):
    """Correlate ``gray`` with ``weights`` using replicated borders."""
    k = weights.shape[0]
    r = k // 2
    h, w = gray.shape
    padded = np.pad(gray.astype(np.float64), r, mode="edge")
    acc = np.zeros((h, w), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            acc += weights[i, j] * padded[i:i + h, j:j + w]
    out = np.floor(acc + 0.5)
    np.clip(out, 0, 255, out=out)
    return out.astype(np.uint8)


def count_active(frame, background, threshold):
    diff = np.abs(frame.astype(np.int16) - background.astype(np.int16))
    return int(np.count_nonzero(diff > threshold))


def block_sums(gray):
    """Return ([tl, tr, bl, br] sums, total sum) as Python ints."""
    h, w = gray.shape
    hh, hw = h // 2, w // 2
    g = gray.astype(np.int64)
    sums = [
        int(g[:hh, :hw].sum()),
        int(g[:hh, hw:].sum()),
        int(g[hh:, :hw].sum()),
        int(g[hh:, hw:].sum()),
    ]
    return sums, sum(sums)
