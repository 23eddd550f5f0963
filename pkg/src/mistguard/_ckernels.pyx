# cython: language_level=3
"""Compiled per-frame kernels; arithmetic mirrors ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

NAME = "cython"


def rgb_to_gray(const cnp.uint8_t[:, :, ::1] rgb):
    cdef Py_ssize_t h = rgb.shape[0], w = rgb.shape[1], y, x
    cdef int acc
    out = np.empty((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    for y in range(h):
        for x in range(w):
            acc = 299 * rgb[y, x, 0] + 587 * rgb[y, x, 1] + 114 * rgb[y, x, 2] + 500
            o[y, x] = <cnp.uint8_t>(acc // 1000)
    return out


def smooth(const cnp.uint8_t[:, ::1] gray, const double[:, ::1] weights):
    cdef Py_ssize_t h = gray.shape[0], w = gray.shape[1]
    cdef Py_ssize_t k = weights.shape[0], r = k // 2
    cdef Py_ssize_t y, x, i, j
    cdef double acc, v
    # edge-replicated copy so the inner loop needs no bounds clamping
    padded = np.pad(np.asarray(gray, dtype=np.float64), r, mode="edge")
    cdef const double[:, ::1] p = padded
    out = np.empty((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(k):
                for j in range(k):
                    acc = acc + weights[i, j] * p[y + i, x + j]
            v = floor(acc + 0.5)
            if v < 0.0:
                v = 0.0
            elif v > 255.0:
                v = 255.0
            o[y, x] = <cnp.uint8_t>v
    return out


def count_active(const cnp.uint8_t[:, ::1] frame, const cnp.uint8_t[:, ::1] background,
                 int threshold):
    cdef Py_ssize_t h = frame.shape[0], w = frame.shape[1], y, x
    cdef int d
    cdef long n = 0
    for y in range(h):
        for x in range(w):
            d = <int>frame[y, x] - <int>background[y, x]
            if d < 0:
                d = -d
            if d > threshold:
                n += 1
    return n


def block_sums(const cnp.uint8_t[:, ::1] gray):
    cdef Py_ssize_t h = gray.shape[0], w = gray.shape[1], y, x
    cdef Py_ssize_t hh = h // 2, hw = w // 2
    cdef long long s0 = 0, s1 = 0, s2 = 0, s3 = 0
    for y in range(hh):
        for x in range(hw):
            s0 += gray[y, x]
        for x in range(hw, w):
            s1 += gray[y, x]
    for y in range(hh, h):
        for x in range(hw):
            s2 += gray[y, x]
        for x in range(hw, w):
            s3 += gray[y, x]
    return [s0, s1, s2, s3], s0 + s1 + s2 + s3
