"""Straight-line reference of the detection pipeline for equivalence tests.

Deliberately shares no code with ``mistguard``: its own file parsing, float
grayscale, scipy convolution and plain float means.
"""
import csv
import math
import os

import numpy as np
from scipy import ndimage

W, H = 160, 120


def read_image(path):
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    magic, w, h = tokens[0], int(tokens[1]), int(tokens[2])
    channels = 3 if magic == b"P6" else 1
    px = np.frombuffer(data[pos:], dtype=np.uint8).reshape(h, w, channels)
    if channels == 1:
        px = np.concatenate([px, px, px], axis=2)
    return px


def gray(rgb):
    rgb = rgb.astype(np.float64)
    g = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return np.clip(np.floor(g + 0.5), 0, 255)


def gaussian(size=5, sigma=1.0):
    c = (size - 1) / 2
    k = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            k[i, j] = math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * sigma * sigma))
    return k / k.sum()


def smooth(g, size=5, sigma=1.0):
    out = ndimage.convolve(g, gaussian(size, sigma), mode="nearest")
    return np.clip(np.floor(out + 0.5), 0, 255)


def method_b(frame, ratio=0.20, floor=1.0):
    x = frame.mean()
    if x < floor:
        return False, [False] * 4
    blocks = [frame[:60, :80], frame[:60, 80:], frame[60:, :80], frame[60:, 80:]]
    flags = [b.mean() >= (1 + ratio) * x for b in blocks]
    return any(flags), flags


class MethodA:
    def __init__(self, diff=25, fraction=0.05):
        self.diff = diff
        self.needed = math.ceil(round(fraction * W * H, 9))
        self.background = None

    def step(self, frame):
        if self.background is None:
            self.background = frame
            return False, 0
        active = int((np.abs(frame - self.background) > self.diff).sum())
        if active >= self.needed:
            return True, active
        self.background = frame
        return False, active


def read_manifest(path):
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(os.path.join(base, r["frame"]), r["label"] == "pos") for r in rows]


def per_frame(manifest_path):
    """Per-frame votes: list of dicts with a, b, flags, label."""
    motion = MethodA()
    out = []
    for path, label in read_manifest(manifest_path):
        g = smooth(gray(read_image(path)))
        b, flags = method_b(g)
        a, active = motion.step(g)
        out.append({"a": a, "b": b, "flags": flags, "label": label, "active": active})
    return out


def only_a(manifest_path):
    motion = MethodA()
    votes = []
    for path, label in read_manifest(manifest_path):
        a, _ = motion.step(smooth(gray(read_image(path))))
        votes.append((a, label))
    return votes


def confusion(votes):
    tp = sum(1 for p, l in votes if p and l)
    fp = sum(1 for p, l in votes if p and not l)
    fn = sum(1 for p, l in votes if not p and l)
    tn = sum(1 for p, l in votes if not p and not l)
    return {"tp": tp, "tn": tn, "fp": fp, "fn": fn}


def matrices(manifest_path):
    frames = per_frame(manifest_path)
    return {
        "a": confusion(only_a(manifest_path)),
        "b": confusion([(f["b"], f["label"]) for f in frames]),
        "hybrid": confusion([(f["a"] or f["b"], f["label"]) for f in frames]),
    }
