"""Deterministic synthetic thermal scenes with per-frame ground truth.

Each frame is ``ambient + sum(peak * exp(-d^2 / (2 r^2))) + noise``, rounded
half up, clamped to [0, 255] and written to R, G and B alike.

Noise generator (fixed so digests are reproducible): for frame ``i`` of a run
with seed ``s``, a PCG64 bit generator is seeded from
``SeedSequence(entropy=s, spawn_key=(i,))``. Its raw 64-bit outputs are turned
into 53-bit uniforms ``u = (x >> 11) * 2**-53`` and consumed in pairs
``(u1, u2)`` by the Box-Muller transform
``sqrt(-2 ln(1 - u1)) * (cos(2 pi u2), sin(2 pi u2))``, filling the frame in
row-major order.
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from mistguard.evaluate import format_quadrants, write_manifest
from mistguard.frame import HEIGHT, WIDTH, RawFrame
from mistguard.netpbm import atomic_write, write_ppm

FRAME_PERIOD_MS = 250
SYNTH_COLUMNS = ("frame", "label", "quadrants", "t_ms", "moving")


@dataclass(frozen=True)
class HeatBlob:
    center: tuple
    radius: float
    peak: float

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("blob radius must be >= 1")
        if not 0 <= self.peak <= 255:
            raise ValueError("blob peak must be in [0, 255]")


def human(center, radius=10.0, peak=180.0):
    return HeatBlob(tuple(center), radius, peak)


def equipment(center, radius=5.0, peak=60.0):
    return HeatBlob(tuple(center), radius, peak)


@dataclass(frozen=True)
class Human:
    """A person: blob shape, waypoints ``(frame, x, y)`` and presence ``[start, stop)``."""

    blob: HeatBlob
    waypoints: tuple
    present: tuple

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(sorted(tuple(w) for w in self.waypoints)))
        if not self.waypoints:
            raise ValueError("a human needs at least one waypoint")
        start, stop = self.present
        if start > stop:
            raise ValueError("presence interval is reversed")

    def is_present(self, i):
        return self.present[0] <= i < self.present[1]

    def position(self, i):
        wps = self.waypoints
        if i <= wps[0][0]:
            return float(wps[0][1]), float(wps[0][2])
        for (f0, x0, y0), (f1, x1, y1) in zip(wps, wps[1:]):
            if i <= f1:
                t = (i - f0) / (f1 - f0)
                return x0 + t * (x1 - x0), y0 + t * (y1 - y0)
        return float(wps[-1][1]), float(wps[-1][2])


@dataclass(frozen=True)
class Scene:
    name: str = "custom"
    ambient: float = 30.0
    noise_sigma: float = 2.0
    equipment: tuple = ()
    humans: tuple = ()

    def __post_init__(self):
        if not 0 <= self.ambient <= 255:
            raise ValueError("ambient must be in [0, 255]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for blob in self.equipment:
            _check_inside(blob.center)
            if blob.peak <= self.ambient:
                raise ValueError("equipment peak must exceed ambient")
        for h in self.humans:
            if h.blob.peak <= self.ambient:
                raise ValueError("human peak must exceed ambient")
            for _, x, y in h.waypoints:
                _check_inside((x, y))


def _check_inside(center):
    x, y = center
    if not (0 <= x < WIDTH and 0 <= y < HEIGHT):
        raise ValueError(f"blob center {center} outside the {WIDTH}x{HEIGHT} frame")


@dataclass(frozen=True)
class GroundTruth:
    positive: bool
    quadrants: frozenset
    moving: bool


def quadrant_of(x, y):
    return (1 if x >= WIDTH / 2 else 0) + (2 if y >= HEIGHT / 2 else 0)


def ground_truth(scene: Scene, i) -> GroundTruth:
    quads = set()
    moving = False
    for h in scene.humans:
        if h.is_present(i):
            x, y = h.position(i)
            quads.add(quadrant_of(x, y))
            if h.is_present(i - 1) and h.position(i - 1) != (x, y):
                moving = True
    return GroundTruth(bool(quads), frozenset(quads), moving)


def gaussian_noise(seed, index, n):
    """``n`` standard normals for frame ``index`` (see module docstring)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    bits = np.random.PCG64(ss)
    pairs = (n + 1) // 2
    raw = bits.random_raw(2 * pairs)
    u = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * math.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n]


_YY, _XX = np.mgrid[0:HEIGHT, 0:WIDTH].astype(np.float64)


def _add_blob(acc, blob, center):
    cx, cy = center
    d2 = (_XX - cx) ** 2 + (_YY - cy) ** 2
    acc += blob.peak * np.exp(-d2 / (2.0 * blob.radius * blob.radius))


def render_intensity(scene: Scene, index, seed=0):
    """Integer intensity image for one frame."""
    acc = np.full((HEIGHT, WIDTH), float(scene.ambient))
    for blob in scene.equipment:
        _add_blob(acc, blob, blob.center)
    for h in scene.humans:
        if h.is_present(index):
            _add_blob(acc, h.blob, h.position(index))
    if scene.noise_sigma > 0:
        acc += scene.noise_sigma * gaussian_noise(seed, index, HEIGHT * WIDTH).reshape(HEIGHT, WIDTH)
    out = np.floor(acc + 0.5)
    np.clip(out, 0, 255, out=out)
    return out.astype(np.uint8)


def render_frame(scene: Scene, index, seed=0) -> RawFrame:
    gray = render_intensity(scene, index, seed)
    return RawFrame(np.repeat(gray[:, :, None], 3, axis=2))


@dataclass
class SequenceResult:
    directory: str
    manifest_path: str
    frame_paths: list
    truth: list
    manifest_digest: str
    frames_digest: str = field(repr=False)


def frame_name(i):
    return f"frame_{i:05d}.ppm"


def generate_sequence(scene: Scene, n_frames, seed, out_dir) -> SequenceResult:
    """Write ``frame_%05d.ppm`` files and ``manifest.csv`` into ``out_dir``."""
    if isinstance(n_frames, bool) or int(n_frames) != n_frames or n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    out_dir = os.fspath(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory not writable: {out_dir}")
    frames_hash = hashlib.sha256()
    rows, paths, truth = [], [], []
    for i in range(int(n_frames)):
        data = write_ppm(render_frame(scene, i, seed))
        name = frame_name(i)
        path = os.path.join(out_dir, name)
        atomic_write(path, data)
        frames_hash.update(name.encode() + b"\0" + data)
        gt = ground_truth(scene, i)
        rows.append((name, "pos" if gt.positive else "neg", format_quadrants(gt.quadrants),
                     i * FRAME_PERIOD_MS, int(gt.moving)))
        paths.append(path)
        truth.append(gt)
    manifest = write_manifest(rows, SYNTH_COLUMNS)
    manifest_path = os.path.join(out_dir, "manifest.csv")
    atomic_write(manifest_path, manifest)
    return SequenceResult(out_dir, manifest_path, paths, truth,
                          hashlib.sha256(manifest).hexdigest(), frames_hash.hexdigest())


def walkthrough() -> Scene:
    """A person enters in the top-left quadrant, crosses to the top-right,
    stands there, then leaves; a warm cabinet sits in the bottom-left."""
    person = Human(human((20, 30)), ((40, 20, 30), (100, 140, 30), (150, 140, 30)), (40, 150))
    return Scene("walkthrough-42", 30.0, 2.0, (equipment((40, 90)),), (person,))


def _static(name, center):
    person = Human(human(center), ((0,) + tuple(center),), (0, 1 << 30))
    return Scene(name, 30.0, 2.0, (equipment((40, 90)),), (person,))


SCENES = {
    "walkthrough-42": walkthrough,
    "empty": lambda: Scene("empty", 30.0, 2.0),
    "equipment-only": lambda: Scene("equipment-only", 30.0, 2.0,
                                    (equipment((40, 90)), equipment((125, 95), 4.0, 55.0))),
    "static-q3": lambda: _static("static-q3", (120, 90)),
    "static-center": lambda: _static("static-center", (80, 60)),
}


def get_scene(name) -> Scene:
    try:
        return SCENES[name]()
    except KeyError:
        raise KeyError(f"unknown scene {name!r} (known: {', '.join(sorted(SCENES))})") from None
