"""Frame sources feeding the node loop."""
import os

from mistguard.netpbm import load_frame
from mistguard.synth import get_scene, render_frame


class FrameSourceError(RuntimeError):
    """The camera (or its stand-in) failed to deliver a frame."""


class DirectorySource:
    """Replays ``*.ppm`` / ``*.pgm`` files from a directory in name order."""

    def __init__(self, path):
        self.path = os.fspath(path)
        try:
            names = sorted(n for n in os.listdir(self.path)
                           if n.lower().endswith((".ppm", ".pgm")))
        except OSError as exc:
            raise FrameSourceError(f"cannot list frame directory {self.path}: {exc}") from exc
        if not names:
            raise FrameSourceError(f"no .ppm/.pgm frames in {self.path}")
        self.files = [os.path.join(self.path, n) for n in names]

    def __iter__(self):
        for f in self.files:
            try:
                yield load_frame(f)
            except (OSError, ValueError) as exc:
                raise FrameSourceError(f"frame source failed at {f}: {exc}") from exc


class SyntheticSource:
    """Renders a named scene on the fly; ``n_frames=None`` never ends."""

    def __init__(self, scene, seed=0, n_frames=None):
        self.scene = get_scene(scene) if isinstance(scene, str) else scene
        self.seed = seed
        self.n_frames = n_frames

    def __iter__(self):
        i = 0
        while self.n_frames is None or i < self.n_frames:
            yield render_frame(self.scene, i, self.seed)
            i += 1


class ListSource:
    """In-memory frames; an ``Exception`` instance in the list is raised when reached."""

    def __init__(self, frames):
        self.frames = list(frames)

    def __iter__(self):
        for f in self.frames:
            if isinstance(f, BaseException):
                raise FrameSourceError(str(f)) from f
            yield f
