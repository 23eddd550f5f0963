"""Backend selection for the per-frame kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback. Set ``MISTGUARD_BACKEND=python`` to force the fallback.
"""
import contextlib
import os

from mistguard import _pykernels

try:
    from mistguard import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def _default():
    wanted = os.environ.get("MISTGUARD_BACKEND", "").strip().lower()
    if wanted:
        if wanted not in BACKENDS:
            raise ImportError(f"MISTGUARD_BACKEND={wanted!r} is not available "
                              f"(have: {', '.join(sorted(BACKENDS))})")
        return BACKENDS[wanted]
    return _ckernels if _ckernels is not None else _pykernels


active = _default()


def backend_name():
    return active.NAME


def set_backend(name):
    global active
    try:
        active = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}") from None


@contextlib.contextmanager
def use_backend(name):
    previous = active.NAME
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def rgb_to_gray(rgb):
    return active.rgb_to_gray(rgb)


def smooth(gray, weights):
    return active.smooth(gray, weights)


def count_active(frame, background, threshold):
    return active.count_active(frame, background, threshold)


def block_sums(gray):
    return active.block_sums(gray)
