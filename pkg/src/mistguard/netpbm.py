"""Binary PGM (P5) and PPM (P6) reading and writing, maxval 255 only."""
import os
import tempfile

import numpy as np

from mistguard.frame import HEIGHT, WIDTH, GrayFrame, RawFrame

_WS = b" \t\n\r\v\f"


class NetpbmError(ValueError):
    pass


def _parse_header(data, magic):
    if len(data) < 2:
        raise NetpbmError("file too short for a netpbm header")
    found = bytes(data[:2])
    if found != magic:
        if found[:1] == b"P" and found[1:2].isdigit():
            raise NetpbmError(f"unsupported netpbm format {found.decode()!r}, expected {magic.decode()!r}")
        raise NetpbmError("not a netpbm file (bad magic)")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise NetpbmError("truncated header")
        c = data[pos:pos + 1]
        if c in _WS and c:
            pos += 1
            continue
        if c == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise NetpbmError("truncated header comment")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1] not in _WS and data[pos:pos + 1] != b"#":
            pos += 1
        token = bytes(data[start:pos])
        if not token.isdigit():
            raise NetpbmError(f"malformed header field {token!r}")
        fields.append(int(token))
    if pos >= len(data) or data[pos:pos + 1] not in _WS:
        raise NetpbmError("missing whitespace after maxval")
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise NetpbmError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise NetpbmError(f"unsupported maxval {maxval}, only 255 is accepted")
    return width, height, pos + 1


def _payload(data, offset, expected):
    got = len(data) - offset
    if got < expected:
        raise NetpbmError(f"truncated payload: expected {expected} bytes, got {got}")
    if got > expected:
        raise NetpbmError(f"payload has {got - expected} bytes beyond the declared dimensions")
    return np.frombuffer(data, dtype=np.uint8, count=expected, offset=offset)


def _check_size(width, height, size):
    if size is not None and (width, height) != tuple(size):
        raise NetpbmError(f"frame is {width}x{height}, expected {size[0]}x{size[1]}")


def read_pgm(data, size=(WIDTH, HEIGHT)) -> GrayFrame:
    """Decode a P5 file. ``size=None`` accepts any dimensions."""
    width, height, off = _parse_header(data, b"P5")
    _check_size(width, height, size)
    px = _payload(data, off, width * height).reshape(height, width)
    return GrayFrame(px)


def read_ppm(data, size=(WIDTH, HEIGHT)) -> RawFrame:
    width, height, off = _parse_header(data, b"P6")
    _check_size(width, height, size)
    px = _payload(data, off, width * height * 3).reshape(height, width, 3)
    return RawFrame(px)


def write_pgm(frame: GrayFrame) -> bytes:
    return b"P5\n%d %d\n255\n" % (frame.width, frame.height) + frame.pixels.tobytes()


def write_ppm(frame: RawFrame) -> bytes:
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.pixels.tobytes()


def read_frame(data, size=(WIDTH, HEIGHT)) -> RawFrame:
    """Read either P6 or P5; a P5 image is widened to equal RGB channels."""
    if bytes(data[:2]) == b"P5":
        gray = read_pgm(data, size)
        return RawFrame(np.repeat(gray.pixels[:, :, None], 3, axis=2))
    return read_ppm(data, size)


def load_frame(path, size=(WIDTH, HEIGHT)) -> RawFrame:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return read_frame(data, size)
    except NetpbmError as exc:
        raise NetpbmError(f"{path}: {exc}") from None


def atomic_write(path, data):
    """Write via a temp file in the same directory and rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
