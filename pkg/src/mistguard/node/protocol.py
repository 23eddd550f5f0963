"""Newline-delimited JSON messages exchanged between node, machines and sinks.

Every message is one UTF-8 JSON object per line with a ``type`` field and
exactly the fields listed in ``SCHEMAS``; anything else is rejected. No
message type carries pixel data.
"""
import json
import socket

LEVELS = ("RUN", "SLOW", "STOP")
REASONS = ("restricted", "caution", "motion", "clear", "failsafe")
INT_MAX = 2 ** 63 - 1
MAX_LINE = 64 * 1024

SCHEMAS = {
    "detection": {"node_id": str, "frame_seq": int, "ts_ms": int, "method_a": bool,
                  "method_b": bool, "positive": bool, "quadrants": list, "active_pixels": int},
    "safety": {"node_id": str, "frame_seq": int, "level": str, "reason": str},
    "ack": {"frame_seq": int},
    "hb": {},
    "status_req": {},
    "status": {"node_id": str, "frame_seq": int, "level": str, "uptime_ms": int,
               "frames": int, "positives": int, "commands": int},
    "error": {"message": str},
}


class ProtocolError(ValueError):
    pass


def _check_field(mtype, name, kind, value):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ProtocolError(f"{mtype}.{name} must be an integer")
        if not 0 <= value <= INT_MAX:
            raise ProtocolError(f"{mtype}.{name} out of range [0, 2^63-1]")
    elif kind is bool:
        if not isinstance(value, bool):
            raise ProtocolError(f"{mtype}.{name} must be a boolean")
    elif kind is str:
        if not isinstance(value, str):
            raise ProtocolError(f"{mtype}.{name} must be a string")
    elif kind is list:
        if not isinstance(value, list):
            raise ProtocolError(f"{mtype}.{name} must be an array")


def validate(msg):
    if not isinstance(msg, dict):
        raise ProtocolError("message must be a JSON object")
    mtype = msg.get("type")
    if mtype not in SCHEMAS:
        raise ProtocolError(f"unknown message type {mtype!r}")
    schema = SCHEMAS[mtype]
    fields = set(msg) - {"type"}
    if fields != set(schema):
        extra = sorted(fields - set(schema))
        missing = sorted(set(schema) - fields)
        raise ProtocolError(f"{mtype}: unexpected fields {extra}, missing fields {missing}")
    for name, kind in schema.items():
        _check_field(mtype, name, kind, msg[name])
    if mtype == "detection":
        q = msg["quadrants"]
        if any(isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 3 for v in q):
            raise ProtocolError("detection.quadrants must hold quadrant indices 0..3")
        if len(set(q)) != len(q):
            raise ProtocolError("detection.quadrants has duplicates")
        if msg["positive"] != (msg["method_a"] or msg["method_b"]):
            raise ProtocolError("detection.positive must equal method_a OR method_b")
        if not msg["node_id"]:
            raise ProtocolError("detection.node_id is empty")
    elif mtype in ("safety", "status"):
        if msg["level"] not in LEVELS:
            raise ProtocolError(f"{mtype}.level must be one of {LEVELS}")
        if mtype == "safety" and msg["reason"] not in REASONS:
            raise ProtocolError(f"safety.reason must be one of {REASONS}")
    return msg


def encode(msg) -> bytes:
    validate(msg)
    return json.dumps(msg, separators=(",", ":"), ensure_ascii=False).encode("utf-8") + b"\n"


def decode(line) -> dict:
    if isinstance(line, (bytes, bytearray)):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("message is not valid UTF-8") from None
    line = line.rstrip("\r\n")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc.msg}") from None
    return validate(msg)


def detection(node_id, det, ts_ms):
    return {"type": "detection", "node_id": node_id, "frame_seq": det.frame_seq, "ts_ms": ts_ms,
            "method_a": det.method_a.positive, "method_b": det.method_b.positive,
            "positive": det.positive, "quadrants": list(det.method_b.flagged),
            "active_pixels": det.method_a.active_pixel_count}


def safety(node_id, frame_seq, level, reason):
    return {"type": "safety", "node_id": node_id, "frame_seq": frame_seq,
            "level": getattr(level, "name", level), "reason": reason}


def ack(frame_seq):
    return {"type": "ack", "frame_seq": frame_seq}


def error(message):
    return {"type": "error", "message": message}


HB = {"type": "hb"}
STATUS_REQ = {"type": "status_req"}


class LineChannel:
    """Blocking line-oriented wrapper around a connected socket."""

    def __init__(self, sock):
        self.sock = sock
        self._rfile = sock.makefile("rb")

    @classmethod
    def connect(cls, address, timeout=5.0):
        return cls(socket.create_connection(address, timeout=timeout))

    def settimeout(self, timeout):
        self.sock.settimeout(timeout)

    def send(self, msg):
        self.sock.sendall(encode(msg))

    def send_raw(self, data):
        self.sock.sendall(data)

    def readline(self):
        """Next raw line, or ``b''`` at EOF."""
        line = self._rfile.readline(MAX_LINE + 1)
        if len(line) > MAX_LINE:
            raise ProtocolError("line too long")
        return line

    def recv(self):
        line = self.readline()
        if not line:
            raise ConnectionError("connection closed by peer")
        return decode(line)

    def request(self, msg):
        self.send(msg)
        return self.recv()

    def close(self):
        try:
            self._rfile.close()
        finally:
            self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def parse_endpoint(text):
    """``host:port`` -> (host, port)."""
    host, sep, port = str(text).strip().rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 <= int(port) <= 65535:
        raise ValueError(f"bad endpoint {text!r}, expected host:port")
    return host, int(port)


def format_endpoint(address):
    return f"{address[0]}:{address[1]}"


def status_query(address, timeout=5.0):
    """Ask a node for its status document."""
    with LineChannel.connect(address, timeout) as ch:
        reply = ch.request(STATUS_REQ)
    if reply["type"] != "status":
        raise ProtocolError(f"expected a status reply, got {reply['type']!r}")
    return reply
