"""The mist node: acquire -> preprocess -> hybrid detect -> zones -> safety.

Safety commands go to every machine endpoint and the loop waits for all acks
before touching the next frame. Detection events go to the optional edge
sink through a bounded drop-oldest queue and never block the loop. Frames
themselves never leave the process.
"""
from __future__ import annotations

import collections
import logging
import socket
import socketserver
import threading
import time

from mistguard.detect import hybrid_step
from mistguard.frame import preprocess
from mistguard.node import protocol
from mistguard.node.config import NodeConfig
from mistguard.node.protocol import LineChannel, ProtocolError
from mistguard.node.sources import DirectorySource, SyntheticSource
from mistguard.zones import Level, SafetyState, safety_step, zone_occupancy

log = logging.getLogger(__name__)

EDGE_QUEUE_DEPTH = 1024


class NodeAbort(RuntimeError):
    """The node stopped abnormally after attempting a failsafe STOP."""

    exit_code = 3


class AckTimeout(RuntimeError):
    pass


def make_source(config: NodeConfig):
    if config.source_kind == "directory":
        return DirectorySource(config.source_path)
    return SyntheticSource(config.scene, config.seed, config.frames or None)


class MachineLink:
    def __init__(self, address, timeout=2.0, retries=5):
        self.address = tuple(address)
        self.timeout = timeout
        self.retries = retries
        self.channel = None

    @property
    def name(self):
        return protocol.format_endpoint(self.address)

    def connect(self):
        delay = 0.05
        last = None
        for _ in range(max(1, self.retries)):
            try:
                ch = LineChannel.connect(self.address, self.timeout)
                reply = ch.request(protocol.HB)
                if reply["type"] != "hb":
                    raise ProtocolError(f"unexpected heartbeat reply {reply['type']!r}")
                self.channel = ch
                return
            except (OSError, ProtocolError, ConnectionError) as exc:
                last = exc
                time.sleep(delay)
                delay = min(delay * 2, 1.0)
        raise ConnectionError(f"machine {self.name} unreachable: {last}")

    def send(self, msg):
        if self.channel is None:
            raise ConnectionError(f"machine {self.name} not connected")
        self.channel.send(msg)

    def wait_ack(self, frame_seq, deadline):
        ch = self.channel
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise AckTimeout(f"no ack from {self.name} for frame {frame_seq}")
            ch.settimeout(remaining)
            try:
                msg = ch.recv()
            except socket.timeout:
                raise AckTimeout(f"no ack from {self.name} for frame {frame_seq}") from None
            if msg["type"] == "ack" and msg["frame_seq"] == frame_seq:
                return
            if msg["type"] == "error":
                raise ProtocolError(f"machine {self.name} rejected command: {msg['message']}")

    def close(self):
        if self.channel is not None:
            try:
                self.channel.close()
            except OSError:
                pass
            self.channel = None


class EdgeSink:
    """Best-effort detection-event forwarder running on its own thread."""

    def __init__(self, address, depth=EDGE_QUEUE_DEPTH):
        self.address = tuple(address)
        self.queue = collections.deque(maxlen=depth)
        self.dropped = 0
        self.sent = 0
        self._cond = threading.Condition()
        self._stop = False
        self._thread = threading.Thread(target=self._run, daemon=True, name="edge-sink")

    def start(self):
        self._thread.start()
        return self

    def put(self, msg):
        with self._cond:
            if len(self.queue) == self.queue.maxlen:
                self.dropped += 1
            self.queue.append(msg)
            self._cond.notify()

    def _run(self):
        ch = None
        while True:
            with self._cond:
                while not self.queue and not self._stop:
                    self._cond.wait()
                if not self.queue and self._stop:
                    break
                msg = self.queue[0]
            try:
                if ch is None:
                    ch = LineChannel.connect(self.address, timeout=2.0)
                ch.send(msg)
            except OSError as exc:
                log.debug("edge sink %s unavailable: %s", self.address, exc)
                if ch is not None:
                    ch.close()
                    ch = None
                with self._cond:
                    if self._stop:
                        break
                    self._cond.wait(0.2)
                continue
            with self._cond:
                if self.queue and self.queue[0] is msg:
                    self.queue.popleft()
                self.sent += 1
        if ch is not None:
            ch.close()

    def close(self, flush_timeout=1.0):
        deadline = time.monotonic() + flush_timeout
        while self.queue and time.monotonic() < deadline and self._thread.is_alive():
            time.sleep(0.01)
        with self._cond:
            self._stop = True
            self._cond.notify_all()
        if self._thread.is_alive():
            self._thread.join(timeout=flush_timeout)


class _StatusHandler(socketserver.StreamRequestHandler):
    def handle(self):
        node = self.server.node
        while True:
            try:
                line = self.rfile.readline(protocol.MAX_LINE + 1)
            except OSError:
                return
            if not line:
                return
            try:
                msg = protocol.decode(line)
                if msg["type"] == "status_req":
                    reply = node.status()
                elif msg["type"] == "hb":
                    reply = protocol.HB
                else:
                    reply = protocol.error(f"unsupported message type {msg['type']!r}")
            except ProtocolError as exc:
                reply = protocol.error(str(exc))
            try:
                self.wfile.write(protocol.encode(reply))
                self.wfile.flush()
            except OSError:
                return


class _StatusServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class Node:
    def __init__(self, config: NodeConfig, source=None, record_trace=False):
        self.config = config
        self.source = source if source is not None else make_source(config)
        self.kernel = config.detector.kernel()
        self.roi = config.detector.roi()
        self.motion = config.detector.motion_state()
        self.safety = SafetyState()
        self.frame_seq = 0
        self.frames = 0
        self.positives = 0
        self.commands = 0
        self.started = time.monotonic()
        self.trace = [] if record_trace else None
        self.links = [MachineLink(a, config.ack_timeout, config.connect_retries)
                      for a in config.machines]
        self.edge = None
        self._status_server = None
        self._status_thread = None
        self._lock = threading.Lock()

    # -- lifecycle -----------------------------------------------------------

    @property
    def status_address(self):
        if self._status_server is None:
            return None
        return self._status_server.server_address[:2]

    def start(self):
        if self.config.listen is not None:
            self._status_server = _StatusServer(tuple(self.config.listen), _StatusHandler)
            self._status_server.node = self
            self._status_thread = threading.Thread(
                target=self._status_server.serve_forever, daemon=True, name="node-status")
            self._status_thread.start()
        if self.config.edge_sink is not None:
            self.edge = EdgeSink(self.config.edge_sink).start()
        if not self.links:
            log.warning("no machine endpoints configured; safety commands have no effect")
        try:
            for link in self.links:
                link.connect()
        except BaseException as exc:
            self._failsafe(exc)
            raise NodeAbort(str(exc)) from exc
        return self

    def close(self):
        for link in self.links:
            link.close()
        if self.edge is not None:
            self.edge.close()
        if self._status_server is not None:
            self._status_server.shutdown()
            self._status_server.server_close()
            self._status_server = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()

    # -- main loop -----------------------------------------------------------

    def run(self):
        """Process frames until the source ends. Abnormal exits raise ``NodeAbort``."""
        period = 1.0 / self.config.fps
        try:
            self._broadcast(0, Level.RUN, "clear")
            next_tick = time.monotonic()
            for raw in self.source:
                self.process(raw)
                next_tick += period
                delay = next_tick - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_tick = time.monotonic()
        except BaseException as exc:
            self._failsafe(exc)
            raise NodeAbort(f"node {self.config.node_id} halted: {exc}") from exc

    def process(self, raw):
        seq = self.frame_seq + 1
        if self.trace is not None:
            self.trace.append(("frame", seq))
        gray = preprocess(raw, self.kernel)
        det, self.motion = hybrid_step(self.motion, gray, self.roi, seq)
        occ = zone_occupancy(det, self.config.policy)
        self.safety, cmd = safety_step(self.safety, occ, self.config.safety, self.config.policy)
        with self._lock:
            self.frame_seq = seq
            self.frames += 1
            self.positives += det.positive
        if cmd is not None:
            self._broadcast(seq, cmd.level, cmd.reason)
        if self.edge is not None:
            self.edge.put(protocol.detection(self.config.node_id, det, int(time.time() * 1000)))
        return det

    def _broadcast(self, seq, level, reason):
        """Send one safety command to every machine and wait for every ack."""
        msg = protocol.safety(self.config.node_id, seq, level, reason)
        for link in self.links:
            link.send(msg)
        deadline = time.monotonic() + self.config.ack_timeout
        for link in self.links:
            link.wait_ack(seq, deadline)
        with self._lock:
            self.commands += 1
        if self.trace is not None:
            self.trace.append(("ack", seq))
        log.info("frame %d: %s (%s)", seq, getattr(level, "name", level), reason)

    def _failsafe(self, cause):
        log.error("node %s failing safe: %s", self.config.node_id, cause)
        seq = self.frame_seq + 1
        msg = protocol.safety(self.config.node_id, seq, Level.STOP, "failsafe")
        self.safety = SafetyState(Level.STOP, 0)
        for link in self.links:
            try:
                if link.channel is None:
                    link.retries = 1
                    link.connect()
                link.send(msg)
                link.wait_ack(seq, time.monotonic() + min(self.config.ack_timeout, 1.0))
            except Exception as exc:
                log.error("failsafe STOP not confirmed by %s: %s", link.name, exc)
                link.close()
        with self._lock:
            self.commands += 1

    def status(self):
        with self._lock:
            return {"type": "status", "node_id": self.config.node_id,
                    "frame_seq": self.frame_seq, "level": self.safety.level.name,
                    "uptime_ms": int((time.monotonic() - self.started) * 1000),
                    "frames": self.frames, "positives": self.positives,
                    "commands": self.commands}


def run_node(config: NodeConfig, source=None):
    """Run until the source is exhausted (0) or abort with ``NodeAbort``."""
    node = Node(config, source)
    try:
        node.start()
        node.run()
    finally:
        node.close()
    return 0
