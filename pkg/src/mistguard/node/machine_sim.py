"""Simulated robot controller that obeys safety commands from a node."""
from __future__ import annotations

import logging
import os
import socketserver
import threading
import time
from dataclasses import dataclass, field

from mistguard.node import protocol

log = logging.getLogger(__name__)

LOG_HEADER = "ts_ms,frame_seq,level,reason\n"


@dataclass
class LogEntry:
    ts_ms: int
    frame_seq: int
    level: str
    reason: str


@dataclass
class MachineState:
    machine_id: str
    # machines stay stopped until a node tells them otherwise
    level: str = "STOP"
    last_command_seq: int = -1
    log: list = field(default_factory=list)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        sim = self.server.sim
        while True:
            try:
                line = self.rfile.readline(protocol.MAX_LINE + 1)
            except OSError:
                return
            if not line:
                return
            if not line.strip():
                continue
            try:
                msg = protocol.decode(line)
            except protocol.ProtocolError as exc:
                log.warning("%s: malformed message: %s", sim.state.machine_id, exc)
                reply = protocol.error(str(exc))
            else:
                reply = sim.handle(msg)
            try:
                self.wfile.write(protocol.encode(reply))
                self.wfile.flush()
            except OSError:
                return


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class MachineSim:
    """TCP server applying ``safety`` commands and acknowledging them.

    ``ack_delay`` (seconds) postpones every ack, ``on_command`` is called with
    each accepted command before the ack is sent; both exist for fault
    injection in tests.
    """

    def __init__(self, address=("127.0.0.1", 0), machine_id="machine", log_path=None,
                 ack_delay=0.0, on_command=None):
        self.state = MachineState(machine_id)
        self.log_path = os.fspath(log_path) if log_path is not None else None
        self.ack_delay = ack_delay
        self.on_command = on_command
        self._lock = threading.Lock()
        self._server = _Server(tuple(address), _Handler)
        self._server.sim = self
        self._thread = None
        if self.log_path is not None:
            with open(self.log_path, "w", encoding="utf-8") as fh:
                fh.write(LOG_HEADER)

    @property
    def address(self):
        return self._server.server_address[:2]

    def handle(self, msg):
        mtype = msg["type"]
        if mtype == "hb":
            return protocol.HB
        if mtype != "safety":
            return protocol.error(f"unsupported message type {mtype!r}")
        seq = msg["frame_seq"]
        with self._lock:
            st = self.state
            if seq <= st.last_command_seq:
                log.warning("%s: ignoring safety command with frame_seq %d (last %d)",
                            st.machine_id, seq, st.last_command_seq)
            else:
                entry = LogEntry(int(time.time() * 1000), seq, msg["level"], msg["reason"])
                st.level = msg["level"]
                st.last_command_seq = seq
                st.log.append(entry)
                if self.log_path is not None:
                    with open(self.log_path, "a", encoding="utf-8") as fh:
                        fh.write(f"{entry.ts_ms},{entry.frame_seq},{entry.level},{entry.reason}\n")
                log.info("%s: %s at frame %d (%s)", st.machine_id, entry.level, seq, entry.reason)
        if self.on_command is not None:
            self.on_command(msg)
        if self.ack_delay:
            time.sleep(self.ack_delay)
        return protocol.ack(seq)

    def snapshot(self):
        with self._lock:
            st = self.state
            return MachineState(st.machine_id, st.level, st.last_command_seq, list(st.log))

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True,
                                        name=f"machine-sim-{self.state.machine_id}")
        self._thread.start()
        return self

    def serve_forever(self):
        self._server.serve_forever()

    def close(self):
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join()
            self._thread = None
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()


def read_log(path):
    """Parse a machine log CSV into ``LogEntry`` rows."""
    import csv
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [LogEntry(int(r["ts_ms"]), int(r["frame_seq"]), r["level"], r["reason"]) for r in rows]


def run_machine_sim(address, machine_id, log_path=None):
    """Serve until interrupted."""
    sim = MachineSim(address, machine_id, log_path)
    log.info("machine %s listening on %s", machine_id, protocol.format_endpoint(sim.address))
    try:
        sim.serve_forever()
    finally:
        sim._server.server_close()
