"""Passive edge-layer sink: accepts detection events and keeps them."""
import logging
import socketserver
import threading

from mistguard.node import protocol

log = logging.getLogger(__name__)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        sink = self.server.sink
        for line in self.rfile:
            try:
                msg = protocol.decode(line)
            except protocol.ProtocolError as exc:
                log.warning("edge sink: dropping malformed event: %s", exc)
                continue
            if msg["type"] == "detection":
                with sink.lock:
                    sink.events.append(msg)


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class EventSink:
    def __init__(self, address=("127.0.0.1", 0)):
        self.events = []
        self.lock = threading.Lock()
        self._server = _Server(tuple(address), _Handler)
        self._server.sink = self
        self._thread = None

    @property
    def address(self):
        return self._server.server_address[:2]

    def snapshot(self):
        with self.lock:
            return list(self.events)

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True,
                                        name="edge-event-sink")
        self._thread.start()
        return self

    def close(self):
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()
