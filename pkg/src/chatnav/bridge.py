"""Network bridge: exposes bus topics to external clients over WebSocket.

Each connected client receives every envelope published on the exposed
topics as a JSON frame {"topic", "seq", "stamp", "payload"}; frames sent by
clients are published on chat/in.  Malformed frames get an error frame back
and the connection stays open.  A plain HTTP GET on /map returns the grid
metadata so map rendering does not need a live subscription.
"""

from __future__ import annotations

import json
import socket
import threading
from typing import Optional

from websockets.http11 import Headers, Response
from websockets.sync.server import serve

from .bus import Bus, SchemaError
from .world import WorldModel

DEFAULT_EXPOSED = ("chat/out", "pose", "detections", "nav/status", "nav/path",
                   "cmd_vel", "diag")
CLIENT_TOPIC = "chat/in"


class BridgeError(RuntimeError):
    pass


def _frame(env) -> str:
    return json.dumps({"topic": env.topic, "seq": env.seq, "stamp": env.stamp,
                       "payload": env.payload})


def _error_frame(message: str) -> str:
    return json.dumps({"topic": "error", "payload": {"message": message}})


class Bridge:
    """WebSocket fan-out of exposed topics plus chat/in ingestion."""

    def __init__(self, bus: Bus, port: int = 8765,
                 exposed: tuple[str, ...] = DEFAULT_EXPOSED,
                 world: Optional[WorldModel] = None,
                 host: str = "127.0.0.1") -> None:
        self.bus = bus
        self.port = port
        self.host = host
        self.exposed = tuple(exposed)
        self.world = world
        self._clients: set = set()
        self._clients_lock = threading.Lock()
        self._server = None
        self._threads: list[threading.Thread] = []
        self._stopped = threading.Event()

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        try:
            self._server = serve(self._handle_client, self.host, self.port,
                                 process_request=self._process_request)
        except OSError as exc:
            raise BridgeError(f"cannot bind port {self.port}: {exc}") from exc
        accept = threading.Thread(target=self._server.serve_forever,
                                  name="bridge-accept", daemon=True)
        accept.start()
        self._threads.append(accept)
        for topic in self.exposed:
            t = threading.Thread(target=self._pump_topic, args=(topic,),
                                 name=f"bridge-{topic}", daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self._stopped.set()
        if self._server is not None:
            self._server.shutdown()
        with self._clients_lock:
            clients = list(self._clients)
        for conn in clients:
            try:
                conn.close()
            except OSError:
                pass

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}"

    # -- server internals ---------------------------------------------------

    def _map_metadata(self) -> dict:
        if self.world is None:
            return {}
        grid = self.world.grid
        return {
            "width": grid.width,
            "height": grid.height,
            "resolution": grid.resolution,
            "origin": list(grid.origin),
            "cells": grid.rows_as_text(),
            "objects": [{"label": o.label, "x": o.x, "y": o.y, "radius": o.radius}
                        for o in self.world.objects],
        }

    def _process_request(self, connection, request):
        if request.path == "/map":
            body = json.dumps(self._map_metadata()).encode()
            headers = Headers([
                ("Content-Type", "application/json"),
                ("Content-Length", str(len(body))),
                ("Access-Control-Allow-Origin", "*"),
            ])
            return Response(200, "OK", headers, body)
        return None  # proceed with the WebSocket handshake

    def _pump_topic(self, topic: str) -> None:
        sub = self.bus.subscribe(topic)
        while not self._stopped.is_set():
            env = sub.get(timeout=0.25)
            if env is None:
                continue
            frame = _frame(env)
            with self._clients_lock:
                clients = list(self._clients)
            for conn in clients:
                try:
                    conn.send(frame)
                except Exception:
                    with self._clients_lock:
                        self._clients.discard(conn)

    def _handle_client(self, connection) -> None:
        with self._clients_lock:
            self._clients.add(connection)
        try:
            for message in connection:
                reply = self._ingest(message)
                if reply is not None:
                    connection.send(reply)
        except Exception:
            pass
        finally:
            with self._clients_lock:
                self._clients.discard(connection)

    def _ingest(self, message) -> Optional[str]:
        """Publish one client frame; returns an error frame on rejection."""
        try:
            doc = json.loads(message)
        except (json.JSONDecodeError, TypeError):
            return _error_frame("frame is not valid JSON")
        if not isinstance(doc, dict) or "topic" not in doc or "payload" not in doc:
            return _error_frame("frame needs 'topic' and 'payload'")
        if doc["topic"] != CLIENT_TOPIC:
            return _error_frame(f"clients may only publish on '{CLIENT_TOPIC}'")
        try:
            self.bus.publish(CLIENT_TOPIC, doc["payload"])
        except SchemaError as exc:
            return _error_frame(f"payload rejected: {exc}")
        return None


def free_port() -> int:
    """An OS-assigned free TCP port (for tests and default configs)."""
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]
