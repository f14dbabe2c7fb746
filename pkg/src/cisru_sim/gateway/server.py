"""Serving mode: the kernel advances in real time while console clients talk
the wire protocol over TCP.

Frames are length-prefixed: a 4-byte big-endian payload length followed by
one UTF-8 JSON document with a `type` field in {Hello, Snapshot, Event,
Command, Ack, Error}. Connection handlers only exchange immutable values
with the kernel thread through queues; commands land at tick boundaries.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
import time

from ..grid import GridMap
from ..mas import GoalStatus
from .runner import SimKernel

PROTOCOL_VERSION = 1
MAX_FRAME = 8 * 1024 * 1024


class BindError(Exception):
    pass


def encode_frame(doc: dict) -> bytes:
    payload = json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


def read_frame(sock: socket.socket) -> dict | None:
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise ValueError(f"frame too large: {length}")
    body = _read_exact(sock, length)
    if body is None:
        return None
    return json.loads(body.decode("utf-8"))


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = b""
    while len(chunks) < n:
        part = sock.recv(n - len(chunks))
        if not part:
            return None
        chunks += part
    return chunks


class _Client:
    def __init__(self, sock: socket.socket, addr):
        self.sock = sock
        self.addr = addr
        self.lock = threading.Lock()
        self.alive = True

    def send(self, doc: dict):
        if not self.alive:
            return
        try:
            with self.lock:
                self.sock.sendall(encode_frame(doc))
        except OSError:
            self.alive = False


class GatewayServer:
    """TCP front end for one live kernel session."""

    def __init__(self, kernel: SimKernel, port: int, rate: float = 10.0,
                 host: str = "127.0.0.1"):
        self.kernel = kernel
        self.rate = max(0.1, rate)
        self.clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        try:
            self._listener = socket.create_server((host, port))
        except OSError as exc:
            raise BindError(f"cannot bind port {port}: {exc}") from None
        self.port = self._listener.getsockname()[1]
        kernel.log.subscribe(self._on_record)
        self._new_records: list = []
        self._records_lock = threading.Lock()

    # -- snapshot assembly ------------------------------------------------------

    def snapshot_doc(self) -> dict:
        kernel = self.kernel
        view_map: GridMap | None = kernel.fused_map
        if view_map is None:
            for agent in kernel.agents.values():
                view_map = agent.executive.known_map
                break
        goals = {}
        for agent in kernel.agents.values():
            for goal_id, goal in agent.executive.goals.items():
                goals[goal_id] = goal.as_dict()
        prompts = [
            {"case_id": c.case_id, "astronaut": c.astronaut_id, "t_prompt": c.t_prompt}
            for c in kernel.supervisor.open_cases()
        ]
        entities = []
        for ent in kernel.world.entities.values():
            entities.append({
                "id": ent.entity_id, "kind": ent.kind.value,
                "x": round(ent.pose.x, 3), "y": round(ent.pose.y, 3),
                "theta": round(ent.pose.theta, 3),
                "footprint_radius": ent.footprint_radius,
                "posture": ent.posture.value if ent.posture else None,
            })
        tracks = [
            {"track_id": t.track_id, "cls": t.cls, "x": round(t.last_pos[0], 3),
             "y": round(t.last_pos[1], 3), "status": t.status}
            for t in kernel.tracker.tracks
        ]
        storage = {aid: a.storage.as_list() for aid, a in kernel.agents.items()
                   if a.storage is not None}
        levels = {aid: kernel.router.level_of(aid).value for aid in kernel.agents}
        return {
            "type": "Snapshot",
            "tick": kernel.world.clock.tick,
            "map": view_map.to_dump() if view_map is not None else None,
            "entities": entities,
            "tracks": tracks,
            "goals": goals,
            "prompts": prompts,
            "alerts": kernel._last_alerts[-20:],
            "storage": storage,
            "levels": levels,
        }

    # -- client plumbing -----------------------------------------------------------

    def _on_record(self, record):
        with self._records_lock:
            self._new_records.append(record)

    def _accept_loop(self):
        # only the kernel-loop thread touches simulation state: new sockets
        # are queued here and attached at the next tick boundary
        while not self._stop.is_set():
            try:
                self._listener.settimeout(0.2)
                sock, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._joining_lock:
                self._joining.append(_Client(sock, addr))

    def _attach_new_clients(self):
        with self._joining_lock:
            joining, self._joining = self._joining, []
        if not joining:
            return
        snapshot = self.snapshot_doc()
        for client in joining:
            client.send({"type": "Hello", "protocol": PROTOCOL_VERSION,
                         "scenario": self.kernel.spec.name,
                         "tick": self.kernel.world.clock.tick})
            client.send(snapshot)
            with self._clients_lock:
                self.clients.append(client)
            threading.Thread(target=self._reader_loop, args=(client,),
                             daemon=True).start()

    def _reader_loop(self, client: _Client):
        while not self._stop.is_set() and client.alive:
            try:
                doc = read_frame(client.sock)
            except (ValueError, json.JSONDecodeError, OSError) as exc:
                client.send({"type": "Error", "reason": "MalformedFrame",
                             "detail": str(exc)})
                continue
            if doc is None:
                client.alive = False
                break
            if doc.get("type") != "Command" or "command" not in doc:
                client.send({"type": "Error", "reason": "MalformedFrame",
                             "cmd_id": doc.get("cmd_id"),
                             "detail": "expected a Command frame"})
                continue
            cmd_id = doc.get("cmd_id")

            def reply(ok: bool, result: dict, _cmd_id=cmd_id, _client=client):
                if ok:
                    _client.send({"type": "Ack", "cmd_id": _cmd_id, "result": result})
                else:
                    _client.send({"type": "Error", "cmd_id": _cmd_id,
                                  "reason": result.get("reason", "Error"),
                                  "detail": result.get("detail")})

            self.kernel.submit_command(doc["command"], reply)

    def _broadcast(self, doc: dict):
        with self._clients_lock:
            clients = list(self.clients)
        for client in clients:
            client.send(doc)
        with self._clients_lock:
            self.clients = [c for c in self.clients if c.alive]

    # -- main loop --------------------------------------------------------------------

    def run_forever(self, max_ticks: int | None = None):
        threading.Thread(target=self._accept_loop, daemon=True).start()
        period = 1.0 / self.rate
        ticks = 0
        try:
            while not self._stop.is_set():
                started = time.monotonic()
                self.kernel.step()
                ticks += 1
                with self._records_lock:
                    fresh, self._new_records = self._new_records, []
                for record in fresh:
                    self._broadcast({"type": "Event", "record": {
                        "tick": record.tick, "seq": record.seq,
                        "source": record.source, "type": record.type,
                        "payload": record.payload}})
                self._broadcast(self.snapshot_doc())
                if max_ticks is not None and ticks >= max_ticks:
                    break
                elapsed = time.monotonic() - started
                if elapsed < period:
                    time.sleep(period - elapsed)
        finally:
            self.stop()

    def stop(self):
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._clients_lock:
            for client in self.clients:
                try:
                    client.sock.close()
                except OSError:
                    pass
            self.clients = []


def serve(scenario_path: str, port: int, rate: float = 10.0,
          max_ticks: int | None = None, log_path: str | None = None) -> int:
    from .events import EventLog
    from .scenario import load_scenario_file

    spec = load_scenario_file(scenario_path)
    log = EventLog(log_path)
    kernel = SimKernel(spec, log)
    server = GatewayServer(kernel, port, rate)
    print(f"serving scenario {spec.name!r} on port {server.port} "
          f"at {rate} ticks/s", flush=True)
    try:
        server.run_forever(max_ticks)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        log.close()
    return 0
