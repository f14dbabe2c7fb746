"""Append-only event log: one JSON document per line, fixed field order
(tick, seq, source, type, payload), UTF-8, newline terminated. Byte-exact for
a given scenario and seed; the reproducibility backbone."""

from __future__ import annotations

import json
from dataclasses import dataclass


class LogCorrupt(Exception):
    pass


@dataclass
class EventRecord:
    tick: int
    seq: int
    source: str
    type: str
    payload: dict

    def to_line(self) -> str:
        doc = {"tick": self.tick, "seq": self.seq, "source": self.source,
               "type": self.type, "payload": self.payload}
        return json.dumps(doc, separators=(",", ":"), ensure_ascii=False) + "\n"

    @staticmethod
    def from_line(line: str) -> "EventRecord":
        try:
            doc = json.loads(line)
            return EventRecord(int(doc["tick"]), int(doc["seq"]), str(doc["source"]),
                               str(doc["type"]), doc["payload"])
        except (ValueError, KeyError, TypeError) as exc:
            raise LogCorrupt(f"bad event line: {exc}") from None


class EventLog:
    """Collects records in order and optionally streams them to a file."""

    def __init__(self, path: str | None = None):
        self.records: list[EventRecord] = []
        self.lines: list[str] = []
        self._path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n") if path else None
        self._tick = -1
        self._seq = 0
        self._listeners: list = []

    def subscribe(self, fn):
        self._listeners.append(fn)

    def append(self, tick: int, source: str, type_: str, payload: dict) -> EventRecord:
        if tick < self._tick:
            raise ValueError(f"event tick went backwards: {tick} < {self._tick}")
        if tick != self._tick:
            self._tick = tick
            self._seq = 0
        record = EventRecord(tick, self._seq, source, type_, payload)
        self._seq += 1
        self.records.append(record)
        line = record.to_line()
        self.lines.append(line)
        if self._fh:
            self._fh.write(line)
        for fn in self._listeners:
            fn(record)
        return record

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None

    def of_type(self, type_: str) -> list[EventRecord]:
        return [r for r in self.records if r.type == type_]


def read_log(path: str) -> list[EventRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(EventRecord.from_line(line))
    if not records:
        raise LogCorrupt("empty log")
    return records
