"""Virtual time tagger served over TCP.

Control lines are UTF-8 and newline terminated; every command gets exactly
one ``OK ...`` or ``ERR <code> <message>`` line, written in a single flush.
After ``SUBSCRIBE`` the connection carries 12-byte tag records (the timetag
wire format) and is closed at the end of the stream; ``STOP`` sent on a
subscribed connection ends the stream early.

Commands::

    CONFIG <json>        scenario dict, params.json content, or {"figure": id, "seed": n, "set": {...}}
    START                generate the configured run
    STOP                 abort the run
    STATUS               OK <state> tags=<n> elapsed_ps=<t>
    SUBSCRIBE <ch,...>   stream records of those channels from cursor 0
    ATTACH <session id>  continue an existing session on this connection

Error codes: 400 malformed or unknown command, 409 wrong state, 422 invalid
configuration field (the field path is echoed).
"""

from __future__ import annotations

import asyncio
import collections
import itertools
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .photon_mc import Scenario, run_scenario
from .timetag import OVERFLOW_CHANNEL, TAG_DTYPE

log = logging.getLogger(__name__)

DEFAULT_PORT = 8471
DEFAULT_QUEUE_RECORDS = 2**16
CHUNK_RECORDS = 4096


class ProtocolError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class Subscriber:
    """Per-connection outbound buffer of tag records.

    In lossless mode the producer waits for room; otherwise records that do
    not fit are counted and replaced by one overflow marker as soon as the
    buffer has room again.
    """

    def __init__(self, channels: set[int], limit: int):
        self.channels = channels
        self.limit = limit
        self.items: collections.deque = collections.deque()
        self.queued = 0
        self.dropped = 0
        self.closed = False
        self._changed = asyncio.Condition()

    def _filter(self, recs: np.ndarray) -> np.ndarray:
        return recs[np.isin(recs["channel"], list(self.channels))]

    def preload(self, recs: np.ndarray) -> None:
        """Queue a backlog before the subscriber is registered (ignores the limit)."""
        recs = self._filter(recs)
        if recs.size:
            self.items.append(recs)
            self.queued += recs.size

    async def offer(self, recs: np.ndarray, lossless: bool) -> None:
        recs = self._filter(recs)
        if self.closed or recs.size == 0:
            return
        async with self._changed:
            if lossless:
                await self._changed.wait_for(lambda: self.closed or self.queued == 0 or self.queued + recs.size <= self.limit)
                if self.closed:
                    return
            elif self.queued and self.queued + recs.size + (1 if self.dropped else 0) > self.limit:
                self.dropped += int(recs.size)
                return
            if self.dropped:
                marker = np.zeros(1, dtype=TAG_DTYPE)
                marker["channel"] = OVERFLOW_CHANNEL
                marker["time_ps"] = self.dropped
                self.items.append(marker)
                self.queued += 1
                self.dropped = 0
            self.items.append(recs)
            self.queued += recs.size
            self._changed.notify_all()

    async def finish(self) -> None:
        async with self._changed:
            self.items.append(None)
            self._changed.notify_all()

    async def next_item(self):
        async with self._changed:
            await self._changed.wait_for(lambda: bool(self.items) or self.closed)
            if not self.items:
                return None
            item = self.items.popleft()
            if item is not None:
                self.queued -= item.size
            self._changed.notify_all()
            return item

    async def close(self) -> None:
        async with self._changed:
            self.closed = True
            self._changed.notify_all()


@dataclass
class Session:
    id: str
    scenario: Scenario | None = None
    state: str = "idle"
    tags: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=TAG_DTYPE))
    cursor: int = 0
    elapsed_ps: int = 0
    subscribers: list[Subscriber] = field(default_factory=list)
    task: asyncio.Task | None = None

    def status_line(self) -> str:
        return f"OK {self.state} tags={self.cursor} elapsed_ps={self.elapsed_ps}"


def parse_config(payload: str) -> Scenario:
    try:
        data = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ProtocolError(400, f"malformed JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ProtocolError(400, "malformed JSON: expected an object")
    try:
        if isinstance(data.get("scenario"), dict):  # a report's params.json
            return Scenario.from_dict(data["scenario"])
        if "figure" in data:
            from .harness import figure_scenario

            unknown = set(data) - {"figure", "seed", "set"}
            if unknown:
                raise ConfigError(sorted(unknown)[0], "unknown field")
            return figure_scenario(data["figure"], int(data.get("seed", 0)), data.get("set", {}))
        return Scenario.from_dict(data)
    except ConfigError as exc:
        raise ProtocolError(422, f"{exc.field}: {exc.message}") from None
    except (TypeError, ValueError) as exc:
        raise ProtocolError(422, str(exc)) from None


def parse_channels(arg: str) -> set[int]:
    try:
        chans = {int(c) for c in arg.replace(",", " ").split()}
    except ValueError:
        raise ProtocolError(400, "channel list must be integers") from None
    if not chans or any(c < 0 for c in chans):
        raise ProtocolError(400, "channel list must be non-empty and non-negative")
    return chans


class InstrumentServer:
    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        *,
        realtime: bool = False,
        queue_records: int = DEFAULT_QUEUE_RECORDS,
    ):
        self.host = host
        self.port = port
        self.realtime = realtime
        self.queue_records = queue_records
        self.sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self._server: asyncio.base_events.Server | None = None

    async def start(self) -> int:
        self._server = await asyncio.start_server(self._handle, self.host, self.port, limit=1 << 22)
        self.port = self._server.sockets[0].getsockname()[1]
        return self.port

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def close(self) -> None:
        for s in self.sessions.values():
            if s.task is not None:
                s.task.cancel()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    # --- run state -----------------------------------------------------------

    def _new_session(self) -> Session:
        sid = f"s{next(self._ids)}"
        self.sessions[sid] = Session(sid)
        return self.sessions[sid]

    async def _produce(self, session: Session) -> None:
        try:
            result = await asyncio.to_thread(run_scenario, session.scenario)
            tags = result.merged()
            session.tags = tags
            lossless = not self.realtime
            t0 = time.monotonic()
            for start in range(0, tags.size, CHUNK_RECORDS):
                chunk = tags[start : start + CHUNK_RECORDS]
                if self.realtime:
                    due = t0 + int(chunk["time_ps"][0]) * 1e-12
                    delay = due - time.monotonic()
                    if delay > 0:
                        await asyncio.sleep(delay)
                session.cursor = start + chunk.size
                session.elapsed_ps = int(chunk["time_ps"][-1])
                for sub in list(session.subscribers):
                    await sub.offer(chunk, lossless)
                await asyncio.sleep(0)
            session.elapsed_ps = session.scenario.duration_ps
            session.state = "stopped"
            for sub in list(session.subscribers):
                await sub.finish()
        except asyncio.CancelledError:
            session.state = "stopped"
            raise
        except Exception as exc:  # surfaced through STATUS
            log.exception("session %s failed", session.id)
            session.state = f"failed:{type(exc).__name__}"

    # --- protocol ------------------------------------------------------------

    async def handle_command(self, session: Session, line: str) -> str:
        """Apply one control line to ``session`` and return the response line."""
        cmd, _, arg = line.strip().partition(" ")
        cmd = cmd.upper()
        try:
            if cmd == "CONFIG":
                if session.state == "running":
                    raise ProtocolError(409, "cannot configure while running")
                if not arg.strip():
                    raise ProtocolError(400, "CONFIG needs a JSON document")
                session.scenario = parse_config(arg)
                session.state = "idle"
                session.cursor = session.elapsed_ps = 0
                session.tags = np.empty(0, dtype=TAG_DTYPE)
                return "OK configured"
            if cmd == "START":
                if session.scenario is None:
                    raise ProtocolError(409, "no scenario loaded")
                if session.state == "running":
                    raise ProtocolError(409, "already running")
                session.state = "running"
                session.cursor = session.elapsed_ps = 0
                session.tags = np.empty(0, dtype=TAG_DTYPE)
                session.task = asyncio.create_task(self._produce(session))
                return "OK started"
            if cmd == "STOP":
                if session.state != "running":
                    raise ProtocolError(409, "not running")
                session.task.cancel()
                session.state = "stopped"
                for sub in list(session.subscribers):
                    await sub.finish()
                return "OK stopped"
            if cmd == "STATUS":
                return session.status_line()
            if cmd in ("", "SUBSCRIBE", "ATTACH"):
                raise ProtocolError(400, "empty command" if not cmd else f"{cmd} needs an argument")
            raise ProtocolError(400, f"unknown command {cmd}")
        except ProtocolError as exc:
            return f"ERR {exc.code} {exc.message}"

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        session = self._new_session()
        await self._send(writer, f"OK session {session.id}")
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    return
                try:
                    line = raw.decode("utf-8").rstrip("\r\n")
                except UnicodeDecodeError:
                    await self._send(writer, "ERR 400 control lines must be UTF-8")
                    continue
                cmd, _, arg = line.strip().partition(" ")
                if cmd.upper() == "ATTACH" and arg.strip():
                    other = self.sessions.get(arg.strip())
                    if other is None:
                        await self._send(writer, f"ERR 409 no session {arg.strip()}")
                    else:
                        session = other
                        await self._send(writer, f"OK attached {session.id}")
                    continue
                if cmd.upper() == "SUBSCRIBE" and arg.strip():
                    try:
                        chans = parse_channels(arg)
                    except ProtocolError as exc:
                        await self._send(writer, f"ERR {exc.code} {exc.message}")
                        continue
                    await self._send(writer, "OK subscribed")
                    await self._stream(session, chans, reader, writer)
                    return
                await self._send(writer, await self.handle_command(session, line))
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()

    async def _send(self, writer: asyncio.StreamWriter, line: str) -> None:
        writer.write((line + "\n").encode("utf-8"))
        await writer.drain()

    async def _stream(self, session: Session, chans: set[int], reader, writer) -> None:
        sub = Subscriber(chans, self.queue_records)
        # backlog up to the cursor, then the live feed; no await in between
        sub.preload(session.tags[: session.cursor])
        if session.state in ("idle", "running"):
            session.subscribers.append(sub)
        else:
            sub.items.append(None)

        async def watch_control():
            while True:
                raw = await reader.readline()
                if not raw or raw.strip().upper() == b"STOP":
                    await sub.close()
                    return

        watcher = asyncio.create_task(watch_control())
        try:
            while True:
                item = await sub.next_item()
                if item is None:
                    break
                writer.write(item.tobytes())
                await writer.drain()
        finally:
            watcher.cancel()
            await sub.close()
            if sub in session.subscribers:
                session.subscribers.remove(sub)


def run_server(port: int = DEFAULT_PORT, *, host: str = "127.0.0.1", realtime: bool = False) -> None:
    server = InstrumentServer(host, port, realtime=realtime)

    async def main():
        await server.start()
        log.info("listening on %s:%d", host, server.port)
        await server.serve_forever()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
