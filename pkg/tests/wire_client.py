"""Minimal asyncio client for the instrument server used by the tests."""

from __future__ import annotations

import asyncio
import contextlib
import json

from lnbench.server import InstrumentServer


class Client:
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer
        self.session = None

    @classmethod
    async def connect(cls, port: int) -> "Client":
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        c = cls(reader, writer)
        greeting = await c.line()
        assert greeting.startswith("OK session "), greeting
        c.session = greeting.split()[-1]
        return c

    async def line(self) -> str:
        raw = await asyncio.wait_for(self.reader.readline(), 30)
        return raw.decode().rstrip("\n")

    async def cmd(self, text: str) -> str:
        self.writer.write((text + "\n").encode())
        await self.writer.drain()
        return await self.line()

    async def config(self, scenario_dict: dict) -> str:
        return await self.cmd("CONFIG " + json.dumps(scenario_dict))

    async def read_stream(self) -> bytes:
        return await asyncio.wait_for(self.reader.read(), 60)

    async def close(self) -> None:
        self.writer.close()
        with contextlib.suppress(Exception):
            await self.writer.wait_closed()


@contextlib.asynccontextmanager
async def running_server(**kw):
    server = InstrumentServer("127.0.0.1", 0, **kw)
    await server.start()
    try:
        yield server
    finally:
        await server.close()


async def stream_once(port: int, scenario_dict: dict, channels: str) -> bytes:
    """Configure, subscribe from a second connection, start, and collect the stream."""
    ctl = await Client.connect(port)
    assert await ctl.config(scenario_dict) == "OK configured"
    sub = await Client.connect(port)
    assert await sub.cmd(f"ATTACH {ctl.session}") == f"OK attached {ctl.session}"
    assert await sub.cmd(f"SUBSCRIBE {channels}") == "OK subscribed"
    assert await ctl.cmd("START") == "OK started"
    data = await sub.read_stream()
    await sub.close()
    await ctl.close()
    return data
