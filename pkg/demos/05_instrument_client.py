"""
Talking to the virtual time tagger
==================================

Start the instrument server in-process, configure the 1 GHz modulation
scenario over TCP, stream the Det2 tags and measure the visibility from
the folded histogram. Against a standalone server (``bench serve``) only
the port changes.
"""

# %%
import asyncio
import json

from lnbench.analysis import modulation_visibility
from lnbench.server import InstrumentServer
from lnbench.timetag import fold_histogram, tags_from_bytes


async def line(reader):
    return (await reader.readline()).decode().rstrip()


async def session(port: int) -> bytes:
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    print("<", await line(reader))

    def send(text):
        print(">", text if len(text) < 70 else text[:67] + "...")
        writer.write((text + "\n").encode())

    send("CONFIG " + json.dumps({"figure": "fig5bc", "seed": 0, "set": {"drive.frequency_hz": 1e9}}))
    print("<", await line(reader))
    send("START")
    print("<", await line(reader))
    send("STATUS")
    print("<", await line(reader))
    send("SUBSCRIBE 0,2")
    print("<", await line(reader))
    data = await reader.read()  # server closes at the end of the stream
    writer.close()
    return data


async def main():
    server = InstrumentServer("127.0.0.1", 0)
    port = await server.start()
    try:
        return await session(port)
    finally:
        await server.close()


# %%
data = asyncio.run(main())
tags = tags_from_bytes(data)
print(f"received {len(data)} bytes = {tags.size} records")

# %%
det2 = tags[tags["channel"] == 2]
trig = tags[tags["channel"] == 0]
print(f"{trig.size} triggers, {det2.size} Det2 clicks")
hist = fold_histogram(det2, 1000, int(trig["time_ps"][0]), 50)
v_over_max, v_standard = modulation_visibility(hist)
print(f"visibility (max-min)/max = {v_over_max:.3f}, (max-min)/(max+min) = {v_standard:.3f}")
