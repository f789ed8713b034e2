"""Time-tagger emulation on an integer-picosecond timebase.

Tag streams are numpy structured arrays with the packed little-endian
layout of the wire/file format (``channel`` u32, ``time_ps`` u64; 12 bytes
per record), so ``tags.tobytes()`` *is* the binary export.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TAG_DTYPE = np.dtype([("channel", "<u4"), ("time_ps", "<u8")])
assert TAG_DTYPE.itemsize == 12

OVERFLOW_CHANNEL = 0xFFFFFFFF


def make_tags(channel: int | np.ndarray, times_ps) -> np.ndarray:
    times = np.asarray(times_ps)
    if times.size and times.min() < 0:
        raise ValueError("tag times must be non-negative")
    out = np.empty(times.size, dtype=TAG_DTYPE)
    out["channel"] = channel
    out["time_ps"] = times
    return out


def merge_streams(*streams: np.ndarray) -> np.ndarray:
    """Merge tag streams into one, ordered by time, then channel, then input order."""
    if not streams:
        return np.empty(0, dtype=TAG_DTYPE)
    allt = np.concatenate([np.asarray(s, dtype=TAG_DTYPE) for s in streams])
    order = np.lexsort((np.arange(allt.size), allt["channel"], allt["time_ps"]))
    return allt[order]


def tags_to_bytes(tags: np.ndarray) -> bytes:
    return np.ascontiguousarray(tags, dtype=TAG_DTYPE).tobytes()


def tags_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) % TAG_DTYPE.itemsize:
        raise ValueError(f"buffer length {len(buf)} is not a multiple of 12")
    return np.frombuffer(buf, dtype=TAG_DTYPE).copy()


def write_tags(path: str | Path, tags: np.ndarray) -> None:
    Path(path).write_bytes(tags_to_bytes(tags))


def read_tags(path: str | Path) -> np.ndarray:
    return tags_from_bytes(Path(path).read_bytes())


@dataclass
class Histogram:
    bin_width_ps: int
    origin_ps: int = 0
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fold_period_ps: int | None = None

    def __post_init__(self):
        if self.bin_width_ps <= 0:
            raise ValueError("bin width must be > 0")
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    @property
    def bin_starts_ps(self) -> np.ndarray:
        return self.origin_ps + self.bin_width_ps * np.arange(self.counts.size, dtype=np.int64)

    @property
    def bin_centers_ps(self) -> np.ndarray:
        """Centers; a truncated last bin of a fold is centered on its own extent."""
        starts = self.bin_starts_ps.astype(float)
        widths = np.full(self.counts.size, float(self.bin_width_ps))
        if self.fold_period_ps is not None and self.counts.size:
            widths[-1] = self.origin_ps + self.fold_period_ps - starts[-1]
        return starts + widths / 2

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "Histogram") -> "Histogram":
        if (self.bin_width_ps, self.origin_ps, self.fold_period_ps, self.counts.size) != (
            other.bin_width_ps,
            other.origin_ps,
            other.fold_period_ps,
            other.counts.size,
        ):
            raise ValueError("histograms have different binning")
        return Histogram(self.bin_width_ps, self.origin_ps, self.counts + other.counts, self.fold_period_ps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_start_ps", "count"])
        w.writerows(zip(self.bin_starts_ps.tolist(), self.counts.tolist()))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, fold_period_ps: int | None = None) -> "Histogram":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["bin_start_ps", "count"]:
            raise ValueError("expected header 'bin_start_ps,count'")
        starts = np.array([int(r[0]) for r in rows[1:]], dtype=np.int64)
        counts = np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
        if starts.size < 2:
            raise ValueError("need at least two bins to infer the bin width")
        width = int(starts[1] - starts[0])
        if np.any(np.diff(starts) != width):
            raise ValueError("bins are not uniformly spaced")
        return cls(width, int(starts[0]), counts, fold_period_ps)


def _times(tags) -> np.ndarray:
    arr = np.asarray(tags)
    if arr.dtype.names:
        arr = arr["time_ps"]
    return arr.astype(np.int64, copy=False)


def fold_histogram(tags, trigger_period_ps: int, trigger_phase_ps: int, bin_width_ps: int) -> Histogram:
    """Histogram of tag times modulo the trigger period.

    The bins cover exactly one period starting at the trigger phase; if the
    period is not a multiple of the bin width the last bin is narrower.
    """
    if not trigger_period_ps > bin_width_ps > 0:
        raise ValueError("need trigger_period_ps > bin_width_ps > 0")
    t = _times(tags)
    n_bins = math.ceil(trigger_period_ps / bin_width_ps)
    folded = np.mod(t - trigger_phase_ps, trigger_period_ps)
    counts = np.bincount(folded // bin_width_ps, minlength=n_bins).astype(np.int64)
    return Histogram(bin_width_ps, 0, counts, trigger_period_ps)


def start_stop_histogram(starts, stops, bin_width_ps: int, max_delta_ps: int) -> Histogram:
    """Delay from each start to the next stop at or after it."""
    if bin_width_ps <= 0:
        raise ValueError("bin width must be > 0")
    a = _times(starts)
    b = _times(stops)
    n_bins = max_delta_ps // bin_width_ps + 1
    idx = np.searchsorted(b, a, side="left")
    ok = idx < b.size
    delta = b[idx[ok]] - a[ok]
    delta = delta[delta <= max_delta_ps]
    counts = np.bincount(delta // bin_width_ps, minlength=n_bins).astype(np.int64)
    return Histogram(bin_width_ps, 0, counts[:n_bins])


def count_rate(tags, window_start_ps: int, window_end_ps: int) -> float:
    if not window_end_ps > window_start_ps:
        raise ValueError("window end must follow window start")
    t = _times(tags)
    n = np.count_nonzero((t >= window_start_ps) & (t < window_end_ps))
    return n / ((window_end_ps - window_start_ps) * 1e-12)
