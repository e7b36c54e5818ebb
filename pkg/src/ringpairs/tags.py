"""Time-tag streams and their on-disk formats.

A stream is a strictly increasing array of integer picosecond timestamps
recorded on one detector channel.  Two file formats are supported:

* ``.qtg`` -- little-endian binary: ``b"QTG1"``, ``u16 version``,
  ``u16 channel_count``, ``u64 duration_ps``, then packed records
  ``{u16 channel, u64 time_ps}`` sorted by time.
* CSV with header ``time_ps,channel``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import RingPairsError, UnsortedStreamError

PS = 1e-12
MAGIC = b"QTG1"
VERSION = 1
_HEADER = struct.Struct("<4sHHQ")
RECORD_DTYPE = np.dtype([("channel", "<u2"), ("time_ps", "<u8")])


def seconds_to_ps(t: float) -> int:
    return int(round(t / PS))


@dataclass(frozen=True)
class TimeTagStream:
    channel_label: str
    duration: float
    tags: np.ndarray = field(repr=False)

    def __post_init__(self):
        tags = np.ascontiguousarray(self.tags, dtype=np.int64)
        tags.setflags(write=False)
        object.__setattr__(self, "tags", tags)
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if tags.size:
            check_sorted(tags, self.channel_label)
            if tags[0] < 0 or tags[-1] > self.duration_ps:
                raise ValueError(f"stream {self.channel_label!r}: tags outside [0, duration]")

    @property
    def duration_ps(self) -> int:
        return seconds_to_ps(self.duration)

    @property
    def rate(self) -> float:
        return self.tags.size / self.duration

    def __len__(self):
        return int(self.tags.size)


def check_sorted(tags: np.ndarray, label="") -> None:
    if tags.size > 1 and not np.all(tags[1:] > tags[:-1]):
        raise UnsortedStreamError(f"stream {label!r} is not strictly increasing")


def write_qtg(path, streams: Sequence[TimeTagStream]) -> None:
    """Write streams as channels 0..k-1 into one binary file."""
    if not streams:
        raise ValueError("need at least one stream")
    duration_ps = max(s.duration_ps for s in streams)
    n = sum(len(s) for s in streams)
    rec = np.empty(n, dtype=RECORD_DTYPE)
    pos = 0
    for ch, s in enumerate(streams):
        rec["channel"][pos:pos + len(s)] = ch
        rec["time_ps"][pos:pos + len(s)] = s.tags
        pos += len(s)
    order = np.lexsort((rec["channel"], rec["time_ps"]))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(streams), duration_ps))
        fh.write(rec[order].tobytes())


def read_qtg(path, labels: Sequence[str] | None = None) -> list[TimeTagStream]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise RingPairsError(f"{path}: truncated header")
    magic, version, n_channels, duration_ps = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise RingPairsError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise RingPairsError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) % RECORD_DTYPE.itemsize:
        raise RingPairsError(f"{path}: truncated record")
    rec = np.frombuffer(body, dtype=RECORD_DTYPE)
    if rec.size and np.any(rec["channel"] >= n_channels):
        raise RingPairsError(f"{path}: record channel out of range")
    labels = list(labels) if labels is not None else [str(i) for i in range(n_channels)]
    duration = duration_ps * PS
    return [
        TimeTagStream(labels[ch], duration, rec["time_ps"][rec["channel"] == ch].astype(np.int64))
        for ch in range(n_channels)
    ]


def write_csv(path, streams: Sequence[TimeTagStream]) -> None:
    times = np.concatenate([s.tags for s in streams]) if streams else np.empty(0, np.int64)
    chans = np.concatenate([np.full(len(s), i) for i, s in enumerate(streams)]) if streams else times
    order = np.lexsort((chans, times))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_ps", "channel"])
        for t, c in zip(times[order].tolist(), chans[order].tolist()):
            w.writerow([t, c])


def read_csv(path, duration: float, labels: Sequence[str] | None = None) -> list[TimeTagStream]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    chans = data[:, 1] if data.size else np.empty(0, np.int64)
    n_channels = int(chans.max()) + 1 if chans.size else 0
    labels = list(labels) if labels is not None else [str(i) for i in range(n_channels)]
    return [TimeTagStream(labels[ch], duration, data[chans == ch, 0]) for ch in range(len(labels))]
