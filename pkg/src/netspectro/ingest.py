"""Readers for plain-text timestamp files and classic libpcap captures."""

from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import BadMagic, EmptyTrace, InputError, MalformedLine, TruncatedHeader
from .trace_model import Trace

log = logging.getLogger(__name__)

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16


@dataclass(frozen=True)
class IngestReport:
    records_read: int
    records_skipped: int
    reordered: int
    source_format: str
    truncated: bool = False


def _rebased(ts: np.ndarray, sizes: np.ndarray) -> Trace:
    origin = float(ts.min())
    return Trace(ts - origin, sizes, origin)


def read_text_trace(stream: BinaryIO) -> tuple[Trace, IngestReport]:
    """Read ``timestamp [size]`` lines; '#' starts a comment line.

    Timestamps are absolute seconds and are rebased so the earliest is 0.
    """
    ts: list[float] = []
    sizes: list[int] = []
    skipped = 0
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise MalformedLine(line_no) from None
        line = raw.strip()
        if not line or line.startswith("#"):
            skipped += 1
            continue
        fields = line.split()
        if len(fields) > 2:
            raise MalformedLine(line_no, line)
        try:
            t = float(fields[0])
            size = int(fields[1]) if len(fields) == 2 else 0
        except ValueError:
            raise MalformedLine(line_no, line) from None
        if not np.isfinite(t) or size < 0:
            raise MalformedLine(line_no, line)
        ts.append(t)
        sizes.append(size)
    if not ts:
        raise EmptyTrace("text trace contains no records")
    trace = _rebased(np.array(ts), np.array(sizes, dtype=np.int64))
    return trace, IngestReport(len(ts), skipped, trace.reordered, "text")


def read_pcap(stream: BinaryIO) -> tuple[Trace, IngestReport]:
    """Read a classic (microsecond) pcap capture.

    Packet payloads are skipped. A record cut short by end of file ends the
    read; the records before it are returned and ``truncated`` is set.
    """
    data = stream.read()
    if len(data) < 4:
        raise TruncatedHeader("capture shorter than the magic number")
    (magic,) = struct.unpack_from("<I", data)
    if magic == PCAP_MAGIC:
        endian = "<"
    elif magic == 0xD4C3B2A1:
        endian = ">"
    else:
        if magic in (PCAP_MAGIC_NS, 0x4D3CB2A1):
            log.error("nanosecond-resolution pcap is not supported")
        raise BadMagic(magic)
    if len(data) < GLOBAL_HEADER_LEN:
        raise TruncatedHeader("capture shorter than the 24-byte global header")

    rec = struct.Struct(endian + "IIII")
    n = len(data)
    off = GLOBAL_HEADER_LEN
    sec: list[int] = []
    usec: list[int] = []
    sizes: list[int] = []
    truncated = False
    while off < n:
        if off + RECORD_HEADER_LEN > n:
            truncated = True
            break
        ts_sec, ts_usec, incl_len, orig_len = rec.unpack_from(data, off)
        off += RECORD_HEADER_LEN + incl_len
        if off > n:
            truncated = True
            break
        sec.append(ts_sec)
        usec.append(ts_usec)
        sizes.append(orig_len)
    if truncated:
        log.warning("pcap truncated after %d records", len(sec))
    if not sec:
        raise EmptyTrace("capture contains no complete records")
    sec_a = np.array(sec, dtype=np.int64)
    usec_a = np.array(usec, dtype=np.int64)
    # rebase in integer microseconds before converting to float
    first = int(np.argmin(sec_a * 1_000_000 + usec_a))
    rel = (sec_a - sec_a[first]) * 1_000_000 + (usec_a - usec_a[first])
    trace = Trace(rel * 1e-6, np.array(sizes, dtype=np.int64), sec_a[first] + usec_a[first] * 1e-6)
    return trace, IngestReport(len(sec), 0, trace.reordered, "pcap", truncated)


PathLike = Union[str, Path]


def sniff_format(head: bytes) -> str:
    """Guess ``pcap`` or ``text`` from the first bytes of a file."""
    if len(head) >= 4:
        le, be = struct.unpack("<I", head[:4])[0], struct.unpack(">I", head[:4])[0]
        if PCAP_MAGIC in (le, be) or PCAP_MAGIC_NS in (le, be) or le == 0x0A0D0D0A:
            return "pcap"
    return "text"


def read_trace(path: PathLike, fmt: str | None = None) -> tuple[Trace, IngestReport]:
    """Open ``path`` and dispatch to the reader for ``fmt`` (sniffed if None)."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if fmt is None:
        fmt = sniff_format(data[:4])
    if fmt == "pcap":
        return read_pcap(io.BytesIO(data))
    if fmt == "text":
        return read_text_trace(io.BytesIO(data))
    raise ValueError(f"unknown trace format {fmt!r}")
