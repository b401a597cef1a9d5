"""Packet traces and the binned / mean-removed series derived from them."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import EmptyTrace, NonPositivePeriod, TooFewBins

log = logging.getLogger(__name__)

# the smallest series with a nonzero lag; matches the duration >= 2p precondition
MIN_BINS = 2


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PacketRecord:
    timestamp: float
    size: int = 0

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if self.size < 0:
            raise ValueError(f"negative packet size {self.size}")


@dataclass(frozen=True, eq=False)
class Trace:
    """Packet arrivals relative to ``origin`` (seconds since epoch).

    Timestamps are stable-sorted on construction; the number of records that
    arrived out of order is kept in ``reordered``.
    """

    timestamps: np.ndarray
    sizes: np.ndarray
    origin: float = 0.0
    reordered: int = field(init=False, default=0)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64).ravel()
        sizes = np.asarray(self.sizes, dtype=np.int64).ravel()
        if sizes.shape != ts.shape:
            raise ValueError("timestamps and sizes differ in length")
        if ts.size and (not np.all(np.isfinite(ts)) or ts.min() < 0):
            raise ValueError("timestamps must be finite and non-negative")
        if sizes.size and sizes.min() < 0:
            raise ValueError("packet sizes must be non-negative")
        reordered = 0
        if ts.size > 1 and np.any(np.diff(ts) < 0):
            reordered = int(np.count_nonzero(ts < np.maximum.accumulate(ts)))
            order = np.argsort(ts, kind="stable")
            ts, sizes = ts[order], sizes[order]
            log.warning("trace: %d records arrived out of order; sorted", reordered)
        object.__setattr__(self, "timestamps", _frozen(ts, np.float64))
        object.__setattr__(self, "sizes", _frozen(sizes, np.int64))
        object.__setattr__(self, "reordered", reordered)

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord], origin: float = 0.0) -> "Trace":
        records = list(records)
        return cls(
            np.fromiter((r.timestamp for r in records), np.float64, len(records)),
            np.fromiter((r.size for r in records), np.int64, len(records)),
            origin,
        )

    def __len__(self):
        return self.timestamps.size

    def __iter__(self) -> Iterator[PacketRecord]:
        for t, s in zip(self.timestamps.tolist(), self.sizes.tolist()):
            yield PacketRecord(t, s)

    @property
    def records(self) -> list[PacketRecord]:
        return list(self)

    @property
    def span(self) -> float:
        """Time of the last arrival (the trace starts at 0)."""
        return float(self.timestamps[-1]) if len(self) else 0.0

    def mean_size(self) -> float:
        """Average packet size over records with a known (non-zero) size."""
        known = self.sizes[self.sizes > 0]
        return float(known.mean()) if known.size else 0.0


@dataclass(frozen=True, eq=False)
class BinnedSeries:
    """Packet counts per sampling period ``p``; bin t covers [start+t*p, start+(t+1)*p)."""

    p: float
    counts: np.ndarray
    start: float = 0.0

    def __post_init__(self):
        if not self.p > 0:
            raise NonPositivePeriod(f"sampling period must be positive, got {self.p}")
        counts = _frozen(self.counts, np.int64)
        if counts.size < MIN_BINS:
            raise TooFewBins(f"need at least {MIN_BINS} bins, got {counts.size}")
        if counts.min() < 0:
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def N(self) -> int:
        return self.counts.size

    @property
    def duration(self) -> float:
        return self.p * self.N


@dataclass(frozen=True, eq=False)
class CenteredSeries:
    """A real series with its mean removed; ``mean_removed`` keeps the subtracted mean."""

    p: float
    values: np.ndarray
    mean_removed: float = 0.0
    start: float = 0.0

    def __post_init__(self):
        if not self.p > 0:
            raise NonPositivePeriod(f"sampling period must be positive, got {self.p}")
        values = _frozen(self.values, np.float64)
        if values.size < MIN_BINS:
            raise TooFewBins(f"need at least {MIN_BINS} samples, got {values.size}")
        object.__setattr__(self, "values", values)

    @property
    def N(self) -> int:
        return self.values.size

    @classmethod
    def from_values(cls, values, p: float = 1.0, start: float = 0.0) -> "CenteredSeries":
        """Center an arbitrary real series."""
        v = np.asarray(values, dtype=np.float64)
        mean = float(v.mean()) if v.size else 0.0
        return cls(p, v - mean, mean, start)


def _bin_index(t: np.ndarray, p: float) -> np.ndarray:
    # floor(t/p), with values that sit on a boundary up to rounding sent to the later bin
    q = t / p
    r = np.rint(q)
    on_edge = np.abs(q - r) <= 1e-9 * np.maximum(1.0, np.abs(q))
    return np.where(on_edge, r, np.floor(q)).astype(np.int64)


def n_bins(duration: float, p: float) -> int:
    """Number of complete bins of width ``p`` in ``duration``."""
    return int(_bin_index(np.array([duration]), p)[0])


def bin_trace(trace: Trace, p: float, duration: Optional[float] = None, start: float = 0.0) -> BinnedSeries:
    """Count arrivals per sampling period.

    ``duration`` defaults to the span of the trace. A trailing bin that would
    cover less than ``p`` seconds is dropped.
    """
    if not p > 0:
        raise NonPositivePeriod(f"sampling period must be positive, got {p}")
    if len(trace) == 0:
        raise EmptyTrace("cannot bin an empty trace")
    if duration is None:
        duration = trace.span - start
    N = n_bins(duration, p) if duration > 0 else 0
    if N < MIN_BINS:
        raise TooFewBins(f"duration {duration} s at p={p} s gives {N} bins (< {MIN_BINS})")
    ts = trace.timestamps
    ts = ts[ts >= start]
    idx = _bin_index(ts - start, p)
    idx = idx[idx < N]
    return BinnedSeries(p, np.bincount(idx, minlength=N), start)


def center(series: BinnedSeries) -> CenteredSeries:
    """Subtract the mean count (remove the DC component)."""
    if series.N < MIN_BINS:
        raise TooFewBins(f"need at least {MIN_BINS} bins, got {series.N}")
    x = series.counts.astype(np.float64)
    mean = float(x.mean())
    return CenteredSeries(series.p, x - mean, mean, series.start)
