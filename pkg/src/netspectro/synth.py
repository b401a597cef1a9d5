"""Seeded synthetic packet traces with known periodic structure.

A :class:`GenSpec` is a duration, a seed and a list of components. Every
component draws from its own generator, seeded from ``(seed, index)``, so a
trace is the sorted merge of its components generated separately.

Config files are JSON::

    {"duration": 20000, "seed": 7,
     "components": [
        {"type": "poisson", "rate": 2.0},
        {"type": "periodic_burst", "period": 30, "packets_per_burst": 1, "jitter_sd": 0.1},
        {"type": "sine_rate", "base_rate": 5, "mod_depth": 0.5, "period": 600},
        {"type": "flap", "keepalive_period": 30, "flap_burst_rate": 1.0,
         "damp_period": 3600, "duty": 0.5}]}

Every component also accepts ``packet_size`` (bytes, default 60);
``periodic_burst`` accepts ``burst_len`` (s, default 0) and ``active``
(``[start, end]`` in seconds, default the whole trace).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, fields
from typing import BinaryIO, Optional, Sequence, Union

import numpy as np

from .errors import EmptyTrace, InputError, InvalidSpec
from .ingest import GLOBAL_HEADER_LEN, PCAP_MAGIC
from .trace_model import Trace

DEFAULT_PACKET_SIZE = 60


def _check(cond, msg):
    if not cond:
        raise InvalidSpec(msg)


@dataclass(frozen=True)
class PoissonBackground:
    rate: float
    packet_size: int = DEFAULT_PACKET_SIZE

    def __post_init__(self):
        _check(self.rate >= 0, "poisson rate must be >= 0")

    def arrivals(self, rng, duration):
        return _poisson_times(rng, self.rate, duration)


@dataclass(frozen=True)
class PeriodicBurst:
    period: float
    packets_per_burst: int = 1
    burst_len: float = 0.0
    jitter_sd: float = 0.0
    active: Optional[tuple[float, float]] = None
    packet_size: int = DEFAULT_PACKET_SIZE

    def __post_init__(self):
        _check(self.period > 0, "burst period must be positive")
        _check(0 <= self.burst_len < self.period, "burst_len must lie in [0, period)")
        _check(self.packets_per_burst >= 0, "packets_per_burst must be >= 0")
        _check(self.jitter_sd >= 0, "jitter_sd must be >= 0")
        if self.active is not None:
            _check(len(self.active) == 2 and self.active[0] < self.active[1], "active must be [start, end]")
            object.__setattr__(self, "active", (float(self.active[0]), float(self.active[1])))

    def arrivals(self, rng, duration):
        lo, hi = self.active if self.active is not None else (0.0, duration)
        k = np.arange(np.ceil(max(lo, 0.0) / self.period), np.ceil(min(hi, duration) / self.period))
        starts = k * self.period
        starts = starts[(starts >= lo) & (starts < hi)]
        if self.jitter_sd > 0:
            starts = starts + rng.normal(0.0, self.jitter_sd, starts.size)
        n = self.packets_per_burst
        offsets = np.sort(rng.uniform(0.0, self.burst_len, (starts.size, n)), axis=1) if self.burst_len > 0 \
            else np.zeros((starts.size, n))
        return (starts[:, None] + offsets).ravel()


@dataclass(frozen=True)
class SineRate:
    base_rate: float
    mod_depth: float
    period: float
    packet_size: int = DEFAULT_PACKET_SIZE

    def __post_init__(self):
        _check(self.base_rate >= 0, "base_rate must be >= 0")
        _check(0 <= self.mod_depth <= 1, "mod_depth must lie in [0, 1]")
        _check(self.period > 0, "period must be positive")

    def rate(self, t):
        return self.base_rate * (1.0 + self.mod_depth * np.sin(2 * np.pi * np.asarray(t) / self.period))

    def arrivals(self, rng, duration):
        peak = self.base_rate * (1.0 + self.mod_depth)
        t = _poisson_times(rng, peak, duration)
        if peak == 0:
            return t
        keep = rng.uniform(0.0, 1.0, t.size) < self.rate(t) / peak
        return t[keep]


@dataclass(frozen=True)
class FlapPattern:
    """KEEPALIVE line plus flap bursts gated on during each damping cycle."""

    keepalive_period: float = 30.0
    flap_burst_rate: float = 1.0
    damp_period: float = 3600.0
    duty: float = 0.5
    packet_size: int = DEFAULT_PACKET_SIZE

    def __post_init__(self):
        _check(self.keepalive_period > 0 and self.damp_period > 0, "periods must be positive")
        _check(self.flap_burst_rate >= 0, "flap_burst_rate must be >= 0")
        _check(0 <= self.duty <= 1, "duty must lie in [0, 1]")

    def arrivals(self, rng, duration):
        keepalive = PeriodicBurst(self.keepalive_period, 1).arrivals(rng, duration)
        flaps = _poisson_times(rng, self.flap_burst_rate, duration)
        flaps = flaps[np.mod(flaps, self.damp_period) < self.duty * self.damp_period]
        return np.concatenate([keepalive, flaps])


Component = Union[PoissonBackground, PeriodicBurst, SineRate, FlapPattern]
COMPONENT_TYPES = {
    "poisson": PoissonBackground,
    "periodic_burst": PeriodicBurst,
    "sine_rate": SineRate,
    "flap": FlapPattern,
}


@dataclass(frozen=True)
class GenSpec:
    duration: float
    seed: int
    components: tuple[Component, ...]

    def __post_init__(self):
        _check(self.duration > 0, "duration must be positive")
        _check(len(self.components) > 0, "need at least one component")
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_dict(cls, d: dict, seed: Optional[int] = None) -> "GenSpec":
        try:
            comps = []
            for c in d["components"]:
                c = dict(c)
                kind = COMPONENT_TYPES[c.pop("type")]
                allowed = {f.name for f in fields(kind)}
                unknown = set(c) - allowed
                _check(not unknown, f"unknown fields for {kind.__name__}: {sorted(unknown)}")
                comps.append(kind(**c))
            return cls(float(d["duration"]), int(d.get("seed", 0) if seed is None else seed), tuple(comps))
        except (KeyError, TypeError) as exc:
            raise InvalidSpec(f"bad generator spec: {exc}") from None

    @classmethod
    def load(cls, path, seed: Optional[int] = None) -> "GenSpec":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: {exc}") from None
        return cls.from_dict(d, seed)


def _poisson_times(rng: np.random.Generator, rate: float, duration: float) -> np.ndarray:
    """Homogeneous Poisson arrivals on [0, duration) from exponential gaps."""
    if rate <= 0:
        return np.empty(0)
    chunks = []
    t0 = 0.0
    expected = rate * duration
    while t0 < duration:
        n = int(expected + 5 * np.sqrt(expected) + 16)
        t = t0 + np.cumsum(rng.exponential(1.0 / rate, n))
        chunks.append(t)
        t0 = t[-1]
    t = np.concatenate(chunks)
    return t[t < duration]


def component_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def generate(spec: GenSpec) -> Trace:
    times, sizes = [], []
    for i, comp in enumerate(spec.components):
        t = comp.arrivals(component_rng(spec.seed, i), spec.duration)
        t = t[(t >= 0) & (t < spec.duration)]
        times.append(t)
        sizes.append(np.full(t.size, comp.packet_size, dtype=np.int64))
    ts = np.concatenate(times)
    order = np.argsort(ts, kind="stable")
    return Trace(ts[order], np.concatenate(sizes)[order], 0.0)


_RECORD = np.dtype([("ts_sec", "<u4"), ("ts_usec", "<u4"), ("incl_len", "<u4"), ("orig_len", "<u4")])


def write_pcap(trace: Trace, stream: BinaryIO, snaplen: int = 65535, linktype: int = 1) -> int:
    """Write header-only classic pcap records (no payload bytes); returns the record count."""
    if len(trace) == 0:
        raise EmptyTrace("refusing to write an empty capture")
    origin_us = int(np.floor(trace.origin * 1e6))
    us = origin_us + np.floor(trace.timestamps * 1e6).astype(np.int64)
    rec = np.empty(len(trace), dtype=_RECORD)
    rec["ts_sec"] = us // 1_000_000
    rec["ts_usec"] = us % 1_000_000
    rec["incl_len"] = 0
    rec["orig_len"] = np.where(trace.sizes > 0, trace.sizes, DEFAULT_PACKET_SIZE)
    header = struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, snaplen, linktype)
    assert len(header) == GLOBAL_HEADER_LEN
    stream.write(header)
    stream.write(rec.tobytes())
    return len(trace)


def write_text_trace(trace: Trace, stream) -> int:
    """Write ``timestamp size`` lines with absolute timestamps (origin added)."""
    if len(trace) == 0:
        raise EmptyTrace("refusing to write an empty trace")
    for t, s in zip((trace.timestamps + trace.origin).tolist(), trace.sizes.tolist()):
        stream.write(f"{t:.6f} {s}\n")
    return len(trace)


def keepalive_spec(duration: float = 20000.0, seed: int = 0, period: float = 30.0,
                   jitter_sd: float = 0.1, background_rate: float = 2.0) -> GenSpec:
    """KEEPALIVE-style burst line over Poisson background."""
    return GenSpec(duration, seed, (
        PeriodicBurst(period, packets_per_burst=1, jitter_sd=jitter_sd),
        PoissonBackground(background_rate),
    ))


def flap_spec(duration: float = 20000.0, seed: int = 0, **kw) -> GenSpec:
    return GenSpec(duration, seed, (FlapPattern(**kw),))


PRESETS = {"keepalive": keepalive_spec, "flap": flap_spec}
