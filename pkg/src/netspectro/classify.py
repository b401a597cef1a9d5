"""Periodicity taxonomy, link-layer emission frequencies and period matching."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import InputError, NonPositiveInput
from .spectral import HarmonicGroup

LAYERS = ("link", "transport", "application")
KINDS = ("point", "band")
ORIGINS = ("protocol", "application", "human")

DAY = 86400.0
WEEK = 7 * DAY


@dataclass(frozen=True)
class LinkTech:
    name: str
    bandwidth: float  # bits/s
    mtu: int  # bytes

    def __post_init__(self):
        if not self.bandwidth > 0 or not self.mtu > 0:
            raise NonPositiveInput(f"link {self.name!r}: bandwidth and MTU must be positive")

    @classmethod
    def parse(cls, text: str) -> "LinkTech":
        """Parse ``name:bandwidth_bps:mtu``."""
        try:
            name, bw, mtu = text.rsplit(":", 2)
            return cls(name, float(bw), int(mtu))
        except ValueError as exc:
            if isinstance(exc, NonPositiveInput):
                raise
            raise NonPositiveInput(f"bad link spec {text!r}, expected name:bandwidth_bps:mtu") from None


@dataclass(frozen=True)
class TaxonomyEntry:
    source: str
    layer: str
    kind: str
    origin: str
    period: Optional[float] = None
    period_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise ValueError(f"unknown layer {self.layer!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.kind == "point":
            if self.period is None or not self.period > 0:
                raise ValueError(f"{self.source}: point entries need a positive period")
        else:
            r = self.period_range
            if r is None or not 0 < r[0] < r[1]:
                raise ValueError(f"{self.source}: band entries need 0 < lo < hi")

    def to_dict(self) -> dict:
        d = {"source": self.source, "layer": self.layer, "kind": self.kind, "origin": self.origin}
        if self.kind == "point":
            d["period_s"] = self.period
        else:
            d["period_range_s"] = list(self.period_range)
        return d


@dataclass(frozen=True)
class ClassificationMatch:
    detected_period: float
    entry: TaxonomyEntry
    relative_error: float  # 0 for band matches
    in_band: bool
    detectable: bool
    reason: Optional[str] = None  # "nyquist" | "duration" when not detectable

    def to_dict(self) -> dict:
        return {
            "detected_period_s": self.detected_period,
            "entry": self.entry.to_dict(),
            "relative_error": self.relative_error,
            "in_band": self.in_band,
            "detectable": self.detectable,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class PeriodicityReport:
    p: float
    N: int
    groups: tuple[HarmonicGroup, ...] = ()
    matches: tuple[ClassificationMatch, ...] = ()
    unmatched: tuple[float, ...] = ()
    queried: tuple[float, ...] = field(default=())

    @property
    def duration(self) -> float:
        return self.p * self.N

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n_bins": self.N,
            "duration_s": self.duration,
            "groups": [g.to_dict() for g in self.groups],
            "queried_periods_s": list(self.queried),
            "matches": [m.to_dict() for m in self.matches],
            "unmatched_periods_s": list(self.unmatched),
        }


def base_frequency(throughput: float, size: float) -> float:
    """Packet emission frequency (Hz) for throughput in bits/s and size in bytes."""
    if not throughput > 0 or not size > 0:
        raise NonPositiveInput("throughput and packet size must be positive")
    return throughput / (8.0 * size)


def max_base_frequency(link: LinkTech) -> float:
    """Emission frequency at full bandwidth with MTU-sized packets."""
    return base_frequency(link.bandwidth, link.mtu)


ETHERNET = (
    LinkTech("Ethernet 10 Mb/s", 1e7, 1500),
    LinkTech("Ethernet 100 Mb/s", 1e8, 1500),
    LinkTech("Ethernet 1 Gb/s", 1e9, 1500),
)


def link_entry(link: LinkTech) -> TaxonomyEntry:
    return TaxonomyEntry(link.name, "link", "point", "protocol", period=1.0 / max_base_frequency(link))


def builtin_taxonomy() -> list[TaxonomyEntry]:
    def point(source, layer, origin, period):
        return TaxonomyEntry(source, layer, "point", origin, period=period)

    return [
        point("SONET frame", "link", "protocol", 125e-6),
        *(link_entry(link) for link in ETHERNET),
        TaxonomyEntry("TCP/ICMP RTT", "transport", "band", "protocol", period_range=(0.01, 1.0)),
        point("BGP KEEPALIVE", "application", "application", 30.0),
        point("BGP KEEPALIVE", "application", "application", 60.0),
        point("BGP route flap damping", "application", "application", 3600.0),
        point("DNS update", "application", "application", 4500.0),
        point("DNS update", "application", "application", 3600.0),
        point("DNS update", "application", "application", DAY),
        point("diurnal cycle", "application", "human", DAY),
        point("diurnal second harmonic", "application", "human", DAY / 2),
        point("weekly cycle", "application", "human", WEEK),
        point("weekly second harmonic", "application", "human", WEEK / 2),
        # 2.3 days, a rounded third of a week
        point("weekly third harmonic", "application", "human", 198720.0),
    ]


def load_taxonomy(path) -> list[TaxonomyEntry]:
    """Read extra entries: tab-separated ``source layer kind period origin``.

    ``period`` is seconds for point entries and ``lo:hi`` for bands; '#' starts
    a comment line.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read taxonomy file {path}: {exc.strerror or exc}") from exc
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        try:
            source, layer, kind, period, origin = fields
            if kind == "band":
                lo, hi = (float(x) for x in period.split(":"))
                entries.append(TaxonomyEntry(source, layer, kind, origin, period_range=(lo, hi)))
            else:
                entries.append(TaxonomyEntry(source, layer, kind, origin, period=float(period)))
        except ValueError as exc:
            raise InputError(f"{path}:{line_no}: bad taxonomy entry ({exc})") from None
    return entries


def detectability(period: float, p: float, N: int) -> tuple[bool, Optional[str]]:
    """Whether ``period`` is observable at sampling period p over N bins.

    It must be at least two sampling periods (Nyquist) and at most half the
    trace, so that two full cycles are recorded.
    """
    eps = 1e-12
    if period < 2.0 * p * (1 - eps):
        return False, "nyquist"
    if period > p * N / 2.0 * (1 + eps):
        return False, "duration"
    return True, None


def classify_period(period: float, p: float, N: int, rel_tol: float = 0.05,
                    links: Iterable[LinkTech] = (), taxonomy: Optional[Sequence[TaxonomyEntry]] = None
                    ) -> list[ClassificationMatch]:
    """Candidate sources for ``period``: close point entries first, then containing bands."""
    if not period > 0:
        raise NonPositiveInput(f"period must be positive, got {period}")
    entries = list(builtin_taxonomy() if taxonomy is None else taxonomy)
    entries += [link_entry(link) for link in links]
    ok, reason = detectability(period, p, N)
    points, bands = [], []
    for e in entries:
        if e.kind == "point":
            err = abs(period - e.period) / e.period
            if err <= rel_tol:
                points.append(ClassificationMatch(period, e, err, False, ok, reason))
        elif e.period_range[0] <= period <= e.period_range[1]:
            bands.append(ClassificationMatch(period, e, 0.0, True, ok, reason))
    points.sort(key=lambda m: m.relative_error)
    return points + bands


def build_report(groups: Sequence[HarmonicGroup], p: float, N: int, rel_tol: float = 0.05,
                 links: Iterable[LinkTech] = (), taxonomy: Optional[Sequence[TaxonomyEntry]] = None,
                 periods: Sequence[float] = ()) -> PeriodicityReport:
    """Classify each group's fundamental plus any explicitly queried periods."""
    links = list(links)
    candidates = [g.fundamental.period for g in groups] + [float(x) for x in periods]
    matches, unmatched = [], []
    for period in candidates:
        found = classify_period(period, p, N, rel_tol, links, taxonomy)
        if found:
            matches.extend(found)
        else:
            unmatched.append(period)
    return PeriodicityReport(p, N, tuple(groups), tuple(matches), tuple(unmatched), tuple(periods))
