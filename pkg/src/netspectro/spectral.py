"""Autocovariance, ACVF periodogram, peak extraction and harmonic grouping.

The periodogram here is the amplitude of the Fourier sum of the one-sided,
un-normalized autocovariance of a mean-removed count series::

    c(k) = sum_{t=0}^{N-k-1} v(t) v(t+k)
    P(f) = | sum_{k=0}^{M-1} c(k) exp(-2j*pi*f*k) |

with f in cycles per sample, reported in Hz by dividing by the sampling
period p.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import median_filter

from .errors import DegenerateAcvf, LagOutOfRange
from .trace_model import CenteredSeries

# below this length the lag sums are taken directly rather than through an FFT
_DIRECT_ACVF_MAX_N = 2048
_LOG_FLOOR = np.finfo(np.float64).tiny
# scales a MAD to the standard deviation of a normal sample
MAD_TO_SD = 1.4826


@dataclass(frozen=True, eq=False)
class AcvfSeries:
    c: np.ndarray
    p: float

    @property
    def M(self) -> int:
        return self.c.size


@dataclass(frozen=True, eq=False)
class Periodogram:
    freqs: np.ndarray  # Hz
    power: np.ndarray
    M: int
    p: float

    @property
    def step(self) -> float:
        """Grid spacing in Hz."""
        return float(self.freqs[1] - self.freqs[0])

    def periods(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.freqs


@dataclass(frozen=True)
class SpectralPeak:
    freq: float
    power: float
    prominence: float
    bin_index: int

    @property
    def period(self) -> float:
        return 1.0 / self.freq

    def to_dict(self) -> dict:
        return {
            "freq_hz": self.freq,
            "period_s": self.period,
            "power": self.power,
            "prominence": self.prominence,
            "bin_index": self.bin_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralPeak":
        return cls(float(d["freq_hz"]), float(d["power"]), float(d["prominence"]), int(d["bin_index"]))


@dataclass(frozen=True)
class HarmonicGroup:
    fundamental: SpectralPeak
    harmonics: tuple[tuple[int, SpectralPeak], ...] = field(default_factory=tuple)

    @property
    def strength(self) -> float:
        """Summed prominence of the fundamental and its harmonics."""
        return self.fundamental.prominence + sum(pk.prominence for _, pk in self.harmonics)

    def to_dict(self) -> dict:
        return {
            "fundamental": self.fundamental.to_dict(),
            "harmonics": [{"order": n, **pk.to_dict()} for n, pk in self.harmonics],
            "strength": self.strength,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HarmonicGroup":
        return cls(
            SpectralPeak.from_dict(d["fundamental"]),
            tuple((int(h["order"]), SpectralPeak.from_dict(h)) for h in d.get("harmonics", [])),
        )


def acvf(series: CenteredSeries, max_lag: Optional[int] = None) -> AcvfSeries:
    """Un-normalized autocovariance for lags 0..max_lag-1 (default N // 2)."""
    v = series.values
    N = v.size
    M = N // 2 if max_lag is None else int(max_lag)
    if not 1 <= M <= N - 1:
        raise LagOutOfRange(f"max lag must lie in [1, {N - 1}], got {M}")
    if N <= _DIRECT_ACVF_MAX_N:
        c = np.correlate(v, v, mode="full")[N - 1 : N - 1 + M]
    else:
        n = sfft.next_fast_len(2 * N - 1, real=True)
        F = sfft.rfft(v, n)
        c = sfft.irfft(F.real**2 + F.imag**2, n)[:M]
    return AcvfSeries(np.asarray(c, dtype=np.float64), series.p)


def periodogram(ac: AcvfSeries, grid_size: Optional[int] = None) -> Periodogram:
    """Evaluate the ACVF Fourier amplitude on f_j = j / (2 (G-1)) cycles/sample.

    ``grid_size`` G defaults to M + 1, giving the grid j / (2M) up to Nyquist.
    """
    c = ac.c
    M = c.size
    if M < 2:
        raise DegenerateAcvf(f"need at least 2 lags, got {M}")
    G = M + 1 if grid_size is None else int(grid_size)
    if G < 2:
        raise DegenerateAcvf(f"grid needs at least 2 points, got {G}")
    n = 2 * (G - 1)
    if n < M:
        # exp(-2j*pi*j*k/n) is n-periodic in k, so fold the lags first
        c = np.bincount(np.arange(M) % n, weights=c, minlength=n)
    power = np.abs(sfft.rfft(c, n))
    freqs = np.arange(G) / n / ac.p
    return Periodogram(freqs, power, M, ac.p)


def log_residuals(pg: Periodogram, window: int = 31) -> tuple[np.ndarray, np.ndarray]:
    """Log-power and its running-median noise floor."""
    logp = np.log(np.maximum(pg.power, _LOG_FLOOR))
    floor = median_filter(logp, size=window, mode="nearest")
    return logp, floor


def detect_peaks(pg: Periodogram, threshold_k: float = 6.0, window: int = 31) -> list[SpectralPeak]:
    """Strict local maxima standing ``threshold_k`` MADs above the log noise floor.

    The floor is a running median of log-power over ``window`` bins; the MAD is
    that of the log residuals (log-power minus floor) over all non-DC bins,
    scaled by 1.4826 so that ``threshold_k`` reads as a number of deviations.
    Peaks come back sorted by prominence, largest first.
    """
    logp, floor = log_residuals(pg, window)
    resid = logp - floor
    r = resid[1:]
    mad = MAD_TO_SD * float(np.median(np.abs(r - np.median(r))))
    limit = max(threshold_k * mad, 0.0)

    j = np.arange(1, logp.size - 1)
    is_max = (logp[j] > logp[j - 1]) & (logp[j] > logp[j + 1]) & (resid[j] > limit)
    peaks = [
        SpectralPeak(float(pg.freqs[i]), float(pg.power[i]), float(resid[i]), int(i))
        for i in j[is_max]
    ]
    peaks.sort(key=lambda pk: (-pk.prominence, pk.bin_index))
    return peaks


def group_harmonics(
    peaks: Sequence[SpectralPeak], rel_tol: float = 0.02, max_order: int = 10
) -> list[HarmonicGroup]:
    """Greedy harmonic grouping by ascending frequency.

    Each peak not yet claimed becomes a fundamental; unclaimed higher peaks
    within ``rel_tol`` of n times its frequency (2 <= n <= max_order) join it,
    at most one peak per order (the closest). Groups are returned strongest
    first, strength being the summed prominence of their members.
    """
    ordered = sorted(peaks, key=lambda pk: pk.freq)
    taken = [False] * len(ordered)
    groups = []
    for i, fund in enumerate(ordered):
        if taken[i]:
            continue
        taken[i] = True
        best: dict[int, tuple[float, int]] = {}
        for k in range(i + 1, len(ordered)):
            if taken[k]:
                continue
            order = int(round(ordered[k].freq / fund.freq))
            if not 2 <= order <= max_order:
                continue
            dev = abs(ordered[k].freq - order * fund.freq) / (order * fund.freq)
            if dev <= rel_tol and (order not in best or dev < best[order][0]):
                best[order] = (dev, k)
        for _, k in best.values():
            taken[k] = True
        harmonics = tuple((order, ordered[k]) for order, (_, k) in sorted(best.items()))
        groups.append(HarmonicGroup(fund, harmonics))
    groups.sort(key=lambda g: -g.strength)
    return groups


def spectrum(series: CenteredSeries, max_lag: Optional[int] = None, threshold_k: float = 6.0,
             rel_tol: float = 0.02):
    """Run acvf -> periodogram -> peaks -> harmonic groups on one series."""
    pg = periodogram(acvf(series, max_lag))
    peaks = detect_peaks(pg, threshold_k)
    return pg, peaks, group_harmonics(peaks, rel_tol)
