"""Continuous Morlet wavelet transform and time-localized band detection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import fftconvolve

from .errors import EmptyBand, GridExceedsSeries, NoPeak, SeriesTooShort
from .spectral import MAD_TO_SD, acvf, detect_peaks, periodogram
from .trace_model import CenteredSeries

MIN_SAMPLES = 16
# the Morlet envelope is cut where exp(-eta**2 / 2) < exp(-18)
TRUNCATE = 6.0
_TINY = np.finfo(np.float64).tiny


def scale_to_period(a, omega0: float = 6.0):
    """Fourier period (in samples) matching Morlet scale ``a``."""
    factor = 4.0 * math.pi / (omega0 + math.sqrt(2.0 + omega0**2))
    return factor * np.asarray(a, dtype=np.float64) if np.ndim(a) else factor * float(a)


def morlet(eta, omega0: float = 6.0):
    eta = np.asarray(eta, dtype=np.float64)
    return np.pi**-0.25 * np.exp(1j * omega0 * eta) * np.exp(-0.5 * eta**2)


@dataclass(frozen=True)
class ScaleGrid:
    s0: float = 2.0
    octaves: int = 12
    voices_per_octave: int = 8

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if self.octaves < 1 or self.voices_per_octave < 1:
            raise ValueError("octaves and voices_per_octave must be >= 1")

    @property
    def scales(self) -> np.ndarray:
        i = np.arange(self.octaves * self.voices_per_octave + 1)
        return self.s0 * 2.0 ** (i / self.voices_per_octave)

    def max_period(self, omega0: float = 6.0) -> float:
        return scale_to_period(self.s0 * 2.0**self.octaves, omega0)

    def validate(self, N: int, omega0: float = 6.0) -> None:
        if self.max_period(omega0) > N:
            raise GridExceedsSeries(
                f"{self.octaves} octaves from s0={self.s0} reach a period of "
                f"{self.max_period(omega0):.1f} samples, longer than the series ({N})"
            )

    @classmethod
    def fit(cls, N: int, s0: float = 2.0, voices_per_octave: int = 8, omega0: float = 6.0,
            max_octaves: int = 12) -> "ScaleGrid":
        """Largest grid (up to ``max_octaves``) whose longest period fits in N samples."""
        octaves = int(math.floor(math.log2(N / scale_to_period(s0, omega0))))
        octaves = min(max_octaves, octaves)
        if octaves < 1:
            raise GridExceedsSeries(f"series of {N} samples is too short for s0={s0}")
        return cls(s0, octaves, voices_per_octave)


@dataclass(frozen=True, eq=False)
class Scalogram:
    magnitude: np.ndarray  # [scale, time]
    times: np.ndarray  # seconds
    periods: np.ndarray  # seconds, increasing
    coi: np.ndarray  # seconds, per column
    omega0: float
    p: float
    scales: np.ndarray

    @property
    def N(self) -> int:
        return self.times.size

    def valid_mask(self) -> np.ndarray:
        """Cells inside the cone of influence."""
        return self.periods[:, None] <= self.coi[None, :]


@dataclass(frozen=True)
class TransientBand:
    period_range: tuple[float, float]
    start: float
    end: float
    mean_magnitude: float

    def to_dict(self) -> dict:
        return {
            "period_range_s": list(self.period_range),
            "start_s": self.start,
            "end_s": self.end,
            "mean_magnitude": self.mean_magnitude,
        }


def _kernel(a: float, omega0: float, half: int) -> np.ndarray:
    m = np.arange(-half, half + 1)
    return np.conj(morlet(m / a, omega0)) / math.sqrt(a)


def cwt_coefficients(values, scales, omega0: float = 6.0) -> np.ndarray:
    """Complex T(a, b) for every scale and every sample b.

    T(a, b) = a**-0.5 * sum_t x(t) conj(psi((t - b) / a)), the sum running over
    |t - b| <= 6a with x taken as zero outside the record.
    """
    x = np.asarray(values, dtype=np.float64)
    N = x.size
    out = np.empty((len(scales), N), dtype=np.complex128)
    for i, a in enumerate(scales):
        half = int(min(math.floor(TRUNCATE * a), N - 1))
        k = _kernel(a, omega0, half)
        out[i] = fftconvolve(x, k[::-1], mode="full")[half : half + N]
    return out


def cone_of_influence(N: int, omega0: float = 6.0, p: float = 1.0) -> np.ndarray:
    """Longest trustworthy period (seconds) at each column.

    Uses the e-folding time sqrt(2) a of the Morlet envelope: a column b
    samples from the nearest edge trusts periods up to that of scale b/sqrt(2).
    """
    b = np.arange(N)
    edge = np.minimum(b, N - 1 - b)
    return scale_to_period(edge / math.sqrt(2.0), omega0) * p


def cwt(series: CenteredSeries, grid: Optional[ScaleGrid] = None, omega0: float = 6.0) -> Scalogram:
    v = series.values
    N = v.size
    if N < MIN_SAMPLES:
        raise SeriesTooShort(f"need at least {MIN_SAMPLES} samples, got {N}")
    grid = grid or ScaleGrid()
    grid.validate(N, omega0)
    scales = grid.scales
    mag = np.abs(cwt_coefficients(v, scales, omega0))
    periods = scale_to_period(scales, omega0) * series.p
    return Scalogram(
        magnitude=mag,
        times=series.start + np.arange(N) * series.p,
        periods=periods,
        # beyond the longest row the cone adds nothing, so it is clipped there
        coi=np.minimum(cone_of_influence(N, omega0, series.p), periods[-1]),
        omega0=omega0,
        p=series.p,
        scales=scales,
    )


def default_band(p: float, s0: float = 2.0, octaves: int = 3, omega0: float = 6.0) -> tuple[float, float]:
    """The lowest ``octaves`` octaves of a grid starting at ``s0``, in seconds."""
    lo = scale_to_period(s0, omega0) * p
    return lo, lo * 2.0**octaves


def band_activity(sg: Scalogram, period_band) -> tuple[np.ndarray, np.ndarray, tuple[float, float]]:
    """Column-wise mean magnitude over the band rows inside the cone of influence.

    Returns the usable column indices, the mean magnitude at each of them, and
    the periods of the first and last row used.
    """
    lo, hi = sorted(float(x) for x in period_band)
    eps = 1e-9 * max(abs(hi), 1.0)
    rows = np.flatnonzero((sg.periods >= lo - eps) & (sg.periods <= hi + eps))
    if rows.size == 0:
        raise EmptyBand(f"no scalogram rows between {lo} s and {hi} s")
    periods = sg.periods[rows]
    valid = periods[:, None] <= sg.coi[None, :]
    cols = np.flatnonzero(valid.any(axis=0))
    if cols.size == 0:
        raise EmptyBand(f"band {lo}-{hi} s lies entirely outside the cone of influence")
    mag = sg.magnitude[rows][:, cols]
    v = valid[:, cols]
    m = (mag * v).sum(axis=0) / v.sum(axis=0)
    return cols, m, (float(periods[0]), float(periods[-1]))


def _robust(x: np.ndarray) -> tuple[float, float]:
    med = float(np.median(x))
    return med, MAD_TO_SD * float(np.median(np.abs(x - med)))


def _otsu(x: np.ndarray, bins: int = 256) -> float:
    hist, edges = np.histogram(x, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(hist)[:-1].astype(np.float64)
    w1 = hist.sum() - w0
    s0 = np.cumsum(hist * centers)[:-1]
    ok = (w0 > 0) & (w1 > 0)
    mu0 = np.divide(s0, w0, out=np.zeros_like(s0), where=ok)
    mu1 = np.divide(s0[-1] + hist[-1] * centers[-1] - s0, w1, out=np.zeros_like(s0), where=ok)
    between = np.where(ok, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return float(centers[int(np.argmax(between))])


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    d = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def scale_averaged_activity(sg: Scalogram) -> float:
    """Typical mean magnitude per column over every row inside the cone.

    For white input every row has the same expected magnitude, so a band of
    white noise sits at this level; energy concentrated in a band lifts the
    band above it.
    """
    valid = sg.valid_mask()
    counts = valid.sum(axis=0)
    cols = counts > 0
    per_column = (sg.magnitude * valid).sum(axis=0)[cols] / counts[cols]
    return float(np.median(per_column))


def transient_threshold(level: np.ndarray, k: float, min_regime: int, reference: float) -> float:
    """Log-domain activity threshold.

    ``level`` is the log of the smoothed band activity. When it splits into two
    regimes separated by more than ``k`` robust deviations on both sides, the
    quiet regime is the baseline; otherwise all columns are. The baseline is
    capped at ``reference`` (see :func:`scale_averaged_activity`) so that a
    band which is active throughout still registers.
    """
    base, spread = _robust(level)
    if np.ptp(level) > 0:
        cut = _otsu(level)
        low, high = level[level <= cut], level[level > cut]
        if low.size >= min_regime and high.size >= min_regime:
            m_lo, s_lo = _robust(low)
            m_hi, s_hi = _robust(high)
            if m_hi - k * s_hi > m_lo + k * s_lo:
                base, spread = m_lo, s_lo
    if reference > 0:
        base = min(base, math.log(reference))
    return base + k * spread


def detect_transient_bands(sg: Scalogram, period_band, threshold_k: float = 3.0,
                           smoothing: float = 4.0, min_columns: Optional[int] = None) -> list[TransientBand]:
    """Time spans during which the band carries more energy than its quiet level.

    The column-wise band activity is smoothed over ``smoothing`` cycles of the
    band's longest period, moved to log scale and compared with
    :func:`transient_threshold`. Runs of active columns at least one smoothing
    window long (``min_columns`` overrides, never below 3) become bands.
    """
    cols, m, prange = band_activity(sg, period_band)
    window = max(3, int(math.ceil(smoothing * prange[1] / sg.p)))
    min_len = max(3, window if min_columns is None else int(min_columns))
    level = np.log(np.maximum(uniform_filter1d(m, window, mode="nearest"), _TINY))
    limit = transient_threshold(level, threshold_k, window, scale_averaged_activity(sg))

    bands = []
    for s, e in _runs(level > limit):
        if e - s < min_len:
            continue
        bands.append(TransientBand(
            prange,
            float(sg.times[cols[s]]),
            float(sg.times[cols[e - 1]] + sg.p),
            float(m[s:e].mean()),
        ))
    return bands


def band_envelope_period(sg: Scalogram, period_band, threshold_k: float = 6.0) -> float:
    """Dominant period (seconds) of the band's activity envelope.

    The band activity series is itself centered and passed through the ACVF
    periodogram; the highest-power detected peak wins.
    """
    _, m, _ = band_activity(sg, period_band)
    if m.size < 4:
        raise NoPeak("band activity series is too short for a spectrum")
    series = CenteredSeries.from_values(m, sg.p)
    peaks = detect_peaks(periodogram(acvf(series)), threshold_k)
    if not peaks:
        raise NoPeak("band activity shows no periodic modulation")
    return max(peaks, key=lambda pk: pk.power).period
