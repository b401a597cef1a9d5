import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from netspectro.errors import DegenerateAcvf, LagOutOfRange
from netspectro.spectral import (
    AcvfSeries,
    HarmonicGroup,
    SpectralPeak,
    acvf,
    detect_peaks,
    group_harmonics,
    periodogram,
    spectrum,
)
from netspectro.synth import GenSpec, PeriodicBurst, generate
from netspectro.trace_model import CenteredSeries, bin_trace, center
from oracles import acvf_direct, periodogram_direct


def _series(values, p=1.0):
    return CenteredSeries.from_values(values, p)


def _cos(period, N=1000):
    return _series(np.cos(2 * np.pi * np.arange(N) / period))


def _peak(freq, prominence=1.0):
    return SpectralPeak(freq, 1.0, prominence, 0)


def test_acvf_small_example():
    c = acvf(CenteredSeries(1.0, [1, -1, 1, -1]), 3)
    assert c.c.tolist() == [4, -3, 2]


@pytest.mark.parametrize("M", [1, 2, 3])
def test_acvf_zero_series(M):
    assert np.all(acvf(CenteredSeries(1.0, [0, 0, 0, 0]), M).c == 0)


def test_acvf_default_lag_count():
    assert acvf(_cos(10, 101)).M == 50


@pytest.mark.parametrize("M", [0, 4, -1])
def test_acvf_lag_out_of_range(M):
    with pytest.raises(LagOutOfRange):
        acvf(CenteredSeries(1.0, [1, -1, 1, -1]), M)


@pytest.mark.parametrize("N, M", [(1024, 512), (3000, 1500), (2049, 2048)])
def test_acvf_matches_brute_force(N, M):
    # 3000 and 2049 go through the FFT path
    v = _series(np.random.default_rng(N).normal(size=N))
    got = acvf(v, M).c
    ref = acvf_direct(v.values, M)
    assert np.max(np.abs(got - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_periodogram_nyquist_example():
    pg = periodogram(AcvfSeries(np.array([4.0, -3.0, 2.0]), 1.0))
    assert pg.freqs[-1] == 0.5
    assert pg.power[-1] == pytest.approx(9.0, rel=1e-12)


def test_periodogram_zero():
    pg = periodogram(AcvfSeries(np.zeros(10), 1.0))
    assert np.all(pg.power == 0)


@pytest.mark.parametrize("G", [None, 5, 40, 2])
def test_periodogram_grid_sizes(G):
    c = np.random.default_rng(1).normal(size=17)
    pg = periodogram(AcvfSeries(c, 0.5), G)
    ref = periodogram_direct(c, G)
    np.testing.assert_allclose(pg.power, ref, rtol=1e-9, atol=1e-12 * np.abs(c).sum())
    n = 2 * (pg.freqs.size - 1)
    assert np.allclose(pg.freqs, np.arange(pg.freqs.size) / n / 0.5)


def test_periodogram_degenerate():
    with pytest.raises(DegenerateAcvf):
        periodogram(AcvfSeries(np.array([1.0]), 1.0))


def test_cosine_power_max_at_tenth_hz():
    pg = periodogram(acvf(_cos(10)))
    ref = periodogram_direct(acvf_direct(_cos(10).values, 500))
    assert np.argmax(pg.power) == np.argmax(ref)
    assert pg.freqs[np.argmax(pg.power)] == pytest.approx(0.1)


def test_cosine_single_peak_at_tenth_hz():
    peaks = detect_peaks(periodogram(acvf(_cos(10))))
    fundamentals = [g.fundamental for g in group_harmonics(peaks)]
    assert len(fundamentals) == 1
    assert fundamentals[0].freq == pytest.approx(0.1)


def test_two_cosines_two_peaks():
    t = np.arange(3000)
    s = _series(np.cos(2 * np.pi * t / 10) + np.cos(2 * np.pi * t / 30))
    pg = periodogram(acvf(s))
    peaks = detect_peaks(pg)
    top = sorted(pk.freq for pk in peaks[:2])
    assert top == pytest.approx([1 / 30, 1 / 10], abs=pg.step)


@pytest.mark.parametrize("Q", [4, 7, 16, 33, 125])
def test_pure_sinusoid_top_of_spectrum(Q):
    N = 1000
    pg = periodogram(acvf(_cos(Q, N)))
    assert abs(pg.freqs[np.argmax(pg.power)] - 1 / Q) <= pg.step


def test_frequencies_in_hz():
    # 10 samples per cycle at p = 0.5 s is a 5 s period
    s = CenteredSeries.from_values(np.cos(2 * np.pi * np.arange(1000) / 10), p=0.5)
    pg = periodogram(acvf(s))
    assert pg.freqs[np.argmax(pg.power)] == pytest.approx(0.2)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(4, 300), elements=st.floats(-50, 50, allow_nan=False)))
def test_acvf_bounded_by_lag_zero(x):
    c = acvf(_series(x), x.size - 1).c
    assert np.all(np.abs(c) <= c[0] * (1 + 1e-12) + 1e-9)


@pytest.mark.parametrize("alpha", [0.01, 3.0, 250.0])
def test_scaling(alpha):
    rng = np.random.default_rng(2)
    v = rng.poisson(3.0, 2000) + 2 * np.cos(2 * np.pi * np.arange(2000) / 25)
    base, scaled = _series(v), _series(alpha * v)
    c0, c1 = acvf(base).c, acvf(scaled).c
    np.testing.assert_allclose(c1, alpha**2 * c0, rtol=1e-9, atol=1e-9 * alpha**2 * c0[0])
    p0, p1 = periodogram(acvf(base)), periodogram(acvf(scaled))
    np.testing.assert_allclose(p1.power, alpha**2 * p0.power, rtol=1e-7, atol=1e-9 * alpha**2 * p0.power.max())
    k0, k1 = detect_peaks(p0, threshold_k=2.0), detect_peaks(p1, threshold_k=2.0)
    assert k0
    assert [k.bin_index for k in k0] == [k.bin_index for k in k1]
    assert [k.prominence for k in k1] == pytest.approx([k.prominence for k in k0], abs=1e-6)


def test_peaks_exclude_dc_and_are_sorted():
    rng = np.random.default_rng(8)
    t = np.arange(4000)
    v = rng.normal(size=t.size) + 3 * np.cos(2 * np.pi * t / 20) + 1.5 * np.cos(2 * np.pi * t / 7)
    peaks = detect_peaks(periodogram(acvf(_series(v))), threshold_k=2.0)
    assert peaks and all(pk.bin_index > 0 for pk in peaks)
    prom = [pk.prominence for pk in peaks]
    assert prom == sorted(prom, reverse=True)


def test_threshold_parameter_is_monotone():
    rng = np.random.default_rng(9)
    pg = periodogram(acvf(_series(rng.poisson(5.0, 4000))))
    counts = [len(detect_peaks(pg, k)) for k in (1.0, 2.0, 4.0, 6.0)]
    assert counts == sorted(counts, reverse=True)


def test_group_exact_harmonic():
    groups = group_harmonics([_peak(1 / 30), _peak(2 / 30)])
    assert len(groups) == 1
    g = groups[0]
    assert g.fundamental.period == pytest.approx(30.0)
    assert [n for n, _ in g.harmonics] == [2]


def test_group_tolerance_boundary():
    # 0.0207 / 0.010 is 3.5 % away from 2
    groups = group_harmonics([_peak(0.010), _peak(0.0207)], rel_tol=0.02)
    assert len(groups) == 2
    assert len(group_harmonics([_peak(0.010), _peak(0.0207)], rel_tol=0.04)) == 1


def test_group_order_cap_and_closest_wins():
    peaks = [_peak(1.0), _peak(2.01), _peak(1.995), _peak(11.0), _peak(3.0)]
    groups = group_harmonics(peaks, rel_tol=0.02)
    main = next(g for g in groups if g.fundamental.freq == 1.0)
    assert [(n, pk.freq) for n, pk in main.harmonics] == [(2, 1.995), (3, 3.0)]
    # the 11th multiple is past the cap and the losing order-2 candidate stands alone
    assert {g.fundamental.freq for g in groups} == {1.0, 2.01, 11.0}


def test_groups_sorted_by_strength():
    peaks = [_peak(0.1, 1.0), _peak(0.2, 1.0), _peak(0.37, 5.0)]
    groups = group_harmonics(peaks)
    assert groups[0].fundamental.freq == 0.37
    assert [g.strength for g in groups] == sorted((g.strength for g in groups), reverse=True)


def test_group_serialization_round_trip():
    g = group_harmonics([_peak(0.1, 2.0), _peak(0.2, 1.0), _peak(0.3, 0.5)])[0]
    assert HarmonicGroup.from_dict(g.to_dict()) == g


def test_square_burst_train_harmonics():
    # 30 s period, 10 s on: a square train with strong low harmonics
    spec = GenSpec(6000.0, 4, (PeriodicBurst(30.0, packets_per_burst=40, burst_len=10.0),))
    s = center(bin_trace(generate(spec), 1.0, duration=6000.0))
    _, _, groups = spectrum(s)
    top = groups[0]
    assert top.fundamental.period == pytest.approx(30.0, rel=0.02)
    assert len(top.harmonics) >= 2
