"""Detect, localize and classify periodicities in packet-arrival traces."""

__version__ = "0.1.0"

from .trace_model import BinnedSeries, CenteredSeries, PacketRecord, Trace, bin_trace, center
from .ingest import IngestReport, read_pcap, read_text_trace, read_trace
from .spectral import (
    AcvfSeries,
    HarmonicGroup,
    Periodogram,
    SpectralPeak,
    acvf,
    detect_peaks,
    group_harmonics,
    periodogram,
)
from .wavelet import (
    ScaleGrid,
    Scalogram,
    TransientBand,
    band_envelope_period,
    cone_of_influence,
    cwt,
    detect_transient_bands,
    scale_to_period,
)
from .classify import (
    ClassificationMatch,
    LinkTech,
    PeriodicityReport,
    TaxonomyEntry,
    base_frequency,
    builtin_taxonomy,
    classify_period,
    detectability,
    max_base_frequency,
)
from .synth import FlapPattern, GenSpec, PeriodicBurst, PoissonBackground, SineRate, generate, write_pcap
