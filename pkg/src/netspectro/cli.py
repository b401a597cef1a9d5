"""Command-line front end.

Subcommands ``spectrum``, ``scalogram``, ``classify`` and ``synth``. Results go
to ``--out-dir`` as TSV (dense grids) and JSON (structured results).

Exit codes: 0 success, 2 input error, 3 parameter error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .classify import LinkTech, build_report, builtin_taxonomy, load_taxonomy
from .errors import InputError, NetSpectroError, NoPeak, ParameterError
from .ingest import read_trace
from .spectral import HarmonicGroup, acvf, detect_peaks, group_harmonics, periodogram
from .synth import PRESETS, GenSpec, generate, write_pcap, write_text_trace
from .trace_model import bin_trace, center
from .wavelet import ScaleGrid, band_envelope_period, cwt, default_band, detect_transient_bands

log = logging.getLogger("netspectro")

EXIT_OK, EXIT_INPUT, EXIT_PARAM = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    input: Optional[Path] = None
    format: Optional[str] = None
    p: float = 1.0
    max_lag: Optional[int] = None
    threshold_k: Optional[float] = None
    octaves: int = 12
    voices: int = 8
    omega0: float = 6.0
    band: Optional[tuple[float, float]] = None
    envelope: bool = False
    rel_tol: float = 0.05
    harmonic_tol: float = 0.02
    taxonomy_file: Optional[Path] = None
    links: list[LinkTech] = field(default_factory=list)
    periods: list[float] = field(default_factory=list)
    duration: Optional[float] = None
    out_dir: Path = Path(".")
    output: Optional[Path] = None
    seed: Optional[int] = None
    config: Optional[Path] = None
    preset: Optional[str] = None
    time_stride: int = 1

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ParameterError(msg)

        need(math.isfinite(self.p) and self.p > 0, f"--p must be positive, got {self.p}")
        need(self.max_lag is None or self.max_lag >= 1, "--max-lag must be >= 1")
        need(self.threshold_k is None or self.threshold_k > 0, "--threshold-k must be positive")
        need(self.octaves >= 1 and self.voices >= 1, "--octaves and --voices must be >= 1")
        need(self.omega0 > 0, "--omega0 must be positive")
        need(self.band is None or 0 < self.band[0] < self.band[1], "--band needs 0 < lo < hi")
        need(0 < self.rel_tol < 1, "--rel-tol must lie in (0, 1)")
        need(all(x > 0 for x in self.periods), "--period values must be positive")
        need(self.duration is None or self.duration > 0, "--duration must be positive")
        need(self.time_stride >= 1, "--time-stride must be >= 1")
        if self.command in ("spectrum", "scalogram"):
            need(self.input is not None, "--input is required")
        if self.command == "classify":
            need(self.input is not None or self.periods, "give --input or at least one --period")
            if self.input is None:
                need(self.duration is not None, "--duration is required with --period and no --input")
        if self.command == "synth":
            need(self.config is not None or self.preset is not None, "give --config or --preset")


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    return lo, hi


def _link(text: str) -> LinkTech:
    try:
        return LinkTech.parse(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", type=Path, help="trace file (text or pcap) or, for classify, peaks.json")
    common.add_argument("--format", choices=("text", "pcap"), help="input/output trace format")
    common.add_argument("--p", type=float, default=1.0, help="sampling period in seconds (default 1)")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for result files")
    common.add_argument("--seed", type=int, help="generator seed (falls back to $NETSPECTRO_SEED)")
    common.add_argument("-v", "--verbose", action="store_true")

    spec = argparse.ArgumentParser(add_help=False)
    spec.add_argument("--max-lag", type=int, help="ACVF lag count M (default N/2)")
    spec.add_argument("--threshold-k", type=float, help="peak threshold in MADs")
    spec.add_argument("--harmonic-tol", type=float, default=0.02, help="relative harmonic tolerance")

    wav = argparse.ArgumentParser(add_help=False)
    wav.add_argument("--octaves", type=int, default=12)
    wav.add_argument("--voices", type=int, default=8, help="voices per octave")
    wav.add_argument("--omega0", type=float, default=6.0, help="Morlet centre frequency")
    wav.add_argument("--band", type=_band, help="period band lo:hi in seconds for band detection")
    wav.add_argument("--envelope", action="store_true", help="also report the band envelope period")
    wav.add_argument("--time-stride", type=int, default=1, help="write every n-th column of the scalogram")

    cls = argparse.ArgumentParser(add_help=False)
    cls.add_argument("--rel-tol", type=float, default=0.05, help="relative tolerance for point matches")
    cls.add_argument("--taxonomy-file", type=Path, help="extra taxonomy entries (tab-separated)")
    cls.add_argument("--link", type=_link, action="append", default=[], metavar="NAME:BPS:MTU")
    cls.add_argument("--period", type=float, action="append", default=[], help="extra period to classify (s)")
    cls.add_argument("--duration", type=float, help="trace duration in seconds (with --period)")

    parser = _Parser(prog="netspectro", description="Periodicity analysis of packet-arrival traces.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("spectrum", parents=[common, spec], help="ACVF periodogram, peaks and harmonic groups")
    sub.add_parser("scalogram", parents=[common, wav], help="Morlet scalogram and transient bands")
    sub.add_parser("classify", parents=[common, spec, cls], help="match periods against the taxonomy")
    syn = sub.add_parser("synth", parents=[common], help="generate a synthetic trace")
    syn.add_argument("--config", type=Path, help="JSON generator spec")
    syn.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    syn.add_argument("--duration", type=float, help="trace duration for --preset (s)")
    syn.add_argument("--output", type=Path, help="output file (default OUT_DIR/trace.{txt,pcap})")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    for name in vars(cfg):
        if name == "links":
            cfg.links = getattr(ns, "link", [])
        elif name == "periods":
            cfg.periods = getattr(ns, "period", [])
        elif hasattr(ns, name):
            setattr(cfg, name, getattr(ns, name))
    if cfg.seed is None and os.environ.get("NETSPECTRO_SEED"):
        try:
            cfg.seed = int(os.environ["NETSPECTRO_SEED"])
        except ValueError:
            raise ParameterError("NETSPECTRO_SEED must be an integer") from None
    return cfg


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _load_series(cfg: RunConfig):
    trace, report = read_trace(cfg.input, cfg.format)
    log.info("read %d records (%s, %d reordered)", report.records_read, report.source_format, report.reordered)
    return trace, center(bin_trace(trace, cfg.p))


def _spectrum(cfg: RunConfig):
    trace, series = _load_series(cfg)
    pg = periodogram(acvf(series, cfg.max_lag))
    peaks = detect_peaks(pg, cfg.threshold_k or 6.0)
    groups = group_harmonics(peaks, cfg.harmonic_tol)
    return trace, series, pg, peaks, groups


def cmd_spectrum(cfg: RunConfig) -> int:
    trace, series, pg, peaks, groups = _spectrum(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.out_dir / "periodogram.tsv", "w") as fh:
        fh.write("frequency_hz\tperiod_s\tpower\n")
        for f, w in zip(pg.freqs.tolist(), pg.power.tolist()):
            fh.write(f"{_fmt(f)}\t{_fmt(1.0 / f) if f > 0 else 'inf'}\t{_fmt(w)}\n")
    _write_json(cfg.out_dir / "peaks.json", {
        "p": cfg.p,
        "n_bins": series.N,
        "max_lag": pg.M,
        "grid_step_hz": pg.step,
        "origin": trace.origin,
        "mean_count": series.mean_removed,
        "peaks": [pk.to_dict() for pk in peaks],
        "groups": [g.to_dict() for g in groups],
    })
    log.info("%d peaks, %d harmonic groups", len(peaks), len(groups))
    return EXIT_OK


def cmd_scalogram(cfg: RunConfig) -> int:
    _, series = _load_series(cfg)
    grid = ScaleGrid(2.0, cfg.octaves, cfg.voices)
    sg = cwt(series, grid, cfg.omega0)
    band = cfg.band or default_band(cfg.p, grid.s0, omega0=cfg.omega0)
    bands = detect_transient_bands(sg, band)
    envelope = None
    if cfg.envelope:
        try:
            envelope = band_envelope_period(sg, band)
        except NoPeak as exc:
            log.info("envelope: %s", exc)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    cols = np.arange(0, sg.N, cfg.time_stride)
    times = [_fmt(t) for t in sg.times[cols].tolist()]
    with open(cfg.out_dir / "scalogram.tsv", "w") as fh:
        fh.write("time_s\tperiod_s\tmagnitude\n")
        for i, period in enumerate(sg.periods.tolist()):
            ps = _fmt(period)
            row = sg.magnitude[i, cols].tolist()
            fh.writelines(f"{t}\t{ps}\t{_fmt(m)}\n" for t, m in zip(times, row))
    with open(cfg.out_dir / "coi.tsv", "w") as fh:
        fh.write("time_s\tcoi_period_s\n")
        fh.writelines(f"{t}\t{_fmt(c)}\n" for t, c in zip(times, sg.coi[cols].tolist()))
    _write_json(cfg.out_dir / "bands.json", {
        "p": cfg.p,
        "n_bins": series.N,
        "omega0": cfg.omega0,
        "band_s": list(band),
        "bands": [b.to_dict() for b in bands],
        "envelope_period_s": envelope,
    })
    log.info("%d transient bands", len(bands))
    return EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    taxonomy = builtin_taxonomy()
    if cfg.taxonomy_file:
        taxonomy += load_taxonomy(cfg.taxonomy_file)
    groups: list[HarmonicGroup] = []
    p = cfg.p
    if cfg.input is not None and cfg.input.suffix == ".json":
        try:
            doc = json.loads(cfg.input.read_text())
            groups = [HarmonicGroup.from_dict(g) for g in doc["groups"]]
            p, N = float(doc["p"]), int(doc["n_bins"])
        except OSError as exc:
            raise InputError(f"cannot read {cfg.input}: {exc.strerror or exc}") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{cfg.input} is not a peaks.json file ({exc})") from None
    elif cfg.input is not None:
        _, series, _, _, groups = _spectrum(cfg)
        N = series.N
    else:
        N = int(math.floor(cfg.duration / p))
    report = build_report(groups, p, N, cfg.rel_tol, cfg.links, taxonomy, cfg.periods)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out_dir / "report.json", report.to_dict())
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.config is not None:
        spec = GenSpec.load(cfg.config, cfg.seed)
    else:
        kw = {"seed": cfg.seed or 0}
        if cfg.duration is not None:
            kw["duration"] = cfg.duration
        spec = PRESETS[cfg.preset](**kw)
    trace = generate(spec)
    fmt = cfg.format or "pcap"
    out = cfg.output or cfg.out_dir / ("trace.pcap" if fmt == "pcap" else "trace.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "pcap":
        with open(out, "wb") as fh:
            n = write_pcap(trace, fh)
    else:
        with open(out, "w") as fh:
            n = write_text_trace(trace, fh)
    print(n)
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "scalogram": cmd_scalogram,
    "classify": cmd_classify,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(ns)
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except ParameterError as exc:
        print(f"netspectro: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (InputError, NetSpectroError) as exc:
        print(f"netspectro: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
