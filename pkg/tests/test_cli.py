import json
import subprocess
import sys

import numpy as np
import pytest

from netspectro.cli import main

SEED = 1


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def keepalive_pcap(tmp_path):
    path = tmp_path / "keepalive.pcap"
    assert run("synth", "--preset", "keepalive", "--seed", SEED, "--output", path) == 0
    return path


@pytest.fixture
def flap_pcap(tmp_path):
    path = tmp_path / "flap.pcap"
    assert run("synth", "--preset", "flap", "--seed", SEED, "--output", path) == 0
    return path


def test_synth_prints_count(tmp_path, capsys):
    assert run("synth", "--preset", "keepalive", "--duration", 600, "--seed", 3,
               "--format", "text", "--out-dir", tmp_path) == 0
    n = int(capsys.readouterr().out)
    lines = (tmp_path / "trace.txt").read_text().splitlines()
    assert len(lines) == n > 0


def test_synth_config_file(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"duration": 100, "components": [{"type": "poisson", "rate": 5}]}))
    assert run("synth", "--config", cfg, "--out-dir", tmp_path) == 0
    assert (tmp_path / "trace.pcap").stat().st_size > 24


def test_spectrum_keepalive_fundamental(keepalive_pcap, tmp_path):
    out = tmp_path / "spec"
    assert run("spectrum", "--input", keepalive_pcap, "--p", 0.1, "--out-dir", out) == 0
    doc = json.loads((out / "peaks.json").read_text())
    assert doc["groups"], "no harmonic group detected"
    top = doc["groups"][0]["fundamental"]
    assert abs(top["freq_hz"] - 1 / 30) <= doc["grid_step_hz"]


def test_spectrum_outputs(tmp_path):
    trace = tmp_path / "t.txt"
    t = np.sort(np.random.default_rng(0).uniform(0, 500, 3000))
    trace.write_text("".join(f"{x:.6f} 100\n" for x in t))
    assert run("spectrum", "--input", trace, "--p", 0.5, "--out-dir", tmp_path) == 0
    rows = (tmp_path / "periodogram.tsv").read_text().splitlines()
    assert rows[0] == "frequency_hz\tperiod_s\tpower"
    doc = json.loads((tmp_path / "peaks.json").read_text())
    assert doc["n_bins"] == int((t.max() - t.min()) // 0.5)
    assert doc["max_lag"] == doc["n_bins"] // 2
    assert len(rows) - 1 == doc["max_lag"] + 1
    assert rows[1].split("\t")[1] == "inf"


def exit_code(argv):
    """Return code of main(), whether it returns or argparse exits."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.parametrize("argv, code", [
    (["spectrum", "--input", "/nonexistent/trace.txt"], 2),
    (["spectrum", "--input", "{bad}"], 2),
    (["spectrum", "--input", "{trace}", "--p", "0"], 3),
    (["spectrum", "--input", "{trace}", "--p", "-1"], 3),
    (["spectrum", "--input", "{trace}", "--p", "abc"], 3),
    (["spectrum", "--input", "{trace}", "--max-lag", "0"], 3),
    (["spectrum", "--input", "{trace}", "--max-lag", "400"], 3),
    (["spectrum", "--p", "1"], 3),
    (["scalogram", "--input", "{trace}", "--octaves", "12"], 3),
    (["scalogram", "--input", "{trace}", "--band", "5"], 3),
    (["classify", "--period", "30"], 3),
    (["classify", "--period", "30", "--duration", "100", "--link", "x:0:1500"], 3),
    (["synth"], 3),
    (["synth", "--config", "/nonexistent/gen.json"], 2),
    (["frobnicate"], 3),
    (["spectrum", "--input", "{trace}"], 0),
])
def test_exit_codes(tmp_path, argv, code):
    trace = tmp_path / "t.txt"
    trace.write_text("".join(f"{i * 0.7:.3f}\n" for i in range(400)))
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\nnot-a-number\n")
    argv = [a.format(trace=trace, bad=bad) for a in argv]
    if argv[0] != "frobnicate":
        argv += ["--out-dir", str(tmp_path)]
    assert exit_code(argv) == code


def test_scalogram_flap_envelope(flap_pcap, tmp_path):
    assert run("scalogram", "--input", flap_pcap, "--p", 1, "--envelope", "--time-stride", 50,
               "--out-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "bands.json").read_text())
    assert len(doc["bands"]) >= 4
    assert abs(doc["envelope_period_s"] - 3600) <= 360
    rows = (tmp_path / "scalogram.tsv").read_text().splitlines()
    assert rows[0] == "time_s\tperiod_s\tmagnitude"
    assert (tmp_path / "coi.tsv").exists()


def test_scalogram_constant_rate(tmp_path):
    trace = tmp_path / "const.txt"
    trace.write_text("".join(f"{i * 0.5:.1f}\n" for i in range(8192)))
    assert run("scalogram", "--input", trace, "--p", 1, "--octaves", 8, "--out-dir", tmp_path) == 0
    assert json.loads((tmp_path / "bands.json").read_text())["bands"] == []


def test_classify_period_queries(tmp_path):
    assert run("classify", "--period", 30, "--period", 125e-6, "--p", 1, "--duration", 20000,
               "--out-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    by_period = {}
    for m in doc["matches"]:
        by_period.setdefault(m["detected_period_s"], []).append(m)
    ka = by_period[30.0][0]
    assert ka["entry"]["source"] == "BGP KEEPALIVE" and ka["detectable"]
    sonet = by_period[125e-6][0]
    assert sonet["detectable"] is False and sonet["reason"] == "nyquist"


def test_classify_reads_peaks_json(tmp_path):
    trace = tmp_path / "t.txt"
    t = np.arange(0, 6000, 30.0)
    trace.write_text("".join(f"{x:.3f}\n" for x in np.sort(np.r_[t, t + 0.5, t + 1.0])))
    assert run("spectrum", "--input", trace, "--p", 1, "--out-dir", tmp_path, "--threshold-k", 2) == 0
    peaks = json.loads((tmp_path / "peaks.json").read_text())
    assert run("classify", "--input", tmp_path / "peaks.json", "--out-dir", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["n_bins"] == peaks["n_bins"] and report["p"] == peaks["p"]
    assert len(report["groups"]) == len(peaks["groups"])


def test_classify_custom_taxonomy_and_link(tmp_path):
    tax = tmp_path / "extra.tsv"
    tax.write_text("NTP poll\tapplication\tpoint\t1024\tprotocol\n")
    assert run("classify", "--period", 1000, "--period", 0.001, "--duration", 1e5, "--p", 1e-4,
               "--taxonomy-file", tax, "--link", "slow:8e6:1000", "--out-dir", tmp_path) == 0
    sources = [m["entry"]["source"] for m in json.loads((tmp_path / "report.json").read_text())["matches"]]
    assert "NTP poll" in sources and "slow" in sources


def test_byte_identical_outputs(tmp_path, monkeypatch):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        monkeypatch.setenv("NETSPECTRO_SEED", "77")
        assert run("synth", "--preset", "keepalive", "--duration", 2000, "--out-dir", d) == 0
        assert run("spectrum", "--input", d / "trace.pcap", "--p", 0.5, "--out-dir", d) == 0
        assert run("scalogram", "--input", d / "trace.pcap", "--p", 0.5, "--octaves", 9, "--out-dir", d) == 0
        assert run("classify", "--input", d / "peaks.json", "--out-dir", d) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    assert outs[0].keys() == {"trace.pcap", "periodogram.tsv", "peaks.json", "scalogram.tsv", "coi.tsv",
                              "bands.json", "report.json"}
    assert outs[0] == outs[1]


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("NETSPECTRO_SEED", "5")
    run("synth", "--preset", "keepalive", "--duration", 500, "--output", tmp_path / "a.pcap")
    run("synth", "--preset", "keepalive", "--duration", 500, "--seed", 5, "--output", tmp_path / "b.pcap")
    run("synth", "--preset", "keepalive", "--duration", 500, "--seed", 6, "--output", tmp_path / "c.pcap")
    a, b, c = ((tmp_path / f"{x}.pcap").read_bytes() for x in "abc")
    assert a == b != c


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "netspectro", "classify", "--period", "60", "--duration", "1000",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "netspectro", "spectrum", "--input", str(tmp_path / "nope")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "input error" in proc.stderr
