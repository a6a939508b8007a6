import io
import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mietalbot.cli import main, run
from mietalbot.config import (REQUIRED_KEYS, emit_config, load_config, load_preset,
                              parse_config, parse_quantity, preset_text)
from mietalbot.errors import ConfigError
from mietalbot.mie import AMU


def table(text):
    return np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)


def test_preset_values():
    cfg = load_preset("si-354")
    assert cfg.grating.wavelength == pytest.approx(354e-9)
    assert cfg.particle.mass == pytest.approx(1e6 * AMU)
    assert cfg.particle.density == 2329.0
    assert cfg.particle.refractive_index == 5.656 + 2.952j
    assert cfg.temperature == pytest.approx(20e-3)
    assert cfg.trap_frequency == pytest.approx(200e3)
    assert cfg.t1 == pytest.approx(2 * cfg.talbot_time)
    assert cfg.grating.spot_area == pytest.approx(1e-6)
    with pytest.raises(ConfigError):
        load_preset("au-532")


def test_empty_config_lists_required_keys():
    with pytest.raises(ConfigError) as info:
        parse_config("")
    for key in REQUIRED_KEYS:
        assert key in str(info.value)


@pytest.mark.parametrize("line, key", [
    ("colour = blue", "colour"),
    ("temperature = 20", "temperature"),
    ("temperature = 20 furlongs", "temperature"),
    ("density = -5 kg/m3", "density"),
    ("refractive_index = five", "refractive_index"),
])
def test_bad_entries_name_the_key(line, key):
    text = preset_text("si-354")
    name = line.split("=")[0].strip()
    body = "\n".join(l for l in text.splitlines() if not l.startswith(name)) + "\n" + line
    with pytest.raises(ConfigError) as info:
        parse_config(body)
    assert key in str(info.value)
    assert info.value.key == key


def test_duplicate_and_malformed_lines():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(preset_text("si-354") + "mass = 2 amu\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("just words\n")


def test_units():
    assert parse_quantity("3 um", "length")[0] == pytest.approx(3e-6)
    assert parse_quantity("2 g/cm3", "density")[0] == pytest.approx(2000.0)
    assert parse_quantity("1.5 tT", "time") == (1.5, "tT")


def test_round_trip(tmp_path):
    cfg = load_preset("si-354", {"pulse_energy": 2e-6})
    path = tmp_path / "out.cfg"
    path.write_text(emit_config(cfg))
    back = load_config(path)
    assert back == cfg
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_exit_codes(tmp_path, capsys):
    assert main(["config-check"]) == 0
    assert main(["pattern", "--phi0", "1", "--mode", "semi"]) == 2
    assert "quantum" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("mass = 1 amu\n")
    assert main(["config-check", "--config", str(bad)]) == 2
    assert main(["visibility", "--mass", "-3amu", "--phi0", "1"]) == 2
    assert main(["pattern"]) == 2


def test_force_curve():
    text, _ = run(["force-curve"])
    t = table(text)
    assert t.shape == (500, 3)
    kR, mie, ray = t.T
    small = kR < 0.1
    slope = np.polyfit(np.log(kR[small]), np.log(np.abs(mie[small])), 1)[0]
    assert abs(slope - 3) < 0.01
    assert np.all(np.abs(mie[kR <= 0.1] / ray[kR <= 0.1] - 1) < 0.02)


def test_force_curve_band():
    t = table(run(["force-curve", "--points", "20", "--kr-max", "3",
                   "--perturbation", "0.05"])[0])
    assert t.shape == (20, 5)
    kR, nominal, _, minus, plus = t.T
    assert np.all(minus != plus)
    assert np.max(np.abs(plus - minus)) < 0.5 * np.max(np.abs(nominal))
    t0 = table(run(["force-curve", "--points", "20", "--kr-max", "3"])[0])
    assert_allclose(t0[:, 1], nominal, rtol=0, atol=0)


def test_visibility_zero_phase():
    text, _ = run(["visibility", "--mass", "1e6amu", "--phi0", "0"])
    assert_allclose(table(text)[0, 1:], 0.0, atol=0)


def test_visibility_grid_and_columns():
    t = table(run(["visibility", "--phi0-grid", "0:2:0.5", "--columns", "quantum"])[0])
    assert t.shape == (5, 2)
    assert_allclose(t[:, 0], [0, 0.5, 1, 1.5, 2])


def test_pattern_and_sweep_output():
    t = table(run(["pattern", "--phi0", "3", "--points", "64"])[0])
    assert t.shape == (64, 2)
    assert np.mean(t[:, 1]) == pytest.approx(1.0, abs=1e-12)
    s = table(run(["sweep", "--phi0-grid", "1,2", "--quantity", "pattern",
                   "--points", "16"])[0])
    assert s.shape == (32, 3)


def test_deterministic_bytes(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    args = ["sweep", "--phi0-grid", "0:4:1", "--channels", "scattering"]
    outs = []
    for i in range(2):
        out, man = tmp_path / f"o{i}.csv", tmp_path / f"m{i}.json"
        assert main(args + ["-o", str(out), "--manifest", str(man)]) == 0
        outs.append((out.read_bytes(), man.read_bytes()))
    assert outs[0] == outs[1]


def test_json_manifest_and_replay(tmp_path):
    js = tmp_path / "run.json"
    out = tmp_path / "run.csv"
    assert main(["visibility", "--mass", "1e7amu", "--phi0-grid", "1,3", "-o", str(out),
                 "--json", str(js)]) == 0
    data = json.loads(js.read_text())
    man = data["manifest"]
    assert man["command"] == "visibility" and man["tool"] == "mietalbot"
    assert len(data["rows"]) == 2 and data["columns"][0] == "phi0"
    assert "mass = " in man["config"]
    replayed = tmp_path / "replay.csv"
    assert main(["replay", str(js), "-o", str(replayed)]) == 0
    assert replayed.read_bytes() == out.read_bytes()
    man["outputs"]["csv_sha256"] = "0" * 64
    js.write_text(json.dumps(data))
    assert main(["replay", str(js)]) == 3


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mietalbot.cli", "config-check"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("size_parameter,")
