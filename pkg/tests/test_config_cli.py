import json
from pathlib import Path

import numpy as np
import pytest

from blochstrip.cli import main
from blochstrip.config import load_config, validate_config
from blochstrip.errors import ConfigError

from conftest import config_path


def minimal_config(**overrides):
    base = {
        "geometry": {"epsilon": 1.0, "geometry": {"type": "constant", "value": 1.0}},
        "frequencies": {"omega": 2 * np.pi * 0.25, "k": [0.25, 0.0]},
        "solver": {"K": 2, "x_lo": -26.0, "x_hi": 26.0, "tfsf_plane": -9.0,
                   "sponge": {"width": 16.0, "delta_max": 3.0, "exponent": 3.0}},
        "radiation": {"R_sequence": [2, 4]},
    }
    for key, val in overrides.items():
        base[key] = val
    return base


def test_minimal_config_loads_with_defaults():
    cfg = validate_config(minimal_config())
    assert cfg.cutoff == 8
    assert cfg.n_cell == 18
    assert cfg.bands_M == 4
    assert cfg.out_dir == "out"
    assert cfg.R_sequence == [2, 4]


def test_frequency_wavevector_mismatch():
    bad = minimal_config(frequencies={"omega": 1.0, "k": [0.25, 0.0]})
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    assert any("frequency-wavevector mismatch" in v for v in err.value.violations)


def test_vertical_periodicity_violation():
    k = [0.25, 0.3]
    omega = 2 * np.pi * np.hypot(*k)
    bad = minimal_config(frequencies={"omega": omega, "k": k})
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    assert any("vertical periodicity" in v for v in err.value.violations)


def test_unknown_keys_rejected_and_collected():
    bad = minimal_config()
    bad["discretization"] = {"cutoff": 4, "n_cel": 16}
    bad["frequencies"] = {"omega": 1.0, "k": [0.25, 0.0]}
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    msgs = err.value.violations
    assert any("n_cel" in v and "unknown key" in v for v in msgs)
    assert any("mismatch" in v for v in msgs)
    assert len(msgs) >= 2  # not fail-fast


def test_sponge_overlap_rejected():
    bad = minimal_config()
    bad["radiation"] = {"R_sequence": [2, 4, 8]}
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    assert any("sponge overlaps" in v for v in err.value.violations)


def test_shipped_configs_load():
    for name in ("rod_transmission", "support_band_edge", "negative_refraction",
                 "free_space"):
        cfg = load_config(config_path(name))
        assert cfg.omega > 0


def test_cli_unknown_command_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", str(config_path("free_space"))])
    assert exc.value.code == 2


def test_cli_missing_config_is_failure(tmp_path):
    rc = main(["bands", "--config", str(tmp_path / "nope.json")])
    assert rc == 1


def test_cli_invalid_config_reports_violations(tmp_path, capsys):
    bad = minimal_config(frequencies={"omega": 1.0, "k": [0.25, 0.0]})
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    rc = main(["bands", "--config", str(path)])
    assert rc == 1
    assert "frequency-wavevector mismatch" in capsys.readouterr().err


def test_cli_bands_matches_closed_form(tmp_path):
    rc = main(["bands", "--config", str(config_path("free_space")),
               "--out", str(tmp_path)])
    assert rc == 0
    rows = np.genfromtxt(tmp_path / "bands.csv", delimiter=",", names=True,
                         dtype=None, encoding=None)
    from blochstrip.bands import free_space_bands
    for row in rows[:64]:
        if row["side"] != "minus":
            continue
        closed = free_space_bands((row["j1"], row["j2"]), 1.0, int(row["m"]) + 1)
        assert row["mu"] == pytest.approx(closed[int(row["m"])][0], rel=1e-9, abs=1e-9)


def test_cli_isofreq_and_poynting(tmp_path):
    assert main(["isofreq", "--config", str(config_path("free_space")),
                 "--out", str(tmp_path)]) == 0
    assert main(["poynting", "--config", str(config_path("free_space")),
                 "--out", str(tmp_path)]) == 0
    iso = (tmp_path / "isofreq.csv").read_text().splitlines()
    assert iso[0] == "contour,side,j1,j2"
    assert len(iso) > 10
    poy = np.genfromtxt(tmp_path / "poynting.csv", delimiter=",", names=True,
                        dtype=None, encoding=None)
    labels = set(poy["classification"])
    assert labels <= {"right", "left", "vertical"}


def test_cli_deterministic_artifacts(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    for out in (out1, out2):
        assert main(["bands", "--config", str(config_path("free_space")),
                     "--out", str(out)]) == 0
        assert main(["isofreq", "--config", str(config_path("free_space")),
                     "--out", str(out)]) == 0
    assert (out1 / "bands.csv").read_bytes() == (out2 / "bands.csv").read_bytes()
    assert (out1 / "isofreq.csv").read_bytes() == (out2 / "isofreq.csv").read_bytes()


def test_full_pipeline_free_space(tmp_path):
    rc = main(["full", "--config", str(config_path("free_space")),
               "--out", str(tmp_path)])
    assert rc == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["failure"] is None
    assert set(manifest["timings"]) == {"simulate", "check-radiation", "bloch-measure",
                                        "transmit", "validate"}
    # every artifact is listed with its content hash
    from blochstrip.io import sha256_file
    for name, digest in manifest["artifacts"].items():
        assert sha256_file(tmp_path / name) == digest
    # a plane wave through free space: peak at (k mod 1), no negative refraction
    pred = json.loads((tmp_path / "prediction.json").read_text())
    assert pred["negative_refraction"] is False
    val = json.loads((tmp_path / "validation.json").read_text())
    assert val["distance_to_prediction"] <= 2 / 4


def test_expand_command_roundtrip(tmp_path):
    assert main(["simulate", "--config", str(config_path("free_space")),
                 "--out", str(tmp_path)]) == 0
    assert main(["expand", "--config", str(config_path("free_space")),
                 "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "expand.json").read_text())
    assert meta["R"] == 4
    rows = np.genfromtxt(tmp_path / "coefficients.csv", delimiter=",", names=True)
    mass = rows["re"] ** 2 + rows["im"] ** 2
    peak = rows[np.argmax(mass)]
    assert peak["j1"] == pytest.approx(0.25)
    assert peak["j2"] == pytest.approx(0.0)


def test_field_dump_csv_roundtrip(tmp_path):
    from blochstrip.expand import FieldStrip
    from blochstrip.io import load_field_dump, save_field_dump
    g = np.random.default_rng(0)
    samples = g.normal(size=(12, 8)) + 1j * g.normal(size=(12, 8))
    u = FieldStrip(samples=samples, epsilon=1.0, K=1, n_cell=8, x_lo=-2.0)
    save_field_dump(tmp_path / "dump", u, data_format="csv")
    back, header = load_field_dump(tmp_path / "dump.json")
    np.testing.assert_allclose(back.samples, samples, atol=0)
    assert back.x_lo == -2.0
    assert header["kind"] == "strip"


def test_expand_command_box_dump(tmp_path):
    # the expand command also consumes W_R box dumps directly
    from blochstrip.bands import BasisProvider
    from blochstrip.cell import free_space_field
    from blochstrip.flux import BoxDomain
    from blochstrip.io import save_box_dump
    provider = BasisProvider(free_space_field(), 4)
    box = BoxDomain(R=4, epsilon=1.0, n_cell=16)
    mode = provider.modes("minus", (0.25, 0.0), 1)[0]
    x = box.nodes()
    w = mode.synthesize(x[:, None], x[None, :])
    save_box_dump(tmp_path / "field", w, R=4, epsilon=1.0, n_cell=16, side="minus")
    assert main(["expand", "--config", str(config_path("free_space")),
                 "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "expand.json").read_text())
    assert meta["side"] == "minus"
    rows = np.genfromtxt(tmp_path / "coefficients.csv", delimiter=",", names=True)
    mass = rows["re"] ** 2 + rows["im"] ** 2
    peak = rows[np.argmax(mass)]
    assert peak["j1"] == pytest.approx(0.25)
    assert mass.max() == pytest.approx(1.0, abs=1e-9)


def test_check_radiation_thread_count_invariant(tmp_path):
    # per-box parallelism must not change the artifact bytes
    out1 = tmp_path / "t1"
    out2 = tmp_path / "t2"
    for out, threads in ((out1, "1"), (out2, "2")):
        assert main(["simulate", "--config", str(config_path("free_space")),
                     "--out", str(out)]) == 0
        assert main(["check-radiation", "--config", str(config_path("free_space")),
                     "--out", str(out), "--threads", threads]) == 0
    assert (out1 / "radiation.json").read_bytes() == (out2 / "radiation.json").read_bytes()


def test_full_pipeline_byte_determinism(tmp_path):
    # two single-threaded runs of the same config produce bit-identical data
    # artifacts (manifest.json and simulate_run.json carry timings)
    outs = [tmp_path / "r1", tmp_path / "r2"]
    for out in outs:
        assert main(["full", "--config", str(config_path("free_space")),
                     "--out", str(out)]) == 0
    skip = {"manifest.json", "simulate_run.json"}
    names = sorted(p.name for p in outs[0].iterdir() if p.name not in skip)
    assert names
    for name in names:
        a = (outs[0] / name).read_bytes()
        b = (outs[1] / name).read_bytes()
        assert a == b, f"{name} differs between runs"
