import csv
import hashlib
import json

import numpy as np
import pytest

from echotop.cli import main
from echotop.errors import ConfigError, ResourceRefused
from echotop.experiment import (
    OUTPUT_ENV, PRESETS, ExperimentConfig, make_config, parse_config_text, preset_config, quantum_trace,
    run, run_preset,
)

SMALL = ["--S", "10", "--delta_times_S", "0.3", "--t_max", "40"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_quantum_run_writes_trace_theory_manifest(tmp_path, capsys):
    assert main(["quantum", *SMALL, "--output", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trace.csv")
    assert rows[0] == ["t", "re_f", "im_f", "F"]
    assert len(rows) == 42 and rows[1] == ["0", "1", "0", "1"]
    theory = json.loads((tmp_path / "theory.json").read_text())
    assert theory["plateau_coh"] == pytest.approx(0.9, abs=0.1)
    assert "t2" in theory and "resonances" in theory["extras"]
    out = capsys.readouterr().out.split()
    assert str(tmp_path / "trace.csv") in out


def test_manifest_checksums(tmp_path):
    run(make_config({"S": 8, "delta": 0.02, "t_max": 20, "output": str(tmp_path)}))
    man = json.loads((tmp_path / "manifest.json").read_text())
    for name, digest in man["outputs"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    assert man["config"]["S"] == 8
    assert "generator" in man["rng_streams"]


def test_rerun_is_byte_identical(tmp_path):
    args = ["quantum", "--S", "12", "--delta", "0.02", "--state", "random", "--count", "5", "--seed", "9",
            "--t_max", "30"]
    assert main([*args, "--output", str(tmp_path / "a")]) == 0
    assert main([*args, "--output", str(tmp_path / "b")]) == 0
    for name in ("trace.csv", "theory.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_ensemble_outputs(tmp_path):
    code = main(["quantum", "--S", "8", "--delta", "0.05", "--state", "random", "--count", "4", "--t_max", "10",
                 "--write_members", "--output", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "trace.csv")
    assert rows[0][-1] == "F_stderr"
    members = sorted((tmp_path / "members").iterdir())
    assert len(members) == 4
    # the averaged amplitude is the mean of the member amplitudes
    f = np.mean([[complex(float(r[1]), float(r[2])) for r in read_csv(m)[1:]] for m in members], axis=0)
    avg = np.array([complex(float(r[1]), float(r[2])) for r in rows[1:]])
    np.testing.assert_allclose(avg, f, atol=1e-15)


@pytest.mark.parametrize("argv", [
    ["quantum", "--S", "10", "--delta", "0.1", "--delta_times_S", "1"],
    ["quantum", "--S", "10"],
    ["quantum", "--S", "10", "--delta", "0.1", "--theta_star", "0"],
    ["quantum", "--S", "ten", "--delta", "0.1"],
    ["sweep", "--S", "10", "--delta", "0.1", "--axis", "alpha", "--values", "1"],
    ["quantum", "--S", "10", "--delta", "-0.1"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert main([*argv, "--output", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_config_error_names_field():
    with pytest.raises(ConfigError) as exc:
        make_config({"S": 10, "delta": 0.1, "stride": 0})
    assert exc.value.field == "stride"
    with pytest.raises(ConfigError) as exc:
        parse_config_text("S = 10\nbogus = 1\n")
    assert exc.value.field == "bogus"


def test_resource_guard_exit_3(tmp_path, capsys):
    argv = ["quantum", "--S", "1600", "--delta", "0.001", "--t_max", "10000000", "--output", str(tmp_path)]
    assert main(argv) == 3
    assert "refused" in capsys.readouterr().err
    cfg = make_config({"S": 1600, "delta": 1e-3, "t_max": 10_000_000, "force": True})
    cfg.check_resources()
    with pytest.raises(ResourceRefused) as exc:
        make_config({"S": 1600, "delta": 1e-3, "t_max": 10_000_000}).check_resources()
    assert exc.value.estimate == pytest.approx(3201 ** 2 * 1e7)


def test_config_file_and_overrides(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# demo\nS = 10\ndelta_times_S = 0.3  # weak\nt_max = 5\nalpha = 1.3\n")
    out = tmp_path / "out"
    assert main(["quantum", "--config", str(cfg_file), "--t_max", "7", "--output", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["t_max"] == 7 and man["config"]["alpha"] == 1.3
    # a delta flag replaces delta_times_S from the file instead of clashing with it
    assert main(["quantum", "--config", str(cfg_file), "--delta", "0.01", "--output", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["delta"] == 0.01 and man["config"]["delta_times_S"] is None


def test_missing_config_file_exit_2(tmp_path):
    assert main(["quantum", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["theory", *SMALL]) == 0
    assert (tmp_path / "env" / "theory.json").exists()


def test_classical_and_correlation_modes(tmp_path):
    assert main(["classical", "--S", "50", "--delta_times_S", "0.32", "--t_max", "20", "--classical_samples", "500",
                 "--output", str(tmp_path / "c")]) == 0
    rows = read_csv(tmp_path / "c" / "classical.csv")
    assert rows[0] == ["t", "F", "F_stderr"] and float(rows[1][1]) == 1.0
    assert main(["correlation", "--S", "6", "--delta", "0.01", "--correlation_t_max", "4",
                 "--output", str(tmp_path / "k")]) == 0
    rows = read_csv(tmp_path / "k" / "correlation.csv")
    assert rows[0] == ["t1", "t2", "re_C", "im_C"] and len(rows) == 26


def test_sweep(tmp_path):
    assert main(["sweep", "--S", "20", "--delta_times_S", "0.32", "--t_max", "300", "--axis", "delta",
                 "--values", "0.008,0.016", "--workers", "2", "--output", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0][:4] == ["value", "plateau", "plateau_raw", "plateau_theory"]
    assert len(rows) == 3
    for r in rows[1:]:
        assert r[7] in ("0", "1")
        if r[7] == "0":
            assert abs(float(r[1]) - float(r[3])) < 0.1


def test_sweep_flags_collapsed_window(tmp_path):
    # strong kick at small S: t2 falls below 2 t1
    run(make_config({"mode": "sweep", "S": 10, "delta": 0.5, "t_max": 50, "axis": "seed", "values": "0",
                     "output": str(tmp_path)}))
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[1][7] == "1" and rows[1][1] == "nan"


def test_log_times_match_stepping():
    base = {"S": 12, "delta": 0.03, "t_max": 400, "state": "random", "count": 3}
    sparse = quantum_trace(make_config({**base, "log_times": 15}))
    dense = quantum_trace(make_config(base))
    np.testing.assert_allclose(sparse.amplitude, dense.amplitude[sparse.times], atol=1e-10)
    assert make_config({**base, "log_times": 15}).cost_estimate() < make_config(base).cost_estimate()


def test_presets_validate():
    for name in PRESETS:
        cfg = preset_config(name)
        assert isinstance(cfg, ExperimentConfig)
    assert preset_config("fig6").count == 100 and preset_config("fig6-large").count == 20
    assert preset_config("fig8-desk").count == 1000
    with pytest.raises(ConfigError):
        preset_config("nope")


def test_preset_run_with_classical_overlay(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    paths = run_preset("fig1a", {"S": 10, "t_max": 30, "classical_t_max": 10, "classical_samples": 200})
    assert (tmp_path / "fig1a" / "trace.csv").exists()
    assert (tmp_path / "fig1a" / "classical" / "classical.csv").exists()
    assert "classical/classical.csv" in paths
    theory = json.loads((tmp_path / "fig1a" / "theory.json").read_text())
    assert theory["plateau_coh"] > 0 and theory["t2"] > 0


def test_cli_preset_subcommand(tmp_path):
    assert main(["preset", "fig4", "--correlation_t_max", "6", "--output", str(tmp_path)]) == 0
    assert (tmp_path / "correlation.csv").exists()
