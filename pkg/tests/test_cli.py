import csv
import json
import os
from pathlib import Path

import numpy as np
import pytest

from waveguide_decay import __version__
from waveguide_decay.cli import main
from waveguide_decay.config import DEFAULTS, OUTPUT_ENV, parse_config
from waveguide_decay.errors import ValidationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def out(tmp_path, monkeypatch):
    d = tmp_path / "out"
    monkeypatch.setenv(OUTPUT_ENV, str(d))
    return d


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def small(n=3, realizations=300, **cloud):
    return {"cloud": {"n_atoms": n, **cloud}, "run": {"realizations": realizations, "master_seed": 5}}


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_decay_single_atom_outputs(tmp_path, out):
    assert main(["decay", str(CONFIGS / "single_atom.json")]) == 0
    assert header(out / "decay.csv") == ["t_over_tau0", "mean_intensity", "std_error"]
    data = np.loadtxt(out / "decay.csv", delimiter=",", skiprows=1)
    assert np.abs(data[:, 1] - np.exp(-data[:, 0])).max() < 1e-9
    fits = json.loads((out / "fits.json").read_text())
    assert fits["fast"]["rate"] == pytest.approx(1.0, abs=1e-6)
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["version"] == __version__ and meta["master_seed"] == 1
    assert meta["config"]["cloud"]["n_atoms"] == 1 and "wall_time_s" in meta


def test_metadata_reproduces_run(tmp_path, out):
    cfg = write_cfg(tmp_path, small())
    assert main(["decay", cfg]) == 0
    first = (out / "decay.csv").read_bytes()
    echo = json.loads((out / "metadata.json").read_text())["config"]
    again = write_cfg(tmp_path, echo, "echo.json")
    assert main(["decay", again]) == 0
    assert (out / "decay.csv").read_bytes() == first


def test_workers_flag_bit_identical(tmp_path, out):
    cfg = write_cfg(tmp_path, small(realizations=700))
    assert main(["decay", cfg, "--workers", "1"]) == 0
    a = (out / "decay.csv").read_bytes()
    assert main(["decay", cfg, "--workers", "2"]) == 0
    assert (out / "decay.csv").read_bytes() == a


def test_dicke_pair_config(out):
    assert main(["decay", str(CONFIGS / "dicke_pair.json")]) == 0
    fits = json.loads((out / "fits.json").read_text())
    assert fits["fast"]["rate"] == pytest.approx(2.0, abs=1e-9)


def test_missing_config_exit_2(tmp_path, capsys):
    path = str(tmp_path / "nope.json")
    assert main(["decay", path]) == 2
    assert path in capsys.readouterr().err


def test_invalid_config_names_field(tmp_path, capsys, out):
    cfg = write_cfg(tmp_path, {"mode": {"n_eff": 2.5}})
    assert main(["decay", cfg]) == 2
    assert "mode.n_eff" in capsys.readouterr().err
    cfg = write_cfg(tmp_path, {"run": {"seed": 1}})
    assert main(["decay", cfg]) == 2
    assert "seed" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["decay", str(bad)]) == 2
    assert not out.exists()


def test_io_failure_exit_3(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    monkeypatch.setenv(OUTPUT_ENV, str(blocker / "sub"))
    assert main(["decay", write_cfg(tmp_path, small(n=1, realizations=2))]) == 3


def test_env_override_and_config_directory(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    target = tmp_path / "from_config"
    cfg = small(n=1, realizations=2)
    cfg["output"] = {"directory": str(target)}
    path = write_cfg(tmp_path, cfg)
    assert main(["decay", path]) == 0 and (target / "decay.csv").exists()
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["decay", path]) == 0 and (tmp_path / "env" / "decay.csv").exists()


def test_sweep(tmp_path, out, mode):
    cfg = write_cfg(tmp_path, small(realizations=256))
    assert main(["sweep", cfg, "--n-list", "1,2,3"]) == 0
    assert header(out / "sweep.csv") == ["n_atoms", "od_equivalent", "fast_rate", "fast_rate_stderr"]
    rows = np.loadtxt(out / "sweep.csv", delimiter=",", skiprows=1)
    assert rows[0, 2] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(rows[:, 1], rows[:, 0] * 0.13 / 1.15)
    summary = json.loads((out / "sweep_fit.json").read_text())
    assert summary["slope"] > 0


@pytest.mark.parametrize("bad", ["0,1", "-2", "a,b", ""])
def test_sweep_bad_n_list(tmp_path, out, bad):
    assert main(["sweep", write_cfg(tmp_path, small()), "--n-list", bad]) == 2


def test_split_zero_separation(tmp_path, out):
    cfg = write_cfg(tmp_path, small(realizations=256))
    assert main(["split", cfg, "--separation", "0"]) == 0
    comp = json.loads((out / "comparison.json").read_text())
    assert comp["difference"] == 0.0
    assert (out / "decay_single.csv").read_bytes() == (out / "decay_split.csv").read_bytes()


def test_split_records_geometry(tmp_path, out):
    cfg = write_cfg(tmp_path, small(n=4, realizations=256))
    assert main(["split", cfg, "--separation", str(408 * 780.0), "--partition", "fixed",
                 "--sub-fwhm", "100000"]) == 0
    comp = json.loads((out / "comparison.json").read_text())
    centers = [c["center_z"] for c in comp["split_cloud"]["components"]]
    assert centers[1] - centers[0] == pytest.approx(318240.0)
    assert comp["split_cloud"]["partition"] == "fixed"
    assert main(["split", cfg, "--separation", "-5"]) == 2


def test_fit_subcommand(tmp_path, out, capsys):
    assert main(["decay", str(CONFIGS / "single_atom.json")]) == 0
    capsys.readouterr()
    target = tmp_path / "fit.json"
    assert main(["fit", str(out / "decay.csv"), "--window", "0.5", "3", "--output", str(target)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["rate"] == pytest.approx(1.0, abs=1e-9)
    assert json.loads(target.read_text())["window"] == [0.5, 3.0]
    assert main(["fit", str(tmp_path / "missing.csv")]) == 3
    garbage = tmp_path / "garbage.csv"
    garbage.write_text("a,b\n1,2\n")
    assert main(["fit", str(garbage)]) == 2


def test_selftest_passes_deterministically(capsys):
    assert main(["selftest"]) == 0
    first = capsys.readouterr().out
    assert main(["selftest"]) == 0
    assert capsys.readouterr().out == first
    assert first.count("PASS") == 6 and "FAIL" not in first


def test_selftest_fault_injection(capsys):
    assert main(["selftest", "--inject-fault", "flip_sign"]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("FAIL symmetry") for line in lines)


def test_golden_headers():
    from waveguide_decay.io import DECAY_COLUMNS, SWEEP_COLUMNS
    assert ",".join(DECAY_COLUMNS) == "t_over_tau0,mean_intensity,std_error"
    assert ",".join(SWEEP_COLUMNS) == "n_atoms,od_equivalent,fast_rate,fast_rate_stderr"


def test_shipped_configs_parse():
    from waveguide_decay.config import load_config
    for path in CONFIGS.glob("*.json"):
        load_config(path)


def test_defaults_match_calibration():
    cfg = parse_config({})
    assert cfg.spec.n_atoms == 7 and cfg.spec.realizations == 100_000
    assert cfg.spec.time_grid[-1] == pytest.approx(20.0) and cfg.spec.time_grid[1] == 0.05
    assert set(DEFAULTS) == {"mode", "cloud", "kernels", "run", "analysis", "output"}


@pytest.mark.parametrize("data,field", [
    ({"cloud": {"components": [{"center_z": 0}]}}, "cloud.components[0]"),
    ({"cloud": {"n_atoms": 2.5}}, "cloud.n_atoms"),
    ({"run": {"time_grid": {"start": 1.0}}}, "run.time_grid.start"),
    ({"run": {"time_grid": {"stop": 20, "stride": 1}}}, "run.time_grid"),
    ({"run": {"normalization": "x"}}, "run.normalization"),
    ({"kernels": {"radiated_variant": "exact"}}, "kernels.radiated_variant"),
    ({"output": {"float_format": "%q"}}, "output.float_format"),
    ({"extra": {}}, "config"),
])
def test_config_field_errors(data, field):
    with pytest.raises(ValidationError) as info:
        parse_config(data)
    assert info.value.field == field
