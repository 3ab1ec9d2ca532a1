import csv
import json
import math
import struct
from pathlib import Path

import numpy as np
import pytest

from dmnls import io
from dmnls.cli import main
from dmnls.config import ConfigError, RunConfig, config_from_dict, config_to_dict, parse_config
from dmnls.diagnostics import diagnostics_record
from dmnls.dispersion_map import DispersionMap
from dmnls.spectral_engine import ComplexField, RadialGrid3D, TorusGrid1D

from helpers import REFERENCE

DATA = Path(__file__).parent / "data"


def read_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


class TestSnapshots:
    @pytest.mark.parametrize("grid", [TorusGrid1D(5.0, 64), RadialGrid3D(7.0, 64)])
    def test_round_trip(self, tmp_path, grid):
        rng = np.random.default_rng(0)
        field = ComplexField.from_u(grid, rng.normal(size=grid.n_values) + 1j * rng.normal(size=grid.n_values))
        io.write_snapshot(tmp_path / "s.bin", 0.25, field)
        t, again = io.read_snapshot(tmp_path / "s.bin")
        assert t == 0.25 and type(again.grid) is type(grid) and again.grid == grid
        assert np.allclose(again.u, field.u, rtol=1e-15, atol=0)

    def test_layout(self, tmp_path):
        grid = RadialGrid3D(7.0, 16)
        field = ComplexField.from_u(grid, np.arange(15) + 2j)
        raw = io.write_snapshot(tmp_path / "s.bin", 1.5, field).read_bytes()
        assert raw[:6] == b"DMNLS1" and raw[6] == 1
        assert struct.unpack("<Qdd", raw[7:31]) == (16, 7.0, 1.5)
        assert len(raw) == 31 + 15 * 16
        assert struct.unpack("<dd", raw[31 + 16:31 + 32]) == (1.0, 2.0)

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"NOTDMN" + bytes(40))
        with pytest.raises(ValueError, match="magic"):
            io.read_snapshot(tmp_path / "bad.bin")


def test_field_csv(tmp_path):
    grid = TorusGrid1D(1.0, 8)
    io.write_field_csv(tmp_path / "f.csv", ComplexField.from_u(grid, np.full(8, 1 - 1j)), t=0.0)
    rows = read_rows(tmp_path / "f.csv")
    assert list(rows[0]) == ["r_or_x", "re", "im"] and len(rows) == 8
    assert float(rows[0]["re"]) == 1.0 and float(rows[0]["im"]) == -1.0


def test_diagnostics_csv(tmp_path):
    grid = RadialGrid3D(10.0, 256)
    f = ComplexField.from_function(grid, lambda r: np.exp(-(r**2)))
    recs = [diagnostics_record(t, f, 1.0, 1.0, 1.0) for t in (0.0, 0.1)]
    io.write_diagnostics_csv(tmp_path / "d.csv", recs)
    assert (tmp_path / "d.csv").read_text().splitlines()[1] == "t,mass,E_plus,E_minus,grad_sq,quartic,variance,momentum,virial_rhs"
    rows = io.read_diagnostics_csv(tmp_path / "d.csv")
    assert rows[1]["t"] == 0.1 and rows[0]["mass"] == recs[0].mass


class TestPlotData:
    def test_two_step_final_row(self, tmp_path):
        files = io.export_plot_data(tmp_path, REFERENCE)
        last = read_rows(files["big_gamma"])[-1]
        assert float(last["t"]) == 3.0
        assert float(last["Gamma"]) == 3 * REFERENCE.average

    def test_identity_map(self, tmp_path):
        files = io.export_plot_data(tmp_path, DispersionMap.constant(1.0))
        rows = read_rows(files["big_gamma"])
        assert all(abs(float(r["Gamma"]) - float(r["t"])) < 1e-12 for r in rows)

    def test_drift_column_bounded(self, tmp_path):
        m = DispersionMap([(0.2, 3.0), (0.3, -2.0), (0.5, 1.0)])
        rows = read_rows(io.export_plot_data(tmp_path, m, periods=5)["big_gamma"])
        assert all(float(r["drift"]) <= 2 * m.sup_norm for r in rows)

    def test_gamma_period(self, tmp_path):
        rows = read_rows(io.export_plot_data(tmp_path, REFERENCE, density=8)["gamma"])
        assert float(rows[0]["t"]) == 0.0 and float(rows[-1]["t"]) == 1.0
        assert {float(r["gamma"]) for r in rows} == {2.0, -1.0}


class TestConfig:
    def test_golden_blowup(self):
        cfg = parse_config(DATA / "blowup_minimal.json")
        assert isinstance(cfg, RunConfig)
        assert len(cfg.experiments) == 1 and cfg.experiments[0].kind == "blowup"
        assert cfg.experiments[0].map == DispersionMap.two_step(1.0, 1.0, 0.5)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.json")

    def test_forbidden_triple(self):
        obj = {"experiments": [{"kind": "strichartz", "map": REFERENCE.to_json(),
                                "params": {"q": 2, "r": "inf", "d": 2}}]}
        with pytest.raises(ConfigError) as exc:
            config_from_dict(obj)
        assert any("(2, 2, inf)" in e for e in exc.value.errors)

    def test_zero_average_strichartz(self):
        obj = {"experiments": [{"kind": "strichartz", "map": {"segments": [[0.5, 1], [0.5, -1]]},
                                "params": {"q": 8, "r": 4}}]}
        with pytest.raises(ConfigError, match="not admissible"):
            config_from_dict(obj)

    def test_collects_all_errors(self):
        obj = {"seed": -1, "bogus": 1, "experiments": [
            {"kind": "strichartz", "map": REFERENCE.to_json()},
            {"kind": "nope", "map": REFERENCE.to_json()},
            {"kind": "partition", "map": {"segments": [[0.5, 1]]}},
        ]}
        with pytest.raises(ConfigError) as exc:
            config_from_dict(obj)
        assert len(exc.value.errors) >= 5

    def test_round_trip(self):
        obj = {"seed": 11, "out": "results", "experiments": [
            {"kind": "strichartz", "map": REFERENCE.to_json(), "params": {"q": "inf", "r": 2}},
            {"kind": "blowup", "map": {"gamma_plus": 1, "gamma_minus": 2, "t_plus": 0.4}, "params": {"lam": 2}},
        ]}
        cfg = config_from_dict(obj)
        again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
        assert again == cfg
        assert cfg.experiments[0].seed == 11 and math.isinf(cfg.experiments[0].params["q"])


class TestMain:
    def test_unknown_subcommand(self):
        assert main(["bogus"]) == 2

    def test_no_arguments(self):
        assert main([]) == 2

    def test_groundstate(self, tmp_path, profile_cache):
        code = main(["groundstate", "--out", str(tmp_path / "d"), "--quiet", "--profile-cache", str(profile_cache)])
        assert code == 0
        assert (tmp_path / "d" / "ground_state.csv").exists()
        report = json.loads((tmp_path / "d" / "pohozaev.json").read_text())
        assert max(map(abs, report["pohozaev_residuals"])) <= 1e-6

    def test_partition_bare_map(self, tmp_path, capsys):
        code = main(["partition", "--config", str(DATA / "two_step.json"), "--out", str(tmp_path), "--json", "--quiet"])
        assert code == 0
        rows = read_rows(tmp_path / "covers.csv")
        assert [(r["t_start"], r["t_end"]) for r in rows if r["n"] == "0"] == [("0.0", "0.5"), ("1.0", "1.25")]
        doc = json.loads(capsys.readouterr().out)
        assert doc["verdict"] == "pass" and doc["seed"] == 0
        assert json.loads((tmp_path / "report.json").read_text())["verdict"] == "pass"

    def test_config_error_exit(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"experiments": [{"kind": "strichartz", "map": {"segments": [[0.5, 1], [0.5, -1]]},
                                                     "params": {"q": 8, "r": 4}}]}))
        assert main(["strichartz", "--config", str(path)]) == 2
        assert "not admissible" in capsys.readouterr().err

    def test_seed_override(self, tmp_path, capsys):
        main(["partition", "--out", str(tmp_path), "--seed", "42", "--json", "--quiet"])
        assert json.loads(capsys.readouterr().out)["seed"] == 42

    def test_fail_exit(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"experiments": [{
            "kind": "strichartz", "map": REFERENCE.to_json(),
            "grid": {"kind": "torus", "half_length": 160.0, "points": 2048},
            "params": {"q": 8, "r": 4, "t_window": 1.0, "c_str": 1e-3}}]}))
        assert main(["strichartz", "--config", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == 1

    def test_inconclusive_exit(self, tmp_path, profile_cache):
        path = tmp_path / "b.json"
        path.write_text(json.dumps({"profile_cache": str(profile_cache), "experiments": [{
            "kind": "blowup", "map": FOCUSING_JSON, "grid": {"points": 64}, "params": {"lam": 1}}]}))
        assert main(["blowup", "--config", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == 3

    def test_blowup_writes_artifacts(self, tmp_path, profile_cache):
        out = tmp_path / "o"
        code = main(["blowup", "--config", str(DATA / "blowup_minimal.json"), "--out", str(out), "--quiet",
                     "--profile-cache", str(profile_cache)])
        assert code == 0
        for name in ("report.json", "diagnostics.csv", "trapping.csv", "final.bin", "gamma.csv", "big_gamma.csv"):
            assert (out / name).exists(), name
        assert json.loads((out / "report.json").read_text())["verdict"] == "blowup_detected"

    def test_simulate(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text(json.dumps({"simulation": {
            "map": REFERENCE.to_json(), "grid": {"kind": "torus", "half_length": 20.0, "points": 256},
            "datum": {"family": "gaussian", "amplitude": 0.5}, "t1": 0.2, "dt_max": 0.01, "snapshot_every": 5}}))
        out = tmp_path / "o"
        assert main(["simulate", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        snaps = sorted(out.glob("snapshot_*.bin"))
        assert len(snaps) == 5
        t, field = io.read_snapshot(snaps[-1])
        assert t == pytest.approx(0.2)
        assert len(io.read_diagnostics_csv(out / "diagnostics.csv")) == 5

    def test_simulate_needs_config(self):
        assert main(["simulate"]) == 2


FOCUSING_JSON = {"gamma_plus": 1.0, "gamma_minus": 1.0, "t_plus": 0.5}
