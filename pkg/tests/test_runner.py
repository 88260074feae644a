import json

import numpy as np
import pytest

import main
from core.runner import RunEngine
from models.config import AxisSpec, DynamicsSpec, OutputFormat, RdcSpec, RunConfig, RunMode, SliceSpec


def small_config(tmp_path, mode, **changes) -> RunConfig:
    config = RunConfig(
        mode=mode,
        out_dir=str(tmp_path / "out"),
        omega1=AxisSpec(count=81),
        omega3=AxisSpec(count=81),
        dynamics=DynamicsSpec(t2_max=0.5, t2_count=11, step=5e-3),
        slices=SliceSpec(t2_max=0.5, t2_count=6),
    )
    for key, value in changes.items():
        setattr(config, key, value)
    return config


def load_table(path):
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def test_rf_spectra_with_parts(tmp_path):
    config = small_config(tmp_path, RunMode.RF2D, t2=[0.0, 0.24], split_paths=True)
    manifest = RunEngine(config).run()
    out = tmp_path / "out"
    for t2 in ("0", "0.24"):
        assert (out / f"rf2d_t2_{t2}us.csv").exists()
        for part in ("eeee", "bbee", "eebb", "bbbb"):
            assert (out / f"rf2d_t2_{t2}us_{part}.csv").exists()
    assert (out / "rf2d_t2_0us_peaks.csv").exists()
    assert manifest["summary"]["rf2d_t2_0us"]["peaks"] >= 2
    with open(out / "manifest.json", encoding="utf-8") as f:
        on_disk = json.load(f)
    assert on_disk["mode"] == "rf2d"
    assert "rf2d_t2_0us.csv" in on_disk["outputs"]
    assert set(on_disk["libraries"]) == {"numpy", "scipy", "opencv", "pillow"}
    assert "[model]" in on_disk["config_text"]


def test_nhh_parts(tmp_path):
    config = small_config(tmp_path, RunMode.NHH2D, split_paths=True, formats=[OutputFormat.BIN])
    RunEngine(config).run()
    for part in ("part1", "part2", "part3"):
        assert (tmp_path / "out" / f"nhh2d_t2_0us_{part}.bin").exists()


def test_popdyn_table(tmp_path):
    config = small_config(tmp_path, RunMode.POPDYN, dynamics=DynamicsSpec(t2_max=0.5, t2_count=11, step=1e-3))
    manifest = RunEngine(config).run()
    data = load_table(tmp_path / "out" / "popdyn.csv")
    assert data.shape[0] == 11
    assert data[0, 0] == 0.0
    assert data[0, 1] == pytest.approx(1.0)
    summary = manifest["summary"]
    assert summary["oracle_variant"] == "perturbative"
    assert summary["oracle_max_deviation"] < 1e-6
    assert summary["nhh_eeee_ceec_phase_shift"] == pytest.approx(np.pi, abs=0.05)
    header = (tmp_path / "out" / "popdyn.csv").read_text(encoding="utf-8")
    for name in ("oracle_bbbb", "oracle_eebb", "oracle_eeee", "oracle_bbee"):
        assert name in header


def test_trace_table(tmp_path):
    manifest = RunEngine(small_config(tmp_path, RunMode.TRACE)).run()
    data = load_table(tmp_path / "out" / "trace.csv")
    assert data.shape == (11, 5)
    np.testing.assert_allclose(data[:, 1:3], 1.0, atol=1e-10)
    assert manifest["summary"]["nhh_trace_final"]["b"] < 1.0


def test_greens_table(tmp_path):
    RunEngine(small_config(tmp_path, RunMode.GREENS, formats=[OutputFormat.CSV, OutputFormat.PLOT])).run()
    data = load_table(tmp_path / "out" / "greens.csv")
    assert data.shape == (81, 17)
    assert (tmp_path / "out" / "greens.gp").exists()


def test_compare_at_zero_delay(tmp_path):
    manifest = RunEngine(small_config(tmp_path, RunMode.COMPARE)).run()
    summary = manifest["summary"]["compare_rf_nhh_t2_0us"]
    assert summary["matched"] >= 1
    assert summary["unmatched"] == [0, 0]
    assert summary["max_grid_difference"] < 1e-9


def test_slices(tmp_path):
    manifest = RunEngine(small_config(tmp_path, RunMode.SLICES)).run()
    data = load_table(tmp_path / "out" / "slices.csv")
    assert data.shape == (6, 7)
    np.testing.assert_allclose(data[0, 1:], 1.0)
    assert manifest["normalization"]["slices_rf_diag"] > 0


def test_rdc_mode(tmp_path):
    config = small_config(tmp_path, RunMode.RDC, rdc=RdcSpec(t_max=1.0, t_step=0.01, pad_to=256))
    manifest = RunEngine(config).run()
    out = tmp_path / "out"
    for key in ("rephasing", "nonrephasing", "absorptive"):
        assert (out / f"rdc_{key}.csv").exists()
    assert "derived_rates" not in manifest
    assert manifest["summary"]["rdc"]["positive_peaks"] >= 1


def test_cancel_before_start(tmp_path):
    engine = RunEngine(small_config(tmp_path, RunMode.RF2D, t2=[0.0, 0.5]))
    messages = []
    engine.log_callback = messages.append
    engine.cancel()
    manifest = engine.run()
    assert manifest["summary"] == {}
    assert any("cancelled" in m for m in messages)


class TestCommandLine:
    def test_defaults_with_overrides(self, tmp_path):
        out = tmp_path / "cli"
        code = main.main(["greens", "--out", str(out), "--format", "csv,plot", "-q"])
        assert code == 0
        assert (out / "greens.csv").exists()
        assert (out / "greens.gp").exists()
        assert (out / "manifest.json").exists()

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(
            f"[run]\nout_dir = {tmp_path / 'from_file'}\n"
            "[dynamics]\nt2_max = 0.2 us\nt2_count = 5\n",
            encoding="utf-8",
        )
        assert main.main(["trace", "--config", str(path), "-q"]) == 0
        assert load_table(tmp_path / "from_file" / "trace.csv").shape == (5, 5)

    def test_invalid_config_exit_code(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[model]\ngamma1 = -1 MHz_over_2pi\n", encoding="utf-8")
        assert main.main(["rf2d", "--config", str(path), "-q"]) == 2

    def test_missing_config_exit_code(self, tmp_path):
        assert main.main(["rf2d", "--config", str(tmp_path / "none.ini"), "-q"]) == 2

    def test_bad_format_exit_code(self, tmp_path):
        assert main.main(["greens", "--out", str(tmp_path), "--format", "pdf", "-q"]) == 2

    def test_bad_workers_exit_code(self, tmp_path):
        assert main.main(["greens", "--out", str(tmp_path), "--workers", "0", "-q"]) == 2

    def test_unknown_mode(self):
        with pytest.raises(SystemExit) as info:
            main.main(["fourier"])
        assert info.value.code == 2
