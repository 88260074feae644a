"""Run engine: dispatches a RunConfig to the engines and writes the artifacts."""
import logging
import threading
from datetime import datetime
from typing import Callable, Optional

import cv2
import numpy as np
import PIL
import scipy

from core import nhh_engine, rf_engine
from core.dynamics import TRACE_COLUMNS, phase_shift, population_dynamics
from core.errors import SimulationError
from core.exporters import ResultWriter
from core.lindblad import DensityMatrix, IntegratorConfig, MasterVariant, trajectory
from core.nhh_engine import QuasiGreenKind, emitted_field, group_terms, quasi_green_freq
from core.peaks import PeakFinder, compare_peaks, peak_gaps
from core.rdc import RdcSettings, build_rdc, simulate_rdc
from core.rf_engine import GreenForm, GreenKind, green_freq
from core.spectra import evaluate_grid
from models.config import OutputFormat, RunConfig, RunMode, serialize_config
from models.spectrum import Axis, SpectrumResult
from models.system import derive_rates
from models.units import TWO_PI
from version_info import TOOL_NAME, VERSION

logger = logging.getLogger(__name__)

# Probe points of the t2 slices, detuning in rad/us
DIAGONAL_POINT = (-1.005 * TWO_PI, -1.005 * TWO_PI)
CROSS_POINT = (-1.005 * TWO_PI, 0.995 * TWO_PI)

MODE_METHOD = {
    RunMode.RF2D: "rf",
    RunMode.NHH2D: "nhh",
    RunMode.RF_NHHPATHS_2D: "rf-nhhpaths",
}


class RunEngine:
    """
    Executes one configured run and records every artifact in a manifest.
    """

    def __init__(
        self,
        config: RunConfig,
        log_callback: Optional[Callable[[str], None]] = None,
    ):
        self.config = config
        self.log_callback = log_callback
        self.peak_finder = PeakFinder(config.min_height_fraction)
        self.writer: Optional[ResultWriter] = None

        self._cancel = threading.Event()
        self._normalizations: dict[str, float] = {}
        self._summary: dict = {}

        self._handlers = {
            RunMode.RF2D: self._run_spectra,
            RunMode.NHH2D: self._run_spectra,
            RunMode.RF_NHHPATHS_2D: self._run_spectra,
            RunMode.POPDYN: self._run_popdyn,
            RunMode.TRACE: self._run_trace,
            RunMode.GREENS: self._run_greens,
            RunMode.RDC: self._run_rdc,
            RunMode.COMPARE: self._run_compare,
            RunMode.SLICES: self._run_slices,
        }

    @property
    def formats(self) -> list[str]:
        return [f.value for f in self.config.formats]

    def _log(self, message: str):
        """Log a message with timestamp."""
        timestamp = datetime.now().strftime("%H:%M:%S")
        full_msg = f"[{timestamp}] {message}"
        if self.log_callback:
            self.log_callback(full_msg)
        logger.info(message)

    def cancel(self):
        """Stop before the next t2 value or method is started."""
        self._cancel.set()

    def _cancelled(self) -> bool:
        if self._cancel.is_set():
            self._log("run cancelled")
            return True
        return False

    def run(self) -> dict:
        """
        Execute the configured mode.

        Returns:
            The manifest written to ``<out_dir>/manifest.json``
        """
        mode = self.config.mode
        self.writer = ResultWriter(self.config.out_dir)
        self._log(f"{TOOL_NAME} {VERSION}: mode {mode.value} -> {self.config.out_dir}")
        try:
            self._handlers[mode]()
        except SimulationError as e:
            self._log(f"{mode.value} failed: {e}")
            raise
        manifest = self._manifest()
        self.writer.write_manifest(manifest)
        self._log(f"done: {len(self.writer.outputs)} files")
        return manifest

    def _manifest(self) -> dict:
        manifest = {
            "tool": TOOL_NAME,
            "version": VERSION,
            "mode": self.config.mode.value,
            "config": self.config.to_dict(),
            "config_text": serialize_config(self.config),
            "libraries": {
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "opencv": cv2.__version__,
                "pillow": PIL.__version__,
            },
            "normalization": self._normalizations,
            "summary": self._summary,
        }
        if self.config.mode is not RunMode.RDC:
            manifest["derived_rates"] = derive_rates(self.config.model).to_dict()
        return manifest

    # ── Three-level signal selection ──

    def _axes(self) -> tuple[Axis, Axis]:
        o1, o3 = self.config.omega1, self.config.omega3
        return (
            Axis.centered(o1.center, o1.half_width, o1.count, "rad/us"),
            Axis.centered(o3.center, o3.half_width, o3.count, "rad/us"),
        )

    def _signal_terms(self, method: str) -> Callable:
        """Detuning-domain function returning the display field split into parts."""
        model = self.config.model
        form = GreenForm(self.config.green_form)
        omega_e = model.omega_eb

        if method == "rf":
            def terms(d3, t2, d1):
                return rf_engine.rp_signal_rf_terms(omega_e + d3, t2, omega_e + d1, model, form)
        elif method == "nhh":
            def terms(d3, t2, d1):
                raw = nhh_engine.rp_signal_nhh_terms(omega_e + d3, t2, omega_e + d1, model)
                return {k: emitted_field(v) for k, v in group_terms(raw).items()}
        elif method == "rf-nhhpaths":
            def terms(d3, t2, d1):
                raw = rf_engine.rp_signal_rf_nhh_paths_terms(omega_e + d3, t2, omega_e + d1, model, form)
                return group_terms(raw)
        else:
            raise ValueError(f"unknown method {method!r}")
        return terms

    def _signal(self, method: str) -> Callable:
        terms = self._signal_terms(method)
        return lambda d3, t2, d1: sum(terms(d3, t2, d1).values())

    def spectrum(self, method: str, t2: float) -> SpectrumResult:
        """Unnormalized display spectrum of one method at one t2."""
        axis1, axis2 = self._axes()
        grid = evaluate_grid(self._signal(method), axis1, axis2, t2, workers=self.config.workers)
        return SpectrumResult(grid, method, t2=t2, center_frequency=self.config.model.omega_eb)

    def _export_spectrum(self, name: str, result: SpectrumResult) -> SpectrumResult:
        normalized = result.normalized()
        self._normalizations[name] = normalized.normalization
        self.writer.write_spectrum(name, normalized, self.formats)
        return normalized

    def _export_peaks(self, name: str, result: SpectrumResult):
        try:
            peaks = self.peak_finder.find_peaks(result)
        except SimulationError as e:
            self._log(f"{name}: no peaks ({e})")
            return None
        rows = np.array([[p.omega1, p.omega3, p.height, p.sign] for p in peaks]).reshape(-1, 4)
        self.writer.write_table(f"{name}_peaks", ["omega1", "omega3", "height", "sign"], rows)
        return peaks

    # ── Modes ──

    def _run_spectra(self):
        method = MODE_METHOD[self.config.mode]
        axis1, axis2 = self._axes()
        for t2 in self.config.t2:
            if self._cancelled():
                return
            name = f"{self.config.mode.value}_t2_{t2:g}us"
            result = self._export_spectrum(name, self.spectrum(method, t2))
            peaks = self._export_peaks(name, result)
            self._log(f"{name}: normalization {result.normalization:.6g}, "
                      f"{0 if peaks is None else len(peaks)} peaks")
            if peaks is not None and len(peaks) > 1:
                self._summary[name] = {
                    "peaks": len(peaks),
                    "omega3_gaps": peak_gaps(peaks, axis=3),
                }
            if self.config.split_paths:
                terms = self._signal_terms(method)
                parts = rf_engine.RF_TERMS if method == "rf" else nhh_engine.PATH_GROUPS
                for part in parts:
                    part_fn = lambda d3, t, d1, part=part: terms(d3, t, d1)[part]
                    grid = evaluate_grid(part_fn, axis1, axis2, t2, workers=self.config.workers)
                    self._export_spectrum(f"{name}_{part}", SpectrumResult(grid, f"{method}:{part}", t2=t2))

    def _t2_grid(self, t2_max: float, count: int) -> np.ndarray:
        return np.linspace(0.0, t2_max, count)

    def _run_popdyn(self):
        dyn = self.config.dynamics
        t2 = self._t2_grid(dyn.t2_max, dyn.t2_count)
        form = GreenForm(self.config.green_form)
        table = population_dynamics(self.config.model, t2, form)
        names = [n for n in table.columns if n not in TRACE_COLUMNS]
        self._log(f"population dynamics on {t2.size} points")

        # The oracle integrates the equations the RF columns were drawn from
        variant = MasterVariant.PERTURBATIVE if form is GreenForm.ANALYTIC else MasterVariant.GENERATOR
        integrator = IntegratorConfig(step=dyn.step, check_step=False)
        from_b = trajectory(self.config.model, DensityMatrix.basis(3, 0), t2, integrator, variant=variant)
        from_e = trajectory(self.config.model, DensityMatrix.basis(3, 1), t2, integrator, variant=variant)
        oracle = {
            "oracle_bbbb": from_b[:, 0, 0].real,
            "oracle_eebb": from_b[:, 1, 1].real,
            "oracle_eeee": from_e[:, 1, 1].real,
            "oracle_bbee": from_e[:, 0, 0].real,
        }
        data = np.column_stack([table.as_array(names)] + list(oracle.values()))
        columns = table.names[:1] + names + list(oracle)
        csv_name = self.writer.write_table("popdyn", columns, data, {"t2_unit": "us", "form": self.config.green_form})
        if OutputFormat.PLOT in self.config.formats:
            self.writer.write_table_plot("popdyn", csv_name, columns, "t2 (us)")
        rates = derive_rates(self.config.model)
        self._summary["nhh_eeee_ceec_phase_shift"] = phase_shift(
            t2, table["nhh_eeee"], table["nhh_ceec"], rates.omega_tilde_minus.real, rates.gamma_ec_plus,
        )
        self._summary["oracle_variant"] = variant.value
        self._summary["oracle_max_deviation"] = float(max(
            np.max(np.abs(oracle[name] - table["rf" + name[len("oracle"):]]))
            for name in oracle
        ))

    def _run_trace(self):
        dyn = self.config.dynamics
        t2 = self._t2_grid(dyn.t2_max, dyn.t2_count)
        table = population_dynamics(self.config.model, t2, GreenForm(self.config.green_form))
        columns = ["t2"] + list(TRACE_COLUMNS)
        csv_name = self.writer.write_table("trace", columns, table.as_array(list(TRACE_COLUMNS)), {"t2_unit": "us"})
        if OutputFormat.PLOT in self.config.formats:
            self.writer.write_table_plot("trace", csv_name, columns, "t2 (us)")
        self._summary["nhh_trace_final"] = {
            "b": float(table["nhh_trace_b"][-1]),
            "e": float(table["nhh_trace_e"][-1]),
        }

    def _run_greens(self):
        model = self.config.model
        rates = derive_rates(model)
        axis, _ = self._axes()
        omega = model.omega_eb + axis.values
        columns = ["detuning"]
        data = [axis.values]
        for kind in (GreenKind.BEBE_W, GreenKind.BCBE_W, GreenKind.EBEB_W, GreenKind.EBCB_W):
            value = green_freq(kind, omega, rates, model.omega_eb)
            columns += [f"rf_{kind.value}_re", f"rf_{kind.value}_im"]
            data += [value.real, value.imag]
        for kind in (QuasiGreenKind.BEBE, QuasiGreenKind.BCBE, QuasiGreenKind.EBEB, QuasiGreenKind.EBCB):
            value = 1j * quasi_green_freq(kind, omega, rates, model.omega_eb)
            columns += [f"nhh_i{kind.value}_re", f"nhh_i{kind.value}_im"]
            data += [value.real, value.imag]
        csv_name = self.writer.write_table("greens", columns, np.column_stack(data), {"detuning_unit": "rad/us"})
        if OutputFormat.PLOT in self.config.formats:
            self.writer.write_table_plot("greens", csv_name, columns, "omega - omega_e (rad/us)")

    def _run_rdc(self):
        spec = self.config.rdc
        system = build_rdc(spec.gamma, spec.frame)
        settings = RdcSettings(t_max=spec.t_max, t_step=spec.t_step, pad_to=spec.pad_to,
                               window_cm=spec.window, workers=self.config.workers)
        self._log(f"rdc: gamma {spec.gamma} cm-1, {settings.time_axis().count} samples per axis")
        results = simulate_rdc(system, settings)
        for key, result in results.items():
            name = f"rdc_{key}"
            if key == "absorptive":
                self._normalizations[name] = result.normalization
                self.writer.write_spectrum(name, result, self.formats)
            else:
                self._export_spectrum(name, result)
        peaks = self._export_peaks("rdc_absorptive", results["absorptive"])
        if peaks is not None:
            self._summary["rdc"] = {
                "positive_peaks": len(peaks.positive()),
                "negative_peaks": len(peaks.negative()),
                "resolution_cm": results["absorptive"].grid.axis2.step,
            }
            self._log(f"rdc: {len(peaks.positive())} positive, {len(peaks.negative())} negative peaks")

    def _run_compare(self):
        first, second = self.config.compare_methods
        for t2 in self.config.t2:
            if self._cancelled():
                return
            a = self.spectrum(first, t2).normalized()
            b = self.spectrum(second, t2).normalized()
            name = f"compare_{first}_{second}_t2_{t2:g}us"
            self._normalizations[f"{name}_{first}"] = a.normalization
            self._normalizations[f"{name}_{second}"] = b.normalization
            peaks_a = self.peak_finder.find_peaks(a)
            peaks_b = self.peak_finder.find_peaks(b)
            bin_width = max(a.grid.axis1.step, a.grid.axis2.step)
            matches, only_a, only_b = compare_peaks(peaks_a, peaks_b, bin_width, self.config.compare_bins)
            rows = [
                [m.first.omega1, m.first.omega3, m.first.height,
                 m.second.omega1, m.second.omega3, m.second.height,
                 abs(m.second.height - m.first.height) / abs(m.first.height)]
                for m in matches
            ]
            columns = [f"{first}_omega1", f"{first}_omega3", f"{first}_height",
                       f"{second}_omega1", f"{second}_omega3", f"{second}_height", "relative_height_diff"]
            self.writer.write_table(name, columns, np.array(rows).reshape(-1, 7))
            grid_diff = float(np.max(np.abs(np.real(a.grid.values) - np.real(b.grid.values))))
            self._summary[name] = {
                "matched": len(matches),
                "unmatched": [len(only_a), len(only_b)],
                "max_relative_height_diff": max((r[-1] for r in rows), default=0.0),
                "max_grid_difference": grid_diff,
                "omega3_gaps": [peak_gaps(peaks_a, 3), peak_gaps(peaks_b, 3)],
            }
            self._log(f"{name}: {len(matches)} matched peaks, max grid difference {grid_diff:.3g}")

    def _run_slices(self):
        spec = self.config.slices
        t2 = self._t2_grid(spec.t2_max, spec.t2_count)
        columns = ["t2"]
        data = [t2]
        for method in ("rf", "nhh", "rf-nhhpaths"):
            signal = self._signal(method)
            for label, (d1, d3) in (("diag", DIAGONAL_POINT), ("cross", CROSS_POINT)):
                heights = np.real(np.array([signal(d3, t, d1) for t in t2]))
                reference = heights[0]
                if reference == 0:
                    raise SimulationError(f"{method} {label} height vanishes at t2 = 0")
                columns.append(f"{method}_{label}")
                data.append(heights / reference)
                self._normalizations[f"slices_{method}_{label}"] = float(abs(reference))
        csv_name = self.writer.write_table("slices", columns, np.column_stack(data), {"t2_unit": "us"})
        if OutputFormat.PLOT in self.config.formats:
            self.writer.write_table_plot("slices", csv_name, columns, "t2 (us)")
