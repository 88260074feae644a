"""Writers for spectra, tables, plot scripts, previews and the run manifest."""
import json
import logging
import os
from typing import Iterable, Optional

import cv2
import numpy as np
from PIL import Image

from models.spectrum import SpectrumResult

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.12e"
BIN_LAYOUT = "little-endian float64, row-major (omega1, omega3), interleaved re/im"


def _header_lines(meta: dict) -> list[str]:
    lines = []
    for key, value in meta.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        lines.append(f"{key}: {value}")
    return lines


class ResultWriter:
    """Writes run artifacts under one output directory and records what it wrote."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.outputs: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def _path(self, filename: str) -> str:
        path = os.path.join(self.out_dir, filename)
        self.outputs.append(filename)
        return path

    # ── Spectra ──

    def write_spectrum(self, name: str, result: SpectrumResult, formats: Iterable[str]) -> list[str]:
        """
        Write one spectrum in every requested format.

        Args:
            name: file stem, e.g. "rf2d_t2_0.24us"
            result: the spectrum
            formats: subset of csv, bin, plot, png

        Returns:
            Filenames written, relative to the output directory
        """
        before = len(self.outputs)
        formats = set(formats)
        if "csv" in formats or "plot" in formats:
            csv_name = self._write_spectrum_csv(name, result)
            if "plot" in formats:
                self._write_plot_script(name, csv_name, result)
        if "bin" in formats:
            self._write_bin(name, result)
        if "png" in formats:
            self._write_png(name, result)
        return self.outputs[before:]

    def _write_spectrum_csv(self, name: str, result: SpectrumResult) -> str:
        filename = f"{name}.csv"
        grid = result.grid
        w1, w3 = np.meshgrid(grid.axis1.values, grid.axis2.values, indexing="ij")
        data = np.column_stack([
            w1.ravel(), w3.ravel(), grid.values.real.ravel(), grid.values.imag.ravel(),
        ])
        meta = result.describe()
        header = "\n".join(_header_lines(meta) + ["omega1,omega3,re,im"])
        np.savetxt(self._path(filename), data, fmt=CSV_FORMAT, delimiter=",", header=header, comments="# ")
        return filename

    def _write_bin(self, name: str, result: SpectrumResult):
        grid = result.grid
        interleaved = np.empty(grid.values.shape + (2,), dtype="<f8")
        interleaved[..., 0] = grid.values.real
        interleaved[..., 1] = grid.values.imag
        interleaved.tofile(self._path(f"{name}.bin"))
        sidecar = {
            "shape": list(grid.shape),
            "layout": BIN_LAYOUT,
            "axis1": grid.axis1.to_dict(),
            "axis2": grid.axis2.to_dict(),
            "metadata": result.describe(),
        }
        with open(self._path(f"{name}.json"), "w", encoding="utf-8") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)

    def _write_plot_script(self, name: str, csv_name: str, result: SpectrumResult):
        unit1, unit3 = result.grid.axis1.unit, result.grid.axis2.unit
        script = "\n".join([
            f"# Re of {result.method} at t2 = {result.t2}",
            "set datafile separator ','",
            "set pm3d map",
            "set palette defined (-1 'blue', 0 'white', 1 'red')",
            f"set xlabel 'omega1 ({unit1})'",
            f"set ylabel 'omega3 ({unit3})'",
            f"set title '{name}'",
            "set term pngcairo size 800,700",
            f"set output '{name}_gnuplot.png'",
            f"splot '{csv_name}' using 1:2:3 with pm3d notitle",
            "",
        ])
        with open(self._path(f"{name}.gp"), "w", encoding="utf-8") as f:
            f.write(script)

    def _write_png(self, name: str, result: SpectrumResult):
        real = np.real(result.grid.values)
        scale = float(np.max(np.abs(real))) or 1.0
        # omega1 left to right, omega3 bottom to top
        image = ((real.T[::-1] / scale + 1.0) * 127.5).clip(0, 255).astype(np.uint8)
        colored = cv2.applyColorMap(image, cv2.COLORMAP_JET)
        rgb = cv2.cvtColor(colored, cv2.COLOR_BGR2RGB)
        Image.fromarray(rgb).save(self._path(f"{name}.png"))

    # ── Tables and manifest ──

    def write_table(self, name: str, columns: list[str], data: np.ndarray, meta: Optional[dict] = None) -> str:
        """CSV with '# key: value' header lines and a column-name row."""
        filename = f"{name}.csv"
        header = "\n".join(_header_lines(meta or {}) + [",".join(columns)])
        np.savetxt(self._path(filename), np.asarray(data), fmt=CSV_FORMAT, delimiter=",",
                   header=header, comments="# ")
        return filename

    def write_table_plot(self, name: str, csv_name: str, columns: list[str], xlabel: str):
        """Line-plot gnuplot script for the columns of a table."""
        lines = [
            "set datafile separator ','",
            f"set xlabel '{xlabel}'",
            "set term pngcairo size 900,600",
            f"set output '{name}_gnuplot.png'",
        ]
        plots = [f"'{csv_name}' using 1:{k + 1} with lines title '{col}'" for k, col in enumerate(columns) if k]
        lines.append("plot " + ", \\\n     ".join(plots))
        with open(self._path(f"{name}.gp"), "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")

    def write_manifest(self, data: dict) -> str:
        path = os.path.join(self.out_dir, "manifest.json")
        data = dict(data)
        data["outputs"] = list(self.outputs)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        logger.info("manifest written to %s", path)
        return path


def read_bin(path: str) -> tuple[np.ndarray, dict]:
    """Load a .bin spectrum and its .json sidecar back into a complex array."""
    sidecar_path = os.path.splitext(path)[0] + ".json"
    with open(sidecar_path, "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    raw = np.fromfile(path, dtype="<f8").reshape(tuple(sidecar["shape"]) + (2,))
    return raw[..., 0] + 1j * raw[..., 1], sidecar
