"""Run configuration: data model, INI-like parser and canonical serializer."""
import os
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional

from core.errors import ConfigError, ModelError
from models.system import ThreeLevelModel
from models.units import TWO_PI, convert, known_units, unit_dimension


class RunMode(Enum):
    RF2D = "rf2d"
    NHH2D = "nhh2d"
    RF_NHHPATHS_2D = "rf-nhhpaths-2d"
    POPDYN = "popdyn"
    TRACE = "trace"
    GREENS = "greens"
    RDC = "rdc"
    COMPARE = "compare"
    SLICES = "slices"


class OutputFormat(Enum):
    CSV = "csv"
    BIN = "bin"      # raw float64 + JSON sidecar
    PLOT = "plot"    # gnuplot script next to each CSV
    PNG = "png"      # colormapped preview

    @classmethod
    def parse_list(cls, text: str) -> list["OutputFormat"]:
        names = [s.strip() for s in text.split(",") if s.strip()]
        aliases = {"bin+json": "bin", "plotscript": "plot"}
        unknown = [n for n in names if aliases.get(n, n) not in {f.value for f in cls}]
        if unknown or not names:
            raise ValueError(f"unknown output format in {text!r}")
        return [cls(aliases.get(n, n)) for n in names]


SPECTRUM_MODES = (RunMode.RF2D, RunMode.NHH2D, RunMode.RF_NHHPATHS_2D)
COMPARE_METHODS = ("rf", "nhh", "rf-nhhpaths")


@dataclass
class AxisSpec:
    """Detuning axis from omega_e (rad/us)."""
    center: float = 0.0
    half_width: float = 4 * TWO_PI
    count: int = 401


@dataclass
class DynamicsSpec:
    t2_max: float = 2.0  # us
    t2_count: int = 401
    # Oracle integrator step (us); None = automatic
    step: Optional[float] = None


@dataclass
class SliceSpec:
    t2_max: float = 2.0  # us
    t2_count: int = 101


@dataclass
class RdcSpec:
    gamma: float = 0.3  # cm-1
    t_max: float = 5.0  # ps
    t_step: float = 0.005  # ps
    pad_to: int = 5000
    frame: float = 2036.0  # cm-1
    window: float = 200.0  # cm-1


@dataclass
class RunConfig:
    """Everything one run needs; defaults reproduce the propanediol parameter set."""
    mode: RunMode = RunMode.RF2D
    t2: list[float] = field(default_factory=lambda: [0.0])
    formats: list[OutputFormat] = field(default_factory=lambda: [OutputFormat.CSV])
    workers: int = 1
    split_paths: bool = False
    green_form: str = "analytic"
    out_dir: str = "results"
    model: ThreeLevelModel = field(default_factory=ThreeLevelModel)
    omega1: AxisSpec = field(default_factory=AxisSpec)
    omega3: AxisSpec = field(default_factory=AxisSpec)
    dynamics: DynamicsSpec = field(default_factory=DynamicsSpec)
    min_height_fraction: float = 0.3
    compare_methods: list[str] = field(default_factory=lambda: ["rf", "nhh"])
    compare_bins: int = 3
    slices: SliceSpec = field(default_factory=SliceSpec)
    rdc: RdcSpec = field(default_factory=RdcSpec)

    def to_dict(self) -> dict:
        """Serialize to dictionary."""
        d = asdict(self)
        d["mode"] = self.mode.value
        d["formats"] = [f.value for f in self.formats]
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Deserialize from dictionary."""
        data = data.copy()
        data["mode"] = RunMode(data["mode"])
        data["formats"] = [OutputFormat(f) for f in data.get("formats", ["csv"])]
        data["model"] = ThreeLevelModel.from_dict(data.get("model", {}))
        data["omega1"] = AxisSpec(**data.get("omega1", {}))
        data["omega3"] = AxisSpec(**data.get("omega3", {}))
        data["dynamics"] = DynamicsSpec(**data.get("dynamics", {}))
        data["slices"] = SliceSpec(**data.get("slices", {}))
        data["rdc"] = RdcSpec(**data.get("rdc", {}))
        return cls(**data)


# ── Schema: section -> key -> (kind, canonical unit) ──

_MODEL_FREQUENCIES = ("omega_b", "omega_e", "omega_c", "rabi_ec", "rabi_be", "nu_c",
                      "gamma1", "gamma2", "gamma0_b", "gamma0_e", "gamma0_c")

SCHEMA: dict[str, dict[str, tuple[str, Optional[str]]]] = {
    "run": {
        "mode": ("mode", None),
        "t2": ("quantity_list", "us"),
        "formats": ("formats", None),
        "workers": ("int", None),
        "split_paths": ("bool", None),
        "green_form": ("green_form", None),
        "out_dir": ("str", None),
    },
    "model": {**{k: ("quantity", "rad_per_us") for k in _MODEL_FREQUENCIES},
              "dt_probe": ("quantity", "us")},
    "axes": {
        "omega1_center": ("quantity", "rad_per_us"),
        "omega1_half_width": ("quantity", "rad_per_us"),
        "omega1_count": ("int", None),
        "omega3_center": ("quantity", "rad_per_us"),
        "omega3_half_width": ("quantity", "rad_per_us"),
        "omega3_count": ("int", None),
    },
    "dynamics": {
        "t2_max": ("quantity", "us"),
        "t2_count": ("int", None),
        "step": ("quantity", "us"),
    },
    "peaks": {"min_height_fraction": ("float", None)},
    "compare": {"methods": ("methods", None), "tolerance_bins": ("int", None)},
    "slices": {"t2_max": ("quantity", "us"), "t2_count": ("int", None)},
    "rdc": {
        "gamma": ("quantity", "cm-1"),
        "t_max": ("quantity", "ps"),
        "t_step": ("quantity", "ps"),
        "pad_to": ("int", None),
        "frame": ("quantity", "cm-1"),
        "window": ("quantity", "cm-1"),
    },
}

THREE_LEVEL_SECTIONS = ("model", "axes", "dynamics", "slices")


class _Source:
    """Location of each parsed key, for line-precise errors."""

    def __init__(self, path: str):
        self.path = path
        self.lines: dict[tuple[str, str], int] = {}

    def error(self, message: str, section: Optional[str] = None, key: Optional[str] = None,
              line: Optional[int] = None) -> ConfigError:
        if line is None and section and key:
            line = self.lines.get((section, key))
        return ConfigError(message, path=self.path, line=line, key=key)


def _split_unit(text: str) -> tuple[str, Optional[str]]:
    parts = text.rsplit(None, 1)
    if len(parts) == 2 and parts[1] in known_units():
        return parts[0], parts[1]
    return text, None


def _to_float(token: str) -> float:
    return float(token.strip())


def _parse_value(kind: str, target: Optional[str], raw: str):
    if kind in ("quantity", "quantity_list"):
        number, unit = _split_unit(raw)
        if unit is None:
            raise ValueError(f"missing unit (expected a {unit_dimension(target)} unit)")
        if unit_dimension(unit) != unit_dimension(target):
            raise ValueError(f"unit {unit} is not a {unit_dimension(target)} unit")
        if kind == "quantity":
            return convert(_to_float(number), unit, target)
        return [convert(_to_float(tok), unit, target) for tok in number.split(",") if tok.strip()]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        lowered = raw.lower()
        if lowered not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"expected a boolean, got {raw!r}")
        return lowered in ("true", "yes", "1")
    if kind == "mode":
        return RunMode(raw)
    if kind == "formats":
        return OutputFormat.parse_list(raw)
    if kind == "green_form":
        if raw not in ("analytic", "exact"):
            raise ValueError(f"green_form must be analytic or exact, got {raw!r}")
        return raw
    if kind == "methods":
        methods = [m.strip() for m in raw.split(",") if m.strip()]
        bad = [m for m in methods if m not in COMPARE_METHODS]
        if bad or len(methods) != 2:
            raise ValueError(f"methods must be two of {', '.join(COMPARE_METHODS)}")
        return methods
    return raw


def _read_entries(text: str, source: _Source) -> dict[str, dict[str, object]]:
    entries: dict[str, dict[str, object]] = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise source.error(f"unknown section [{section}]", line=number)
            entries.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise source.error(f"expected 'key = value', got {stripped!r}", line=number)
        if section is None:
            raise source.error("key outside of any section", line=number)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in SCHEMA[section]:
            raise source.error(f"unknown key {key!r} in [{section}]", key=key, line=number)
        if key in entries[section]:
            raise source.error(f"duplicate key {key!r}", key=key, line=number)
        kind, target = SCHEMA[section][key]
        try:
            entries[section][key] = _parse_value(kind, target, raw)
        except ValueError as exc:
            raise source.error(f"{key}: {exc}", key=key, line=number) from None
        source.lines[(section, key)] = number
    return entries


def _build(entries: dict, source: _Source, mode: Optional[RunMode] = None) -> RunConfig:
    run = dict(entries.get("run", {}))
    if mode is not None:
        run["mode"] = mode
    config = RunConfig(**{k: v for k, v in run.items()})

    if config.mode is RunMode.RDC:
        foreign = [f"[{s}] {k}" for s in THREE_LEVEL_SECTIONS for k in entries.get(s, {})]
        if foreign:
            first = next(k for s in THREE_LEVEL_SECTIONS for k in entries.get(s, {}))
            section = next(s for s in THREE_LEVEL_SECTIONS if entries.get(s))
            raise source.error(
                "mode rdc does not use three-level keys: " + ", ".join(foreign),
                section=section, key=first,
            )

    try:
        config.model = ThreeLevelModel(**entries.get("model", {}))
    except ModelError as exc:
        raise source.error(str(exc), section="model", key=exc.key) from None

    for name in ("omega1", "omega3"):
        spec = getattr(config, name)
        for attr in ("center", "half_width", "count"):
            key = f"{name}_{attr}"
            if key in entries.get("axes", {}):
                setattr(spec, attr, entries["axes"][key])
        if spec.count < 2:
            raise source.error(f"{name}_count must be >= 2", section="axes", key=f"{name}_count")
        if spec.half_width <= 0:
            raise source.error(f"{name}_half_width must be > 0", section="axes", key=f"{name}_half_width")

    for attr, value in entries.get("dynamics", {}).items():
        setattr(config.dynamics, attr, value)
    for attr, value in entries.get("slices", {}).items():
        setattr(config.slices, attr, value)
    for attr, value in entries.get("rdc", {}).items():
        setattr(config.rdc, attr, value)
    if "min_height_fraction" in entries.get("peaks", {}):
        config.min_height_fraction = entries["peaks"]["min_height_fraction"]
    if "methods" in entries.get("compare", {}):
        config.compare_methods = entries["compare"]["methods"]
    if "tolerance_bins" in entries.get("compare", {}):
        config.compare_bins = entries["compare"]["tolerance_bins"]

    _validate(config, source)
    return config


def _validate(config: RunConfig, source: _Source):
    checks = [
        (config.workers >= 1, "run", "workers", "workers must be >= 1"),
        (all(t >= 0 for t in config.t2) and config.t2, "run", "t2", "t2 needs at least one value >= 0"),
        (0 < config.min_height_fraction < 1, "peaks", "min_height_fraction",
         "min_height_fraction must be in (0, 1)"),
        (config.compare_bins >= 1, "compare", "tolerance_bins", "tolerance_bins must be >= 1"),
        (config.dynamics.t2_count >= 2 and config.dynamics.t2_max > 0, "dynamics", "t2_count",
         "dynamics needs t2_max > 0 and t2_count >= 2"),
        (config.dynamics.step is None or config.dynamics.step > 0, "dynamics", "step", "step must be > 0"),
        (config.slices.t2_count >= 2 and config.slices.t2_max > 0, "slices", "t2_count",
         "slices need t2_max > 0 and t2_count >= 2"),
        (config.rdc.t_step > 0 and config.rdc.t_max > config.rdc.t_step, "rdc", "t_step",
         "rdc needs 0 < t_step < t_max"),
        (config.rdc.gamma >= 0, "rdc", "gamma", "gamma must be >= 0"),
        (config.rdc.window > 0, "rdc", "window", "window must be > 0"),
        (config.rdc.pad_to >= int(round(config.rdc.t_max / config.rdc.t_step)) + 1, "rdc", "pad_to",
         "pad_to must be at least the number of time samples"),
    ]
    for ok, section, key, message in checks:
        if not ok:
            raise source.error(message, section=section, key=key)


def parse_config_text(text: str, path: str = "<config>", mode: Optional[RunMode] = None) -> RunConfig:
    source = _Source(path)
    return _build(_read_entries(text, source), source, mode)


def parse_config(path: str, mode: Optional[RunMode] = None) -> RunConfig:
    """
    Load and validate a run configuration file.

    Raises:
        ConfigError: missing file, unknown key, missing or wrong unit, or
            parameters that violate a model invariant
    """
    if not os.path.exists(path):
        raise ConfigError("configuration file not found", path=path)
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_config_text(text, path, mode)


def _fmt(value) -> str:
    return repr(float(value))


def serialize_config(config: RunConfig) -> str:
    """Canonical text form; parse_config_text(serialize_config(c)) == c."""
    lines = ["[run]", f"mode = {config.mode.value}"]
    lines.append("t2 = " + ", ".join(_fmt(t) for t in config.t2) + " us")
    lines.append("formats = " + ", ".join(f.value for f in config.formats))
    lines.append(f"workers = {config.workers}")
    lines.append(f"split_paths = {str(config.split_paths).lower()}")
    lines.append(f"green_form = {config.green_form}")
    lines.append(f"out_dir = {config.out_dir}")

    if config.mode is not RunMode.RDC:
        lines += ["", "[model]"]
        for name in _MODEL_FREQUENCIES:
            lines.append(f"{name} = {_fmt(getattr(config.model, name))} rad_per_us")
        lines.append(f"dt_probe = {_fmt(config.model.dt_probe)} us")

        lines += ["", "[axes]"]
        for name in ("omega1", "omega3"):
            spec = getattr(config, name)
            lines.append(f"{name}_center = {_fmt(spec.center)} rad_per_us")
            lines.append(f"{name}_half_width = {_fmt(spec.half_width)} rad_per_us")
            lines.append(f"{name}_count = {spec.count}")

        lines += ["", "[dynamics]", f"t2_max = {_fmt(config.dynamics.t2_max)} us",
                  f"t2_count = {config.dynamics.t2_count}"]
        if config.dynamics.step is not None:
            lines.append(f"step = {_fmt(config.dynamics.step)} us")

        lines += ["", "[slices]", f"t2_max = {_fmt(config.slices.t2_max)} us",
                  f"t2_count = {config.slices.t2_count}"]

    lines += ["", "[peaks]", f"min_height_fraction = {_fmt(config.min_height_fraction)}"]
    lines += ["", "[compare]", "methods = " + ", ".join(config.compare_methods),
              f"tolerance_bins = {config.compare_bins}"]

    r = config.rdc
    lines += ["", "[rdc]", f"gamma = {_fmt(r.gamma)} cm-1", f"t_max = {_fmt(r.t_max)} ps",
              f"t_step = {_fmt(r.t_step)} ps", f"pad_to = {r.pad_to}",
              f"frame = {_fmt(r.frame)} cm-1", f"window = {_fmt(r.window)} cm-1"]
    return "\n".join(lines) + "\n"
