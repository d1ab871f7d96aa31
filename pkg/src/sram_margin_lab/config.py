"""Experiment configuration: INI parsing, validation and object builders.

A configuration file fully determines an experiment: device model
constants, cell geometries, waveform timing, variation magnitudes, sweep
and ramp resolutions, array geometry and the scenario voltages used by the
trajectory demonstrations. Every value has a default, unknown sections or
keys are rejected, and ``serialize``/``parse_config`` round-trip exactly,
so a configuration hash pins a run's inputs byte for byte.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

from .cell import CellDesign, SimSettings
from .device import MosParams
from .errors import ConfigError
from .metrics import RampConfig
from .variation import VariationModel

__all__ = ["ExperimentConfig", "default_config", "load_config", "parse_config",
           "serialize", "config_hash", "make_design", "design_from_widths",
           "sim_settings", "variation_model", "ramp_config"]

#: Nominal cell geometries, metres: name -> (w_n, w_tx, w_p).
DEFAULT_CELLS = {
    "A": (150e-9, 150e-9, 150e-9),
    "B": (150e-9, 150e-9, 230e-9),
    "C": (150e-9, 150e-9, 300e-9),
    "D": (230e-9, 230e-9, 230e-9),
    "E": (300e-9, 300e-9, 150e-9),
}


@dataclass
class ExperimentConfig:
    # [device]
    vdd: float = 1.2
    l: float = 65e-9
    vth_n: float = 0.35
    vth_p: float = -0.35
    alpha: float = 1.3
    lam: float = 0.1
    mobility_ratio: float = 0.55
    kp_n: float = 1e-4          # A/V**alpha per square; sets the time scale
    c_node: float = 1e-15
    # [waveform]
    pulse_width: float = 2e-9
    edge_time: float = 50e-12
    hold_interval: float = 2e-9
    settle_time: float = 5e-9
    dt: float = 0.2e-12
    # [variation]
    avt: float = 4.5e-9
    width_sigma: float = 0.0
    seed: int = 2024
    # [sweep]
    delta: float = 0.010
    ramp_step: float = 1e-3
    drop_fraction: float = 0.5
    sweep_floor: float = 0.0
    # [array]
    rows: int = 64
    cols: int = 16
    word_width: int = 8
    # [montecarlo]
    samples: int = 1000
    # [scenarios]
    reduced_wl: float = 0.60
    raised_bl: float = 0.80
    short_pulse_fraction: float = 0.5
    oversize_pr: float = 8.0
    vcell_fraction: float = 0.9
    # [output]
    decimation: float = 20e-12
    # [cell.*]
    cells: dict = field(default_factory=lambda: dict(DEFAULT_CELLS))


_SCHEMA = {
    "device": ("vdd", "l", "vth_n", "vth_p", "alpha", "lam", "mobility_ratio",
               "kp_n", "c_node"),
    "waveform": ("pulse_width", "edge_time", "hold_interval", "settle_time",
                 "dt"),
    "variation": ("avt", "width_sigma", "seed"),
    "sweep": ("delta", "ramp_step", "drop_fraction", "sweep_floor"),
    "array": ("rows", "cols", "word_width"),
    "montecarlo": ("samples",),
    "scenarios": ("reduced_wl", "raised_bl", "short_pulse_fraction",
                  "oversize_pr", "vcell_fraction"),
    "output": ("decimation",),
}

_INT_KEYS = {"seed", "rows", "cols", "word_width", "samples"}
_CELL_KEYS = ("w_n", "w_tx", "w_p")


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _fail(msg: str) -> None:
    raise ConfigError(msg)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check cross-field consistency; returns the config on success."""
    pos = ("vdd", "l", "kp_n", "c_node", "edge_time", "settle_time", "dt",
           "delta", "ramp_step", "decimation", "oversize_pr")
    for name in pos:
        if not getattr(cfg, name) > 0.0:
            _fail(f"{name} must be positive")
    nonneg = ("pulse_width", "hold_interval", "avt", "sweep_floor")
    for name in nonneg:
        if not getattr(cfg, name) >= 0.0:
            _fail(f"{name} must be non-negative")
    if cfg.dt > 0.2e-12 + 1e-18:
        _fail("dt must not exceed 0.2 ps")
    if not 0.0 < cfg.vth_n < cfg.vdd:
        _fail("vth_n must lie in (0, vdd)")
    if not -cfg.vdd < cfg.vth_p < 0.0:
        _fail("vth_p must lie in (-vdd, 0)")
    if not 1.0 <= cfg.alpha <= 2.0:
        _fail("alpha must lie in [1, 2]")
    if not cfg.lam >= 0.0:
        _fail("lam must be non-negative")
    if not 0.0 < cfg.mobility_ratio <= 1.5:
        _fail("mobility_ratio must lie in (0, 1.5]")
    if not 0.0 <= cfg.width_sigma < 0.3:
        _fail("width_sigma must lie in [0, 0.3)")
    if cfg.seed < 0:
        _fail("seed must be non-negative")
    if not cfg.delta <= cfg.vdd:
        _fail("delta must not exceed vdd")
    if not cfg.ramp_step <= 0.05:
        _fail("ramp_step must not exceed 50 mV")
    if not 0.0 < cfg.drop_fraction < 1.0:
        _fail("drop_fraction must lie in (0, 1)")
    if not cfg.sweep_floor < cfg.vdd:
        _fail("sweep_floor must be below vdd")
    for name in ("rows", "cols", "word_width", "samples"):
        v = getattr(cfg, name)
        if not (isinstance(v, int) and v > 0):
            _fail(f"{name} must be a positive integer")
    if cfg.cols % cfg.word_width != 0:
        _fail("cols must be a multiple of word_width")
    if not 0.0 <= cfg.reduced_wl <= cfg.vdd:
        _fail("reduced_wl must lie in [0, vdd]")
    if not 0.0 <= cfg.raised_bl <= cfg.vdd:
        _fail("raised_bl must lie in [0, vdd]")
    if not 0.0 < cfg.short_pulse_fraction < 1.0:
        _fail("short_pulse_fraction must lie in (0, 1)")
    if not 0.0 < cfg.vcell_fraction <= 1.0:
        _fail("vcell_fraction must lie in (0, 1]")
    if not cfg.cells:
        _fail("at least one cell design is required")
    for name, widths in cfg.cells.items():
        if len(widths) != 3 or not all(w > 0.0 for w in widths):
            _fail(f"cell.{name} widths must be three positive numbers")
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text into a validated configuration."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    cfg = ExperimentConfig()
    cells: dict = {}
    for section in parser.sections():
        if section.startswith("cell."):
            name = section[len("cell."):]
            if not name:
                _fail("cell section needs a name, e.g. [cell.A]")
            row = {}
            for key in parser[section]:
                if key not in _CELL_KEYS:
                    _fail(f"unknown key '{key}' in [{section}]")
                row[key] = _get_float(parser, section, key)
            missing = [k for k in _CELL_KEYS if k not in row]
            if missing:
                _fail(f"[{section}] is missing {', '.join(missing)}")
            cells[name] = (row["w_n"], row["w_tx"], row["w_p"])
            continue
        if section not in _SCHEMA:
            _fail(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                _fail(f"unknown key '{key}' in [{section}]")
            if key in _INT_KEYS:
                value = _get_int(parser, section, key)
            else:
                value = _get_float(parser, section, key)
            setattr(cfg, key, value)
    if cells:
        cfg.cells = cells
    return validate(cfg)


def _get_float(parser, section, key) -> float:
    try:
        return parser.getfloat(section, key)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: not a number") from exc


def _get_int(parser, section, key) -> int:
    try:
        return parser.getint(section, key)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: not an integer") from exc


def load_config(path) -> ExperimentConfig:
    """Read and validate a configuration file (INI format)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file: {exc}") from exc
    return parse_config(text)


def serialize(cfg: ExperimentConfig) -> str:
    """Render a configuration as canonical INI text (round-trips exactly)."""
    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key in keys:
            out.write(f"{key} = {getattr(cfg, key)!r}\n")
        out.write("\n")
    for name in sorted(cfg.cells):
        w_n, w_tx, w_p = cfg.cells[name]
        out.write(f"[cell.{name}]\n")
        out.write(f"w_n = {w_n!r}\nw_tx = {w_tx!r}\nw_p = {w_p!r}\n\n")
    return out.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical serialisation."""
    return hashlib.sha256(serialize(cfg).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Object builders.
# ---------------------------------------------------------------------------

def sim_settings(cfg: ExperimentConfig) -> SimSettings:
    return SimSettings(vdd=cfg.vdd, dt=cfg.dt, pulse_width=cfg.pulse_width,
                       edge_time=cfg.edge_time, hold_interval=cfg.hold_interval,
                       settle_time=cfg.settle_time)


def variation_model(cfg: ExperimentConfig) -> VariationModel:
    return VariationModel(avt=cfg.avt, width_sigma=cfg.width_sigma)


def ramp_config(cfg: ExperimentConfig) -> RampConfig:
    return RampConfig(step=cfg.ramp_step, drop_fraction=cfg.drop_fraction)


def design_from_widths(cfg: ExperimentConfig, w_n: float, w_tx: float,
                       w_p: float) -> CellDesign:
    """Symmetric design from explicit widths and the configured devices."""
    mn = MosParams("n", w_n, cfg.l, cfg.vth_n, cfg.kp_n, cfg.alpha, cfg.lam)
    mtx = MosParams("n", w_tx, cfg.l, cfg.vth_n, cfg.kp_n, cfg.alpha, cfg.lam)
    mp = MosParams("p", w_p, cfg.l, cfg.vth_p, cfg.kp_n * cfg.mobility_ratio,
                   cfg.alpha, cfg.lam)
    return CellDesign.symmetric(mn=mn, mp=mp, mtx=mtx, c_node=cfg.c_node)


def make_design(cfg: ExperimentConfig, name: str) -> CellDesign:
    """Named design from the configured cell table."""
    if name not in cfg.cells:
        raise ConfigError(
            f"unknown cell '{name}'; configured: {', '.join(sorted(cfg.cells))}"
        )
    return design_from_widths(cfg, *cfg.cells[name])


def scaled_pullup_design(cfg: ExperimentConfig, base: str,
                         pullup_ratio: float) -> CellDesign:
    """Variant of a named design with the pull-up width set to pr * w_tx."""
    w_n, w_tx, _ = cfg.cells.get(base, (None, None, None))
    if w_n is None:
        raise ConfigError(f"unknown cell '{base}'")
    return design_from_widths(cfg, w_n, w_tx, pullup_ratio * w_tx)
