"""Write-stability metrics for a single cell.

Static metrics (DC, quasistatic):

* ``write_noise_margin`` - smallest square between the two write-mode
  transfer curves; non-positive when the write bias leaves the cell
  bistable (the write cannot complete statically).
* ``bwtv`` - bit-line write-trip voltage: the highest voltage on the ramped
  bit line at which the cell flips.
* ``wwtv`` - word-line write-trip voltage: the supply minus the lowest
  word-line level that flips the cell, with the bit lines already driven.

Dynamic metrics (full transients):

* ``critical_pulse_width`` - minimal word-line pulse that completes a write.
* ``wlvm_cell`` - word-line voltage margin: pulsed write attempts at
  word-line levels stepped down from the rail; the margin is the smallest
  reduction at which the written value no longer reads back.

Both trip-voltage ramps detect the flip through the collapse of the
monitored bit-line current (a drop below ``drop_fraction`` of its running
peak once armed) and cross-check it against the DC state flip.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .cell import (
    DEFAULT_SETTINGS,
    RESIDUAL_TOL,
    BiasCondition,
    CellDesign,
    CellState,
    SimSettings,
    Trajectory,
    Waveform,
    _stable_states_mat,
    classify_state,
    hold_bias,
    param_matrix,
    simulate_transient,
    solve_vtc,
    stable_state,
    write_drive,
)
from .errors import DivergenceError, SolverError

__all__ = [
    "DIRECTIONS",
    "RampConfig",
    "MetricResult",
    "attempt_write",
    "wlvm_cell",
    "wlvm_batch",
    "write_noise_margin",
    "bwtv",
    "wwtv",
    "bwtv_batch",
    "wwtv_batch",
    "critical_pulse_width",
]

DIRECTIONS = ("0to1", "1to0")

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class RampConfig:
    """Quasistatic ramp parameters for the trip-voltage metrics."""

    step: float = 1e-3           # ramp increment, V
    drop_fraction: float = 0.5   # detection threshold vs. running peak
    arm_floor: float = 1e-9      # peak current required before arming, A

    def __post_init__(self) -> None:
        if not 0.0 < self.step <= 0.05:
            raise ValueError("RampConfig.step must lie in (0, 50 mV]")
        if not 0.0 < self.drop_fraction < 1.0:
            raise ValueError("RampConfig.drop_fraction must lie in (0, 1)")
        if not self.arm_floor > 0.0:
            raise ValueError("RampConfig.arm_floor must be positive")


DEFAULT_RAMP = RampConfig()


@dataclass(frozen=True)
class MetricResult:
    """Outcome of one metric evaluation.

    ``value`` is in volts except for the critical pulse width (seconds,
    ``math.inf`` when no pulse up to the search ceiling completes the
    write). ``trace`` carries metric-specific diagnostic rows:
    (drive V, monitored current A, flipped) for the ramp metrics,
    (word-line level V, success) for the margin sweep and
    (width s, success) for the pulse-width search.
    """

    metric: str
    value: float
    direction: str | None = None
    not_writeable: bool = False
    trace: tuple | None = None


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def _initial_kind(direction: str) -> str:
    return "S0" if direction == "0to1" else "S1"


def _target_kind(direction: str) -> str:
    return "S1" if direction == "0to1" else "S0"


def _require_scalar(design: CellDesign) -> None:
    if design.batch_size() is not None:
        raise ValueError("this entry point expects a scalar (non-stacked) design")


# ---------------------------------------------------------------------------
# Pulsed write attempts.
# ---------------------------------------------------------------------------

def attempt_write(design: CellDesign, v_wl_level: float, direction: str,
                  settings: SimSettings = DEFAULT_SETTINGS,
                  pulse_width: float | None = None,
                  v_cell: float | None = None,
                  v_bl: float | None = None,
                  v_blc: float | None = None) -> tuple[bool, Trajectory]:
    """Run one pulsed write attempt and judge it by a hold-mode read-back.

    The cell starts in the stable state opposite to the write direction,
    receives a trapezoidal word-line pulse at ``v_wl_level`` with the bit
    lines driven throughout, waits out the hold interval, and is then
    classified at nominal hold conditions. Returns (success, trajectory);
    the trajectory covers the pulse and hold interval.
    """
    _check_direction(direction)
    if not 0.0 <= v_wl_level <= settings.vdd:
        raise ValueError("v_wl_level must lie in [0, vdd]")
    _require_scalar(design)
    vc = settings.vdd if v_cell is None else float(v_cell)
    initial = stable_state(design, hold_bias(vc), _initial_kind(direction), settings)
    waveform = Waveform.write_pulse(settings.vdd, v_wl_level, direction, settings,
                                    pulse_width=pulse_width, v_cell=v_cell,
                                    v_bl=v_bl, v_blc=v_blc)
    trajectory = simulate_transient(design, waveform, initial, settings=settings)
    label = classify_state(design, trajectory.final_state(), settings)
    return label == _target_kind(direction), trajectory


def _pulse_phases(width: float | None, settings: SimSettings):
    """Split a base pulse width into (rise, plateau, fall) spans."""
    if width is None:
        return settings.edge_time, settings.pulse_width, settings.edge_time
    if width < 0.0:
        raise ValueError("pulse width must be non-negative")
    edge = min(settings.edge_time, 0.5 * width)
    return edge, width - 2.0 * edge, edge


def _attempt_levels(mat: np.ndarray, c_node: float, vcell: np.ndarray,
                    vbl: np.ndarray, vblc: np.ndarray, levels: np.ndarray,
                    va0: np.ndarray, vb0: np.ndarray,
                    settings: SimSettings,
                    pulse_width: float | None = None):
    """Batched pulse-plus-hold integration; returns final (va, vb, ok)."""
    rise, plateau, fall = _pulse_phases(pulse_width, settings)
    n = levels.shape[0]
    out_va = np.empty(n)
    out_vb = np.empty(n)
    out_ok = np.empty(n, dtype=np.uint8)
    kernels.write_attempt_batch(
        mat, vcell, vbl, vblc, levels, va0, vb0,
        rise, plateau, fall, settings.hold_interval + settings.settle_time,
        settings.dt, 1.0 / c_node, settings.eq_tol,
        out_va, out_vb, out_ok,
    )
    return out_va, out_vb, out_ok.astype(bool)


def _success_mask(va: np.ndarray, vb: np.ndarray, direction: str,
                  vdd: float) -> np.ndarray:
    diff = va - vb
    if direction == "0to1":
        return diff > 0.5 * vdd
    return diff < -0.5 * vdd


def _sweep_levels(vdd: float, delta: float) -> np.ndarray:
    """Word-line levels vdd, vdd - delta, ... clipped to end exactly at 0."""
    j_max = int(math.ceil(vdd / delta - 1e-9))
    levels = vdd - delta * np.arange(j_max + 1, dtype=float)
    return np.maximum(levels, 0.0)


def wlvm_cell(design: CellDesign, delta: float = 0.010,
              direction: str = "0to1",
              settings: SimSettings = DEFAULT_SETTINGS,
              full_sweep: bool = False) -> MetricResult:
    """Word-line voltage margin of one cell, one direction.

    Pulsed write attempts run at word-line levels vdd - j*delta for
    j = 0, 1, 2, ...; each attempt starts from the freshly solved initial
    state and is judged by a nominal read-back. The margin is the smallest
    reduction j*delta whose attempt fails (0 when the full-rail write
    already fails; attempts at a grounded word line always fail, so the
    sweep terminates). ``full_sweep`` records every level in the trace
    instead of stopping the record at the first failure.
    """
    _check_direction(direction)
    _require_scalar(design)
    if not 0.0 < delta <= settings.vdd:
        raise ValueError("delta must lie in (0, vdd]")
    vdd = settings.vdd
    initial = stable_state(design, hold_bias(vdd), _initial_kind(direction), settings)
    levels = _sweep_levels(vdd, delta)
    n = levels.size
    mat = param_matrix(design)
    mats = np.ascontiguousarray(np.broadcast_to(mat, (n,) + mat.shape))
    v_bl, v_blc = write_drive(direction, vdd)
    va, vb, ok = _attempt_levels(
        mats, design.c_node, np.full(n, vdd), np.full(n, v_bl),
        np.full(n, v_blc), levels, np.full(n, initial.v_a),
        np.full(n, initial.v_b), settings,
    )
    if not np.all(ok):
        bad = int(np.argmin(ok))
        raise DivergenceError(
            f"write attempt diverged at word-line level {levels[bad]:.4f} V"
        )
    success = _success_mask(va, vb, direction, vdd)
    if success.all():  # cannot happen: the grounded-word-line attempt fails
        raise SolverError("margin sweep found no failing word-line level")
    j_fail = int(np.argmin(success))
    value = j_fail * delta
    last = n if full_sweep else j_fail + 1
    trace = tuple((float(levels[j]), bool(success[j])) for j in range(last))
    return MetricResult("wlvm", value, direction=direction,
                        not_writeable=(j_fail == 0), trace=trace)


def wlvm_batch(design: CellDesign, delta: float = 0.010,
               direction: str = "0to1",
               settings: SimSettings = DEFAULT_SETTINGS,
               sweep_floor: float = 0.0):
    """Margin values for a stacked population, batched level by level.

    Only cells still succeeding move on to the next (lower) word-line
    level, which preserves the per-cell first-failure semantics of
    :func:`wlvm_cell` exactly. The sweep visits no level below
    ``sweep_floor``; cells that never fail above the floor report one step
    beyond the deepest attempted reduction (still a multiple of ``delta``).
    Returns (values, ok); elements whose integration or initial solve
    failed carry ``nan`` and ``ok=False``.
    """
    _check_direction(direction)
    if not 0.0 < delta <= settings.vdd:
        raise ValueError("delta must lie in (0, vdd]")
    if not 0.0 <= sweep_floor < settings.vdd:
        raise ValueError("sweep_floor must lie in [0, vdd)")
    mat = param_matrix(design)
    if mat.ndim == 2:
        mat = mat[np.newaxis]
    n = mat.shape[0]
    vdd = settings.vdd
    v_bl, v_blc = write_drive(direction, vdd)
    va0, vb0, ok0 = _stable_states_mat(
        mat, vdd, 0.0, v_bl, v_blc, _initial_kind(direction), vdd
    )
    values = np.full(n, np.nan)
    ok = np.asarray(ok0, dtype=bool).copy()
    alive = np.flatnonzero(ok)
    levels = _sweep_levels(vdd, delta)
    levels = levels[levels >= sweep_floor - 1e-12]
    for j, level in enumerate(levels):
        if alive.size == 0:
            break
        sub_mat = np.ascontiguousarray(mat[alive])
        m = alive.size
        va, vb, fin = _attempt_levels(
            sub_mat, design.c_node, np.full(m, vdd), np.full(m, v_bl),
            np.full(m, v_blc), np.full(m, level), va0[alive], vb0[alive],
            settings,
        )
        success = _success_mask(va, vb, direction, vdd) & fin
        failed_now = alive[~success & fin]
        values[failed_now] = j * delta
        diverged = alive[~fin]
        ok[diverged] = False
        alive = alive[success]
    values[alive] = levels.size * delta  # never failed above the sweep floor
    return values, ok


# ---------------------------------------------------------------------------
# Static write margin from the write-mode transfer curves.
# ---------------------------------------------------------------------------

def _mirror_design(design: CellDesign) -> CellDesign:
    return CellDesign(mn=design.mn_b, mp=design.mp_b, mtx=design.mtx_b,
                      mn_b=design.mn, mp_b=design.mp, mtx_b=design.mtx,
                      c_node=design.c_node)


def write_noise_margin(design: CellDesign, direction: str = "1to0",
                       settings: SimSettings = DEFAULT_SETTINGS,
                       grid_step: float = 1e-3) -> MetricResult:
    """Smallest square between the two write-mode transfer curves.

    Both loaded transfer curves are solved under the write bias (word line
    at the rail, bit lines driving the target value). The curves are
    parameterised by the anti-diagonal coordinate p = (v_b - v_a)/sqrt(2)
    and the diagonal gap between them is scanned over the window between
    the held-state corner and the diagonal; the minimum gap, expressed as
    the side of the inscribed square, is the margin. A positive value
    means the bias wipes out the held state (statically writeable); a
    non-positive value is the largest square inside the remaining eye.
    """
    _check_direction(direction)
    _require_scalar(design)
    if direction == "0to1":
        # Mirrored cell, mirrored drive: identical geometry, swapped roles.
        inner = write_noise_margin(_mirror_design(design), "1to0", settings,
                                   grid_step)
        return MetricResult("wnm", inner.value, direction=direction,
                            not_writeable=inner.not_writeable)
    vdd = settings.vdd
    bias = BiasCondition(v_cell=vdd, v_wl=vdd, v_bl=0.0, v_blc=vdd)
    grid = np.arange(0.0, vdd + 0.5 * grid_step, grid_step)
    f_a = solve_vtc(design, bias, "A", grid)  # v_a = F_A(v_b)
    f_b = solve_vtc(design, bias, "B", grid)  # v_b = F_B(v_a)
    p_a = (grid - f_a) / _SQRT2
    q_a = (grid + f_a) / _SQRT2
    p_b = (f_b - grid) / _SQRT2
    q_b = (grid + f_b) / _SQRT2
    # p increases along curve A and decreases along curve B.
    p_lo = max(float(p_a[0]), float(p_b[-1]))
    p_hi = min(0.0, float(p_a[-1]), float(p_b[0]))
    if not p_lo < p_hi:
        raise SolverError("write-margin scan window is empty")
    p = np.linspace(p_lo, p_hi, 2001)
    gap = (np.interp(p, p_b[::-1], q_b[::-1]) - np.interp(p, p_a, q_a)) / _SQRT2
    value = float(np.min(gap))
    return MetricResult("wnm", value, direction=direction,
                        not_writeable=value <= 0.0)


# ---------------------------------------------------------------------------
# Quasistatic trip-voltage ramps.
# ---------------------------------------------------------------------------

def _ramp_engine(mat: np.ndarray, c_node: float, which: str, direction: str,
                 ramp: RampConfig, settings: SimSettings,
                 record_trace: bool):
    """Shared quasistatic ramp for bwtv/wwtv over a (stacked) design.

    Returns (values, not_writeable, ok, trace). The DC operating point of
    each cell is continued along the drive schedule with warm-started
    Newton solves; steps that fail to converge (the flip itself is a fold)
    fall back to settling transients inside the compiled kernel. The
    starting point is solved from the held-state corner with no polarity
    requirement: a cell already in the flipped basin trips the detector at
    the first ramp value.
    """
    vdd = settings.vdd
    n = mat.shape[0]
    k_steps = int(math.ceil(vdd / ramp.step - 1e-9))
    drive = np.maximum(vdd - ramp.step * np.arange(k_steps + 1, dtype=float), 0.0)
    if which == "wwtv":
        drive = drive[::-1].copy()  # word line ramps upward from 0

    high_initial = "A" if direction == "1to0" else "B"
    mon_row = kernels.ROW_MTX_A if direction == "0to1" else kernels.ROW_MTX_B
    v_bl_w, v_blc_w = write_drive(direction, vdd)
    target_sign = 1.0 if direction == "0to1" else -1.0

    out_value = np.empty(n)
    out_detected = np.empty(n, dtype=np.uint8)
    out_ok = np.empty(n, dtype=np.uint8)
    m = drive.size
    trace_imon = np.zeros(m if record_trace else 1)
    trace_flip = np.zeros(m if record_trace else 1, dtype=np.uint8)
    kernels.trip_ramp_batch(
        np.ascontiguousarray(mat), drive, which == "wwtv",
        high_initial == "B", target_sign, mon_row, vdd, v_bl_w, v_blc_w,
        ramp.drop_fraction, ramp.arm_floor, settings.dt, 1.0 / c_node,
        settings.eq_tol, RESIDUAL_TOL, out_value, out_detected, out_ok,
        record_trace, trace_imon, trace_flip,
    )
    detected = out_detected.astype(bool)
    ok = out_ok.astype(bool)
    values = np.where(detected,
                      out_value if which == "bwtv" else vdd - out_value,
                      np.nan)
    not_writeable = np.zeros(n, dtype=bool)
    missed = ok & ~detected
    values[missed] = 0.0
    not_writeable[missed] = True

    trace: tuple = ()
    if record_trace:
        if detected[0]:
            k_done = int(np.flatnonzero(drive == out_value[0])[0]) + 1
        else:
            k_done = m
        trace = tuple(
            (float(drive[k]), float(trace_imon[k]), bool(trace_flip[k]))
            for k in range(k_done)
        )
    return values, not_writeable, ok, trace


def _ramp_single(design: CellDesign, which: str, direction: str,
                 ramp: RampConfig, settings: SimSettings) -> MetricResult:
    _check_direction(direction)
    _require_scalar(design)
    mat = param_matrix(design)[np.newaxis]
    values, flag, ok, trace = _ramp_engine(
        np.ascontiguousarray(mat), design.c_node, which, direction, ramp,
        settings, record_trace=True,
    )
    if not ok[0]:
        raise SolverError(f"{which} ramp failed to track the operating point")
    return MetricResult(which, float(values[0]), direction=direction,
                        not_writeable=bool(flag[0]), trace=trace)


def bwtv(design: CellDesign, ramp: RampConfig = DEFAULT_RAMP,
         direction: str = "0to1",
         settings: SimSettings = DEFAULT_SETTINGS) -> MetricResult:
    """Bit-line write-trip voltage.

    With supply, word line and both bit lines at the rail, the bit line at
    the initially-high node is stepped down toward 0. The returned value
    is the highest ramped-line voltage at which the flip is detected; a
    cell that never flips returns 0 with ``not_writeable`` set.
    """
    return _ramp_single(design, "bwtv", direction, ramp, settings)


def wwtv(design: CellDesign, ramp: RampConfig = DEFAULT_RAMP,
         direction: str = "0to1",
         settings: SimSettings = DEFAULT_SETTINGS) -> MetricResult:
    """Word-line write-trip voltage.

    With the bit lines driving the target value, the word line is stepped
    up from 0; the value is vdd minus the lowest word-line level at which
    the flip is detected. A cell that never flips returns 0 with
    ``not_writeable`` set.
    """
    return _ramp_single(design, "wwtv", direction, ramp, settings)


def bwtv_batch(design: CellDesign, ramp: RampConfig = DEFAULT_RAMP,
               direction: str = "0to1",
               settings: SimSettings = DEFAULT_SETTINGS):
    """Vectorised :func:`bwtv` over a stacked design: (values, flags, ok)."""
    _check_direction(direction)
    mat = param_matrix(design)
    if mat.ndim == 2:
        mat = mat[np.newaxis]
    values, flag, ok, _ = _ramp_engine(np.ascontiguousarray(mat),
                                       design.c_node, "bwtv", direction,
                                       ramp, settings, record_trace=False)
    return values, flag, ok


def wwtv_batch(design: CellDesign, ramp: RampConfig = DEFAULT_RAMP,
               direction: str = "0to1",
               settings: SimSettings = DEFAULT_SETTINGS):
    """Vectorised :func:`wwtv` over a stacked design: (values, flags, ok)."""
    _check_direction(direction)
    mat = param_matrix(design)
    if mat.ndim == 2:
        mat = mat[np.newaxis]
    values, flag, ok, _ = _ramp_engine(np.ascontiguousarray(mat),
                                       design.c_node, "wwtv", direction,
                                       ramp, settings, record_trace=False)
    return values, flag, ok


# ---------------------------------------------------------------------------
# Critical pulse width.
# ---------------------------------------------------------------------------

def _attempt_width(design: CellDesign, mat: np.ndarray, initial: CellState,
                   width: float, direction: str,
                   settings: SimSettings) -> bool:
    vdd = settings.vdd
    v_bl, v_blc = write_drive(direction, vdd)
    va, vb, ok = _attempt_levels(
        mat, design.c_node, np.array([vdd]), np.array([v_bl]),
        np.array([v_blc]), np.array([vdd]), np.array([initial.v_a]),
        np.array([initial.v_b]), settings, pulse_width=width,
    )
    if not ok[0]:
        raise DivergenceError(f"write attempt diverged at width {width:.3e} s")
    return bool(_success_mask(va, vb, direction, vdd)[0])


def critical_pulse_width(design: CellDesign, direction: str = "0to1",
                         settings: SimSettings = DEFAULT_SETTINGS,
                         t_max: float = 100e-9, t_min: float = 1e-12,
                         rtol: float = 0.01) -> MetricResult:
    """Minimal full-rail word-line pulse width that completes the write.

    The width is the base width of the trapezoid (edges shrink once the
    pulse is shorter than two edge times). Bisection runs geometrically
    between ``t_min`` and ``t_max`` to the requested relative tolerance
    and returns the successful end of the final bracket. If even the
    ``t_max`` pulse fails the result is ``inf`` with ``not_writeable``
    set; if the ``t_min`` pulse already succeeds, ``t_min`` is returned.
    """
    _check_direction(direction)
    _require_scalar(design)
    if not (0.0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    if not 0.0 < rtol < 1.0:
        raise ValueError("rtol must lie in (0, 1)")
    initial = stable_state(design, hold_bias(settings.vdd),
                           _initial_kind(direction), settings)
    mat = np.ascontiguousarray(param_matrix(design)[np.newaxis])
    trace = []

    def trial(width: float) -> bool:
        okw = _attempt_width(design, mat, initial, width, direction, settings)
        trace.append((float(width), okw))
        return okw

    if not trial(t_max):
        return MetricResult("crit_pulse", math.inf, direction=direction,
                            not_writeable=True, trace=tuple(trace))
    if trial(t_min):
        return MetricResult("crit_pulse", t_min, direction=direction,
                            trace=tuple(trace))
    lo, hi = t_min, t_max
    while hi > lo * (1.0 + rtol):
        mid = math.sqrt(lo * hi)
        if trial(mid):
            hi = mid
        else:
            lo = mid
    return MetricResult("crit_pulse", hi, direction=direction,
                        trace=tuple(trace))
