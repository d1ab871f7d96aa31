"""Six-transistor bit-cell network: topology, DC solves, transients, basins.

The cell is two cross-coupled inverters (storage nodes A and B) plus one
access transistor per node. Node A connects through its access device to
the bit line BL, node B to the complement line BLC; both access gates share
the word line. Bit lines, word line and the cell supply are ideal voltage
sources, so the only dynamic state is the node-voltage pair (v_a, v_b) with
one lumped capacitance per node:

    c_node * dv_a/dt = i_a(v_a, v_b, bias)
    c_node * dv_b/dt = i_b(v_a, v_b, bias)

State "1" is (v_a, v_b) = (V_DD, 0) and state "0" is (0, V_DD).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .device import MosParams, drain_current
from .errors import DivergenceError, SolverError

__all__ = [
    "SimSettings",
    "DEFAULT_SETTINGS",
    "CellState",
    "BiasCondition",
    "Equilibrium",
    "Trajectory",
    "Waveform",
    "CellDesign",
    "hold_bias",
    "write_drive",
    "param_matrix",
    "stack_designs",
    "design_at",
    "node_currents",
    "bitline_currents",
    "node_jacobian",
    "solve_vtc",
    "find_equilibria",
    "simulate_transient",
    "classify_state",
    "separatrix_point",
    "stable_state",
]

#: Residual tolerance for DC operating points, amps.
RESIDUAL_TOL = 1e-12

#: Hard sanity cap on drive voltages, volts.
_BIAS_CAP = 3.0


@dataclass(frozen=True)
class SimSettings:
    """Shared solver and waveform-timing constants.

    The write pulse is trapezoidal: linear edges of ``edge_time`` on both
    sides of a flat plateau of ``pulse_width``, followed by a hold interval
    with the word line at 0 before the outcome is read back.
    """

    vdd: float = 1.2             # nominal rail, V
    dt: float = 0.2e-12          # RK4 step ceiling, s
    pulse_width: float = 2e-9    # word-line plateau, s
    edge_time: float = 50e-12    # rise and fall time, s
    hold_interval: float = 2e-9  # post-pulse wait, word line low, s
    settle_time: float = 5e-9    # hold-mode settling used to read a state, s
    eq_tol: float = kernels.EQ_SKIP_TOL  # settled-state current threshold, A

    def __post_init__(self) -> None:
        for name in ("vdd", "dt", "edge_time", "settle_time"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"SimSettings.{name} must be positive")
        for name in ("pulse_width", "hold_interval", "eq_tol"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"SimSettings.{name} must be non-negative")
        if self.dt > 0.2e-12 + 1e-18:
            raise ValueError("SimSettings.dt must not exceed 0.2 ps")


DEFAULT_SETTINGS = SimSettings()


@dataclass(frozen=True)
class CellState:
    """Storage-node voltage pair, volts."""

    v_a: float
    v_b: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.v_a) and np.isfinite(self.v_b)):
            raise ValueError("node voltages must be finite")


@dataclass(frozen=True)
class BiasCondition:
    """Voltages of the four ideal sources driving the cell."""

    v_cell: float  # inverter supply, V
    v_wl: float    # word line, V
    v_bl: float    # bit line at node A, V
    v_blc: float   # complement bit line at node B, V

    def __post_init__(self) -> None:
        for name in ("v_cell", "v_wl", "v_bl", "v_blc"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0 or v > _BIAS_CAP:
                raise ValueError(
                    f"BiasCondition.{name} must lie in [0, {_BIAS_CAP}] V, got {v!r}"
                )

    def as_array(self) -> np.ndarray:
        return np.array([self.v_cell, self.v_wl, self.v_bl, self.v_blc], dtype=float)


def hold_bias(vdd: float) -> BiasCondition:
    """Retention bias: supply up, word line low, bit lines parked low."""
    return BiasCondition(v_cell=vdd, v_wl=0.0, v_bl=0.0, v_blc=0.0)


@dataclass(frozen=True)
class Equilibrium:
    """A DC operating point together with its stability label."""

    state: CellState
    kind: str            # 'S0', 'S1' or 'metastable'
    residual: float      # worst node-current magnitude at the point, A

    def __post_init__(self) -> None:
        if self.kind not in ("S0", "S1", "metastable"):
            raise ValueError(f"unknown equilibrium kind {self.kind!r}")


@dataclass(frozen=True)
class Trajectory:
    """Recorded transient: node voltages and bit-line currents over time.

    ``i_bl`` and ``i_blc`` are the currents delivered by each bit-line
    driver into its access transistor (positive into the cell).
    """

    t: np.ndarray
    v_a: np.ndarray
    v_b: np.ndarray
    i_bl: np.ndarray
    i_blc: np.ndarray
    out_of_range: bool

    def final_state(self) -> CellState:
        return CellState(float(self.v_a[-1]), float(self.v_b[-1]))


@dataclass(frozen=True)
class Waveform:
    """Piecewise-linear bias schedule.

    ``times`` must be strictly increasing and start at 0; ``biases`` holds
    one row per breakpoint with columns (v_cell, v_wl, v_bl, v_blc). Values
    are clamped to the end rows outside the covered span.
    """

    times: np.ndarray
    biases: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        biases = np.asarray(self.biases, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("Waveform.times must be a non-empty 1-D array")
        if biases.shape != (times.size, 4):
            raise ValueError("Waveform.biases must have shape (len(times), 4)")
        if times[0] != 0.0:
            raise ValueError("Waveform.times must start at 0")
        if times.size > 1 and not np.all(np.diff(times) > 0.0):
            raise ValueError("Waveform.times must be strictly increasing")
        if not np.all(np.isfinite(biases)):
            raise ValueError("Waveform.biases must be finite")
        if np.any(biases < 0.0) or np.any(biases > _BIAS_CAP):
            raise ValueError(f"Waveform.biases must lie in [0, {_BIAS_CAP}] V")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "biases", biases)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> BiasCondition:
        cols = [float(np.interp(t, self.times, self.biases[:, k])) for k in range(4)]
        return BiasCondition(*cols)

    @classmethod
    def from_points(cls, points) -> "Waveform":
        times = np.array([p[0] for p in points], dtype=float)
        biases = np.array([p[1].as_array() for p in points], dtype=float)
        return cls(times, biases)

    @classmethod
    def constant(cls, bias: BiasCondition, t_end: float) -> "Waveform":
        if not t_end > 0.0:
            raise ValueError("t_end must be positive")
        row = bias.as_array()
        return cls(np.array([0.0, t_end]), np.stack([row, row]))

    @classmethod
    def write_pulse(
        cls,
        vdd: float,
        wl_level: float,
        direction: str,
        settings: SimSettings = DEFAULT_SETTINGS,
        pulse_width: float | None = None,
        v_cell: float | None = None,
        v_bl: float | None = None,
        v_blc: float | None = None,
    ) -> "Waveform":
        """Trapezoidal word-line pulse with the bit lines driven to write.

        Direction '0to1' drives BL high and BLC low to move the cell from
        state 0 toward state 1; '1to0' mirrors the roles. Explicit ``v_bl``
        or ``v_blc`` values override the default drive (for degraded-write
        experiments). The schedule ends after the hold interval so the
        final point reflects the retained state.
        """
        bl_default, blc_default = write_drive(direction, vdd)
        v_bl = bl_default if v_bl is None else float(v_bl)
        v_blc = blc_default if v_blc is None else float(v_blc)
        vc = vdd if v_cell is None else float(v_cell)
        width = settings.pulse_width if pulse_width is None else float(pulse_width)
        if width < 0.0:
            raise ValueError("pulse width must be non-negative")
        if not 0.0 <= wl_level <= _BIAS_CAP:
            raise ValueError("wl_level out of range")
        # ``width`` is the total pulse footprint (rise + plateau + fall);
        # short pulses compress the edges so the footprint is honoured.
        e = min(settings.edge_time, 0.5 * width)
        points = [(0.0, 0.0), (e, wl_level), (width - e, wl_level),
                  (width, 0.0), (width + settings.hold_interval, 0.0)]
        times, wl = [], []
        for t, v in points:
            if times and t <= times[-1]:
                continue
            times.append(t)
            wl.append(v)
        n = len(times)
        biases = np.column_stack(
            [np.full(n, vc), np.array(wl), np.full(n, v_bl), np.full(n, v_blc)]
        )
        return cls(np.array(times), biases)


def write_drive(direction: str, vdd: float) -> tuple[float, float]:
    """Bit-line pair (v_bl, v_blc) that drives the requested transition."""
    if direction == "0to1":
        return vdd, 0.0
    if direction == "1to0":
        return 0.0, vdd
    raise ValueError(f"direction must be '0to1' or '1to0', got {direction!r}")


@dataclass(frozen=True)
class CellDesign:
    """Transistor complement of one cell (or a stacked population).

    Suffix ``_b`` marks the node-B half. A nominal design is symmetric;
    variation sampling perturbs the two halves independently. ``c_node``
    is the lumped storage-node capacitance in farads.
    """

    mn: MosParams      # pull-down, node A
    mp: MosParams      # pull-up, node A
    mtx: MosParams     # access, node A
    mn_b: MosParams    # pull-down, node B
    mp_b: MosParams    # pull-up, node B
    mtx_b: MosParams   # access, node B
    c_node: float = 1e-15

    def __post_init__(self) -> None:
        for name in ("mn", "mn_b"):
            if getattr(self, name).polarity != "n":
                raise ValueError(f"CellDesign.{name} must be n-channel")
        for name in ("mp", "mp_b"):
            if getattr(self, name).polarity != "p":
                raise ValueError(f"CellDesign.{name} must be p-channel")
        for name in ("mtx", "mtx_b"):
            if getattr(self, name).polarity != "n":
                raise ValueError(f"CellDesign.{name} must be n-channel")
        if not (np.isfinite(self.c_node) and self.c_node > 0.0):
            raise ValueError("CellDesign.c_node must be finite and positive")

    @classmethod
    def symmetric(cls, mn: MosParams, mp: MosParams, mtx: MosParams,
                  c_node: float = 1e-15) -> "CellDesign":
        return cls(mn=mn, mp=mp, mtx=mtx, mn_b=mn, mp_b=mp, mtx_b=mtx,
                   c_node=c_node)

    @property
    def cell_ratio(self):
        """Pull-down to access width ratio."""
        return np.asarray(self.mn.w, dtype=float) / np.asarray(self.mtx.w, dtype=float)

    @property
    def pullup_ratio(self):
        """Pull-up to access width ratio."""
        return np.asarray(self.mp.w, dtype=float) / np.asarray(self.mtx.w, dtype=float)

    def devices(self) -> tuple[MosParams, ...]:
        return (self.mn, self.mp, self.mtx, self.mn_b, self.mp_b, self.mtx_b)

    def batch_size(self) -> int | None:
        """None for a scalar design, else the stacked population length."""
        shapes = [np.shape(f) for m in self.devices()
                  for f in (m.w, m.l, m.vth, m.kp, m.alpha, m.lam)]
        sizes = {s for s in shapes if s != ()}
        if not sizes:
            return None
        if len(sizes) > 1:
            raise ValueError(f"inconsistent stacked field shapes: {sorted(sizes)}")
        (shape,) = sizes
        if len(shape) != 1:
            raise ValueError("stacked designs must use 1-D parameter arrays")
        return shape[0]


def param_matrix(design: CellDesign) -> np.ndarray:
    """Device-parameter matrix consumed by the compiled kernels.

    Shape (6, 6) for a scalar design or (n, 6, 6) for a stacked one; rows
    and columns follow :mod:`.kernels`.
    """
    n = design.batch_size()
    rows = []
    for m in design.devices():
        sign = 1.0 if m.polarity == "n" else -1.0
        cols = np.broadcast_arrays(
            np.asarray(sign, dtype=float),
            np.asarray(m.w, dtype=float) / np.asarray(m.l, dtype=float),
            sign * np.asarray(m.vth, dtype=float),
            np.asarray(m.kp, dtype=float),
            np.asarray(m.alpha, dtype=float),
            np.asarray(m.lam, dtype=float),
        )
        if n is not None:
            cols = [np.broadcast_to(c, (n,)) for c in cols]
        rows.append(np.stack(cols, axis=-1))
    mat = np.stack(rows, axis=-2)
    return np.ascontiguousarray(mat, dtype=np.float64)


def stack_designs(designs) -> CellDesign:
    """Combine scalar designs into one stacked (array-valued) design."""
    designs = list(designs)
    if not designs:
        raise ValueError("cannot stack an empty design list")
    c_node = {d.c_node for d in designs}
    if len(c_node) != 1:
        raise ValueError("stacked designs must share c_node")
    slots = {}
    for name in ("mn", "mp", "mtx", "mn_b", "mp_b", "mtx_b"):
        members = [getattr(d, name) for d in designs]
        polarity = {m.polarity for m in members}
        if len(polarity) != 1:
            raise ValueError("stacked designs must share device polarities")
        slots[name] = MosParams(
            polarity=members[0].polarity,
            w=np.array([m.w for m in members], dtype=float),
            l=np.array([m.l for m in members], dtype=float),
            vth=np.array([m.vth for m in members], dtype=float),
            kp=np.array([m.kp for m in members], dtype=float),
            alpha=np.array([m.alpha for m in members], dtype=float),
            lam=np.array([m.lam for m in members], dtype=float),
        )
    return CellDesign(c_node=c_node.pop(), **slots)


def design_at(design: CellDesign, index: int) -> CellDesign:
    """Extract one scalar design from a stacked population."""
    n = design.batch_size()
    if n is None:
        raise ValueError("design_at expects a stacked design")
    slots = {}
    for name in ("mn", "mp", "mtx", "mn_b", "mp_b", "mtx_b"):
        m = getattr(design, name)

        def pick(value):
            arr = np.asarray(value, dtype=float)
            return float(arr[index]) if arr.ndim else float(arr)

        slots[name] = MosParams(
            polarity=m.polarity, w=pick(m.w), l=pick(m.l), vth=pick(m.vth),
            kp=pick(m.kp), alpha=pick(m.alpha), lam=pick(m.lam),
        )
    return CellDesign(c_node=design.c_node, **slots)


# ---------------------------------------------------------------------------
# Vectorised network equations (reference implementation).
# ---------------------------------------------------------------------------

def _signed_current(mat_row_sel, vgs, vds):
    """Drain current from parameter-matrix columns, any broadcast shape."""
    from .device import _nchannel_current

    sign = mat_row_sel[..., 0]
    wol = mat_row_sel[..., 1]
    vth_eff = mat_row_sel[..., 2]
    kp = mat_row_sel[..., 3]
    alpha = mat_row_sel[..., 4]
    lam = mat_row_sel[..., 5]
    return sign * _nchannel_current(sign * vgs, sign * vds, wol, vth_eff, kp,
                                    alpha, lam)


def _rhs_mat(mat, va, vb, vcell, vwl, vbl, vblc):
    """Net node currents from a parameter matrix, vectorised over elements."""
    ia = (
        -_signed_current(mat[..., kernels.ROW_MP_A, :], vb - vcell, va - vcell)
        - _signed_current(mat[..., kernels.ROW_MN_A, :], vb, va)
        + _signed_current(mat[..., kernels.ROW_MTX_A, :], vwl - va, vbl - va)
    )
    ib = (
        -_signed_current(mat[..., kernels.ROW_MP_B, :], va - vcell, vb - vcell)
        - _signed_current(mat[..., kernels.ROW_MN_B, :], va, vb)
        + _signed_current(mat[..., kernels.ROW_MTX_B, :], vwl - vb, vblc - vb)
    )
    return ia, ib


def node_currents(design: CellDesign, bias: BiasCondition, state: CellState):
    """Net currents (i_a, i_b) into the storage nodes, amps."""
    ia = (
        -drain_current(design.mp, state.v_b - bias.v_cell, state.v_a - bias.v_cell)
        - drain_current(design.mn, state.v_b, state.v_a)
        + drain_current(design.mtx, bias.v_wl - state.v_a, bias.v_bl - state.v_a)
    )
    ib = (
        -drain_current(design.mp_b, state.v_a - bias.v_cell, state.v_b - bias.v_cell)
        - drain_current(design.mn_b, state.v_a, state.v_b)
        + drain_current(design.mtx_b, bias.v_wl - state.v_b, bias.v_blc - state.v_b)
    )
    return ia, ib


def bitline_currents(design: CellDesign, bias: BiasCondition, state: CellState):
    """Currents delivered by each bit-line driver into the cell, amps."""
    i_bl = drain_current(design.mtx, bias.v_wl - state.v_a, bias.v_bl - state.v_a)
    i_blc = drain_current(design.mtx_b, bias.v_wl - state.v_b, bias.v_blc - state.v_b)
    return i_bl, i_blc


_JACOBIAN_H = 1e-7


def node_jacobian(design: CellDesign, bias: BiasCondition, state: CellState,
                  h: float = _JACOBIAN_H) -> np.ndarray:
    """Central-difference Jacobian of (i_a, i_b) w.r.t. (v_a, v_b)."""
    mat = param_matrix(design)
    return _jacobian_mat(mat, state.v_a, state.v_b, *bias.as_array(), h=h)


def _jacobian_mat(mat, va, vb, vcell, vwl, vbl, vblc, h=_JACOBIAN_H):
    iap, ibp = _rhs_mat(mat, va + h, vb, vcell, vwl, vbl, vblc)
    iam, ibm = _rhs_mat(mat, va - h, vb, vcell, vwl, vbl, vblc)
    jaa = (iap - iam) / (2.0 * h)
    jba = (ibp - ibm) / (2.0 * h)
    iap, ibp = _rhs_mat(mat, va, vb + h, vcell, vwl, vbl, vblc)
    iam, ibm = _rhs_mat(mat, va, vb - h, vcell, vwl, vbl, vblc)
    jab = (iap - iam) / (2.0 * h)
    jbb = (ibp - ibm) / (2.0 * h)
    return np.stack(
        [np.stack([jaa, jab], axis=-1), np.stack([jba, jbb], axis=-1)], axis=-2
    )


# ---------------------------------------------------------------------------
# DC solvers.
# ---------------------------------------------------------------------------

def _newton_mat(mat, va, vb, vcell, vwl, vbl, vblc, tol=RESIDUAL_TOL,
                max_iter=100, step_cap=0.5):
    """Damped Newton iteration on the node equations, vectorised.

    Returns (va, vb, converged_mask). Non-finite iterates and singular
    Jacobians surface as unconverged elements rather than exceptions.
    """
    va = np.array(va, dtype=float, copy=True)
    vb = np.array(vb, dtype=float, copy=True)
    scalar = va.ndim == 0
    va = np.atleast_1d(va)
    vb = np.atleast_1d(vb)
    bias = [np.broadcast_to(np.asarray(x, dtype=float), va.shape)
            for x in (vcell, vwl, vbl, vblc)]
    for _ in range(max_iter):
        ia, ib = _rhs_mat(mat, va, vb, *bias)
        err = np.maximum(np.abs(ia), np.abs(ib))
        active = err >= tol
        if not np.any(active):
            break
        jac = _jacobian_mat(mat, va, vb, *bias)
        jaa, jab = jac[..., 0, 0], jac[..., 0, 1]
        jba, jbb = jac[..., 1, 0], jac[..., 1, 1]
        det = jaa * jbb - jab * jba
        tiny = np.abs(det) < 1e-300
        det_safe = np.where(tiny, 1.0, det)
        dva = np.where(tiny, 0.0, (jab * ib - jbb * ia) / det_safe)
        dvb = np.where(tiny, 0.0, (jba * ia - jaa * ib) / det_safe)
        biggest = np.maximum(np.abs(dva), np.abs(dvb))
        scale = np.where(biggest > step_cap, step_cap / np.maximum(biggest, 1e-300), 1.0)
        dva = dva * scale
        dvb = dvb * scale
        lam = np.where(active, 1.0, 0.0)
        va_try = va + lam * dva
        vb_try = vb + lam * dvb
        for _ in range(30):
            ia_t, ib_t = _rhs_mat(mat, va_try, vb_try, *bias)
            err_t = np.maximum(np.abs(ia_t), np.abs(ib_t))
            bad = active & ~(err_t < err) & (lam > 1e-6)
            if not np.any(bad):
                break
            lam = np.where(bad, 0.5 * lam, lam)
            va_try = va + lam * dva
            vb_try = vb + lam * dvb
        va = np.where(active, va_try, va)
        vb = np.where(active, vb_try, vb)
    ia, ib = _rhs_mat(mat, va, vb, *bias)
    err = np.maximum(np.abs(ia), np.abs(ib))
    ok = (err < tol) & np.isfinite(va) & np.isfinite(vb)
    if scalar:
        return float(va[0]), float(vb[0]), bool(ok[0])
    return va, vb, ok


def stable_state(design: CellDesign, bias: BiasCondition, kind: str,
                 settings: SimSettings = DEFAULT_SETTINGS) -> CellState:
    """Solve the stable operating point holding logic state ``kind``.

    ``kind`` is 'S0' or 'S1'. Raises SolverError if the iteration fails or
    lands on an operating point of the wrong polarity (the design cannot
    hold that state under the given bias).
    """
    if kind not in ("S0", "S1"):
        raise ValueError("kind must be 'S0' or 'S1'")
    vdd = settings.vdd
    seed = (vdd, 0.0) if kind == "S1" else (0.0, vdd)
    mat = param_matrix(design)
    va, vb, ok = _newton_mat(mat, seed[0], seed[1], *bias.as_array())
    if not ok:
        raise SolverError(f"no operating point found from the {kind} corner")
    if kind == "S1" and not va - vb > 0.5 * vdd:
        raise SolverError("operating point from the S1 corner is not state 1")
    if kind == "S0" and not vb - va > 0.5 * vdd:
        raise SolverError("operating point from the S0 corner is not state 0")
    return CellState(va, vb)


def _stable_states_mat(mat, vcell, vwl, vbl, vblc, kind, vdd):
    """Batch version of :func:`stable_state` on a parameter matrix."""
    n = mat.shape[0]
    if kind == "S1":
        va0, vb0 = np.full(n, vdd), np.zeros(n)
    else:
        va0, vb0 = np.zeros(n), np.full(n, vdd)
    va, vb, ok = _newton_mat(mat, va0, vb0, vcell, vwl, vbl, vblc)
    if kind == "S1":
        ok = ok & (va - vb > 0.5 * vdd)
    else:
        ok = ok & (vb - va > 0.5 * vdd)
    return va, vb, ok


def solve_vtc(design: CellDesign, bias: BiasCondition, side: str, input_sweep):
    """Loaded voltage-transfer curve of one inverter half.

    For ``side`` 'A' the input is v_b and the returned array is the solved
    v_a at each sweep point (node A's inverter loaded by its access device
    into BL); side 'B' mirrors the roles with BLC. The output node is
    bracketed in [-0.1, max(drive) + 0.1] and bisected to a 1e-14 V
    bracket; the result is verified to leave a node-current residual below
    1e-12 A.
    """
    if side not in ("A", "B"):
        raise ValueError("side must be 'A' or 'B'")
    v_in = np.atleast_1d(np.asarray(input_sweep, dtype=float))
    if not np.all(np.isfinite(v_in)):
        raise ValueError("input_sweep must be finite")
    mat = param_matrix(design)
    vcell, vwl, vbl, vblc = bias.as_array()

    if side == "A":
        def residual(vout):
            ia, _ = _rhs_mat(mat, vout, v_in, vcell, vwl, vbl, vblc)
            return ia
    else:
        def residual(vout):
            _, ib = _rhs_mat(mat, v_in, vout, vcell, vwl, vbl, vblc)
            return ib

    lo = np.full(v_in.shape, -0.1)
    hi = np.full(v_in.shape, max(vcell, vwl, vbl, vblc) + 0.1)
    flo = residual(lo)
    fhi = residual(hi)
    if np.any(np.sign(flo) == np.sign(fhi)):
        bad = int(np.argmax(np.sign(flo) == np.sign(fhi)))
        raise SolverError(
            f"no sign change bracketing the VTC at v_in={v_in[bad]:.6f} V"
        )
    # Bisect down to a 1e-14 V bracket unconditionally: stopping early on a
    # small mid-point residual would return a *bracket* mid-point displaced
    # from the accepted one, which misses the tolerance on steep segments.
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        fmid = residual(mid)
        same = np.sign(fmid) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fmid, flo)
        hi = np.where(same, hi, mid)
        if np.all(hi - lo < 1e-14):
            break
    vout = 0.5 * (lo + hi)
    if np.any(np.abs(residual(vout)) >= RESIDUAL_TOL):
        bad = int(np.argmax(np.abs(residual(vout))))
        raise SolverError(
            f"VTC bisection stalled at v_in={v_in[bad]:.6f} V "
            f"(residual {float(np.abs(residual(vout))[bad]):.3e} A)"
        )
    if np.ndim(input_sweep) == 0:
        return float(vout[0])
    return vout


def find_equilibria(design: CellDesign, bias: BiasCondition,
                    grid_step: float = 1e-3):
    """All DC operating points under a bias, classified by stability.

    Seeds come from sign changes of the composed transfer map on a
    ``grid_step`` input grid; each seed is polished by damped Newton to a
    node-current residual below 1e-12 A, then labelled by the Jacobian:
    a negative determinant marks the metastable saddle, otherwise the sign
    of v_a - v_b picks 'S1' or 'S0'. Returns a list sorted by v_a.
    """
    if not 0.0 < grid_step <= 0.05:
        raise ValueError("grid_step must lie in (0, 50 mV]")
    vdd_like = max(bias.v_cell, bias.v_wl, bias.v_bl, bias.v_blc)
    if vdd_like <= 0.0:
        raise ValueError("at least one drive voltage must be positive")
    grid = np.arange(0.0, vdd_like + 0.5 * grid_step, grid_step)
    f_a = solve_vtc(design, bias, "A", grid)       # v_a = F_A(v_b=grid)
    f_b = solve_vtc(design, bias, "B", grid)       # v_b = F_B(v_a=grid)
    composed = np.interp(f_a, grid, f_b)           # F_B(F_A(v_b))
    g = composed - grid
    seeds = []
    for i in range(g.size - 1):
        if g[i] == 0.0:
            seeds.append((f_a[i], grid[i]))
        elif np.sign(g[i]) != np.sign(g[i + 1]):
            mid = 0.5 * (grid[i] + grid[i + 1])
            seeds.append((float(np.interp(mid, grid, f_a)), mid))
    if g[-1] == 0.0:
        seeds.append((f_a[-1], grid[-1]))

    mat = param_matrix(design)
    vcell, vwl, vbl, vblc = bias.as_array()
    found = []
    for va0, vb0 in seeds:
        va, vb, ok = _newton_mat(mat, va0, vb0, vcell, vwl, vbl, vblc)
        if not ok:
            raise SolverError(
                f"equilibrium polish failed from seed ({va0:.4f}, {vb0:.4f})"
            )
        if any(abs(va - p[0]) < 1e-4 and abs(vb - p[1]) < 1e-4 for p in found):
            continue
        found.append((va, vb))

    out = []
    for va, vb in found:
        ia, ib = _rhs_mat(mat, va, vb, vcell, vwl, vbl, vblc)
        jac = _jacobian_mat(mat, va, vb, vcell, vwl, vbl, vblc)
        det = float(jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0])
        if det < 0.0:
            kind = "metastable"
        else:
            kind = "S1" if va > vb else "S0"
        out.append(Equilibrium(CellState(float(va), float(vb)), kind,
                               float(max(abs(ia), abs(ib)))))
    out.sort(key=lambda e: e.state.v_a)
    return out


# ---------------------------------------------------------------------------
# Transient simulation.
# ---------------------------------------------------------------------------

def simulate_transient(design: CellDesign, waveform: Waveform,
                       initial: CellState, t_end: float | None = None,
                       settings: SimSettings = DEFAULT_SETTINGS,
                       sample_every: float | None = None) -> Trajectory:
    """Integrate the cell under a bias waveform with fixed-step RK4.

    The step is ``t_end / n`` with n chosen so the step never exceeds
    ``settings.dt``; every step is taken (no settling shortcut), so halving
    the step ceiling gives a direct self-convergence check. Samples are
    recorded every ``sample_every`` seconds (default: about 4000 points).
    """
    if design.batch_size() is not None:
        raise ValueError("simulate_transient expects a scalar design")
    t_end = waveform.t_end if t_end is None else float(t_end)
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    n_steps = int(np.ceil(t_end / settings.dt - 1e-12))
    dt = t_end / n_steps
    if sample_every is None:
        every = max(1, n_steps // 4000)
    else:
        if not sample_every > 0.0:
            raise ValueError("sample_every must be positive")
        every = max(1, int(round(sample_every / dt)))
    n_rec = n_steps // every + 2
    out_t = np.empty(n_rec)
    out_va = np.empty(n_rec)
    out_vb = np.empty(n_rec)
    out_ibl = np.empty(n_rec)
    out_iblc = np.empty(n_rec)
    mat = param_matrix(design)
    m, va, vb, ok = kernels.simulate_waveform(
        mat, waveform.times, waveform.biases, initial.v_a, initial.v_b,
        t_end, n_steps, every, 1.0 / design.c_node,
        out_t, out_va, out_vb, out_ibl, out_iblc,
    )
    if not ok:
        raise DivergenceError(
            f"transient produced non-finite node voltages near t={out_t[max(m - 1, 0)]:.3e} s"
        )
    lo, hi = -0.1, settings.vdd + 0.1
    sampled_va = out_va[:m]
    sampled_vb = out_vb[:m]
    out_of_range = bool(
        np.any((sampled_va < lo) | (sampled_va > hi)
               | (sampled_vb < lo) | (sampled_vb > hi))
    )
    return Trajectory(out_t[:m].copy(), sampled_va.copy(), sampled_vb.copy(),
                      out_ibl[:m].copy(), out_iblc[:m].copy(), out_of_range)


def classify_state(design: CellDesign, state: CellState,
                   settings: SimSettings = DEFAULT_SETTINGS) -> str:
    """Label a state by the attractor it settles into under hold bias.

    Runs ``settings.settle_time`` of hold-mode integration (word line low,
    bit lines parked low), then thresholds the node difference at half the
    rail: 'S1' if v_a - v_b > vdd/2, 'S0' if below -vdd/2, else
    'undetermined'.
    """
    mat = _as_batch_mat(design)
    out_va = np.empty(1)
    out_vb = np.empty(1)
    out_ok = np.empty(1, dtype=np.uint8)
    kernels.const_bias_batch(
        mat, np.array([settings.vdd]), np.zeros(1), np.zeros(1), np.zeros(1),
        np.array([state.v_a]), np.array([state.v_b]), settings.settle_time,
        settings.dt, 1.0 / design.c_node, settings.eq_tol, False,
        out_va, out_vb, out_ok,
    )
    if not out_ok[0]:
        raise DivergenceError("hold-mode settling diverged")
    return _threshold_label(float(out_va[0]), float(out_vb[0]), settings.vdd)


def _threshold_label(va: float, vb: float, vdd: float) -> str:
    diff = va - vb
    if diff > 0.5 * vdd:
        return "S1"
    if diff < -0.5 * vdd:
        return "S0"
    return "undetermined"


def _as_batch_mat(design: CellDesign) -> np.ndarray:
    mat = param_matrix(design)
    if mat.ndim == 2:
        mat = mat[np.newaxis]
    return np.ascontiguousarray(mat)


def separatrix_point(design: CellDesign, p0: CellState, p1: CellState,
                     settings: SimSettings = DEFAULT_SETTINGS,
                     tol: float = 0.5e-3) -> CellState:
    """Bisect the segment p0-p1 for the basin boundary crossing.

    The endpoints must settle into opposite states. Bisection continues
    until the bracket is shorter than ``tol`` (Euclidean, volts); the
    midpoint of the final bracket is returned. A midpoint that settles to
    neither state is returned directly (it sits on the boundary to within
    the classifier's resolution).
    """
    c0 = classify_state(design, p0, settings)
    c1 = classify_state(design, p1, settings)
    if "undetermined" in (c0, c1) or c0 == c1:
        raise ValueError(
            f"endpoints must settle into opposite states, got {c0} and {c1}"
        )
    a = np.array([p0.v_a, p0.v_b])
    b = np.array([p1.v_a, p1.v_b])
    while float(np.hypot(*(b - a))) > tol:
        mid = 0.5 * (a + b)
        label = classify_state(design, CellState(float(mid[0]), float(mid[1])),
                               settings)
        if label == "undetermined":
            return CellState(float(mid[0]), float(mid[1]))
        if label == c0:
            a = mid
        else:
            b = mid
    mid = 0.5 * (a + b)
    return CellState(float(mid[0]), float(mid[1]))
