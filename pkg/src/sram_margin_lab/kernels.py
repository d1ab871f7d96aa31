"""Compiled scalar kernels for transient integration of the two-node latch.

These functions duplicate the algebra of :mod:`.device` and
:mod:`.cell` in scalar form so numba can compile tight per-cell loops;
the vectorised numpy implementations remain the reference and the test
suite pins the two against each other.

All integrators use classical fixed-step 4th-order Runge-Kutta. The batch
kernels apply one exact shortcut: while the applied bias is constant and
both node currents are below ``eq_tol`` (default 1e-13 A), the state is a
numerical fixed point of the ODE and the remainder of that constant-bias
span is skipped. The recording kernel used by the public transient API
never skips.

Device parameter matrices are float64 arrays of shape (6, 6) with rows
ordered (pull-down A, pull-up A, access A, pull-down B, pull-up B,
access B) and columns (sign, w/l, sign*vth, kp, alpha, lam), where sign
is +1 for n-channel and -1 for p-channel devices.
"""
import numpy as np
from numba import njit

#: Node-current magnitude below which a constant-bias state is treated as
#: settled by the batch kernels (exact fixed-point skip).
EQ_SKIP_TOL = 1e-13

# Parameter-matrix row indices.
ROW_MN_A, ROW_MP_A, ROW_MTX_A = 0, 1, 2
ROW_MN_B, ROW_MP_B, ROW_MTX_B = 3, 4, 5


@njit(cache=True, inline="always")
def _ids(sign, w_over_l, vth_eff, kp, alpha, lam, vgs, vds):
    """Signed drain current of one device (polarity folded into ``sign``)."""
    vg = sign * vgs
    vd = sign * vds
    s = sign
    if vd < 0.0:
        vg = vg - vd
        vd = -vd
        s = -s
    vov = vg - vth_eff
    if vov <= 0.0:
        return 0.0
    base = kp * w_over_l * vov**alpha
    if vd >= vov:
        return s * (base * (1.0 + lam * vd))
    t = vd / vov
    return s * (base * (lam * vd + t * (2.0 - t)))


@njit(cache=True, inline="always")
def _dev_current(dev, row, vgs, vds):
    return _ids(
        dev[row, 0], dev[row, 1], dev[row, 2], dev[row, 3], dev[row, 4], dev[row, 5],
        vgs, vds,
    )


@njit(cache=True, inline="always")
def _rhs(dev, va, vb, vcell, vwl, vbl, vblc):
    """Net currents into storage nodes A and B (positive charges the node)."""
    ia = (
        -_dev_current(dev, ROW_MP_A, vb - vcell, va - vcell)
        - _dev_current(dev, ROW_MN_A, vb, va)
        + _dev_current(dev, ROW_MTX_A, vwl - va, vbl - va)
    )
    ib = (
        -_dev_current(dev, ROW_MP_B, va - vcell, vb - vcell)
        - _dev_current(dev, ROW_MN_B, va, vb)
        + _dev_current(dev, ROW_MTX_B, vwl - vb, vblc - vb)
    )
    return ia, ib


@njit(cache=True, inline="always")
def _rk4_step(dev, va, vb, vcell, wl0, wlh, wl1, vbl, vblc, dt, inv_c):
    """One RK4 step; the word-line may differ at the three stage times."""
    k1a, k1b = _rhs(dev, va, vb, vcell, wl0, vbl, vblc)
    k1a *= inv_c
    k1b *= inv_c
    h = 0.5 * dt
    k2a, k2b = _rhs(dev, va + h * k1a, vb + h * k1b, vcell, wlh, vbl, vblc)
    k2a *= inv_c
    k2b *= inv_c
    k3a, k3b = _rhs(dev, va + h * k2a, vb + h * k2b, vcell, wlh, vbl, vblc)
    k3a *= inv_c
    k3b *= inv_c
    k4a, k4b = _rhs(dev, va + dt * k3a, vb + dt * k3b, vcell, wl1, vbl, vblc)
    k4a *= inv_c
    k4b *= inv_c
    va_next = va + dt * (k1a + 2.0 * (k2a + k3a) + k4a) / 6.0
    vb_next = vb + dt * (k1b + 2.0 * (k2b + k3b) + k4b) / 6.0
    return va_next, vb_next


@njit(cache=True, inline="always")
def _steps_for(span, dt_max):
    if span <= 0.0:
        return 0
    n = int(np.ceil(span / dt_max - 1e-12))
    if n < 1:
        n = 1
    return n


@njit(cache=True, inline="always")
def _run_const_span(dev, va, vb, vcell, vwl, vbl, vblc, span, dt_max, inv_c,
                    eq_tol, allow_skip):
    """Integrate a constant-bias span, optionally skipping once settled."""
    n = _steps_for(span, dt_max)
    if n == 0:
        return va, vb
    dt = span / n
    for _ in range(n):
        if allow_skip:
            ia, ib = _rhs(dev, va, vb, vcell, vwl, vbl, vblc)
            if abs(ia) < eq_tol and abs(ib) < eq_tol:
                break
        va, vb = _rk4_step(dev, va, vb, vcell, vwl, vwl, vwl, vbl, vblc, dt, inv_c)
        if not (np.isfinite(va) and np.isfinite(vb)):
            break
    return va, vb


@njit(cache=True, inline="always")
def _run_edge_span(dev, va, vb, vcell, wl_from, wl_to, vbl, vblc, span, dt_max,
                   inv_c):
    """Integrate a span during which the word-line ramps linearly."""
    n = _steps_for(span, dt_max)
    if n == 0:
        return va, vb
    dt = span / n
    slope = (wl_to - wl_from) / span
    for k in range(n):
        t0 = k * dt
        wl0 = wl_from + slope * t0
        wlh = wl_from + slope * (t0 + 0.5 * dt)
        wl1 = wl_from + slope * (t0 + dt)
        va, vb = _rk4_step(dev, va, vb, vcell, wl0, wlh, wl1, vbl, vblc, dt, inv_c)
        if not (np.isfinite(va) and np.isfinite(vb)):
            break
    return va, vb


@njit(cache=True)
def write_attempt_batch(dev, vcell, vbl, vblc, wl_level, va0, vb0,
                        t_rise, t_plateau, t_fall, t_tail, dt_max, inv_c,
                        eq_tol, out_va, out_vb, out_ok):
    """Integrate a trapezoidal word-line pulse plus hold tail per element.

    ``dev`` has shape (n, 6, 6); all other per-element inputs have shape
    (n,). The tail runs at word-line 0 with the bit-line drives unchanged
    (the access devices are cut off, so the tail equals hold-mode settling).
    Settled constant-bias spans are skipped exactly.
    """
    n = wl_level.shape[0]
    for i in range(n):
        va = va0[i]
        vb = vb0[i]
        d = dev[i]
        vc = vcell[i]
        bl = vbl[i]
        blc = vblc[i]
        lvl = wl_level[i]
        va, vb = _run_edge_span(d, va, vb, vc, 0.0, lvl, bl, blc, t_rise, dt_max, inv_c)
        va, vb = _run_const_span(d, va, vb, vc, lvl, bl, blc, t_plateau, dt_max,
                                 inv_c, eq_tol, True)
        va, vb = _run_edge_span(d, va, vb, vc, lvl, 0.0, bl, blc, t_fall, dt_max, inv_c)
        va, vb = _run_const_span(d, va, vb, vc, 0.0, bl, blc, t_tail, dt_max,
                                 inv_c, eq_tol, True)
        out_va[i] = va
        out_vb[i] = vb
        out_ok[i] = 1 if (np.isfinite(va) and np.isfinite(vb)) else 0


@njit(cache=True)
def const_bias_batch(dev, vcell, vwl, vbl, vblc, va0, vb0, t_total, dt_max,
                     inv_c, eq_tol, allow_skip, out_va, out_vb, out_ok):
    """Integrate a constant bias for ``t_total`` seconds per element."""
    n = va0.shape[0]
    for i in range(n):
        va, vb = _run_const_span(dev[i], va0[i], vb0[i], vcell[i], vwl[i],
                                 vbl[i], vblc[i], t_total, dt_max, inv_c,
                                 eq_tol, allow_skip)
        out_va[i] = va
        out_vb[i] = vb
        out_ok[i] = 1 if (np.isfinite(va) and np.isfinite(vb)) else 0


@njit(cache=True, inline="always")
def _wave_at(bp_t, bp_v, col, t):
    """Piecewise-linear waveform value at time ``t`` (clamped ends)."""
    n = bp_t.shape[0]
    if t <= bp_t[0]:
        return bp_v[0, col]
    if t >= bp_t[n - 1]:
        return bp_v[n - 1, col]
    j = 1
    while bp_t[j] < t:
        j += 1
    span = bp_t[j] - bp_t[j - 1]
    if span <= 0.0:
        return bp_v[j, col]
    f = (t - bp_t[j - 1]) / span
    return bp_v[j - 1, col] + f * (bp_v[j, col] - bp_v[j - 1, col])


@njit(cache=True)
def simulate_waveform(dev, bp_t, bp_v, va0, vb0, t_end, n_steps, every, inv_c,
                      out_t, out_va, out_vb, out_ibl, out_iblc):
    """Fixed-step RK4 under an arbitrary piecewise-linear bias waveform.

    Records the state and both bit-line currents every ``every`` steps plus
    the final point; never skips ahead. Returns (n_recorded, va, vb, ok).
    """
    dt = t_end / n_steps
    va = va0
    vb = vb0
    m = 0
    for k in range(n_steps + 1):
        t = k * dt
        if k % every == 0 or k == n_steps:
            out_t[m] = t
            out_va[m] = va
            out_vb[m] = vb
            vwl = _wave_at(bp_t, bp_v, 1, t)
            out_ibl[m] = _dev_current(dev, ROW_MTX_A, vwl - va,
                                      _wave_at(bp_t, bp_v, 2, t) - va)
            out_iblc[m] = _dev_current(dev, ROW_MTX_B, vwl - vb,
                                       _wave_at(bp_t, bp_v, 3, t) - vb)
            m += 1
        if k == n_steps:
            break
        th = t + 0.5 * dt
        t1 = t + dt
        h = 0.5 * dt
        # Every bias channel is resolved at all three RK4 stage times.
        k1a, k1b = _rhs(dev, va, vb,
                        _wave_at(bp_t, bp_v, 0, t), _wave_at(bp_t, bp_v, 1, t),
                        _wave_at(bp_t, bp_v, 2, t), _wave_at(bp_t, bp_v, 3, t))
        k1a *= inv_c
        k1b *= inv_c
        vch = _wave_at(bp_t, bp_v, 0, th)
        wlh = _wave_at(bp_t, bp_v, 1, th)
        blh = _wave_at(bp_t, bp_v, 2, th)
        blch = _wave_at(bp_t, bp_v, 3, th)
        k2a, k2b = _rhs(dev, va + h * k1a, vb + h * k1b, vch, wlh, blh, blch)
        k2a *= inv_c
        k2b *= inv_c
        k3a, k3b = _rhs(dev, va + h * k2a, vb + h * k2b, vch, wlh, blh, blch)
        k3a *= inv_c
        k3b *= inv_c
        k4a, k4b = _rhs(dev, va + dt * k3a, vb + dt * k3b,
                        _wave_at(bp_t, bp_v, 0, t1), _wave_at(bp_t, bp_v, 1, t1),
                        _wave_at(bp_t, bp_v, 2, t1), _wave_at(bp_t, bp_v, 3, t1))
        k4a *= inv_c
        k4b *= inv_c
        va = va + dt * (k1a + 2.0 * (k2a + k3a) + k4a) / 6.0
        vb = vb + dt * (k1b + 2.0 * (k2b + k3b) + k4b) / 6.0
        if not (np.isfinite(va) and np.isfinite(vb)):
            return m, va, vb, 0
    return m, va, vb, 1


@njit(cache=True, inline="always")
def _newton_point(dev, va, vb, vcell, vwl, vbl, vblc, tol, max_iter, step_cap):
    """Damped Newton solve of the node equations for one cell.

    Scalar twin of the vectorised DC solver: central-difference Jacobian,
    step capped at ``step_cap`` volts, halving line search on the residual.
    Returns (va, vb, converged).
    """
    h = 1e-7
    for _ in range(max_iter):
        ia, ib = _rhs(dev, va, vb, vcell, vwl, vbl, vblc)
        err = max(abs(ia), abs(ib))
        if err < tol:
            return va, vb, True
        iap, ibp = _rhs(dev, va + h, vb, vcell, vwl, vbl, vblc)
        iam, ibm = _rhs(dev, va - h, vb, vcell, vwl, vbl, vblc)
        jaa = (iap - iam) / (2.0 * h)
        jba = (ibp - ibm) / (2.0 * h)
        iap, ibp = _rhs(dev, va, vb + h, vcell, vwl, vbl, vblc)
        iam, ibm = _rhs(dev, va, vb - h, vcell, vwl, vbl, vblc)
        jab = (iap - iam) / (2.0 * h)
        jbb = (ibp - ibm) / (2.0 * h)
        det = jaa * jbb - jab * jba
        if not np.isfinite(det) or abs(det) < 1e-300:
            return va, vb, False
        dva = (jab * ib - jbb * ia) / det
        dvb = (jba * ia - jaa * ib) / det
        biggest = max(abs(dva), abs(dvb))
        if biggest > step_cap:
            s = step_cap / biggest
            dva *= s
            dvb *= s
        lam = 1.0
        va_try = va + dva
        vb_try = vb + dvb
        for _ in range(30):
            ia_t, ib_t = _rhs(dev, va_try, vb_try, vcell, vwl, vbl, vblc)
            if max(abs(ia_t), abs(ib_t)) < err or lam <= 1e-6:
                break
            lam *= 0.5
            va_try = va + lam * dva
            vb_try = vb + lam * dvb
        va = va_try
        vb = vb_try
        if not (np.isfinite(va) and np.isfinite(vb)):
            return va, vb, False
    ia, ib = _rhs(dev, va, vb, vcell, vwl, vbl, vblc)
    return va, vb, max(abs(ia), abs(ib)) < tol


@njit(cache=True)
def trip_ramp_batch(dev, drive, is_wwtv, ramp_on_blc, target_sign, mon_row,
                    vdd, v_bl_fixed, v_blc_fixed, drop_fraction, arm_floor,
                    dt_max, inv_c, eq_tol, newton_tol,
                    out_value, out_detected, out_ok,
                    record_trace, trace_imon, trace_flip):
    """Quasistatic trip-voltage ramp, one cell at a time.

    The operating point is continued along ``drive`` with warm-started
    Newton solves; a step that fails to converge (the flip itself is a
    fold) falls back to settling transients, and if the point still will
    not converge the raw transient state is carried into the next step,
    where the surviving branch is unambiguous. Detection is a drop of the
    monitored access-device current below ``drop_fraction`` times its
    running peak, or a flip of the DC state polarity. ``out_value`` holds
    the raw drive value at detection; ``out_detected`` and ``out_ok`` are
    uint8 masks. Trace buffers record sample 0 when ``record_trace``.
    """
    n = dev.shape[0]
    k_steps = drive.shape[0]
    for i in range(n):
        d = dev[i]
        va = 0.0 if target_sign > 0.0 else vdd
        vb = vdd - va
        detected = False
        okflag = True
        peak = 0.0
        value = 0.0
        for k in range(k_steps):
            dv = drive[k]
            if is_wwtv:
                vwl = dv
                vbl = v_bl_fixed
                vblc = v_blc_fixed
            else:
                vwl = vdd
                if ramp_on_blc:
                    vbl = vdd
                    vblc = dv
                else:
                    vbl = dv
                    vblc = vdd
            va_n, vb_n, conv = _newton_point(d, va, vb, vdd, vwl, vbl, vblc,
                                             newton_tol, 100, 0.5)
            if not conv:
                va_t, vb_t = _run_const_span(d, va, vb, vdd, vwl, vbl, vblc,
                                             2e-9, dt_max, inv_c, eq_tol, True)
                va_n, vb_n, conv = _newton_point(d, va_t, vb_t, vdd, vwl, vbl,
                                                 vblc, newton_tol, 100, 0.5)
                if not conv:
                    va_t, vb_t = _run_const_span(d, va_t, vb_t, vdd, vwl, vbl,
                                                 vblc, 48e-9, dt_max, inv_c,
                                                 eq_tol, True)
                    va_n, vb_n, conv = _newton_point(d, va_t, vb_t, vdd, vwl,
                                                     vbl, vblc, newton_tol,
                                                     100, 0.5)
                    if not conv:
                        va_n = va_t
                        vb_n = vb_t
            if not (np.isfinite(va_n) and np.isfinite(vb_n)):
                okflag = False
                break
            va = va_n
            vb = vb_n
            if mon_row == ROW_MTX_A:
                imon = abs(_dev_current(d, ROW_MTX_A, vwl - va, vbl - va))
            else:
                imon = abs(_dev_current(d, ROW_MTX_B, vwl - vb, vblc - vb))
            flipped = target_sign * (va - vb) > 0.0
            dropped = peak > arm_floor and imon < drop_fraction * peak
            if record_trace and i == 0:
                trace_imon[k] = imon
                trace_flip[k] = 1 if flipped else 0
            if conv and (dropped or flipped):
                detected = True
                value = dv
                break
            if imon > peak:
                peak = imon
        out_value[i] = value
        out_detected[i] = 1 if detected else 0
        out_ok[i] = 1 if okflag else 0
