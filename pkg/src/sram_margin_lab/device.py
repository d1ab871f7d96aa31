"""Compact MOSFET model: alpha-power law with channel-length modulation.

Currents follow the signed drain-to-source convention. An n-channel device
conducts only when the gate overdrive vgs - vth is positive; below that the
current is exactly zero (hard cutoff, no subthreshold conduction), and it is
exactly zero at vds = 0. Reverse operation (vds < 0) is handled by swapping
source and drain terminals, so pass transistors conduct symmetrically in
either direction. A p-channel device is the exact mirror image of an
n-channel one under (vgs, vds, vth) -> (-vgs, -vds, -vth).

The saturation branch is

    i = kp * (w/l) * (vgs - vth)**alpha * (1 + lam * vds),   vds >= vgs - vth

and the triode branch is the unique quadratic in vds that matches the
saturation branch in value and first derivative at vds = vgs - vth while
vanishing at vds = 0:

    i = kp * (w/l) * vov**alpha * (lam * vds + t * (2 - t)),  t = vds / vov.

Both branches increase monotonically in vgs and vds for alpha in [1, 2],
so the model never produces negative output conductance.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["MosParams", "drain_current", "mirror_p_from_n"]


@dataclass(frozen=True)
class MosParams:
    """Parameters of one transistor.

    Numeric fields may be scalars or equal-length numpy arrays; array-valued
    parameter sets describe a stacked population of devices and broadcast
    through every model evaluation.
    """

    polarity: str        # 'n' or 'p'
    w: float             # channel width, m
    l: float             # channel length, m
    vth: float           # threshold voltage, V (signed; negative for p-channel)
    kp: float            # transconductance constant, A / V**alpha per square
    alpha: float = 1.3   # velocity-saturation exponent
    lam: float = 0.1     # channel-length modulation, 1/V

    def __post_init__(self) -> None:
        if self.polarity not in ("n", "p"):
            raise ValueError(f"polarity must be 'n' or 'p', got {self.polarity!r}")
        for name in ("w", "l", "kp"):
            value = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(value)) or not np.all(value > 0.0):
                raise ValueError(f"MosParams.{name} must be finite and positive")
        vth = np.asarray(self.vth, dtype=float)
        if not np.all(np.isfinite(vth)):
            raise ValueError("MosParams.vth must be finite")
        alpha = np.asarray(self.alpha, dtype=float)
        if not np.all((alpha >= 1.0) & (alpha <= 2.0)):
            raise ValueError("MosParams.alpha must lie in [1, 2]")
        lam = np.asarray(self.lam, dtype=float)
        if not np.all(np.isfinite(lam)) or not np.all(lam >= 0.0):
            raise ValueError("MosParams.lam must be finite and non-negative")

    @property
    def w_over_l(self):
        return np.asarray(self.w, dtype=float) / np.asarray(self.l, dtype=float)


def _nchannel_current(vgs, vds, w_over_l, vth, kp, alpha, lam):
    """Alpha-power current of an n-channel device, vectorised."""
    rev = vds < 0.0
    vgs_f = np.where(rev, vgs - vds, vgs)
    vds_f = np.where(rev, -vds, vds)
    vov = vgs_f - vth
    on = vov > 0.0
    vov_safe = np.where(on, vov, 1.0)
    base = kp * w_over_l * vov_safe**alpha
    sat = vds_f >= vov_safe
    t = np.where(sat, 1.0, vds_f / vov_safe)
    mag = base * np.where(sat, 1.0 + lam * vds_f, lam * vds_f + t * (2.0 - t))
    mag = np.where(on, mag, 0.0)
    return np.where(rev, -mag, mag)


def drain_current(params: MosParams, vgs, vds):
    """Signed drain-to-source current in amps.

    ``vgs`` and ``vds`` are gate-source and drain-source voltages referred to
    the device's source terminal; scalars and broadcastable arrays are both
    accepted, and scalar inputs return a plain float.
    """
    vgs = np.asarray(vgs, dtype=float)
    vds = np.asarray(vds, dtype=float)
    if not (np.all(np.isfinite(vgs)) and np.all(np.isfinite(vds))):
        raise ValueError("bias voltages must be finite")
    w_over_l = params.w_over_l
    kp = np.asarray(params.kp, dtype=float)
    alpha = np.asarray(params.alpha, dtype=float)
    lam = np.asarray(params.lam, dtype=float)
    vth = np.asarray(params.vth, dtype=float)
    if params.polarity == "p":
        i = -_nchannel_current(-vgs, -vds, w_over_l, -vth, kp, alpha, lam)
    else:
        i = _nchannel_current(vgs, vds, w_over_l, vth, kp, alpha, lam)
    if i.ndim == 0:
        return float(i)
    return i


def mirror_p_from_n(nchannel: MosParams, mobility_ratio: float) -> MosParams:
    """Build the p-channel complement of an n-channel parameter set.

    The threshold voltage is negated and the transconductance scaled by
    ``mobility_ratio`` (hole-to-electron mobility, typically < 1); width,
    length, alpha and lam carry over unchanged.
    """
    if nchannel.polarity != "n":
        raise ValueError("mirror_p_from_n expects an n-channel parameter set")
    ratio = float(mobility_ratio)
    if not np.isfinite(ratio) or ratio <= 0.0:
        raise ValueError("mobility_ratio must be finite and positive")
    return replace(
        nchannel,
        polarity="p",
        vth=-np.asarray(nchannel.vth, dtype=float)
        if np.ndim(nchannel.vth)
        else -float(nchannel.vth),
        kp=np.asarray(nchannel.kp, dtype=float) * ratio
        if np.ndim(nchannel.kp)
        else float(nchannel.kp) * ratio,
    )
