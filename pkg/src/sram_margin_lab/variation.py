"""Process-variation sampling for cell populations.

Threshold-voltage mismatch follows area scaling: sigma_vth = avt /
sqrt(w * l) per transistor, with independent draws for the six devices of
a cell. Draws come from a counter-based generator keyed by (seed, sample
index, transistor slot), so any sample can be regenerated in isolation and
results do not depend on evaluation order or batching. Optional width
variation (fractional sigma) uses slots 6-11.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .cell import CellDesign

__all__ = ["VariationModel", "SampleId", "sigma_vth", "sample_cell",
           "sample_population", "standard_normal", "McOutcome", "monte_carlo"]

#: Device slots used to key the per-transistor draws.
SLOTS = ("mn", "mp", "mtx", "mn_b", "mp_b", "mtx_b")


@dataclass(frozen=True)
class VariationModel:
    """Mismatch magnitudes for one technology.

    ``avt`` is the threshold-mismatch area coefficient in V*m (so that
    sigma_vth = avt / sqrt(w*l)); ``width_sigma`` is the fractional
    standard deviation of channel width (0 disables width variation);
    ``independent`` documents that transistor draws are uncorrelated,
    the only supported mode.
    """

    avt: float = 4.5e-9
    width_sigma: float = 0.0
    independent: bool = True

    def __post_init__(self) -> None:
        if not (np.isfinite(self.avt) and self.avt >= 0.0):
            raise ValueError("VariationModel.avt must be finite and >= 0")
        if not (np.isfinite(self.width_sigma) and 0.0 <= self.width_sigma < 0.3):
            raise ValueError("VariationModel.width_sigma must lie in [0, 0.3)")
        if self.independent is not True:
            raise ValueError("only independent per-transistor variation is supported")


@dataclass(frozen=True)
class SampleId:
    """Stable identity of one Monte Carlo sample."""

    seed: int
    index: int

    def __post_init__(self) -> None:
        if not (isinstance(self.seed, int) and isinstance(self.index, int)):
            raise ValueError("SampleId fields must be integers")
        if self.index < 0:
            raise ValueError("SampleId.index must be non-negative")


def sigma_vth(model: VariationModel, w, l):
    """Threshold-voltage mismatch sigma for a device of area w*l, volts."""
    return model.avt / np.sqrt(np.asarray(w, dtype=float) * np.asarray(l, dtype=float))


# ---------------------------------------------------------------------------
# Counter-based normal draws (SplitMix64 finalisers + inverse normal CDF).
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x + _GOLDEN).astype(np.uint64)
    x ^= x >> np.uint64(30)
    x = (x * _MIX1).astype(np.uint64)
    x ^= x >> np.uint64(27)
    x = (x * _MIX2).astype(np.uint64)
    x ^= x >> np.uint64(31)
    return x


def _keyed_uniform(seed: int, index, slot: int) -> np.ndarray:
    """Uniform (0, 1) doubles keyed by (seed, index, slot), vectorised."""
    idx = np.atleast_1d(np.asarray(index, dtype=np.uint64))
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + np.zeros_like(idx))
        h = _mix64(h ^ idx)
        h = _mix64(h ^ np.uint64(slot))
    # 53 high bits -> open interval (0, 1).
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return u.reshape(np.shape(index))


def standard_normal(seed: int, index, slot: int):
    """Deterministic standard-normal draws keyed by (seed, index, slot)."""
    z = ndtri(_keyed_uniform(seed, index, slot))
    if np.ndim(index) == 0:
        return float(z)
    return z


def _perturbed(m, dvth, w_scale):
    new_vth = np.asarray(m.vth, dtype=float) + dvth
    new_w = np.asarray(m.w, dtype=float) * w_scale
    if np.ndim(new_vth) == 0:
        new_vth = float(new_vth)
    if np.ndim(new_w) == 0:
        new_w = float(new_w)
    return replace(m, vth=new_vth, w=new_w)


def _sample(nominal: CellDesign, model: VariationModel, seed: int,
            index) -> CellDesign:
    slots = {}
    for k, name in enumerate(SLOTS):
        m = getattr(nominal, name)
        z = standard_normal(seed, index, k)
        dvth = sigma_vth(model, m.w, m.l) * z
        if model.width_sigma > 0.0:
            zw = standard_normal(seed, index, k + len(SLOTS))
            w_scale = np.maximum(1.0 + model.width_sigma * zw, 0.05)
        else:
            w_scale = 1.0
        slots[name] = _perturbed(m, dvth, w_scale)
    return CellDesign(c_node=nominal.c_node, **slots)


def sample_cell(nominal: CellDesign, model: VariationModel,
                sample: SampleId) -> CellDesign:
    """One variation sample of a nominal design.

    The same (seed, index) always returns the identical design, regardless
    of any other sampling performed before or after.
    """
    if nominal.batch_size() is not None:
        raise ValueError("sample_cell expects a scalar nominal design")
    return _sample(nominal, model, sample.seed, sample.index)


def sample_population(nominal: CellDesign, model: VariationModel, seed: int,
                      n: int) -> CellDesign:
    """Stacked design holding samples 0..n-1 (matches sample_cell element-wise)."""
    if nominal.batch_size() is not None:
        raise ValueError("sample_population expects a scalar nominal design")
    if not (isinstance(n, int) and n > 0):
        raise ValueError("n must be a positive integer")
    return _sample(nominal, model, seed, np.arange(n))


# ---------------------------------------------------------------------------
# Monte Carlo driver.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McOutcome:
    """Result of one sample: a value mapping, or an error message."""

    sample: SampleId
    values: dict[str, float] | None
    error: str | None = None


def monte_carlo(nominal: CellDesign, model: VariationModel, n: int,
                evaluator: Callable, seed: int = 0) -> list[McOutcome]:
    """Evaluate a metric over n variation samples.

    ``evaluator`` maps a scalar CellDesign to a float or a {name: float}
    mapping. If it also provides ``evaluate_batch(stacked_design)``
    returning {name: array}, the whole population is evaluated in one call
    (same results, batched integration). Per-sample failures are recorded
    as outcomes with an error message instead of aborting the sweep.
    """
    if not (isinstance(n, int) and n > 0):
        raise ValueError("n must be a positive integer")
    ids = [SampleId(seed, i) for i in range(n)]
    batch = getattr(evaluator, "evaluate_batch", None)
    outcomes: list[McOutcome] = []
    if batch is not None:
        stacked = sample_population(nominal, model, seed, n)
        table = batch(stacked)
        names = sorted(table)
        for i, sid in enumerate(ids):
            row = {k: float(table[k][i]) for k in names}
            bad = [k for k, v in row.items() if not np.isfinite(v) and k != "crit_pulse"]
            if bad:
                outcomes.append(McOutcome(sid, None,
                                          f"evaluation failed for {', '.join(bad)}"))
            else:
                outcomes.append(McOutcome(sid, row))
        return outcomes
    for sid in ids:
        design = sample_cell(nominal, model, sid)
        try:
            value = evaluator(design)
        except Exception as exc:  # per-sample isolation
            outcomes.append(McOutcome(sid, None, f"{type(exc).__name__}: {exc}"))
            continue
        if isinstance(value, dict):
            outcomes.append(McOutcome(sid, {k: float(v) for k, v in value.items()}))
        else:
            outcomes.append(McOutcome(sid, {"value": float(value)}))
    return outcomes
