"""Array-level margin characterisation.

An array is a rows-by-cols population of variation samples of one nominal
design, addressed row-major. The margin search writes the complement of
the initialised value into every cell at word-line levels stepped down
from the rail, reads back at nominal conditions, and records for every
unit the smallest word-line reduction at which its write fails. A unit is
a single cell, a word (``word_width`` consecutive cells of a row), a block
(one row) or the whole memory; a unit write fails as soon as any member
cell fails, so unit records are minima over their members. Cells that
never fail before the sweep floor keep the full rail as their margin.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cell import DEFAULT_SETTINGS, CellDesign, SimSettings
from .metrics import DIRECTIONS, wlvm_batch
from .variation import VariationModel, sample_population

__all__ = ["GRANULARITIES", "ArrayModel", "WlvmRecord", "build_array",
           "wlvm_search", "combine_directions"]

GRANULARITIES = ("bit", "word", "block", "memory")


@dataclass(frozen=True)
class WlvmRecord:
    """Margin of one unit; ``None`` marks a direction not yet measured."""

    index: int
    row: int
    col: int
    wlvm_0to1: float | None = None
    wlvm_1to0: float | None = None
    valid: bool = True

    @property
    def wlvm(self) -> float:
        """Worst (smallest) margin across the measured directions."""
        present = [v for v in (self.wlvm_0to1, self.wlvm_1to0) if v is not None]
        if not present:
            raise ValueError("record holds no measured direction")
        return min(present)


@dataclass
class ArrayModel:
    """A sampled cell array plus its margin-sweep configuration."""

    rows: int
    cols: int
    word_width: int
    nominal: CellDesign
    cells: CellDesign          # stacked, rows*cols elements, row-major
    delta: float               # word-line step, V
    sweep_floor: float         # lowest word-line level visited, V
    seed: int
    _cell_values: dict = field(default_factory=dict, repr=False)

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def position(self, cell_index: int) -> tuple[int, int]:
        return cell_index // self.cols, cell_index % self.cols

    def unit_members(self, granularity: str):
        """Yield (unit_index, row, col, member_cell_indices)."""
        if granularity not in GRANULARITIES:
            raise ValueError(
                f"granularity must be one of {GRANULARITIES}, got {granularity!r}"
            )
        if granularity == "bit":
            for i in range(self.n_cells):
                r, c = self.position(i)
                yield i, r, c, np.array([i])
        elif granularity == "word":
            per_row = self.cols // self.word_width
            for u in range(self.rows * per_row):
                r, k = u // per_row, u % per_row
                start = r * self.cols + k * self.word_width
                yield u, r, k * self.word_width, np.arange(start,
                                                           start + self.word_width)
        elif granularity == "block":
            for r in range(self.rows):
                yield r, r, 0, np.arange(r * self.cols, (r + 1) * self.cols)
        else:
            yield 0, 0, 0, np.arange(self.n_cells)

    def cell_margins(self, direction: str,
                     settings: SimSettings = DEFAULT_SETTINGS):
        """Per-cell margins for one direction, computed once and cached."""
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        key = (direction, settings)
        if key not in self._cell_values:
            values, ok = wlvm_batch(self.cells, self.delta, direction,
                                    settings, sweep_floor=self.sweep_floor)
            self._cell_values[key] = (values, ok)
        return self._cell_values[key]


def build_array(nominal: CellDesign, model: VariationModel, rows: int,
                cols: int, seed: int, delta: float = 0.010,
                sweep_floor: float = 0.0, word_width: int = 8) -> ArrayModel:
    """Sample a rows-by-cols array of cells from one nominal design.

    Cell index i (row-major) receives variation sample i of ``seed``, so a
    given (seed, geometry) always produces the identical array.
    """
    for name, v in (("rows", rows), ("cols", cols), ("word_width", word_width)):
        if not (isinstance(v, int) and v > 0):
            raise ValueError(f"{name} must be a positive integer")
    if cols % word_width != 0:
        raise ValueError("cols must be a multiple of word_width")
    if nominal.batch_size() is not None:
        raise ValueError("build_array expects a scalar nominal design")
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if not sweep_floor >= 0.0:
        raise ValueError("sweep_floor must be non-negative")
    cells = sample_population(nominal, model, seed, rows * cols)
    return ArrayModel(rows=rows, cols=cols, word_width=word_width,
                      nominal=nominal, cells=cells, delta=delta,
                      sweep_floor=sweep_floor, seed=seed)


def wlvm_search(array: ArrayModel, granularity: str = "bit",
                direction: str = "0to1",
                settings: SimSettings = DEFAULT_SETTINGS) -> list[WlvmRecord]:
    """Margin records for every unit of the array at one granularity.

    Per-cell first-failure levels are computed in one batched sweep (cells
    drop out of the sweep at their first failure, exactly as in the
    unit-by-unit procedure) and units take the minimum over their member
    cells. A unit containing a cell whose evaluation failed is marked
    invalid with a NaN margin.
    """
    values, ok = array.cell_margins(direction, settings)
    records = []
    for u, r, c, members in array.unit_members(granularity):
        good = bool(np.all(ok[members]))
        value = float(np.min(values[members])) if good else float("nan")
        if direction == "0to1":
            records.append(WlvmRecord(u, r, c, wlvm_0to1=value, valid=good))
        else:
            records.append(WlvmRecord(u, r, c, wlvm_1to0=value, valid=good))
    return records


def _wlvm_search_literal(array: ArrayModel, granularity: str, direction: str,
                         settings: SimSettings = DEFAULT_SETTINGS):
    """Reference implementation that replays the sweep unit by unit.

    Every unit is attempted at every level until a level yields zero
    successful unit writes (or the floor is reached); a failing unit
    updates its record to min(j*delta, previous). Used by the test suite
    to pin the batched search; quadratic cost, small arrays only.
    """
    from . import metrics
    from .cell import param_matrix, write_drive
    from .cell import _stable_states_mat

    vdd = settings.vdd
    mat = param_matrix(array.cells)
    v_bl, v_blc = write_drive(direction, vdd)
    va0, vb0, ok0 = _stable_states_mat(
        mat, vdd, 0.0, v_bl, v_blc,
        "S0" if direction == "0to1" else "S1", vdd,
    )
    units = list(array.unit_members(granularity))
    margins = {u: vdd for u, _, _, _ in units}
    levels = metrics._sweep_levels(vdd, array.delta)
    levels = levels[levels >= array.sweep_floor - 1e-12]
    n = array.n_cells
    for j, level in enumerate(levels):
        va, vb, fin = metrics._attempt_levels(
            mat, array.cells.c_node, np.full(n, vdd), np.full(n, v_bl),
            np.full(n, v_blc), np.full(n, level), va0, vb0, settings,
        )
        cell_ok = metrics._success_mask(va, vb, direction, vdd) & fin & ok0
        any_success = False
        for u, _, _, members in units:
            if bool(np.all(cell_ok[members])):
                any_success = True
            else:
                margins[u] = min(j * array.delta, margins[u])
        if not any_success:
            break
    records = []
    for u, r, c, members in units:
        good = bool(np.all(ok0[members]))
        value = margins[u] if good else float("nan")
        if direction == "0to1":
            records.append(WlvmRecord(u, r, c, wlvm_0to1=value, valid=good))
        else:
            records.append(WlvmRecord(u, r, c, wlvm_1to0=value, valid=good))
    return records


def combine_directions(records_0to1: list[WlvmRecord],
                       records_1to0: list[WlvmRecord]) -> list[WlvmRecord]:
    """Merge per-direction record lists into two-direction records."""
    if len(records_0to1) != len(records_1to0):
        raise ValueError("record lists differ in length")
    combined = []
    for a, b in zip(records_0to1, records_1to0):
        if (a.index, a.row, a.col) != (b.index, b.row, b.col):
            raise ValueError(f"record identity mismatch at index {a.index}")
        if a.wlvm_0to1 is None or b.wlvm_1to0 is None:
            raise ValueError("lists must carry directions 0to1 and 1to0 in order")
        combined.append(WlvmRecord(a.index, a.row, a.col,
                                   wlvm_0to1=a.wlvm_0to1,
                                   wlvm_1to0=b.wlvm_1to0,
                                   valid=a.valid and b.valid))
    return combined
