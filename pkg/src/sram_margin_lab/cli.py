"""Command-line interface: margin experiments that emit CSV files.

Every subcommand reads one configuration file (all defaults built in),
writes its tables under an output directory and finishes with a
``manifest.json`` listing the configuration hash and the files produced.
Outputs contain no timestamps or machine identifiers, so a rerun with the
same configuration reproduces every byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .array import build_array, combine_directions, wlvm_search
from .cell import BiasCondition, hold_bias, solve_vtc
from .config import (
    ExperimentConfig,
    config_hash,
    default_config,
    load_config,
    make_design,
    ramp_config,
    scaled_pullup_design,
    sim_settings,
    variation_model,
)
from .errors import SramMarginError
from .metrics import (
    DIRECTIONS,
    attempt_write,
    bwtv,
    bwtv_batch,
    critical_pulse_width,
    wlvm_batch,
    wlvm_cell,
    write_noise_margin,
    wwtv,
    wwtv_batch,
)
from .stats import histogram_cdf, pearson, summarize
from .variation import monte_carlo, sample_population

__all__ = ["main", "load_config"]


def _fmt(x) -> str:
    """Deterministic numeric formatting for CSV cells."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v
                             for v in row])


def _write_manifest(outdir: Path, command: str, cfg: ExperimentConfig,
                    files: list[str], extras: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config_sha256": config_hash(cfg),
        "outputs": sorted(files),
        "version": __version__,
    }
    if extras:
        manifest["results"] = extras
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cell_list(cfg: ExperimentConfig, arg: str | None) -> list[str]:
    if arg is None:
        return sorted(cfg.cells)
    names = [s.strip() for s in arg.split(",") if s.strip()]
    for name in names:
        if name not in cfg.cells:
            raise SramMarginError(f"unknown cell '{name}'")
    return names


def _sorted_summary_row(label: str, values) -> list:
    s = summarize(values)
    return [label, s.n, s.mean, s.std, s.minimum, s.maximum, s.spread]


_SUMMARY_HEADER = ["label", "n", "mean_V", "std_V", "min_V", "max_V", "spread_V"]


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def _run_vtc(cfg, args, outdir: Path) -> list[str]:
    vdd = cfg.vdd
    grid = np.arange(0.0, vdd + 0.5e-3, 1e-3)
    files = []
    for name in _cell_list(cfg, args.cells):
        design = make_design(cfg, name)
        for label, bias in (
            ("hold", hold_bias(vdd)),
            ("write", BiasCondition(v_cell=vdd, v_wl=vdd, v_bl=0.0, v_blc=vdd)),
        ):
            f_a = solve_vtc(design, bias, "A", grid)
            f_b = solve_vtc(design, bias, "B", grid)
            fname = f"vtc_{label}_{name}.csv"
            _write_csv(outdir / fname,
                       ["v_in_V", "v_a_of_vb_V", "v_b_of_va_V"],
                       zip(grid, f_a, f_b))
            files.append(fname)
    return files


def _trajectory_rows(trajectory, decimation: float):
    t = trajectory.t
    keep = np.zeros(t.size, dtype=bool)
    keep[0] = True
    last = t[0]
    for i in range(1, t.size):
        if t[i] - last >= decimation - 1e-15:
            keep[i] = True
            last = t[i]
    keep[-1] = True
    return zip(t[keep], trajectory.v_a[keep], trajectory.v_b[keep],
               trajectory.i_bl[keep], trajectory.i_blc[keep])


def _run_trajectories(cfg, args, outdir: Path) -> list[str]:
    settings = sim_settings(cfg)
    vdd = cfg.vdd
    base = args.cell or "A"
    design = make_design(cfg, base)
    oversized = scaled_pullup_design(cfg, base, cfg.oversize_pr)
    direction = args.direction
    crit = critical_pulse_width(design, direction, settings)
    scenarios = [
        ("nominal", design, dict(), True),
        ("reduced_wl", design, dict(v_wl_level=cfg.reduced_wl), False),
        ("raised_bl", design,
         dict(v_blc=cfg.raised_bl) if direction == "0to1"
         else dict(v_bl=cfg.raised_bl), False),
        ("short_pulse", design,
         dict(pulse_width=cfg.short_pulse_fraction * crit.value), False),
        ("oversized_pullup", oversized, dict(), False),
        ("oversized_pullup_low_supply", oversized,
         dict(v_cell=cfg.vcell_fraction * vdd), False),
    ]
    files = []
    outcome_rows = []
    for name, d, kw, expected in scenarios:
        level = kw.pop("v_wl_level", vdd)
        success, trajectory = attempt_write(d, level, direction, settings, **kw)
        fname = f"trajectory_{name}.csv"
        _write_csv(outdir / fname,
                   ["t_s", "v_a_V", "v_b_V", "i_bl_A", "i_blc_A"],
                   _trajectory_rows(trajectory, cfg.decimation))
        files.append(fname)
        outcome_rows.append([name, direction, int(expected), int(success)])
    _write_csv(outdir / "outcomes.csv",
               ["scenario", "direction", "expected_success", "success"],
               outcome_rows)
    files.append("outcomes.csv")
    return files


def _run_metric_table(cfg, args, outdir: Path, metric: str) -> list[str]:
    settings = sim_settings(cfg)
    ramp = ramp_config(cfg)
    direction = args.direction
    rows = []
    files = []
    for name in _cell_list(cfg, args.cells):
        design = make_design(cfg, name)
        if metric == "wnm":
            res = write_noise_margin(design, direction, settings)
        elif metric == "bwtv":
            res = bwtv(design, ramp, direction, settings)
        elif metric == "wwtv":
            res = wwtv(design, ramp, direction, settings)
        elif metric == "crit_pulse":
            res = critical_pulse_width(design, direction, settings)
        else:
            res = wlvm_cell(design, cfg.delta, direction, settings,
                            full_sweep=args.full_sweep)
        rows.append([name, direction, res.metric, res.value,
                     int(res.not_writeable)])
        if res.trace and metric in ("bwtv", "wwtv"):
            fname = f"trace_{metric}_{name}.csv"
            _write_csv(outdir / fname, ["drive_V", "i_monitored_A", "flipped"],
                       res.trace)
            files.append(fname)
        elif res.trace and metric == "wlvm":
            fname = f"sweep_{name}.csv"
            _write_csv(outdir / fname, ["v_wl_V", "success"],
                       [(lvl, int(okr)) for lvl, okr in res.trace])
            files.append(fname)
    unit = "s" if metric == "crit_pulse" else "V"
    _write_csv(outdir / "metrics.csv",
               ["cell", "direction", "metric", f"value_{unit}", "not_writeable"],
               rows)
    files.append("metrics.csv")
    return files


def _run_pr_sweep(cfg, args, outdir: Path) -> list[str]:
    settings = sim_settings(cfg)
    ramp = ramp_config(cfg)
    direction = args.direction
    designs = []
    for name in sorted(cfg.cells):
        d = make_design(cfg, name)
        designs.append((name, d))
    if args.pr:
        for pr in (float(s) for s in args.pr.split(",") if s.strip()):
            designs.append((f"A*pr{_fmt(pr)}", scaled_pullup_design(cfg, "A", pr)))
    designs.sort(key=lambda item: (float(item[1].pullup_ratio), item[0]))
    rows = []
    for name, design in designs:
        res_wnm = write_noise_margin(design, direction, settings)
        res_bwtv = bwtv(design, ramp, direction, settings)
        res_wwtv = wwtv(design, ramp, direction, settings)
        res_wlvm = wlvm_cell(design, cfg.delta, direction, settings)
        res_cpw = critical_pulse_width(design, direction, settings)
        rows.append([
            name, float(design.pullup_ratio), float(design.cell_ratio),
            res_wnm.value, res_bwtv.value, res_wwtv.value, res_wlvm.value,
            res_cpw.value,
        ])
    _write_csv(outdir / "pr_sweep.csv",
               ["cell", "pr", "cr", "wnm_V", "bwtv_V", "wwtv_V", "wlvm_V",
                "crit_pulse_s"],
               rows)
    return ["pr_sweep.csv"]


class JointMetricEvaluator:
    """Per-sample wlvm, wwtv and bwtv, batched over a population."""

    def __init__(self, cfg: ExperimentConfig, direction: str):
        self.cfg = cfg
        self.direction = direction
        self.settings = sim_settings(cfg)
        self.ramp = ramp_config(cfg)

    def __call__(self, design):
        return {
            "wlvm": wlvm_cell(design, self.cfg.delta, self.direction,
                              self.settings).value,
            "wwtv": wwtv(design, self.ramp, self.direction, self.settings).value,
            "bwtv": bwtv(design, self.ramp, self.direction, self.settings).value,
        }

    def evaluate_batch(self, stacked):
        wl, ok_w = wlvm_batch(stacked, self.cfg.delta, self.direction,
                              self.settings)
        wt, _, ok_t = wwtv_batch(stacked, self.ramp, self.direction,
                                 self.settings)
        bt, _, ok_b = bwtv_batch(stacked, self.ramp, self.direction,
                                 self.settings)
        return {
            "wlvm": np.where(ok_w, wl, np.nan),
            "wwtv": np.where(ok_t, wt, np.nan),
            "bwtv": np.where(ok_b, bt, np.nan),
        }


def _run_mc_correlate(cfg, args, outdir: Path) -> list[str]:
    base = args.cell or "A"
    nominal = make_design(cfg, base)
    evaluator = JointMetricEvaluator(cfg, args.direction)
    outcomes = monte_carlo(nominal, variation_model(cfg), cfg.samples,
                           evaluator, seed=cfg.seed)
    rows = []
    table = {"wlvm": [], "wwtv": [], "bwtv": []}
    for oc in outcomes:
        if oc.values is None:
            rows.append([oc.sample.index, "nan", "nan", "nan", oc.error])
            continue
        rows.append([oc.sample.index, oc.values["wwtv"], oc.values["bwtv"],
                     oc.values["wlvm"], ""])
        for k in table:
            table[k].append(oc.values[k])
    _write_csv(outdir / "samples.csv",
               ["sample", "wwtv_V", "bwtv_V", "wlvm_V", "error"], rows)
    r_ww = pearson(table["wwtv"], table["wlvm"])
    r_bw = pearson(table["bwtv"], table["wlvm"])
    _write_csv(outdir / "correlations.csv", ["pair", "pearson_r"],
               [["wwtv_vs_wlvm", r_ww], ["bwtv_vs_wlvm", r_bw]])
    summary = [_sorted_summary_row(k, v) for k, v in sorted(table.items())]
    _write_csv(outdir / "summary.csv", _SUMMARY_HEADER, summary)
    files = ["samples.csv", "correlations.csv", "summary.csv"]
    return files


def _records_rows(records):
    for rec in records:
        yield [rec.index, rec.row, rec.col,
               rec.wlvm_0to1 if rec.wlvm_0to1 is not None else "",
               rec.wlvm_1to0 if rec.wlvm_1to0 is not None else "",
               rec.wlvm if rec.valid else float("nan"),
               int(rec.valid)]


_RECORD_HEADER = ["index", "row", "col", "wlvm_0to1_V", "wlvm_1to0_V",
                  "wlvm_V", "valid"]


def _run_wlvm_array(cfg, args, outdir: Path) -> list[str]:
    settings = sim_settings(cfg)
    nominal = make_design(cfg, args.cell or "A")
    array = build_array(nominal, variation_model(cfg), cfg.rows, cfg.cols,
                        cfg.seed, delta=cfg.delta, sweep_floor=cfg.sweep_floor,
                        word_width=cfg.word_width)
    files = []
    per_gran = {}
    for granularity in ("bit", "word"):
        recs = {
            d: wlvm_search(array, granularity, d, settings) for d in DIRECTIONS
        }
        combined = combine_directions(recs["0to1"], recs["1to0"])
        per_gran[granularity] = combined
        fname = f"records_{granularity}.csv"
        _write_csv(outdir / fname, _RECORD_HEADER, _records_rows(combined))
        files.append(fname)

    summary_rows = []
    for granularity, combined in per_gran.items():
        valid = [r for r in combined if r.valid]
        for d in DIRECTIONS:
            vals = [getattr(r, f"wlvm_{d}") for r in valid]
            summary_rows.append(_sorted_summary_row(f"{granularity}_{d}", vals))
        summary_rows.append(
            _sorted_summary_row(f"{granularity}_combined",
                                [r.wlvm for r in valid])
        )
    _write_csv(outdir / "summary.csv", _SUMMARY_HEADER, summary_rows)
    files.append("summary.csv")

    bits = [r for r in per_gran["bit"] if r.valid]
    for label, vals in (
        ("0to1", [r.wlvm_0to1 for r in bits]),
        ("1to0", [r.wlvm_1to0 for r in bits]),
        ("combined", [r.wlvm for r in bits]),
    ):
        hist = histogram_cdf(vals, cfg.delta)
        fname = f"hist_bit_{label}.csv"
        _write_csv(outdir / fname, ["bin_lo_V", "bin_hi_V", "pdf", "cdf"],
                   zip(hist.edges[:-1], hist.edges[1:], hist.pdf, hist.cdf))
        files.append(fname)

    r_dir = pearson([r.wlvm_0to1 for r in bits], [r.wlvm_1to0 for r in bits])
    _write_csv(outdir / "scatter_bit.csv",
               ["index", "wlvm_0to1_V", "wlvm_1to0_V"],
               [[r.index, r.wlvm_0to1, r.wlvm_1to0] for r in bits])
    _write_csv(outdir / "correlations.csv", ["pair", "pearson_r"],
               [["wlvm_0to1_vs_1to0", r_dir]])
    files += ["scatter_bit.csv", "correlations.csv"]

    words = [r for r in per_gran["word"] if r.valid]
    _write_csv(outdir / "word_by_address.csv",
               ["word", "row", "col", "wlvm_V"],
               [[r.index, r.row, r.col, r.wlvm] for r in words])
    files.append("word_by_address.csv")
    return files


def _run_cell_compare(cfg, args, outdir: Path) -> list[str]:
    settings = sim_settings(cfg)
    files = []
    rows = []
    for name in _cell_list(cfg, args.cells):
        nominal = make_design(cfg, name)
        stacked = sample_population(nominal, variation_model(cfg), cfg.seed,
                                    cfg.samples)
        values, ok = wlvm_batch(stacked, cfg.delta, args.direction, settings)
        good = values[ok]
        rows.append(_sorted_summary_row(name, good))
        hist = histogram_cdf(good, cfg.delta)
        fname = f"cdf_{name}.csv"
        _write_csv(outdir / fname, ["bin_lo_V", "bin_hi_V", "pdf", "cdf"],
                   zip(hist.edges[:-1], hist.edges[1:], hist.pdf, hist.cdf))
        files.append(fname)
    _write_csv(outdir / "compare.csv", _SUMMARY_HEADER, rows)
    files.append("compare.csv")
    return files


# ---------------------------------------------------------------------------
# Argument parsing and dispatch.
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sram-margin-lab",
        description="Write-stability characterisation of six-transistor "
                    "bit cells: margin metrics, variation sweeps and "
                    "array-level margin maps, all emitted as CSV.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, **extra):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None,
                       help="configuration file (INI); defaults apply if omitted")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (default: out-<command>)")
        if extra.get("direction", True):
            p.add_argument("--direction", choices=list(DIRECTIONS),
                           default="0to1", help="write direction")
        return p

    p = add("vtc", "transfer curves (hold and write bias) per cell",
            direction=False)
    p.add_argument("--cells", type=str, default=None,
                   help="comma-separated cell names (default: all)")

    p = add("trajectories", "six write-attempt scenarios, one trajectory each")
    p.add_argument("--cell", type=str, default=None, help="base cell (default A)")

    for metric in ("wnm", "bwtv", "wwtv", "crit-pulse", "wlvm-cell"):
        p = add(metric, f"{metric} for the selected cells")
        p.add_argument("--cells", type=str, default=None,
                       help="comma-separated cell names (default: all)")
        if metric == "wlvm-cell":
            p.add_argument("--full-sweep", action="store_true",
                           help="record every level, not only up to the failure")

    p = add("pr-sweep", "all metrics across the cell table, ordered by "
                        "pull-up ratio")
    p.add_argument("--pr", type=str, default=None,
                   help="extra pull-up ratios applied to cell A geometry, "
                        "comma-separated")

    p = add("mc-correlate", "Monte Carlo of wlvm, wwtv, bwtv on one cell "
                            "plus their correlations")
    p.add_argument("--cell", type=str, default=None, help="cell name (default A)")

    p = add("wlvm-array", "array margin search, bit and word granularity, "
                          "both directions", direction=False)
    p.add_argument("--cell", type=str, default=None, help="cell name (default A)")

    p = add("cell-compare", "margin distributions of the cell table under "
                            "variation")
    p.add_argument("--cells", type=str, default=None,
                   help="comma-separated cell names (default: all)")
    return parser


_RUNNERS = {
    "vtc": _run_vtc,
    "trajectories": _run_trajectories,
    "wnm": lambda cfg, args, outdir: _run_metric_table(cfg, args, outdir, "wnm"),
    "bwtv": lambda cfg, args, outdir: _run_metric_table(cfg, args, outdir, "bwtv"),
    "wwtv": lambda cfg, args, outdir: _run_metric_table(cfg, args, outdir, "wwtv"),
    "crit-pulse": lambda cfg, args, outdir: _run_metric_table(cfg, args, outdir,
                                                              "crit_pulse"),
    "wlvm-cell": lambda cfg, args, outdir: _run_metric_table(cfg, args, outdir,
                                                             "wlvm"),
    "pr-sweep": _run_pr_sweep,
    "mc-correlate": _run_mc_correlate,
    "wlvm-array": _run_wlvm_array,
    "cell-compare": _run_cell_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
    except SramMarginError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out) if args.out else Path(f"out-{args.command}")
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        files = _RUNNERS[args.command](cfg, args, outdir)
    except SramMarginError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(outdir, args.command, cfg, files)
    print(f"{args.command}: wrote {len(files)} file(s) to {outdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
