"""Acceptance gate: one test per shipped behavioural guarantee.

Every test prints a single ``CRITERION nn PASS/FAIL`` line (run pytest with
``-s`` to see them) and then asserts, so the suite both documents and
enforces the guarantees. Heavy inputs (Monte Carlo populations, the sampled
array) are module-scoped fixtures shared across criteria; wall-clock budgets
are checked against the time spent producing the inputs of each criterion.
"""
import csv
import filecmp
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from sram_margin_lab.array import build_array, combine_directions, wlvm_search
from sram_margin_lab.cell import (
    BiasCondition,
    CellState,
    Waveform,
    find_equilibria,
    node_currents,
    node_jacobian,
    simulate_transient,
)
from sram_margin_lab.cli import main
from sram_margin_lab.config import (
    make_design,
    scaled_pullup_design,
    variation_model,
)
from sram_margin_lab.metrics import (
    bwtv,
    bwtv_batch,
    critical_pulse_width,
    wlvm_batch,
    wlvm_cell,
    write_noise_margin,
    wwtv,
    wwtv_batch,
)
from sram_margin_lab.stats import pearson, summarize
from sram_margin_lab.variation import sample_population

DELTA = 0.010
N_MC = 1000
CELL_ORDER = ("E", "A", "B", "C")     # pull-up ratio 0.5, 1.0, ~1.5, 2.0


def _verdict(number: int, ok: bool, description: str) -> None:
    word = "PASS" if ok else "FAIL"
    print(f"\nCRITERION {number:02d} {word}: {description}", flush=True)
    assert ok, f"criterion {number:02d}: {description}"


@pytest.fixture(scope="module")
def nominal_metrics(cfg, settings, ramp):
    t0 = time.perf_counter()
    table = {}
    for name in sorted(cfg.cells):
        design = make_design(cfg, name)
        table[name] = {
            "wnm": write_noise_margin(design, "0to1", settings),
            "bwtv": bwtv(design, ramp, "0to1", settings),
            "wwtv": wwtv(design, ramp, "0to1", settings),
            "wlvm": wlvm_cell(design, DELTA, "0to1", settings),
            "crit_pulse": critical_pulse_width(design, "0to1", settings),
        }
    return table, time.perf_counter() - t0


def _mc_wlvm(cfg, settings, name):
    t0 = time.perf_counter()
    pop = sample_population(make_design(cfg, name), variation_model(cfg),
                            cfg.seed, N_MC)
    values, ok = wlvm_batch(pop, DELTA, "0to1", settings)
    return pop, values, ok, time.perf_counter() - t0


@pytest.fixture(scope="module")
def mc_a_wlvm(cfg, settings):
    return _mc_wlvm(cfg, settings, "A")


@pytest.fixture(scope="module")
def mc_e_wlvm(cfg, settings):
    return _mc_wlvm(cfg, settings, "E")


@pytest.fixture(scope="module")
def mc_d_wlvm(cfg, settings):
    return _mc_wlvm(cfg, settings, "D")


@pytest.fixture(scope="module")
def mc_a_trips(cfg, settings, ramp, mc_a_wlvm):
    pop = mc_a_wlvm[0]
    t0 = time.perf_counter()
    wt, wt_flags, wt_ok = wwtv_batch(pop, ramp, "0to1", settings)
    bt, bt_flags, bt_ok = bwtv_batch(pop, ramp, "0to1", settings)
    elapsed = time.perf_counter() - t0
    return (wt, wt_ok & ~wt_flags), (bt, bt_ok & ~bt_flags), elapsed


@pytest.fixture(scope="module")
def array_64x16(cfg, settings, model, cell_a):
    t0 = time.perf_counter()
    array = build_array(cell_a, model, rows=64, cols=16, seed=cfg.seed,
                        delta=DELTA, word_width=8)
    records = {}
    for granularity in ("bit", "word"):
        per_dir = {d: wlvm_search(array, granularity, d, settings)
                   for d in ("0to1", "1to0")}
        records[granularity] = {
            **per_dir,
            "combined": combine_directions(per_dir["0to1"], per_dir["1to0"]),
        }
    return array, records, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# 01 — margins shrink monotonically as the pull-up strengthens.
# ---------------------------------------------------------------------------

def test_criterion_01_pullup_ratio_trend(nominal_metrics, mc_a_wlvm,
                                         mc_e_wlvm):
    table, t_nom = nominal_metrics
    checks = []
    for metric in ("wlvm", "wnm", "bwtv", "wwtv"):
        values = [table[name][metric].value for name in CELL_ORDER]
        checks.append(all(x > y for x, y in zip(values, values[1:])))
    _, val_a, ok_a, t_a = mc_a_wlvm
    _, val_e, ok_e, t_e = mc_e_wlvm
    checks.append(float(np.mean(val_e[ok_e])) > float(np.mean(val_a[ok_a])))
    elapsed = t_nom + t_a + t_e
    checks.append(elapsed < 120.0)
    _verdict(1, all(checks),
             "wlvm, wnm, bwtv and wwtv each fall strictly over the pull-up "
             "ratio ladder 0.5 / 1.0 / ~1.5 / 2.0 at unit cell ratio, the "
             f"weak-pull-up population mean exceeds the unit-ratio one, and "
             f"the runs took {elapsed:.1f} s (< 120 s)")


# ---------------------------------------------------------------------------
# 02 — the trip voltages track the pulsed margin across variation.
# ---------------------------------------------------------------------------

def test_criterion_02_metric_correlation(mc_a_wlvm, mc_a_trips):
    _, wlvm_values, wlvm_ok, t_wlvm = mc_a_wlvm
    (wt, wt_ok), (bt, bt_ok), t_trips = mc_a_trips
    good = wlvm_ok & wt_ok & bt_ok
    r_ww = pearson(wt[good], wlvm_values[good])
    r_bw = pearson(bt[good], wlvm_values[good])
    elapsed = t_wlvm + t_trips
    ok = r_ww >= 0.8 and r_bw >= 0.8 and elapsed < 600.0
    _verdict(2, ok,
             f"over {int(good.sum())} joint samples r(wwtv, wlvm) = "
             f"{r_ww:.3f} and r(bwtv, wlvm) = {r_bw:.3f} (both >= 0.8), "
             f"computed in {elapsed:.1f} s (< 600 s)")


# ---------------------------------------------------------------------------
# 03 — the quasistatic word-line trip never exceeds the pulsed margin.
# ---------------------------------------------------------------------------

def test_criterion_03_wwtv_bounded_by_wlvm(nominal_metrics):
    table, _ = nominal_metrics
    pairs = {name: (table[name]["wwtv"].value, table[name]["wlvm"].value)
             for name in table}
    ok = all(trip <= margin for trip, margin in pairs.values())
    _verdict(3, ok,
             "current-drop-detected wwtv stays at or below wlvm on every "
             "nominal design: "
             + ", ".join(f"{n} {t:.3f}<= {m:.3f}"
                         for n, (t, m) in sorted(pairs.items())))


# ---------------------------------------------------------------------------
# 04 — every reported margin sits exactly on the word-line step grid.
# ---------------------------------------------------------------------------

def test_criterion_04_quantization(nominal_metrics, mc_a_wlvm, mc_e_wlvm,
                                   mc_d_wlvm, array_64x16):
    table, _ = nominal_metrics
    pool = [table[name]["wlvm"].value for name in table]
    for _, values, ok, _ in (mc_a_wlvm, mc_e_wlvm, mc_d_wlvm):
        pool.extend(values[ok].tolist())
    _, records, _ = array_64x16
    for granularity in records:
        for direction in ("0to1", "1to0"):
            pool.extend(getattr(r, f"wlvm_{direction}")
                        for r in records[granularity][direction] if r.valid)
    exact = [v == round(v / DELTA) * DELTA for v in pool]
    _verdict(4, all(exact),
             f"all {len(pool)} margin outputs (nominal, Monte Carlo and "
             "array records) are exact multiples of the 10 mV step")


# ---------------------------------------------------------------------------
# 05 — coarser units report exactly the minimum over their member cells.
# ---------------------------------------------------------------------------

def test_criterion_05_granularity(array_64x16):
    array, records, elapsed = array_64x16
    bits = records["bit"]["combined"]
    words = records["word"]["combined"]
    bit_values = np.array([r.wlvm for r in bits])
    exact = True
    for u, _, _, members in array.unit_members("word"):
        if words[u].wlvm != bit_values[members].min():
            exact = False
            break
    word_values = np.array([r.wlvm for r in words])
    s_bit, s_word = summarize(bit_values), summarize(word_values)
    ok = (exact and s_word.mean < s_bit.mean and s_word.std < s_bit.std
          and elapsed < 900.0)
    _verdict(5, ok,
             "word records equal the per-word minimum of the bit records "
             f"exactly, and the word-level distribution is tighter and lower "
             f"(mean {s_word.mean * 1e3:.1f} < {s_bit.mean * 1e3:.1f} mV, "
             f"std {s_word.std * 1e3:.1f} < {s_bit.std * 1e3:.1f} mV); "
             f"array search took {elapsed:.1f} s (< 900 s)")


# ---------------------------------------------------------------------------
# 06 — the two write directions decorrelate under mismatch.
# ---------------------------------------------------------------------------

def test_criterion_06_direction_decorrelation(array_64x16):
    _, records, _ = array_64x16
    bits = records["bit"]["combined"]
    good = [r for r in bits if r.valid]
    r_dir = pearson([r.wlvm_0to1 for r in good],
                    [r.wlvm_1to0 for r in good])
    ok = len(good) >= 1024 and abs(r_dir) <= 0.5
    _verdict(6, ok,
             f"|r| between the per-direction margins of {len(good)} sampled "
             f"cells is {abs(r_dir):.3f} (<= 0.5)")


# ---------------------------------------------------------------------------
# 07 — larger devices mismatch less, so margins spread less.
# ---------------------------------------------------------------------------

def test_criterion_07_variability_scaling(mc_a_wlvm, mc_d_wlvm):
    _, val_a, ok_a, _ = mc_a_wlvm
    _, val_d, ok_d, _ = mc_d_wlvm
    s_a = summarize(val_a[ok_a])
    s_d = summarize(val_d[ok_d])
    ok = s_a.n >= 500 and s_d.n >= 500 and s_d.std < s_a.std
    _verdict(7, ok,
             f"margin spread of the 230 nm design (std "
             f"{s_d.std * 1e3:.1f} mV, n={s_d.n}) is strictly below the "
             f"150 nm design ({s_a.std * 1e3:.1f} mV, n={s_a.n})")


# ---------------------------------------------------------------------------
# 08 — static and dynamic writeability agree across the pull-up sweep.
# ---------------------------------------------------------------------------

def test_criterion_08_static_dynamic_consistency(cfg, settings):
    ratios = [0.5 * k for k in range(1, 17)]          # 0.5 .. 8.0
    wnm_values, static_ok, dynamic_ok = [], [], []
    for pr in ratios:
        design = scaled_pullup_design(cfg, "A", pr)
        res_wnm = write_noise_margin(design, "0to1", settings)
        res_cpw = critical_pulse_width(design, "0to1", settings)
        wnm_values.append(res_wnm.value)
        static_ok.append(res_wnm.value > 0.0)
        dynamic_ok.append(math.isfinite(res_cpw.value))
    flagged = []
    failures = []
    for i, pr in enumerate(ratios):
        if static_ok[i] == dynamic_ok[i]:
            continue
        near_sign_change = (
            (i > 0 and (wnm_values[i - 1] > 0.0) != (wnm_values[i] > 0.0))
            or (i + 1 < len(ratios)
                and (wnm_values[i] > 0.0) != (wnm_values[i + 1] > 0.0))
        )
        (flagged if near_sign_change else failures).append(pr)
    ok = (not failures and all(static_ok[:4]) and not static_ok[-1]
          and not dynamic_ok[-1])
    extra = f", boundary designs flagged at pr {flagged}" if flagged else ""
    _verdict(8, ok,
             "static margin sign and existence of a finite writing pulse "
             f"(<= 100 ns) agree at every pull-up ratio 0.5 .. 8.0{extra}")


# ---------------------------------------------------------------------------
# 09 — the six configured write scenarios land as designed.
# ---------------------------------------------------------------------------

def test_criterion_09_scenario_table(tmp_path):
    out = tmp_path / "trajectories"
    code = main(["trajectories", "--out", str(out)])
    with open(out / "outcomes.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    expected = {
        "nominal": "1",
        "reduced_wl": "0",
        "raised_bl": "0",
        "short_pulse": "0",
        "oversized_pullup": "0",
        "oversized_pullup_low_supply": "0",
    }
    got = {r["scenario"]: r["success"] for r in rows}
    stated = {r["scenario"]: r["expected_success"] for r in rows}
    ok = code == 0 and got == expected and stated == expected
    _verdict(9, ok,
             "full-drive write succeeds while reduced word line, raised "
             "bit line, half-critical pulse, oversized pull-up and oversized "
             "pull-up at lowered cell supply all fail")


# ---------------------------------------------------------------------------
# 10 — numerical hygiene of the solvers.
# ---------------------------------------------------------------------------

def test_criterion_10_numerical_hygiene(cfg, settings, cell_a):
    vdd = cfg.vdd
    write = BiasCondition(v_cell=vdd, v_wl=vdd, v_bl=vdd, v_blc=0.0)

    rng = np.random.default_rng(1234)
    h = 1e-6
    worst = 0.0
    for _ in range(10):
        va, vb = rng.uniform(0.05, vdd - 0.05, size=2)
        jac = node_jacobian(cell_a, write, CellState(va, vb))
        fd = np.empty((2, 2))
        for j, (dva, dvb) in enumerate(((h, 0.0), (0.0, h))):
            up = node_currents(cell_a, write, CellState(va + dva, vb + dvb))
            dn = node_currents(cell_a, write, CellState(va - dva, vb - dvb))
            fd[0, j] = (up[0] - dn[0]) / (2.0 * h)
            fd[1, j] = (up[1] - dn[1]) / (2.0 * h)
        scale = np.maximum(np.abs(jac), np.abs(fd))
        worst = max(worst, float(np.max(np.abs(jac - fd) / scale)))
    jac_ok = worst <= 1e-4

    wave = Waveform.write_pulse(vdd, vdd, "0to1", settings)
    t_end = wave.t_end
    coarse = simulate_transient(cell_a, wave, CellState(0.0, vdd), t_end,
                                settings, sample_every=1e-12)
    fine = simulate_transient(cell_a, wave, CellState(0.0, vdd), t_end,
                              replace(settings, dt=0.5 * settings.dt),
                              sample_every=1e-12)
    probes = np.linspace(0.05e-9, t_end - 0.05e-9, 200)
    diff = 0.0
    for signal in ("v_a", "v_b"):
        a = np.interp(probes, coarse.t, getattr(coarse, signal))
        b = np.interp(probes, fine.t, getattr(fine, signal))
        diff = max(diff, float(np.max(np.abs(a - b))))
    step_ok = diff <= 1e-5          # 0.01 mV

    residual = 0.0
    hold = BiasCondition(v_cell=vdd, v_wl=0.0, v_bl=vdd, v_blc=vdd)
    oversized = scaled_pullup_design(cfg, "A", cfg.oversize_pr)
    for design, bias in ((cell_a, hold), (cell_a, write), (oversized, write)):
        for eq in find_equilibria(design, bias):
            residual = max(residual, eq.residual)
    res_ok = residual < 1e-12

    _verdict(10, jac_ok and step_ok and res_ok,
             f"solver Jacobians match independent central differences to "
             f"{worst:.1e} relative (<= 1e-4), halving the time step moves "
             f"trajectories by {diff * 1e3:.1e} mV at most (<= 0.01 mV), and "
             f"equilibrium residuals stay below "
             f"{max(residual, 1e-300):.1e} A (< 1e-12)")


# ---------------------------------------------------------------------------
# 11 — identical configuration, identical bytes.
# ---------------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path):
    ini = tmp_path / "reduced.ini"
    ini.write_text(
        "[montecarlo]\nsamples = 25\n\n"
        "[array]\nrows = 4\ncols = 8\nword_width = 4\n",
        encoding="utf-8",
    )
    commands = (
        ["wnm", "--cells", "A,B"],
        ["mc-correlate"],
        ["wlvm-array"],
    )
    identical = True
    for argv in commands:
        dirs = []
        for tag in ("first", "second"):
            out = tmp_path / f"{argv[0]}-{tag}"
            assert main([argv[0], "--config", str(ini), "--out", str(out),
                         *argv[1:]]) == 0
            dirs.append(out)
        names = sorted(p.name for p in dirs[0].iterdir())
        if names != sorted(p.name for p in dirs[1].iterdir()):
            identical = False
            continue
        for name in names:
            if not filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False):
                identical = False
    _verdict(11, identical,
             "rerunning wnm, mc-correlate and wlvm-array from the same "
             "configuration reproduces every output file byte for byte, "
             "manifest included")
