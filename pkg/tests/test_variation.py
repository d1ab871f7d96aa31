"""Mismatch sampling: area scaling, keyed draws, Monte Carlo driver."""
import numpy as np
import pytest

from sram_margin_lab.cell import design_at
from sram_margin_lab.variation import (
    McOutcome,
    SampleId,
    VariationModel,
    monte_carlo,
    sample_cell,
    sample_population,
    sigma_vth,
    standard_normal,
)

MODEL = VariationModel()


def test_sigma_vth_frozen():
    assert sigma_vth(MODEL, 150e-9, 65e-9) == 0.045573271518764995


def test_sigma_vth_area_scaling():
    # doubling the area divides sigma by sqrt(2)
    s1 = sigma_vth(MODEL, 150e-9, 65e-9)
    s2 = sigma_vth(MODEL, 300e-9, 65e-9)
    assert s2 * np.sqrt(2.0) == pytest.approx(s1, rel=1e-12)
    # wider device of the same length: ratio sqrt(w2/w1)
    s3 = sigma_vth(MODEL, 230e-9, 65e-9)
    assert s3 / s1 == pytest.approx(np.sqrt(150.0 / 230.0), rel=1e-12)


def test_standard_normal_frozen():
    assert standard_normal(7, 3, 2) == -1.796052227292403
    got = standard_normal(7, np.arange(3), 2)
    want = [-0.5456789247736393, -1.3441467301845236, 0.1473144829054274]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)


def test_standard_normal_keying():
    base = standard_normal(11, 5, 0)
    assert standard_normal(11, 5, 0) == base     # repeatable
    assert standard_normal(11, 5, 1) != base     # slot matters
    assert standard_normal(11, 6, 0) != base     # index matters
    assert standard_normal(12, 5, 0) != base     # seed matters


def test_standard_normal_vector_matches_scalars():
    idx = np.arange(64)
    vec = standard_normal(3, idx, 4)
    for i in idx:
        assert vec[i] == standard_normal(3, int(i), 4)


def test_standard_normal_moments():
    z = standard_normal(2024, np.arange(200_000), 0)
    assert abs(float(np.mean(z))) < 0.01
    assert abs(float(np.std(z)) - 1.0) < 0.01


def test_slots_are_uncorrelated():
    n = 100_000
    z0 = standard_normal(2024, np.arange(n), 0)
    z1 = standard_normal(2024, np.arange(n), 1)
    r = float(np.corrcoef(z0, z1)[0, 1])
    assert abs(r) < 0.02


def test_sample_cell_deterministic(cell_a, model):
    d1 = sample_cell(cell_a, model, SampleId(2024, 17))
    d2 = sample_cell(cell_a, model, SampleId(2024, 17))
    for name in ("mn", "mp", "mtx", "mn_b", "mp_b", "mtx_b"):
        assert getattr(d1, name) == getattr(d2, name)
    d3 = sample_cell(cell_a, model, SampleId(2024, 18))
    assert d3.mn.vth != d1.mn.vth


def test_sample_cell_zero_avt_is_identity(cell_a):
    quiet = VariationModel(avt=0.0, width_sigma=0.0)
    d = sample_cell(cell_a, quiet, SampleId(5, 0))
    for name in ("mn", "mp", "mtx", "mn_b", "mp_b", "mtx_b"):
        got = getattr(d, name)
        want = getattr(cell_a, name)
        assert got.vth == want.vth
        assert got.w == want.w


def test_sample_cell_perturbs_vth_only_by_default(cell_a, model):
    d = sample_cell(cell_a, model, SampleId(2024, 3))
    assert d.mn.vth != cell_a.mn.vth
    assert d.mn.w == cell_a.mn.w          # width untouched at width_sigma=0
    assert d.mn.kp == cell_a.mn.kp
    assert d.c_node == cell_a.c_node
    # the six devices draw independently
    shifts = {name: getattr(d, name).vth - getattr(cell_a, name).vth
              for name in ("mn", "mp", "mtx", "mn_b", "mp_b", "mtx_b")}
    assert len(set(shifts.values())) == 6


def test_width_variation_uses_separate_slots(cell_a):
    with_w = VariationModel(avt=4.5e-9, width_sigma=0.05)
    d0 = sample_cell(cell_a, MODEL, SampleId(9, 2))
    d1 = sample_cell(cell_a, with_w, SampleId(9, 2))
    assert d1.mn.w != cell_a.mn.w
    # the vth draw is unchanged by enabling width variation
    assert d1.mn.vth == d0.mn.vth


def test_sample_population_matches_sample_cell(cell_a, model):
    pop = sample_population(cell_a, model, 2024, 5)
    assert pop.batch_size() == 5
    for i in range(5):
        single = sample_cell(cell_a, model, SampleId(2024, i))
        element = design_at(pop, i)
        for name in ("mn", "mp", "mtx", "mn_b", "mp_b", "mtx_b"):
            assert getattr(element, name).vth == getattr(single, name).vth
            assert getattr(element, name).w == getattr(single, name).w


def test_sample_rejects_stacked_nominal(cell_a, model):
    pop = sample_population(cell_a, model, 1, 3)
    with pytest.raises(ValueError):
        sample_cell(pop, model, SampleId(1, 0))
    with pytest.raises(ValueError):
        sample_population(pop, model, 1, 3)


def test_model_validation():
    with pytest.raises(ValueError):
        VariationModel(avt=-1e-9)
    with pytest.raises(ValueError):
        VariationModel(width_sigma=0.3)
    with pytest.raises(ValueError):
        VariationModel(independent=False)


def test_sample_id_validation():
    with pytest.raises(ValueError):
        SampleId(1.5, 0)
    with pytest.raises(ValueError):
        SampleId(1, -1)


def test_monte_carlo_scalar_path(cell_a, model):
    outcomes = monte_carlo(cell_a, model, 4, lambda d: float(d.mn.vth), seed=3)
    assert len(outcomes) == 4
    for i, oc in enumerate(outcomes):
        assert isinstance(oc, McOutcome)
        assert oc.sample == SampleId(3, i)
        assert oc.error is None
        want = sample_cell(cell_a, model, SampleId(3, i)).mn.vth
        assert oc.values == {"value": want}


def test_monte_carlo_isolates_failures(cell_a, model):
    def evaluator(design):
        if design.mn.vth > cell_a.mn.vth:
            raise RuntimeError("synthetic failure")
        return {"m": 1.0}

    outcomes = monte_carlo(cell_a, model, 12, evaluator, seed=3)
    errors = [oc for oc in outcomes if oc.error is not None]
    good = [oc for oc in outcomes if oc.values is not None]
    assert errors and good
    assert all("synthetic failure" in oc.error for oc in errors)
    assert all(oc.values == {"m": 1.0} for oc in good)


def test_monte_carlo_batch_path_matches_scalar(cell_a, model):
    class Evaluator:
        def __call__(self, design):
            return {"vth_mn": float(design.mn.vth),
                    "vth_mp_b": float(design.mp_b.vth)}

        def evaluate_batch(self, stacked):
            return {"vth_mn": np.asarray(stacked.mn.vth),
                    "vth_mp_b": np.asarray(stacked.mp_b.vth)}

    ev = Evaluator()
    batched = monte_carlo(cell_a, model, 6, ev, seed=8)
    scalar = monte_carlo(cell_a, model, 6, ev.__call__, seed=8)
    for b, s in zip(batched, scalar):
        assert b.sample == s.sample
        assert b.values == s.values


def test_monte_carlo_batch_flags_nonfinite(cell_a, model):
    class Evaluator:
        def __call__(self, design):
            return {"m": 0.0}

        def evaluate_batch(self, stacked):
            vals = np.zeros(stacked.batch_size())
            vals[1] = np.nan
            return {"m": vals}

    outcomes = monte_carlo(cell_a, model, 3, Evaluator(), seed=1)
    assert outcomes[0].error is None
    assert outcomes[1].values is None and "m" in outcomes[1].error
    assert outcomes[2].error is None


def test_monte_carlo_validates_n(cell_a, model):
    with pytest.raises(ValueError):
        monte_carlo(cell_a, model, 0, lambda d: 0.0)
