"""Distribution-summary helpers."""
import numpy as np
import pytest

from sram_margin_lab.stats import histogram_cdf, pearson, summarize


def test_summarize_frozen():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s.n == 4
    assert s.mean == 2.5
    assert s.std == 1.2909944487358056  # sample std, ddof=1
    assert s.minimum == 1.0
    assert s.maximum == 4.0
    assert s.spread == 3.0


def test_summarize_single_sample():
    s = summarize([0.42])
    assert s.n == 1
    assert s.std == 0.0
    assert s.mean == 0.42
    assert s.spread == 0.0


def test_summarize_accepts_arrays():
    s = summarize(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert s.n == 4
    assert s.mean == 2.5


@pytest.mark.parametrize("bad", [[], [1.0, float("nan")], [float("inf")]])
def test_summarize_rejects_bad_samples(bad):
    with pytest.raises(ValueError):
        summarize(bad)


def test_pearson_frozen():
    r = pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    assert r == pytest.approx(0.8, rel=1e-12)


def test_pearson_limits():
    x = [0.1, 0.4, 0.9, 1.3]
    assert pearson(x, x) == pytest.approx(1.0, rel=1e-12)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1.0, rel=1e-12)
    assert pearson(x, [2.0 * v + 1.0 for v in x]) == pytest.approx(1.0, rel=1e-12)


def test_pearson_errors():
    with pytest.raises(ValueError):
        pearson([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        pearson([1.0], [2.0])
    with pytest.raises(ValueError):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])  # constant set


def test_histogram_cdf_frozen():
    # bins anchor at the sample minimum, so the remaining samples sit
    # mid-bin to keep the expected counts off the edge-rounding knife
    h = histogram_cdf([0.40, 0.415, 0.415, 0.435], 0.01)
    assert h.pdf.size == 4
    assert h.edges.size == 5
    np.testing.assert_allclose(h.pdf, [0.25, 0.5, 0.0, 0.25], atol=1e-15)
    np.testing.assert_allclose(h.cdf, [0.25, 0.75, 0.75, 1.0], atol=1e-15)
    np.testing.assert_allclose(h.edges, 0.40 + 0.01 * np.arange(5), atol=1e-15)


def test_histogram_cdf_identical_samples():
    h = histogram_cdf([0.3, 0.3, 0.3], 0.01)
    assert h.pdf.size == 1
    assert h.pdf[0] == 1.0
    assert h.cdf[0] == 1.0


def test_histogram_cdf_mass_sums_to_one():
    rng = np.random.default_rng(7)
    h = histogram_cdf(rng.normal(0.5, 0.05, size=400), 0.01)
    assert h.pdf.sum() == pytest.approx(1.0, abs=1e-12)
    assert h.cdf[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(h.cdf) >= -1e-15)


def test_histogram_cdf_errors():
    with pytest.raises(ValueError):
        histogram_cdf([1.0, 2.0], 0.0)
    with pytest.raises(ValueError):
        histogram_cdf([], 0.01)
