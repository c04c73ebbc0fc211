"""Coupling statistics against frozen constants and numeric integration."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from glassmem import stats
from glassmem.errors import ParameterError


# Values computed once from an independent derivation and frozen.
PDF_AT_ZERO_W1 = 0.28779596773021215
NEGFRAC_W1 = 0.37746985435706565
CORR_W1 = 1.0 / 9.0


def test_pdf_frozen_value():
    assert stats.coupling_pdf(0.0, 1.0) == pytest.approx(PDF_AT_ZERO_W1, rel=1e-12)


def test_negative_fraction_frozen_value():
    assert stats.negative_fraction(1.0) == pytest.approx(NEGFRAC_W1, rel=1e-12)


def test_correlation_frozen_value():
    assert stats.coupling_correlation(1.0) == pytest.approx(CORR_W1, rel=1e-12)


@pytest.mark.parametrize("width", [0.5, 1.0, 2.0, 4.0])
def test_pdf_normalizes(width):
    total, err = integrate.quad(stats.coupling_pdf, -1.0, 1.0, args=(width,), limit=200)
    assert total == pytest.approx(1.0, abs=max(1e-9, 10 * err))


@pytest.mark.parametrize("width", [0.5, 1.0, 2.0])
def test_cdf_integrates_pdf(width):
    for j in (-0.9, -0.3, 0.0, 0.4, 0.8):
        part, err = integrate.quad(stats.coupling_pdf, -1.0, j, args=(width,), limit=200)
        assert stats.coupling_cdf(j, width) == pytest.approx(part, abs=max(1e-8, 10 * err))
    assert stats.coupling_cdf(-1.0, width) == pytest.approx(0.0, abs=1e-12)
    assert stats.coupling_cdf(1.0, width) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("width", [0.5, 1.0, 2.0, 4.0])
def test_moments_match_quadrature(width):
    mean, std = stats.coupling_moments(width)
    m1, _ = integrate.quad(lambda j: j * stats.coupling_pdf(j, width), -1.0, 1.0, limit=200)
    m2, _ = integrate.quad(lambda j: j * j * stats.coupling_pdf(j, width), -1.0, 1.0, limit=200)
    assert mean == pytest.approx(m1, abs=1e-8)
    assert std == pytest.approx(np.sqrt(m2 - m1 * m1), abs=1e-8)


def test_negative_fraction_is_cdf_at_zero():
    for width in (0.5, 1.0, 3.0):
        assert stats.negative_fraction(width) == pytest.approx(
            stats.coupling_cdf(0.0, width), rel=1e-10
        )


def test_sampler_matches_pdf():
    rng = np.random.default_rng(7)
    samples = stats.sample_couplings(1.0, 100000, rng)
    assert samples.min() >= -1.0 and samples.max() <= 1.0
    edges = np.linspace(-1.0, 1.0, 81)
    hist = stats.Histogram.from_samples(samples, edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    exact = stats.Histogram(edges, stats.coupling_pdf(centers, 1.0), len(samples))
    assert stats.hellinger(hist, exact) < 0.03


def test_mc_summary_within_errors():
    rng = np.random.default_rng(11)
    s = stats.coupling_mc_summary(1.0, 200000, rng)
    mean, std = stats.coupling_moments(1.0)
    assert abs(s.mean - mean) < 4 * s.mean_se
    assert abs(s.std - std) < 4 * s.std_se
    assert abs(s.correlation - CORR_W1) < 4 * s.correlation_se
    assert abs(s.negative_fraction - NEGFRAC_W1) < 4 * s.negative_fraction_se


def test_frustration_estimate():
    narrow = stats.frustration_probability(0.5, n_triples=40000, rng=3)
    wide = stats.frustration_probability(4.0, n_triples=40000, rng=3)
    for est in (narrow, wide):
        assert 0.0 <= est.probability <= 1.0
        assert est.standard_error > 0.0
        assert est.n_triples == 40000
    # tightly packed ensembles share mostly positive couplings
    assert narrow.probability < wide.probability
    assert 0.3 < wide.probability < 0.6


def test_semicircle_normalizes():
    total, _ = integrate.quad(stats.semicircle_pdf, -2.0, 2.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-9)
    assert stats.semicircle_pdf(2.5) == 0.0
    assert stats.semicircle_cdf(-2.0) == pytest.approx(0.0, abs=1e-12)
    assert stats.semicircle_cdf(2.0) == pytest.approx(1.0, abs=1e-12)


def test_surmise_normalizes():
    total, _ = integrate.quad(stats.wigner_surmise_pdf, 0.0, 10.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-9)
    mean, _ = integrate.quad(lambda s: s * stats.wigner_surmise_pdf(s), 0.0, 12.0, limit=200)
    assert mean == pytest.approx(1.0, abs=1e-8)


def test_ks_to_surmise_on_exact_draws():
    # invert the surmise cdf: F(s) = 1 - exp(-pi s^2 / 4)
    rng = np.random.default_rng(5)
    u = rng.random(20000)
    draws = np.sqrt(-4.0 * np.log1p(-u) / np.pi)
    assert stats.ks_to_surmise(draws) < 0.02


def test_histogram_requires_data():
    with pytest.raises(ParameterError):
        stats.Histogram.from_samples(np.empty(0), np.linspace(0.0, 1.0, 5))


def test_hellinger_bounds():
    edges = np.linspace(0.0, 1.0, 6)
    rng = np.random.default_rng(0)
    a = stats.Histogram.from_samples(rng.random(500), edges)
    assert stats.hellinger(a, a) == pytest.approx(0.0, abs=1e-12)
    low = stats.Histogram.from_samples(np.full(100, 0.05), edges)
    high = stats.Histogram.from_samples(np.full(100, 0.95), edges)
    assert stats.hellinger(low, high) == pytest.approx(1.0, abs=1e-12)
