"""Covariance construction: sample, pairwise-complete with PSD repair, CSV IO."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from csskit import covest, simlab
from csskit.errors import HasMissing, InsufficientOverlap, ZeroVariance

NAN = float("nan")


def test_sample_cov_divisor_n():
    # Two points (0,0), (2,2): deviations +-1 in each coordinate, so every
    # entry is 1 under the divisor-n convention (n-1 would give 2).
    x = np.array([[0.0, 0.0], [2.0, 2.0]])
    assert_allclose(covest.sample_cov(x), np.ones((2, 2)))


def test_sample_cov_rejects_missing():
    with pytest.raises(HasMissing):
        covest.sample_cov(np.array([[1.0, NAN], [2.0, 3.0]]))


def test_pairwise_hand_example():
    # Column means over observed rows: 3 and 4.  The (0,1) entry averages
    # over the two complete rows only, but keeps the per-column means.
    x = np.array([[1.0, 2.0], [3.0, NAN], [NAN, 4.0], [5.0, 6.0]])
    psi, counts = covest.pairwise_cov(x)
    assert_allclose(psi, np.array([[8.0 / 3.0, 4.0], [4.0, 8.0 / 3.0]]))
    assert_allclose(counts, np.array([[3, 2], [2, 3]]))
    # the raw estimate is indefinite; projection clamps its negative mode
    fixed = covest.pairwise_cov_psd(x)
    assert_allclose(fixed, np.full((2, 2), 10.0 / 3.0), atol=1e-12)
    assert np.min(np.linalg.eigvalsh(fixed)) >= -1e-10


def test_pairwise_equals_sample_when_complete():
    rng = np.random.default_rng(113)
    x = rng.standard_normal((15, 4))
    want = covest.sample_cov(x)
    psi, counts = covest.pairwise_cov(x)
    assert np.array_equal(psi, want)  # bit-for-bit
    assert np.array_equal(covest.pairwise_cov_psd(x), want)
    assert np.all(counts == 15)


def test_pairwise_overlap_errors():
    with pytest.raises(InsufficientOverlap):
        covest.pairwise_cov(np.array([[1.0, NAN], [2.0, NAN], [3.0, 4.0]]))
    # columns fine on their own, but the pair never observed together
    x = np.array([[1.0, NAN], [2.0, NAN], [NAN, 1.0], [NAN, 2.0]])
    with pytest.raises(InsufficientOverlap):
        covest.pairwise_cov(x)


def test_pairwise_psd_floor():
    rng = np.random.default_rng(127)
    x = rng.standard_normal((60, 6)) @ rng.standard_normal((6, 6))
    mask = rng.random((60, 6)) < 0.25
    x = np.where(mask, np.nan, x)
    got = covest.pairwise_cov_psd(x)
    assert np.min(np.linalg.eigvalsh(got)) >= -1e-10
    assert_allclose(got, got.T)


def test_pairwise_consistency_under_mar():
    # Statistical sanity at n=10^4 with 5% missingness: relative Frobenius
    # error against the population covariance stays under 10%.
    spec = simlab.missing_a1_spec(mar_prob=0.05)
    pop = simlab.population_cov(spec)
    data = simlab.sample(spec, 10_000, seed=[2024, 0])
    got = covest.pairwise_cov_psd(data)
    rel = np.linalg.norm(got - pop) / np.linalg.norm(pop)
    assert rel <= 0.1


def test_to_correlation():
    sigma = np.array([[4.0, 2.0], [2.0, 25.0]])
    corr = covest.to_correlation(sigma)
    assert_allclose(np.diag(corr), [1.0, 1.0])
    assert corr[0, 1] == pytest.approx(2.0 / 10.0)
    with pytest.raises(ZeroVariance):
        covest.to_correlation(np.diag([1.0, 0.0]))


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(131)
    g = rng.standard_normal((8, 5))
    sigma = g.T @ g / 8
    path = tmp_path / "cov.csv"
    covest.write_matrix_csv(str(path), sigma)
    back = covest.read_cov_csv(str(path))
    assert np.array_equal(back, (sigma + sigma.T) / 2)


def test_read_data_csv_missing_tokens(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b,c\n1.0,,3.0\n2.0,NA,NaN\n4.0,5.0,6.0\n")
    data = covest.read_data_csv(str(path), header=True)
    values = np.asarray(data.values, dtype=float)
    assert values.shape == (3, 3)
    assert np.isnan(values[0, 1]) and np.isnan(values[1, 1]) and np.isnan(values[1, 2])
    assert values[2, 1] == 5.0


def test_diagnostics_keys():
    x = np.array([[1.0, 2.0], [3.0, NAN], [NAN, 4.0], [5.0, 6.0]])
    diag = covest.covest_diagnostics(x)
    assert diag["missing_fraction"] == pytest.approx(0.25)
    assert diag["min_overlap"] == 2
    assert diag["max_overlap"] == 3
    assert diag["min_eig_before"] < 0 < diag["min_eig_after"] + 1e-10
