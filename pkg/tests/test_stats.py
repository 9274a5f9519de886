import numpy as np
import pytest
from hypothesis import given, settings, strategies as st_
from scipy import special

from obstruction_walks.stats import (
    EmpiricalDistribution, empirical_moments, gaussian_moment, ks_distance, ks_two_sample)

samples = st_.lists(st_.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60)
weights = st_.floats(0.01, 10.0)


def test_ks_examples():
    assert ks_distance([0.0], lambda x: (np.asarray(x) >= 0).astype(float)) == 0
    assert ks_distance([0.0], special.ndtr) == pytest.approx(0.5)
    z = np.random.default_rng(0).standard_normal(10**5)
    assert ks_distance(z, special.ndtr) < 0.01


def test_ks_against_scipy():
    from scipy import stats
    x = np.random.default_rng(1).standard_normal(500)
    assert ks_distance(x, special.ndtr) == pytest.approx(stats.kstest(x, "norm").statistic)
    y = np.random.default_rng(2).standard_normal(300) + 0.2
    assert ks_two_sample(x, y) == pytest.approx(stats.ks_2samp(x, y).statistic)


@settings(max_examples=100, deadline=None)
@given(samples)
def test_ecdf_right_continuous_monotone(values):
    emp = EmpiricalDistribution.from_values(values)
    xs = np.sort(np.concatenate([emp.values, emp.values - 1e-9, [-2e3, 2e3]]))
    F = emp.cdf(xs)
    assert np.all(np.diff(F) >= 0)
    assert F[0] == 0 and F[-1] == 1
    assert np.array_equal(emp.cdf(emp.values), emp.cdf(emp.values + 0.0))


@settings(max_examples=100, deadline=None)
@given(samples)
def test_ks_invariant_under_monotone_map(values):
    x = np.asarray(values)
    a = ks_distance(x, special.ndtr)
    # strictly increasing map applied to sample and cdf
    g = lambda v: np.sinh(np.asarray(v) / 100.0)  # noqa: E731
    g_inv = lambda v: 100.0 * np.arcsinh(np.asarray(v))  # noqa: E731
    b = ks_distance(g(x), lambda v: special.ndtr(g_inv(v)))
    assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(samples, samples)
def test_merge_halves_equals_full(a, b):
    full = EmpiricalDistribution.from_values(a + b)
    merged = EmpiricalDistribution.from_values(a).merge(EmpiricalDistribution.from_values(b))
    other = EmpiricalDistribution.from_values(b).merge(EmpiricalDistribution.from_values(a))
    assert np.array_equal(full.values, merged.values)
    assert np.array_equal(merged.values, other.values)


@settings(max_examples=100, deadline=None)
@given(st_.lists(st_.tuples(st_.floats(-10, 10), weights), min_size=1, max_size=20),
       st_.lists(st_.tuples(st_.floats(-10, 10), weights), min_size=1, max_size=20),
       st_.lists(st_.tuples(st_.floats(-10, 10), weights), min_size=1, max_size=20))
def test_weighted_merge_associative_commutative(a, b, c):
    def emp(pairs):
        v, w = zip(*pairs)
        return EmpiricalDistribution.from_values(v, w)

    xs = np.linspace(-11, 11, 97)
    left = emp(a).merge(emp(b)).merge(emp(c))
    right = emp(a).merge(emp(c).merge(emp(b)))
    np.testing.assert_allclose(left.cdf(xs), right.cdf(xs), atol=1e-12)


def test_moments_examples():
    assert empirical_moments([2.0] * 10, 4, mean=1.0, scale=2.0) == \
        pytest.approx([0.5, 0.25, 0.125, 0.0625])
    z = np.random.default_rng(3).standard_normal(10**5)
    m = empirical_moments(z, 4, mean=0.0, scale=1.0)
    assert abs(m[1] - 1) < 0.02 and abs(m[3] - 3) < 0.15
    sym = np.concatenate([z, -z])
    m = empirical_moments(sym, 8)
    assert all(abs(m[r]) < 1e-10 for r in (0, 2, 4, 6))
    with pytest.raises(ValueError):
        empirical_moments(z, 9)


def test_gaussian_moments():
    assert [gaussian_moment(r) for r in range(1, 9)] == [0, 1, 0, 3, 0, 15, 0, 105]


def test_to_csv():
    emp = EmpiricalDistribution.from_values([1.0, 1.0, 2.0, 3.0])
    lines = emp.to_csv().splitlines()
    assert lines == ["value,cumulative_probability", "1.0,0.5", "2.0,0.75", "3.0,1.0"]
