import itertools
import math

import numpy as np
import pytest

from obstruction_walks import limit_laws as laws
from obstruction_walks.errors import ValidationError
from obstruction_walks.experiments import walk_ensemble
from obstruction_walks.fibration import SigmaTable
from obstruction_walks.montecarlo import (
    BernoulliSampler, mc_functional_distribution, sample_bernoulli_profile, sample_walk,
    stream, walk_functionals, walk_stay_probability)
from obstruction_walks.stats import ks_distance


def test_streams_are_reproducible_and_distinct():
    a = stream(5, 1, 2).random(4)
    assert np.array_equal(a, stream(5, 1, 2).random(4))
    assert not np.array_equal(a, stream(5, 1, 3).random(4))
    assert not np.array_equal(a, stream(6, 1, 2).random(4))


def _zero_table(sig):
    z = np.zeros_like(sig.sigma)
    return SigmaTable(sig.family, sig.limit, sig.primes, z.astype(np.int64), z, z, z, z)


def test_zero_sigma_gives_empty_profiles(sig_st):
    sampler = BernoulliSampler(_zero_table(sig_st), 10**6)
    assert all(len(r) == 0 for r in sampler.sample_many(1000, stream(0, 0)))
    assert sample_bernoulli_profile(_zero_table(sig_st), 10**5, stream(0, 1)).omega == 0


def test_bernoulli_mean_and_variance(sig_st):
    B = 10**6
    rows = BernoulliSampler(sig_st, B).sample_many(10**4, stream(11, 0))
    w = np.array([len(r) for r in rows], dtype=float)
    n = sig_st.count_le(B)
    S = sig_st.prefix_S(B)
    V = float(np.sum(sig_st.sigma[:n] * (1 - sig_st.sigma[:n])))
    assert abs(w.mean() - S) < 3 * math.sqrt(S) / 100
    assert abs(w.mean() - S) < 3 * math.sqrt(V / len(w))
    # SE of the sample variance, with the fourth central moment estimated
    se_var = math.sqrt(np.mean((w - w.mean()) ** 4) / len(w))
    assert abs(w.var() - V) < 3 * se_var


def test_bernoulli_inclusion_frequencies(sig_st):
    rows = BernoulliSampler(sig_st, 10**4).sample_many(10**5, stream(12, 0))
    n = len(rows)
    for p in (2, 3, 7, 11, 43, 1019, 9887):
        freq = sum(p in set(r.tolist()) for r in rows) / n
        s = sig_st.sigma_at(p)
        assert abs(freq - s) < 4 * math.sqrt(s * (1 - s) / n) + 1e-12, p
    freq3 = sum(3 in set(r.tolist()) for r in rows) / n
    assert abs(freq3 - 0.5) < 0.005
    # rows are sorted and only contain primes with sigma_p > 0
    for r in rows[:1000]:
        assert np.all(np.diff(r) > 0)
        assert all(sig_st.sigma_at(int(q)) > 0 for q in r)


def test_bernoulli_independence(sig_st):
    rows = BernoulliSampler(sig_st, 100).sample_many(10**5, stream(13, 0))
    a = np.array([3 in r for r in rows], dtype=float)
    b = np.array([7 in r for r in rows], dtype=float)
    cov = np.mean(a * b) - a.mean() * b.mean()
    assert abs(cov) < 4 * math.sqrt(0.25 * 0.1875 / len(rows))


def test_sample_walk_single_step():
    for seed in range(20):
        w = sample_walk(1, 2, stream(seed, 0))
        assert w.values[0] == 0 and abs(w.values[1]) == 1
    with pytest.raises(ValidationError):
        sample_walk(3, 10, stream(0, 0))


def test_walk_endpoint_moments():
    ends = walk_ensemble(10**5, 10**4, 0).endpoint
    assert abs(ends.mean()) < 0.01
    assert abs(ends.var() - 1) < 0.02


def test_walk_max_and_occupation_laws():
    walks = walk_ensemble(10**5, 10**4, 0)
    assert ks_distance(walks.max, laws.half_normal_cdf) < 0.01
    assert ks_distance(walks.occupation, laws.arcsine_cdf_clipped) < 0.02


def test_walk_functionals_independent_of_threads():
    a = walk_functionals(1200, 200, 3, chunk=500, threads=1)
    b = walk_functionals(1200, 200, 3, chunk=500, threads=2)
    for f in a._FIELDS:
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_walk_functionals_match_direct_path():
    """The vectorized functionals agree with a walk rebuilt from the same bits."""
    from obstruction_walks.montecarlo import _steps
    n_walks, n = 7, 50
    fx = walk_functionals(n_walks, n, 9, chunk=n_walks)
    S = np.cumsum(_steps(stream(9, 1, 0), (n_walks, n)), axis=1)
    assert np.allclose(fx.max, np.maximum(S.max(axis=1), 0) / math.sqrt(n))
    assert np.allclose(fx.l2, (S.astype(float) ** 2).sum(axis=1) / n**2)
    assert np.allclose(fx.occupation, (S > 0).mean(axis=1))


def test_mc_functional_distribution():
    emp = mc_functional_distribution(lambda w: 2.5, lambda rng: None, 100, stream(0, 0))
    assert np.all(emp.values == 2.5)
    assert emp.cdf(2.4999) == 0 and emp.cdf(2.5) == 1
    emp = mc_functional_distribution(lambda w: float(np.max(w.values)),
                                     lambda rng: sample_walk(2500, 2501, rng), 4000, stream(1, 0))
    assert ks_distance(emp, laws.half_normal_cdf) < 0.04
    with pytest.raises(ValidationError):
        mc_functional_distribution(lambda w: 0.0, lambda rng: None, 10, stream(0, 0))


def test_walk_stay_probability_brute_force():
    for n in range(1, 13):
        for a in (1, 2, 3):
            count = 0
            for steps in itertools.product((-1, 1), repeat=n):
                path = np.cumsum(steps)
                count += np.all(np.abs(path) < a)
            assert walk_stay_probability(a, n) == pytest.approx(count / 2**n, abs=1e-15)


def test_walk_stay_probability_near_tau_inf():
    assert abs(walk_stay_probability(100, 10**4) - laws.tau_infinity(1.0)) < 1e-4
