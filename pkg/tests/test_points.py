import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st_
from scipy import stats

from obstruction_walks.errors import CapacityError, ValidationError
from obstruction_walks.montecarlo import stream
from obstruction_walks.points import (
    RationalPoint, enumerate_coords, enumerate_points, klapaklapa_point, sample_coords,
    sample_point)


def test_enumerate_examples():
    pts = enumerate_points(1)
    assert {(p.s, p.t) for p in pts} == {(0, 1), (1, 0), (1, 1), (1, -1)}
    assert len(enumerate_points(2)) == 8
    assert {(p.s, p.t) for p in enumerate_points(2)} - {(p.s, p.t) for p in pts} == \
        {(1, 2), (1, -2), (2, 1), (2, -1)}
    with pytest.raises(ValidationError):
        enumerate_points(0)
    with pytest.raises(CapacityError):
        enumerate_points(10**5)


def test_enumerate_count_ratio():
    s, _ = enumerate_coords(1000)
    assert 1.20 <= len(s) / 1000**2 <= 1.23


def test_enumerate_against_brute_force():
    for B in range(1, 25):
        brute = set()
        for a in range(-B, B + 1):
            for b in range(-B, B + 1):
                if math.gcd(a, b) == 1:
                    brute.add((RationalPoint.from_pair(a, b).s, RationalPoint.from_pair(a, b).t))
        s, t = enumerate_coords(B)
        got = list(zip(s.tolist(), t.tolist()))
        assert len(got) == len(set(got))
        assert set(got) == brute


def test_enumerate_nested_and_ordered():
    prev = set()
    for B in range(1, 40):
        s, t = enumerate_coords(B)
        cur = set(zip(s.tolist(), t.tolist()))
        assert prev <= cur
        prev = cur
        h = np.maximum(np.abs(s), np.abs(t))
        assert np.all(np.diff(h) >= 0)


def test_sample_uniform_on_four_points():
    s, t = sample_coords(1, 10**5, stream(7, 0))
    counts = Counter(zip(s.tolist(), t.tolist()))
    assert set(counts) == {(0, 1), (1, 0), (1, 1), (1, -1)}
    for k in counts.values():
        assert abs(k / 10**5 - 0.25) < 0.01
    assert stats.chisquare(list(counts.values())).pvalue > 1e-4


def test_sample_uniform_chi_square_B10():
    s, t = sample_coords(10, 2 * 10**5, stream(3, 0))
    counts = Counter(zip(s.tolist(), t.tolist()))
    assert len(counts) == len(enumerate_points(10))
    assert stats.chisquare(list(counts.values())).pvalue > 1e-4


def test_sample_deterministic():
    a = sample_point(10, np.random.default_rng(42))
    b = sample_point(10, np.random.default_rng(42))
    assert a == b


def test_sample_large_B_postconditions():
    s, t = sample_coords(10**6, 10**5, stream(1, 0))
    assert len(s) == 10**5
    assert np.all(np.gcd(s, t) == 1)
    assert np.all(np.maximum(np.abs(s), np.abs(t)) <= 10**6)
    assert np.all((s > 0) | ((s == 0) & (t > 0)))
    x = sample_point(10**6, stream(2, 0))
    assert math.gcd(x.s, x.t) == 1 and x.height <= 10**6


@settings(max_examples=300, deadline=None)
@given(st_.integers(-10**30, 10**30), st_.integers(-10**30, 10**30))
def test_normalization_canonical(a, b):
    if a == 0 and b == 0:
        with pytest.raises(ValidationError):
            RationalPoint.from_pair(a, b)
        return
    x = RationalPoint.from_pair(a, b)
    assert x == RationalPoint.from_pair(-a, -b)
    assert x == RationalPoint.from_pair(3 * a, 3 * b)
    assert math.gcd(x.s, x.t) == 1 and x.height >= 1
    assert (x.s if x.s else x.t) > 0
    assert RationalPoint.parse(str(x)) == x


def test_point_validation():
    for bad in [(0, 0), (2, 4), (-1, 2)]:
        with pytest.raises(ValidationError):
            RationalPoint(*bad)
    with pytest.raises(ValidationError):
        RationalPoint.parse("abc")


def test_klapaklapa_examples(table):
    assert klapaklapa_point(1, table) == RationalPoint(1, 3)
    assert klapaklapa_point(2, table) == RationalPoint(1, 21)
    assert klapaklapa_point(3, table) == RationalPoint(1, 231)
    with pytest.raises(ValidationError):
        klapaklapa_point(0, table)


def test_klapaklapa_128_bit_limit(table):
    # 21 is the largest N whose product stays below 2^127
    assert klapaklapa_point(21, table).t < 2**127
    with pytest.raises(CapacityError):
        klapaklapa_point(22, table)
