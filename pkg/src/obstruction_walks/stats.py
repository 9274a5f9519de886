"""Empirical distributions, KS distances and standardized moments."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class EmpiricalDistribution:
    values: np.ndarray                # sorted
    weights: np.ndarray | None = None  # aligned with values; None = uniform

    @classmethod
    def from_values(cls, values, weights=None) -> "EmpiricalDistribution":
        v = np.asarray(values, dtype=float)
        if weights is None:
            return cls(np.sort(v))
        w = np.asarray(weights, dtype=float)
        order = np.argsort(v, kind="stable")
        return cls(v[order], w[order])

    @property
    def n(self) -> int:
        return len(self.values)

    def _cum(self) -> np.ndarray:
        if self.weights is None:
            return np.arange(1, self.n + 1) / self.n
        c = np.cumsum(self.weights)
        return c / c[-1]

    def cdf(self, x) -> np.ndarray:
        """Right-continuous ECDF."""
        x = np.asarray(x, dtype=float)
        if self.weights is None:
            return np.searchsorted(self.values, x, side="right") / self.n
        c = np.concatenate([[0.0], self._cum()])
        return c[np.searchsorted(self.values, x, side="right")]

    def merge(self, other: "EmpiricalDistribution") -> "EmpiricalDistribution":
        if (self.weights is None) != (other.weights is None):
            raise ValueError("cannot merge weighted with unweighted ECDF")
        v = np.concatenate([self.values, other.values])
        if self.weights is None:
            return EmpiricalDistribution(np.sort(v, kind="stable"))
        w = np.concatenate([self.weights, other.weights])
        order = np.lexsort((w, v))
        return EmpiricalDistribution(v[order], w[order])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "cumulative_probability"])
        xs = np.unique(self.values)
        for x, F in zip(xs, self.cdf(xs)):
            w.writerow([repr(float(x)), repr(float(F))])
        return buf.getvalue()


def _as_emp(sample) -> EmpiricalDistribution:
    if isinstance(sample, EmpiricalDistribution):
        return sample
    return EmpiricalDistribution.from_values(sample)


def ks_distance(emp, cdf: Callable) -> float:
    """sup_x |F_n(x) - F(x)|, checking both sides of every atom.

    The left limits F_n(x-) and F(x-) are compared with each other (F(x-)
    read just below x), so a cdf with atoms is handled too.
    """
    emp = _as_emp(emp)
    xs = np.unique(emp.values)
    upper = emp.cdf(xs)
    lower = np.concatenate([[0.0], upper[:-1]])
    F = np.asarray(cdf(xs), dtype=float)
    F_left = np.asarray(cdf(np.nextafter(xs, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(upper - F)), np.max(np.abs(lower - F_left))))


def ks_two_sample(a, b) -> float:
    a, b = _as_emp(a), _as_emp(b)
    xs = np.union1d(a.values, b.values)
    return float(np.max(np.abs(a.cdf(xs) - b.cdf(xs))))


def empirical_moments(emp, r_max: int = 4, mean: float | None = None,
                      scale: float | None = None) -> list[float]:
    """Moments r = 1..r_max of (X - mean)/scale.

    ``mean`` and ``scale`` default to the sample values; experiments pass
    the theoretical ones.
    """
    if r_max > 8:
        raise ValueError("r_max must be <= 8")
    emp = _as_emp(emp)
    x = emp.values
    w = np.full(len(x), 1.0 / len(x)) if emp.weights is None else emp.weights / emp.weights.sum()
    mu = float(np.sum(w * x)) if mean is None else mean
    sd = float(np.sqrt(np.sum(w * (x - mu) ** 2))) if scale is None else scale
    z = (x - mu) / sd
    return [float(np.sum(w * z**r)) for r in range(1, r_max + 1)]


def gaussian_moment(r: int) -> float:
    if r % 2:
        return 0.0
    out = 1.0
    for k in range(r - 1, 0, -2):
        out *= k
    return out
