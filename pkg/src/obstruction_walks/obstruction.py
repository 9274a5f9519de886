"""Obstructing primes of a fibre and the counting functions built on them."""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass

import numpy as np

from .arith import PrimeTable, factorize, hilbert_symbol_neg_one
from .errors import ConsistencyError, DegenerateFibreError
from .fibration import ConicBundleFamily, SigmaTable
from .points import RationalPoint


@dataclass(frozen=True)
class ObstructionProfile:
    point: RationalPoint
    c_value: int
    obstructing: tuple[int, ...]
    support: tuple[int, ...] = ()

    @property
    def omega(self) -> int:
        return len(self.obstructing)

    def to_json(self) -> str:
        return json.dumps({"point": str(self.point), "c": self.c_value,
                           "obstructing": list(self.obstructing)})

    @classmethod
    def from_json(cls, text: str) -> "ObstructionProfile":
        d = json.loads(text)
        return cls(RationalPoint.parse(d["point"]), int(d["c"]), tuple(d["obstructing"]))


def support_of_values(values, table: PrimeTable) -> list[int]:
    """Primes dividing 2 * prod(values)."""
    primes = {2}
    spf, bound = table.spf, table.spf_bound
    for v in values:
        m = abs(v)
        if m > bound:
            primes.update(factorize(m, table).primes)
            continue
        while m > 1:
            p = int(spf[m])
            primes.add(p)
            while m % p == 0:
                m //= p
    return sorted(primes)


def obstructing_primes(family: ConicBundleFamily, s: int, t: int,
                       table: PrimeTable) -> tuple[int, tuple[int, ...], list[int]]:
    """(c, obstructing primes, support) for the point (s:t); hot path of
    :func:`profile` without building a RationalPoint."""
    values = family.form_values(s, t)
    c = math.prod(values)
    if c == 0:
        raise DegenerateFibreError(f"fibre over ({s}:{t}) is singular")
    support = support_of_values(values, table)
    bad = tuple(p for p in support if hilbert_symbol_neg_one(c, p) == -1)
    if (len(bad) + (c < 0)) % 2:
        raise ConsistencyError(f"reciprocity parity fails at ({s}:{t}): c={c}, {bad}")
    return c, bad, support


def profile(family: ConicBundleFamily, x: RationalPoint, table: PrimeTable) -> ObstructionProfile:
    c, bad, support = obstructing_primes(family, x.s, x.t, table)
    return ObstructionProfile(x, c, bad, tuple(support))


def omega_truncated(prof, T: float) -> int:
    """Number of obstructing primes <= T."""
    return bisect.bisect_right(prof.obstructing, T)


def p_j(prof, j: int):
    """j-th smallest obstructing prime; -inf for j = 0, +inf past omega."""
    if j < 0:
        raise ValueError("j must be >= 0")
    if j == 0:
        return -math.inf
    if j > len(prof.obstructing):
        return math.inf
    return prof.obstructing[j - 1]


def _segments(obstructing, sigma: SigmaTable, n_primes: int):
    """Yield (k, lo, hi): table indices lo..hi-1 have omega(x, p) = k.

    Only indices < n_primes are covered; the k = 0 segment is skipped.
    """
    idx = [int(np.searchsorted(sigma.primes, q)) for q in obstructing]
    for k, lo in enumerate(idx, start=1):
        if lo >= n_primes:
            break
        hi = idx[k] if k < len(idx) else n_primes
        yield k, lo, min(hi, n_primes)


def c_hat_ranges(prof, sigma: SigmaTable, P: float) -> list[tuple[int, int]]:
    """Index ranges [lo, hi) of table primes p <= P in C_f(x), i.e. with
    omega(x, p) > S(p)."""
    sigma.require(P)
    n = sigma.count_le(P)
    S = sigma.S
    out = []
    for k, lo, hi in _segments(prof.obstructing, sigma, n):
        # S is nondecreasing, so {S < k} is a prefix of the segment
        end = min(hi, int(np.searchsorted(S[lo:hi], k, side="left")) + lo)
        if end > lo:
            out.append((lo, end))
    return out


def c_hat_value(prof, sigma: SigmaTable, P: float) -> float:
    S = sigma.S
    total = 0.0
    for lo, hi in c_hat_ranges(prof, sigma, P):
        total += S[hi - 1] - (S[lo - 1] if lo else 0.0)
    return float(total)


def c_hat(prof, sigma: SigmaTable, P: float) -> tuple[float, np.ndarray]:
    """Sum of sigma_p over C_f(x) restricted to p <= P, and that set."""
    ranges = c_hat_ranges(prof, sigma, P)
    S = sigma.S
    value = sum(S[hi - 1] - (S[lo - 1] if lo else 0.0) for lo, hi in ranges)
    members = (np.concatenate([sigma.primes[lo:hi] for lo, hi in ranges])
               if ranges else np.zeros(0, dtype=np.int64))
    return float(value), members
